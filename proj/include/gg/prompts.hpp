#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace gg::prompts {

/// A prompt file with `{name}` placeholders. Only the names listed at load
/// time are substituted; any other brace text is literal.
class Template {
 public:
  Template() = default;
  /// Throws ConfigError if the text has a `{identifier}` placeholder outside
  /// `allowed`.
  Template(std::string name, std::string text, std::vector<std::string> allowed);

  /// Single pass: substituted values are never re-scanned. Throws ConfigError
  /// if a placeholder present in the template has no value.
  std::string render(const std::map<std::string, std::string>& values) const;

  const std::string& name() const { return name_; }
  const std::string& text() const { return text_; }

 private:
  std::string name_;
  std::string text_;
  std::vector<std::string> allowed_;
};

struct AgentPrompt {
  Template system;
  Template user;
};

/// Prompt files for every agent, loaded from one directory:
///   extractor.system.txt  extractor.user.txt   ({specialty}, {note})
///   query.system.txt      query.user.txt       (+ {findings}, {n_queries})
///   scorer.system.txt     scorer.user.txt      ({findings}, {evidence})
///   reprompt.user.txt                          ({error})
struct PromptSet {
  AgentPrompt extractor;
  AgentPrompt query;
  AgentPrompt scorer;
  Template reprompt;
  std::string directory;

  static PromptSet load(const std::filesystem::path& dir);
};

}  // namespace gg::prompts
