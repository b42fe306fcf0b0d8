#include "gg/prompts.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "gg/errors.hpp"

namespace gg::prompts {
namespace {

bool is_ident_char(char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_'; }

// Placeholder name at `text[i] == '{'`, or empty if this brace isn't one.
std::string_view placeholder_at(std::string_view text, std::size_t i) {
  std::size_t j = i + 1;
  while (j < text.size() && is_ident_char(text[j])) ++j;
  if (j == i + 1 || j >= text.size() || text[j] != '}') return {};
  return text.substr(i + 1, j - i - 1);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("missing prompt template " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Template::Template(std::string name, std::string text, std::vector<std::string> allowed)
    : name_(std::move(name)), text_(std::move(text)), allowed_(std::move(allowed)) {
  for (std::size_t i = 0; i < text_.size(); ++i) {
    if (text_[i] != '{') continue;
    const auto ph = placeholder_at(text_, i);
    if (ph.empty()) continue;
    if (std::find(allowed_.begin(), allowed_.end(), ph) == allowed_.end()) {
      throw ConfigError("prompt template " + name_ + " uses unknown placeholder {" + std::string(ph) + "}");
    }
  }
}

std::string Template::render(const std::map<std::string, std::string>& values) const {
  std::string out;
  out.reserve(text_.size());
  for (std::size_t i = 0; i < text_.size(); ++i) {
    if (text_[i] == '{') {
      const auto ph = placeholder_at(text_, i);
      if (!ph.empty()) {
        auto it = values.find(std::string(ph));
        if (it == values.end()) {
          throw ConfigError("no value for placeholder {" + std::string(ph) + "} in " + name_);
        }
        out += it->second;
        i += ph.size() + 1;
        continue;
      }
    }
    out.push_back(text_[i]);
  }
  return out;
}

PromptSet PromptSet::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("prompt directory not found: " + dir.string());
  auto load = [&](const std::string& file, std::vector<std::string> allowed) {
    return Template(file, read_file(dir / file), std::move(allowed));
  };
  PromptSet set;
  set.directory = dir.string();
  set.extractor = {load("extractor.system.txt", {"specialty"}), load("extractor.user.txt", {"specialty", "note"})};
  set.query = {load("query.system.txt", {"n_queries"}),
               load("query.user.txt", {"specialty", "note", "findings", "n_queries"})};
  set.scorer = {load("scorer.system.txt", {}), load("scorer.user.txt", {"findings", "evidence"})};
  set.reprompt = load("reprompt.user.txt", {"error"});
  return set;
}

}  // namespace gg::prompts
