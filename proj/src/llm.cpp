#include "gg/llm.hpp"

#include <fstream>
#include <optional>

#include "gg/errors.hpp"
#include "gg/text.hpp"

namespace gg::llm {
namespace {

// End offset (exclusive) of the bracketed value starting at `start`, or
// nullopt if the brackets never balance or close with the wrong kind.
std::optional<std::size_t> balanced_end(std::string_view text, std::size_t start) {
  std::string closers;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    switch (c) {
      case '"': in_string = true; break;
      case '{': closers.push_back('}'); break;
      case '[': closers.push_back(']'); break;
      case '}':
      case ']':
        if (closers.empty() || closers.back() != c) return std::nullopt;
        closers.pop_back();
        if (closers.empty()) return i + 1;
        break;
      default: break;
    }
  }
  return std::nullopt;
}

}  // namespace

std::string_view role_name(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

void LlmRequest::validate() const {
  bool has_user = false;
  for (const auto& m : messages) {
    if (m.role == Role::User) has_user = true;
    if (m.role != Role::Assistant && text::trim(m.content).empty()) {
      throw ConfigError("LLM request \"" + tag + "\" has an empty " + std::string(role_name(m.role)) + " message");
    }
  }
  if (!has_user) throw ConfigError("LLM request \"" + tag + "\" has no user message");
  if (!(temperature >= 0.0)) throw ConfigError("temperature must be non-negative");
  if (max_tokens == 0) throw ConfigError("max_tokens must be positive");
}

std::string complete(const LlmRequest& request, LlmBackend& backend) {
  request.validate();
  return backend.complete(request);
}

RemoteLlm::RemoteLlm(RemoteOptions options)
    : model_(options.model),
      client_(http::ClientOptions{options.base_url, options.api_key, options.retry, options.max_in_flight,
                                  options.timeout}) {
  if (model_.empty()) throw ConfigError("remote LLM needs a model name");
}

nlohmann::json RemoteLlm::request_body(const LlmRequest& request, const std::string& model) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", role_name(m.role)}, {"content", m.content}});
  }
  return {{"model", model},
          {"messages", std::move(messages)},
          {"temperature", request.temperature},
          {"max_tokens", request.max_tokens}};
}

std::string RemoteLlm::complete(const LlmRequest& request) {
  const auto reply = client_.post("/chat/completions", request_body(request, model_));
  try {
    const auto& content = reply.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw StructuredOutputError("choices[0].message.content is not a string");
    return content.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(200, false, std::string("malformed chat completion reply: ") + e.what());
  }
}

std::vector<TranscriptEntry> load_transcript(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open mock transcript " + path.string());
  std::vector<TranscriptEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("tag").get<std::string>(), j.at("response").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw RecordError(line_no, path.string() + ": " + e.what());
    }
  }
  return out;
}

MockLlm::MockLlm(std::vector<TranscriptEntry> transcript, std::string model)
    : transcript_(std::move(transcript)), model_(std::move(model)) {}

std::string MockLlm::complete(const LlmRequest& request) {
  std::lock_guard lock(mutex_);
  requests_.push_back(request);
  if (next_ >= transcript_.size()) {
    throw MockTranscriptError("mock transcript exhausted after " + std::to_string(transcript_.size()) +
                              " entries; unexpected request tagged \"" + request.tag + "\"");
  }
  const auto& entry = transcript_[next_];
  if (entry.tag != request.tag) {
    throw MockTranscriptError("mock transcript entry " + std::to_string(next_ + 1) + " expects tag \"" +
                              entry.tag + "\" but the request is tagged \"" + request.tag + "\"");
  }
  ++next_;
  return entry.response;
}

std::size_t MockLlm::consumed() const {
  std::lock_guard lock(mutex_);
  return next_;
}

std::size_t MockLlm::remaining() const {
  std::lock_guard lock(mutex_);
  return transcript_.size() - next_;
}

std::vector<LlmRequest> MockLlm::requests() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

nlohmann::json extract_json_block(std::string_view text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '{' && text[i] != '[') continue;
    const auto end = balanced_end(text, i);
    if (!end) continue;
    auto parsed = nlohmann::json::parse(text.substr(i, *end - i), nullptr, /*allow_exceptions=*/false);
    if (!parsed.is_discarded()) return parsed;
  }
  throw StructuredOutputError("no parseable JSON object or array in model output");
}

}  // namespace gg::llm
