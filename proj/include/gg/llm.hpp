#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gg/http.hpp"

namespace gg::llm {

enum class Role { System, User, Assistant };

std::string_view role_name(Role role);

struct ChatMessage {
  Role role = Role::User;
  std::string content;
};

struct LlmRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  std::size_t max_tokens = 2048;
  std::string tag;  // agent name; routes mock responses

  /// Throws ConfigError: needs a User message, non-empty System/User content,
  /// temperature >= 0, and max_tokens > 0.
  void validate() const;
};

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual std::string complete(const LlmRequest& request) = 0;
  /// False for backends that must be driven from a single thread.
  virtual bool supports_concurrency() const = 0;
  virtual std::string model() const = 0;
};

/// Validates the request and forwards it to the backend.
std::string complete(const LlmRequest& request, LlmBackend& backend);

struct RemoteOptions {
  std::string base_url;
  std::string api_key;
  std::string model;
  http::RetryPolicy retry;
  std::size_t max_in_flight = 4;
  std::chrono::milliseconds timeout{120000};
};

/// Speaks POST {base_url}/chat/completions and reads choices[0].message.content.
class RemoteLlm final : public LlmBackend {
 public:
  explicit RemoteLlm(RemoteOptions options);

  std::string complete(const LlmRequest& request) override;
  bool supports_concurrency() const override { return true; }
  std::string model() const override { return model_; }

  std::size_t attempts() const { return client_.attempts(); }
  std::size_t retries() const { return client_.retries(); }

  static nlohmann::json request_body(const LlmRequest& request, const std::string& model);

 private:
  std::string model_;
  http::JsonClient client_;
};

struct TranscriptEntry {
  std::string tag;
  std::string response;
};

/// Reads a JSONL transcript of {"tag": ..., "response": ...} lines.
std::vector<TranscriptEntry> load_transcript(const std::filesystem::path& path);

/// Replays scripted responses strictly in order. A request whose tag differs
/// from the next entry's tag, or any request after the last entry, throws
/// MockTranscriptError.
class MockLlm final : public LlmBackend {
 public:
  explicit MockLlm(std::vector<TranscriptEntry> transcript, std::string model = "mock");

  std::string complete(const LlmRequest& request) override;
  bool supports_concurrency() const override { return false; }
  std::string model() const override { return model_; }

  std::size_t consumed() const;
  std::size_t remaining() const;
  /// Every request seen so far, including ones that failed the tag check.
  std::vector<LlmRequest> requests() const;

 private:
  mutable std::mutex mutex_;
  std::vector<TranscriptEntry> transcript_;
  std::size_t next_ = 0;
  std::vector<LlmRequest> requests_;
  std::string model_;
};

/// First balanced JSON object or array in `text` that parses. Code fences
/// and surrounding prose are skipped. Throws StructuredOutputError.
nlohmann::json extract_json_block(std::string_view text);

}  // namespace gg::llm
