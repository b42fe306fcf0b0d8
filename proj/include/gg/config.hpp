#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "gg/corpus.hpp"
#include "gg/embedding.hpp"
#include "gg/http.hpp"
#include "gg/pipeline.hpp"

namespace gg {

enum class LlmBackendKind { Remote, Mock };

struct LlmConfig {
  LlmBackendKind backend = LlmBackendKind::Remote;
  std::string model = "llama-3-70b-instruct";
  std::string base_url;
  std::string api_key;
  std::filesystem::path transcript;  // Mock only
  http::RetryPolicy retry;
  std::size_t max_in_flight = 4;
};

/// Every knob the CLI exposes. Layering is file < GG_* environment < flags;
/// relative paths in a file resolve against the file's directory.
struct Config {
  corpus::FieldMap fields;
  corpus::ChunkParams chunk;
  corpus::Strictness strictness = corpus::Strictness::Abort;
  embedding::EmbedderConfig embedder;
  LlmConfig llm;
  pipeline::PipelineConfig pipeline;
  std::size_t workers = 1;
  std::filesystem::path prompt_dir;

  /// Corpus, chunking and embedding settings. Throws ConfigError naming the
  /// first violated constraint.
  void validate() const;
  /// validate() plus pipeline, prompt directory and LLM settings, including
  /// paths that must exist.
  void validate_for_eval() const;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string& name)>;

/// Reads the real process environment.
EnvLookup process_env();

/// Built-in defaults. `prompt_dir` points at the prompts shipped with the
/// source tree.
Config default_config();

/// Overlays a TOML file onto `base`. Unknown tables or keys are errors.
Config apply_config_file(Config base, const std::filesystem::path& file);

/// Overlays GG_* variables: GG_BASE_URL, GG_API_KEY, GG_EMBED_BASE_URL,
/// GG_EMBED_BACKEND, GG_EMBED_MODEL, GG_EMBED_DIM, GG_TRUNCATE_DIM,
/// GG_LLM_BACKEND, GG_LLM_MODEL, GG_QUERIES, GG_K, GG_WORKERS, GG_PROMPT_DIR.
Config apply_env(Config base, const EnvLookup& env);

/// default_config() -> optional file -> environment.
Config load_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env);

}  // namespace gg
