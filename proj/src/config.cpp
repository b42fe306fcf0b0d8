#include "gg/config.hpp"

#include <charconv>
#include <cstdlib>
#include <set>

#include <toml++/toml.hpp>

#include "gg/text.hpp"

#ifndef GG_DEFAULT_PROMPT_DIR
#define GG_DEFAULT_PROMPT_DIR "prompts/v1"
#endif

namespace gg {
namespace {

namespace fs = std::filesystem;

class Section {
 public:
  Section(const toml::table& root, std::string name) : name_(std::move(name)) {
    if (const auto* node = root.get(name_)) {
      table_ = node->as_table();
      if (!table_) throw ConfigError("[" + name_ + "] must be a table");
    }
  }

  void check_known(const std::set<std::string>& keys) const {
    if (!table_) return;
    for (const auto& [key, value] : *table_) {
      if (!keys.count(std::string(key.str()))) {
        throw ConfigError("unknown config key [" + name_ + "] " + std::string(key.str()));
      }
    }
  }

  void string(const char* key, std::string& out) const {
    if (const auto* n = find(key)) {
      const auto v = n->value<std::string>();
      if (!v || !n->is_string()) throw type_error(key, "a string");
      out = *v;
    }
  }

  void path(const char* key, const fs::path& base, fs::path& out) const {
    std::string s;
    string(key, s);
    if (!s.empty()) out = fs::path(s).is_absolute() ? fs::path(s) : base / s;
  }

  void size(const char* key, std::size_t& out) const {
    if (const auto* n = find(key)) {
      const auto v = n->value<std::int64_t>();
      if (!v || !n->is_integer() || *v < 0) throw type_error(key, "a non-negative integer");
      out = static_cast<std::size_t>(*v);
    }
  }

  void integer(const char* key, int& out) const {
    std::size_t v = static_cast<std::size_t>(out);
    size(key, v);
    out = static_cast<int>(v);
  }

  void real(const char* key, double& out) const {
    if (const auto* n = find(key)) {
      const auto v = n->value<double>();
      if (!v || !(n->is_floating_point() || n->is_integer())) throw type_error(key, "a number");
      out = *v;
    }
  }

  void boolean(const char* key, bool& out) const {
    if (const auto* n = find(key)) {
      const auto v = n->value<bool>();
      if (!v || !n->is_boolean()) throw type_error(key, "a boolean");
      out = *v;
    }
  }

 private:
  const toml::node* find(const char* key) const { return table_ ? table_->get(key) : nullptr; }

  ConfigError type_error(const char* key, const char* expected) const {
    return ConfigError("config key [" + name_ + "] " + key + " must be " + expected);
  }

  std::string name_;
  const toml::table* table_ = nullptr;
};

std::size_t parse_count(const std::string& name, const std::string& value) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw ConfigError(name + " must be a non-negative integer, got \"" + value + "\"");
  }
  return out;
}

LlmBackendKind parse_llm_backend(const std::string& name) {
  const auto lower = text::ascii_lower(name);
  if (lower == "remote") return LlmBackendKind::Remote;
  if (lower == "mock") return LlmBackendKind::Mock;
  throw ConfigError("unknown LLM backend \"" + name + "\" (expected remote or mock)");
}

pipeline::QueryMode parse_query_mode(const std::string& name) {
  const auto lower = text::ascii_lower(name);
  if (lower == "fixed") return pipeline::QueryMode::Fixed;
  if (lower == "per_diagnosis" || lower == "per-diagnosis") return pipeline::QueryMode::PerDiagnosis;
  throw ConfigError("unknown query mode \"" + name + "\" (expected fixed or per_diagnosis)");
}

}  // namespace

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str()); v && *v) return std::string(v);
    return std::nullopt;
  };
}

Config default_config() {
  Config c;
  c.prompt_dir = GG_DEFAULT_PROMPT_DIR;
  return c;
}

Config apply_config_file(Config c, const fs::path& file) {
  toml::table root;
  try {
    root = toml::parse_file(file.string());
  } catch (const toml::parse_error& e) {
    const auto& where = e.source().begin;
    throw ConfigError(file.string() + ":" + std::to_string(where.line) + ":" + std::to_string(where.column) + ": " +
                      std::string(e.description()));
  }
  for (const auto& [key, value] : root) {
    static const std::set<std::string> sections{"corpus", "embedding", "llm", "pipeline"};
    if (!sections.count(std::string(key.str()))) throw ConfigError("unknown config section [" + std::string(key.str()) + "]");
  }
  const fs::path base = file.parent_path();

  const Section corpus(root, "corpus");
  corpus.check_known({"id_key", "source_key", "title_key", "text_key", "chunk_size", "overlap", "strict"});
  corpus.string("id_key", c.fields.id);
  corpus.string("source_key", c.fields.source);
  corpus.string("title_key", c.fields.title);
  corpus.string("text_key", c.fields.text);
  corpus.size("chunk_size", c.chunk.chunk_size);
  corpus.size("overlap", c.chunk.overlap);
  bool strict = c.strictness == corpus::Strictness::Abort;
  corpus.boolean("strict", strict);
  c.strictness = strict ? corpus::Strictness::Abort : corpus::Strictness::Skip;

  const Section emb(root, "embedding");
  emb.check_known({"backend", "model", "full_dim", "truncate_dim", "base_url", "batch_size", "max_in_flight"});
  std::string backend;
  emb.string("backend", backend);
  if (!backend.empty()) c.embedder.backend = embedding::parse_backend(backend);
  emb.string("model", c.embedder.model_name);
  emb.size("full_dim", c.embedder.full_dim);
  emb.size("truncate_dim", c.embedder.truncate_dim);
  emb.string("base_url", c.embedder.remote.base_url);
  emb.size("batch_size", c.embedder.remote.batch_size);
  emb.size("max_in_flight", c.embedder.remote.max_in_flight);

  const Section llm(root, "llm");
  llm.check_known({"backend", "model", "base_url", "transcript", "max_in_flight", "temperature", "max_tokens",
                   "retry_attempts", "retry_initial_ms", "retry_backoff"});
  std::string llm_backend;
  llm.string("backend", llm_backend);
  if (!llm_backend.empty()) c.llm.backend = parse_llm_backend(llm_backend);
  llm.string("model", c.llm.model);
  llm.string("base_url", c.llm.base_url);
  llm.path("transcript", base, c.llm.transcript);
  llm.size("max_in_flight", c.llm.max_in_flight);
  llm.real("temperature", c.pipeline.temperature);
  llm.size("max_tokens", c.pipeline.max_tokens);
  llm.integer("retry_attempts", c.llm.retry.max_attempts);
  std::size_t initial_ms = static_cast<std::size_t>(c.llm.retry.initial_backoff.count());
  llm.size("retry_initial_ms", initial_ms);
  c.llm.retry.initial_backoff = std::chrono::milliseconds(initial_ms);
  llm.real("retry_backoff", c.llm.retry.backoff_factor);
  c.embedder.remote.retry = c.llm.retry;

  const Section pipe(root, "pipeline");
  pipe.check_known({"n_queries", "query_mode", "k", "workers", "prompt_dir"});
  pipe.size("n_queries", c.pipeline.n_queries);
  std::string mode;
  pipe.string("query_mode", mode);
  if (!mode.empty()) c.pipeline.query_mode = parse_query_mode(mode);
  pipe.size("k", c.pipeline.k);
  pipe.size("workers", c.workers);
  pipe.path("prompt_dir", base, c.prompt_dir);
  return c;
}

Config apply_env(Config c, const EnvLookup& env) {
  if (auto v = env("GG_BASE_URL")) {
    c.llm.base_url = *v;
    c.embedder.remote.base_url = *v;
  }
  if (auto v = env("GG_EMBED_BASE_URL")) c.embedder.remote.base_url = *v;
  if (auto v = env("GG_API_KEY")) {
    c.llm.api_key = *v;
    c.embedder.remote.api_key = *v;
  }
  if (auto v = env("GG_EMBED_BACKEND")) c.embedder.backend = embedding::parse_backend(*v);
  if (auto v = env("GG_EMBED_MODEL")) c.embedder.model_name = *v;
  if (auto v = env("GG_EMBED_DIM")) c.embedder.full_dim = parse_count("GG_EMBED_DIM", *v);
  if (auto v = env("GG_TRUNCATE_DIM")) c.embedder.truncate_dim = parse_count("GG_TRUNCATE_DIM", *v);
  if (auto v = env("GG_LLM_BACKEND")) c.llm.backend = parse_llm_backend(*v);
  if (auto v = env("GG_LLM_MODEL")) c.llm.model = *v;
  if (auto v = env("GG_QUERIES")) c.pipeline.n_queries = parse_count("GG_QUERIES", *v);
  if (auto v = env("GG_K")) c.pipeline.k = parse_count("GG_K", *v);
  if (auto v = env("GG_WORKERS")) c.workers = parse_count("GG_WORKERS", *v);
  if (auto v = env("GG_PROMPT_DIR")) c.prompt_dir = *v;
  return c;
}

Config load_config(const std::optional<fs::path>& file, const EnvLookup& env) {
  Config c = default_config();
  if (file) {
    if (!fs::exists(*file)) throw ConfigError("config file not found: " + file->string());
    c = apply_config_file(std::move(c), *file);
  }
  return apply_env(std::move(c), env);
}

void Config::validate() const {
  chunk.validate();
  embedder.validate();
  if (workers == 0) throw ConfigError("workers must be at least 1");
  if (fields.id.empty() || fields.source.empty() || fields.text.empty()) {
    throw ConfigError("corpus field names must not be empty");
  }
}

void Config::validate_for_eval() const {
  validate();
  pipeline.validate();
  if (!fs::is_directory(prompt_dir)) throw ConfigError("prompt directory not found: " + prompt_dir.string());
  if (llm.backend == LlmBackendKind::Mock) {
    if (llm.transcript.empty()) throw ConfigError("mock LLM backend needs a transcript (--mock <file>)");
    if (!fs::exists(llm.transcript)) throw ConfigError("mock transcript not found: " + llm.transcript.string());
    if (workers > 1) throw ConfigError("the mock LLM backend is sequential; --workers must be 1");
  } else {
    if (llm.base_url.empty()) throw ConfigError("remote LLM backend needs a base URL (GG_BASE_URL or [llm] base_url)");
    http::split_base_url(llm.base_url);
    if (llm.retry.max_attempts < 1) throw ConfigError("llm retry_attempts must be at least 1");
  }
}

}  // namespace gg
