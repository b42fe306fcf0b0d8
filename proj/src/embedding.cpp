#include "gg/embedding.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "gg/corpus.hpp"
#include "gg/hash.hpp"
#include "gg/text.hpp"

namespace gg::embedding {
namespace {

class HashBackend final : public EmbeddingBackend {
 public:
  explicit HashBackend(std::size_t dim) : dim_(dim) {}

  std::vector<EmbeddingVector> embed_raw(std::span<const std::string> texts) override {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(deterministic_embed(t, dim_));
    return out;
  }

 private:
  std::size_t dim_;
};

class RemoteBackend final : public EmbeddingBackend {
 public:
  explicit RemoteBackend(const EmbedderConfig& cfg)
      : model_(cfg.model_name),
        batch_size_(std::max<std::size_t>(1, cfg.remote.batch_size)),
        workers_(std::max<std::size_t>(1, cfg.remote.max_in_flight)),
        client_(http::ClientOptions{cfg.remote.base_url, cfg.remote.api_key, cfg.remote.retry,
                                    cfg.remote.max_in_flight}) {}

  std::vector<EmbeddingVector> embed_raw(std::span<const std::string> texts) override {
    const std::size_t batches = (texts.size() + batch_size_ - 1) / batch_size_;
    std::vector<EmbeddingVector> out(texts.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto work = [&] {
      for (std::size_t b = next++; b < batches; b = next++) {
        {
          std::lock_guard lock(failure_mutex);
          if (failure) return;
        }
        try {
          const std::size_t begin = b * batch_size_;
          const std::size_t end = std::min(begin + batch_size_, texts.size());
          auto vectors = embed_batch(texts.subspan(begin, end - begin));
          std::move(vectors.begin(), vectors.end(), out.begin() + static_cast<std::ptrdiff_t>(begin));
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    };

    const std::size_t n_threads = std::min(workers_, batches);
    if (n_threads <= 1) {
      work();
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(work);
    }
    if (failure) std::rethrow_exception(failure);
    return out;
  }

 private:
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) {
    nlohmann::json body{{"model", model_}, {"input", texts}};
    const auto reply = client_.post("/embeddings", body);
    const auto data = reply.find("data");
    if (data == reply.end() || !data->is_array()) {
      throw EmbeddingError("embedding response has no \"data\" array");
    }
    if (data->size() != texts.size()) {
      throw EmbeddingError("embedding response has " + std::to_string(data->size()) + " items for " +
                           std::to_string(texts.size()) + " inputs");
    }
    std::vector<EmbeddingVector> out(texts.size());
    std::vector<bool> filled(texts.size(), false);
    for (const auto& item : *data) {
      const auto index = item.value("index", static_cast<std::size_t>(-1));
      if (index >= texts.size() || filled[index]) {
        throw EmbeddingError("embedding response has a missing, duplicate, or out-of-range index");
      }
      const auto& values = item.at("embedding");
      if (!values.is_array()) throw EmbeddingError("embedding item is not an array");
      out[index] = EmbeddingVector(values.get<std::vector<double>>());
      filled[index] = true;
    }
    return out;
  }

  std::string model_;
  std::size_t batch_size_;
  std::size_t workers_;
  http::JsonClient client_;
};

}  // namespace

EmbeddingVector::EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw EmbeddingError("embedding vector must have at least one component");
  for (double v : values_) {
    if (!std::isfinite(v)) throw EmbeddingError("embedding vector contains a non-finite value");
  }
}

double EmbeddingVector::norm() const {
  double sum = 0.0;
  for (double v : values_) sum += v * v;
  return std::sqrt(sum);
}

bool is_unit(const EmbeddingVector& v, double tolerance) {
  return v.dim() > 0 && std::abs(v.norm() - 1.0) <= tolerance;
}

EmbeddingVector normalize(const EmbeddingVector& v) {
  const double n = v.norm();
  if (n == 0.0) throw EmbeddingError("cannot normalize a zero vector");
  std::vector<double> out(v.values().begin(), v.values().end());
  for (double& x : out) x /= n;
  return EmbeddingVector(std::move(out));
}

EmbeddingVector truncate_matryoshka(const EmbeddingVector& v, std::size_t d_prime) {
  if (d_prime == 0 || d_prime > v.dim()) {
    throw EmbeddingError("cannot truncate a " + std::to_string(v.dim()) + "-dim vector to " +
                         std::to_string(d_prime));
  }
  const auto prefix = v.values().first(d_prime);
  if (std::all_of(prefix.begin(), prefix.end(), [](double x) { return x == 0.0; })) {
    throw EmbeddingError("first " + std::to_string(d_prime) + " components are all zero");
  }
  return normalize(EmbeddingVector(std::vector<double>(prefix.begin(), prefix.end())));
}

EmbeddingVector deterministic_embed(std::string_view text, std::size_t dim) {
  if (dim == 0) throw EmbeddingError("embedding dimension must be positive");
  const auto tokens = corpus::tokenize(text);
  if (tokens.empty()) throw EmbeddingError("cannot embed text with no tokens");
  std::vector<double> acc(dim, 0.0);
  for (auto token : tokens) {
    const std::uint64_t h = mix64(fnv1a64(token) ^ kHashEmbedSeed);
    const std::size_t bucket = h % dim;
    const bool negative = ((h / dim) & 1u) != 0;
    acc[bucket] += negative ? -1.0 : 1.0;
  }
  // Colliding tokens with opposite signs can cancel out completely.
  if (std::all_of(acc.begin(), acc.end(), [](double x) { return x == 0.0; })) {
    throw EmbeddingError("hash features cancel to the zero vector");
  }
  return normalize(EmbeddingVector(std::move(acc)));
}

std::string_view backend_name(BackendKind kind) {
  return kind == BackendKind::Remote ? "remote" : "hash";
}

BackendKind parse_backend(std::string_view name) {
  const auto lower = text::ascii_lower(name);
  if (lower == "remote") return BackendKind::Remote;
  if (lower == "hash" || lower == "deterministic" || lower == "deterministic_hash") {
    return BackendKind::DeterministicHash;
  }
  throw ConfigError("unknown embedding backend \"" + std::string(name) + "\" (expected remote or hash)");
}

void EmbedderConfig::validate() const {
  if (full_dim == 0) throw ConfigError("embedding full_dim must be positive");
  if (truncate_dim > full_dim) {
    throw ConfigError("truncate_dim (" + std::to_string(truncate_dim) + ") exceeds full_dim (" +
                      std::to_string(full_dim) + ")");
  }
  if (model_name.empty()) throw ConfigError("embedding model name is empty");
  if (backend == BackendKind::Remote) {
    if (remote.base_url.empty()) throw ConfigError("remote embedding backend needs a base URL (GG_BASE_URL)");
    http::split_base_url(remote.base_url);
  }
}

std::string EmbedderConfig::identity() const {
  return std::string(backend_name(backend)) + ":" + model_name + ":" + std::to_string(full_dim) + ":" +
         std::to_string(output_dim());
}

std::unique_ptr<EmbeddingBackend> make_backend(const EmbedderConfig& cfg) {
  cfg.validate();
  if (cfg.backend == BackendKind::Remote) return std::make_unique<RemoteBackend>(cfg);
  return std::make_unique<HashBackend>(cfg.full_dim);
}

Embedder::Embedder(EmbedderConfig cfg) : cfg_(std::move(cfg)), backend_(make_backend(cfg_)) {}

Embedder::Embedder(EmbedderConfig cfg, std::unique_ptr<EmbeddingBackend> backend)
    : cfg_(std::move(cfg)), backend_(std::move(backend)) {
  cfg_.validate();
}

std::vector<EmbeddingVector> Embedder::embed(std::span<const std::string> texts) const {
  if (texts.empty()) throw EmbeddingError("no texts to embed");
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (text::trim(texts[i]).empty()) throw EmbeddingError("text #" + std::to_string(i) + " is empty");
  }
  auto raw = backend_->embed_raw(texts);
  if (raw.size() != texts.size()) {
    throw EmbeddingError("backend returned " + std::to_string(raw.size()) + " vectors for " +
                         std::to_string(texts.size()) + " texts");
  }
  std::vector<EmbeddingVector> out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i].dim() != cfg_.full_dim) {
      throw ConfigError("embedding backend returned a " + std::to_string(raw[i].dim()) +
                        "-dim vector for text #" + std::to_string(i) + "; configured full_dim is " +
                        std::to_string(cfg_.full_dim));
    }
    out.push_back(truncate_matryoshka(raw[i], cfg_.output_dim()));
  }
  return out;
}

std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts, const EmbedderConfig& cfg) {
  return Embedder(cfg).embed(texts);
}

}  // namespace gg::embedding
