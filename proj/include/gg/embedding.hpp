#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gg/http.hpp"

namespace gg::embedding {

/// Finite, non-empty real vector. Values are held in float64; the index
/// stores float32.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;
  /// Throws EmbeddingError for an empty or non-finite input.
  explicit EmbeddingVector(std::vector<double> values);

  std::size_t dim() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double norm() const;

  bool operator==(const EmbeddingVector&) const = default;

 private:
  std::vector<double> values_;
};

inline constexpr double kUnitNormTolerance = 1e-6;

bool is_unit(const EmbeddingVector& v, double tolerance = kUnitNormTolerance);

/// v / ||v||. Throws EmbeddingError for the zero vector.
EmbeddingVector normalize(const EmbeddingVector& v);

/// normalize(first d_prime components of v).
EmbeddingVector truncate_matryoshka(const EmbeddingVector& v, std::size_t d_prime);

/// Seed XORed into every token's FNV-1a-64 hash before the splitmix64
/// finalizer. Changing it changes every hash embedding and index.
inline constexpr std::uint64_t kHashEmbedSeed = 0x67756964656c696eULL;  // "guidelin"

/// Signed feature hashing over whitespace tokens:
///   h      = mix64(fnv1a64(token) ^ kHashEmbedSeed)
///   bucket = h mod dim
///   sign   = +1 if bit 0 of (h / dim) is 0, else -1
/// Contributions are summed in token order in float64, then L2-normalized.
/// Throws EmbeddingError when the text has no tokens.
EmbeddingVector deterministic_embed(std::string_view text, std::size_t dim);

enum class BackendKind { Remote, DeterministicHash };

std::string_view backend_name(BackendKind kind);
BackendKind parse_backend(std::string_view name);

struct RemoteOptions {
  std::string base_url;
  std::string api_key;
  http::RetryPolicy retry;
  std::size_t max_in_flight = 4;
  std::size_t batch_size = 64;
};

struct EmbedderConfig {
  BackendKind backend = BackendKind::DeterministicHash;
  std::string model_name = "signed-feature-hash-v1";
  std::size_t full_dim = 768;
  std::size_t truncate_dim = 0;  // 0 means full_dim
  RemoteOptions remote;

  void validate() const;
  std::size_t output_dim() const { return truncate_dim == 0 ? full_dim : truncate_dim; }
  /// "<backend>:<model>:<full_dim>:<output_dim>", recorded in index metadata.
  std::string identity() const;
};

/// Produces raw full-dimension vectors; normalization and truncation happen
/// in embed_texts.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::vector<EmbeddingVector> embed_raw(std::span<const std::string> texts) = 0;
};

std::unique_ptr<EmbeddingBackend> make_backend(const EmbedderConfig& cfg);

/// Embedder bound to one config. Output vectors are unit-norm, output_dim()
/// long, and in input order.
class Embedder {
 public:
  explicit Embedder(EmbedderConfig cfg);
  Embedder(EmbedderConfig cfg, std::unique_ptr<EmbeddingBackend> backend);

  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const;

  const EmbedderConfig& config() const { return cfg_; }
  std::string identity() const { return cfg_.identity(); }

 private:
  EmbedderConfig cfg_;
  std::unique_ptr<EmbeddingBackend> backend_;
};

std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts, const EmbedderConfig& cfg);

}  // namespace gg::embedding
