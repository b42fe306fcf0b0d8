#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "gg/corpus.hpp"
#include "gg/embedding.hpp"

namespace gg::vectorstore {

using corpus::ChunkRef;
using embedding::EmbeddingVector;

inline constexpr char kIndexMagic[4] = {'G', 'G', 'I', 'X'};
inline constexpr std::uint32_t kIndexVersion = 1;

struct IndexMetadata {
  std::string corpus_fingerprint;
  std::string embedder_id;
  std::string built_at;  // ISO-8601 UTC, injected by the caller

  bool operator==(const IndexMetadata&) const = default;
};

struct SearchHit {
  ChunkRef chunk_ref;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based
  std::size_t entry = 0;  // position in build order
};

/// Dot product of unit vectors in float64, clamped to [-1, 1]. Throws
/// EmbeddingError on a dimension mismatch.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

/// Immutable exact-search index. Entries keep their build order; vectors are
/// stored as float32 and scored in float64.
class VectorIndex {
 public:
  class Builder {
   public:
    explicit Builder(std::size_t dim);

    /// Throws if the vector's dim differs, the vector is not unit-norm, or the
    /// ref is already present.
    Builder& add(ChunkRef ref, const EmbeddingVector& vector);
    VectorIndex build(IndexMetadata metadata) &&;

   private:
    std::size_t dim_;
    std::vector<ChunkRef> refs_;
    std::set<ChunkRef> seen_;
    std::vector<float> values_;
  };

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return refs_.size(); }
  bool empty() const { return refs_.empty(); }
  const IndexMetadata& metadata() const { return metadata_; }

  const ChunkRef& ref(std::size_t entry) const { return refs_.at(entry); }
  std::span<const float> raw_vector(std::size_t entry) const;
  EmbeddingVector vector(std::size_t entry) const;

  /// Float64 dot product of a query with one stored entry.
  double score(std::span<const double> query, std::size_t entry) const;

  /// min(k, size()) hits ordered by descending score, then ascending entry.
  std::vector<SearchHit> search_top_k(const EmbeddingVector& query, std::size_t k) const;

  bool operator==(const VectorIndex&) const = default;

 private:
  VectorIndex(std::size_t dim, std::vector<ChunkRef> refs, std::vector<float> values, IndexMetadata metadata);
  friend VectorIndex decode_index(std::span<const unsigned char> bytes);

  std::size_t dim_ = 0;
  std::vector<ChunkRef> refs_;
  std::vector<float> values_;
  IndexMetadata metadata_;
};

std::vector<SearchHit> search_top_k(const VectorIndex& index, const EmbeddingVector& query, std::size_t k);

/// Little-endian layout:
///   "GGIX" | u32 version | u32 dim | u64 count
///   | u32 metadata length | metadata JSON (UTF-8)
///   | count x (u32 doc_id length | doc_id | u32 chunk_index | dim x f32)
///   | u32 CRC-32 of every preceding byte
std::vector<unsigned char> encode_index(const VectorIndex& index);
VectorIndex decode_index(std::span<const unsigned char> bytes);

void save_index(const VectorIndex& index, const std::filesystem::path& path);
/// Throws IndexCorruptError naming the failed check; never returns a partial
/// index.
VectorIndex load_index(const std::filesystem::path& path);

}  // namespace gg::vectorstore
