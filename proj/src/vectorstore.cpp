#include "gg/vectorstore.hpp"

#include <algorithm>
#include <bit>
#include <cassert>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <queue>

#include <nlohmann/json.hpp>

#include "gg/hash.hpp"

namespace gg::vectorstore {
namespace {

static_assert(std::numeric_limits<float>::is_iec559, "index format assumes IEEE-754 float32");

// Hits compare "before" when they rank higher.
bool ranks_before(double score_a, std::size_t entry_a, double score_b, std::size_t entry_b) {
  if (score_a != score_b) return score_a > score_b;
  return entry_a < entry_b;
}

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }

  std::vector<unsigned char>& data() { return out_; }

 private:
  std::vector<unsigned char> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const unsigned char> in) : in_(in) {}

  std::uint32_t u32(const char* field) {
    need(4, field);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* field) {
    need(8, field);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(in_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32(const char* field) { return std::bit_cast<float>(u32(field)); }
  std::string str(const char* field) {
    const std::uint32_t n = u32(field);
    need(n, field);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n, const char* field) const {
    if (remaining() < n) {
      throw IndexCorruptError("length", std::string("file ends inside ") + field);
    }
  }

  std::span<const unsigned char> in_;
  std::size_t pos_ = 0;
};

}  // namespace

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw EmbeddingError("cosine of vectors with different dims (" + std::to_string(a.dim()) + " vs " +
                         std::to_string(b.dim()) + ")");
  }
  assert(embedding::is_unit(a) && embedding::is_unit(b));
  double dot = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) dot += a[i] * b[i];
  return std::clamp(dot, -1.0, 1.0);
}

VectorIndex::Builder::Builder(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw ConfigError("index dim must be positive");
}

VectorIndex::Builder& VectorIndex::Builder::add(ChunkRef ref, const EmbeddingVector& vector) {
  if (vector.dim() != dim_) {
    throw EmbeddingError("vector for " + ref.str() + " has dim " + std::to_string(vector.dim()) +
                         ", index dim is " + std::to_string(dim_));
  }
  if (!embedding::is_unit(vector)) throw EmbeddingError("vector for " + ref.str() + " is not unit-norm");
  if (!seen_.insert(ref).second) throw Error("duplicate chunk ref " + ref.str() + " in index");
  for (double v : vector.values()) values_.push_back(static_cast<float>(v));
  refs_.push_back(std::move(ref));
  return *this;
}

VectorIndex VectorIndex::Builder::build(IndexMetadata metadata) && {
  return VectorIndex(dim_, std::move(refs_), std::move(values_), std::move(metadata));
}

VectorIndex::VectorIndex(std::size_t dim, std::vector<ChunkRef> refs, std::vector<float> values,
                         IndexMetadata metadata)
    : dim_(dim), refs_(std::move(refs)), values_(std::move(values)), metadata_(std::move(metadata)) {}

std::span<const float> VectorIndex::raw_vector(std::size_t entry) const {
  return std::span(values_).subspan(entry * dim_, dim_);
}

EmbeddingVector VectorIndex::vector(std::size_t entry) const {
  const auto raw = raw_vector(entry);
  return EmbeddingVector(std::vector<double>(raw.begin(), raw.end()));
}

double VectorIndex::score(std::span<const double> query, std::size_t entry) const {
  const float* row = values_.data() + entry * dim_;
  double dot = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) dot += query[i] * static_cast<double>(row[i]);
  return std::clamp(dot, -1.0, 1.0);
}

std::vector<SearchHit> VectorIndex::search_top_k(const EmbeddingVector& query, std::size_t k) const {
  if (k == 0) throw ConfigError("k must be at least 1");
  if (empty()) return {};
  if (query.dim() != dim_) {
    throw EmbeddingError("query has dim " + std::to_string(query.dim()) + ", index dim is " +
                         std::to_string(dim_));
  }
  const std::size_t keep = std::min(k, size());

  struct Candidate {
    double score;
    std::size_t entry;
  };
  auto better = [](const Candidate& a, const Candidate& b) {
    return ranks_before(a.score, a.entry, b.score, b.entry);
  };
  // Worst retained candidate sits on top.
  std::priority_queue<Candidate, std::vector<Candidate>, decltype(better)> heap(better);
  const auto q = query.values();
  for (std::size_t e = 0; e < size(); ++e) {
    Candidate c{score(q, e), e};
    if (heap.size() < keep) {
      heap.push(c);
    } else if (better(c, heap.top())) {
      heap.pop();
      heap.push(c);
    }
  }

  std::vector<Candidate> kept;
  kept.reserve(heap.size());
  while (!heap.empty()) {
    kept.push_back(heap.top());
    heap.pop();
  }
  std::sort(kept.begin(), kept.end(), better);

  std::vector<SearchHit> hits;
  hits.reserve(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    hits.push_back({refs_[kept[i].entry], kept[i].score, i + 1, kept[i].entry});
  }
  return hits;
}

std::vector<SearchHit> search_top_k(const VectorIndex& index, const EmbeddingVector& query, std::size_t k) {
  return index.search_top_k(query, k);
}

std::vector<unsigned char> encode_index(const VectorIndex& index) {
  ByteWriter w;
  w.bytes(std::string_view(kIndexMagic, 4));
  w.u32(kIndexVersion);
  w.u32(static_cast<std::uint32_t>(index.dim()));
  w.u64(index.size());
  const nlohmann::json meta{{"corpus_fingerprint", index.metadata().corpus_fingerprint},
                            {"embedder_id", index.metadata().embedder_id},
                            {"built_at", index.metadata().built_at}};
  w.str(meta.dump());
  for (std::size_t e = 0; e < index.size(); ++e) {
    w.str(index.ref(e).doc_id);
    w.u32(index.ref(e).chunk_index);
    for (float v : index.raw_vector(e)) w.f32(v);
  }
  const std::uint32_t crc = crc32(w.data());
  w.u32(crc);
  return std::move(w.data());
}

VectorIndex decode_index(std::span<const unsigned char> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kIndexMagic, 4) != 0) {
    throw IndexCorruptError("magic", "expected \"GGIX\" at offset 0");
  }
  ByteReader header(bytes.subspan(4));
  const std::uint32_t version = header.u32("version");
  if (version != kIndexVersion) {
    throw IndexCorruptError("version", "unsupported format version " + std::to_string(version) +
                                           " (this build reads version " + std::to_string(kIndexVersion) + ")");
  }
  // Header fields are covered by the checksum too, so verify it before
  // trusting dim/count for allocation.
  if (bytes.size() < 4 + 4 + 4 + 8 + 4 + 4) throw IndexCorruptError("length", "file too short for a header");
  const auto body = bytes.first(bytes.size() - 4);
  ByteReader trailer(bytes.last(4));
  const std::uint32_t stored_crc = trailer.u32("checksum");
  const std::uint32_t actual_crc = crc32(body);
  if (stored_crc != actual_crc) {
    throw IndexCorruptError("checksum", "CRC-32 mismatch (stored " + hex64(stored_crc).substr(8) + ", computed " +
                                            hex64(actual_crc).substr(8) + ")");
  }

  ByteReader r(body.subspan(8));
  const std::uint32_t dim = r.u32("dim");
  if (dim == 0) throw IndexCorruptError("dim", "dimension is zero");
  const std::uint64_t count = r.u64("count");
  // Smallest possible entry: empty doc_id length + chunk_index + vector.
  const std::uint64_t min_entry = 4 + 4 + std::uint64_t(dim) * 4;
  if (count > r.remaining() / min_entry) {
    throw IndexCorruptError("count", std::to_string(count) + " entries cannot fit in the file");
  }

  IndexMetadata meta;
  try {
    const auto j = nlohmann::json::parse(r.str("metadata"));
    meta.corpus_fingerprint = j.at("corpus_fingerprint").get<std::string>();
    meta.embedder_id = j.at("embedder_id").get<std::string>();
    meta.built_at = j.value("built_at", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw IndexCorruptError("metadata", e.what());
  }

  std::vector<ChunkRef> refs;
  std::vector<float> values;
  refs.reserve(count);
  values.reserve(count * dim);
  std::set<ChunkRef> seen;
  for (std::uint64_t e = 0; e < count; ++e) {
    ChunkRef ref;
    ref.doc_id = r.str("entry doc_id");
    ref.chunk_index = r.u32("entry chunk_index");
    for (std::uint32_t i = 0; i < dim; ++i) values.push_back(r.f32("entry vector"));
    if (!seen.insert(ref).second) throw IndexCorruptError("entries", "duplicate chunk ref " + ref.str());
    refs.push_back(std::move(ref));
  }
  if (r.remaining() != 0) {
    throw IndexCorruptError("length", std::to_string(r.remaining()) + " unexpected bytes after the last entry");
  }
  return VectorIndex(dim, std::move(refs), std::move(values), std::move(meta));
}

void save_index(const VectorIndex& index, const std::filesystem::path& path) {
  const auto bytes = encode_index(index);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write index file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing index file " + path.string());
}

VectorIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open index file " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_index(bytes);
}

}  // namespace gg::vectorstore
