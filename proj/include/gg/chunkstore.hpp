#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gg/corpus.hpp"

namespace gg {

struct StoredChunk {
  corpus::Chunk chunk;
  std::string source;
  std::string title;
};

/// Chunked corpus as written by `gg ingest`: a JSONL file whose first line is
/// a header record ({"schema": "gg.chunk_store/1", corpus_fingerprint,
/// chunk_size, overlap, documents, chunks}) followed by one chunk per line
/// ({doc_id, chunk_index, start, end, source, title, text}).
class ChunkStore {
 public:
  ChunkStore() = default;
  ChunkStore(std::string corpus_fingerprint, corpus::ChunkParams params);

  void add(StoredChunk chunk);
  void set_document_count(std::size_t n) { documents_ = n; }

  const std::vector<StoredChunk>& chunks() const { return chunks_; }
  const StoredChunk* find(const corpus::ChunkRef& ref) const;
  const std::string& fingerprint() const { return fingerprint_; }
  const corpus::ChunkParams& params() const { return params_; }
  std::size_t document_count() const { return documents_; }

  std::string serialize() const;
  void save(const std::filesystem::path& path) const;
  static ChunkStore load(const std::filesystem::path& path);

 private:
  std::string fingerprint_;
  corpus::ChunkParams params_;
  std::size_t documents_ = 0;
  std::vector<StoredChunk> chunks_;
  std::map<corpus::ChunkRef, std::size_t> by_ref_;
};

/// Loads, chunks, and fingerprints a corpus. The fingerprint is FNV-1a-64
/// over the corpus bytes combined with the chunk parameters.
ChunkStore build_chunk_store(const std::filesystem::path& corpus_path, const corpus::FieldMap& fields,
                             corpus::Strictness strictness, const corpus::ChunkParams& params,
                             std::vector<RecordError>* skipped = nullptr);

}  // namespace gg
