#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "gg/errors.hpp"

namespace gg::corpus {

enum class SourceKind { CCO, CDC, CMA, ICRC, NICE, PubMed, SPOR, WHO, WikiDoc, Other };

/// Publisher of a guideline article. Unknown publishers keep their label.
struct Source {
  SourceKind kind = SourceKind::Other;
  std::string label;  // only meaningful for Other

  static Source parse(std::string_view text);
  std::string name() const;

  bool operator==(const Source&) const = default;
};

struct GuidelineDoc {
  std::string id;
  Source source;
  std::string title;
  std::string body;
};

/// JSON key names for each logical field of a corpus record.
struct FieldMap {
  std::string id = "id";
  std::string source = "source";
  std::string title = "title";
  std::string text = "text";
};

enum class Strictness { Abort, Skip };

struct ChunkParams {
  std::size_t chunk_size = 512;
  std::size_t overlap = 64;

  /// Throws ConfigError unless 0 <= overlap < chunk_size.
  void validate() const;
  std::size_t stride() const { return chunk_size - overlap; }
};

/// Half-open interval of token offsets.
struct TokenSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - start; }
  bool operator==(const TokenSpan&) const = default;
};

/// Identifies one chunk within a corpus. Text form is "doc_id/chunk_index".
struct ChunkRef {
  std::string doc_id;
  std::uint32_t chunk_index = 0;

  std::string str() const;
  /// Parses "doc_id/chunk_index", splitting at the last '/'.
  static std::optional<ChunkRef> parse(std::string_view text);

  auto operator<=>(const ChunkRef&) const = default;
};

struct Chunk {
  std::string doc_id;
  std::uint32_t chunk_index = 0;
  TokenSpan token_span;
  std::string text;

  ChunkRef ref() const { return {doc_id, chunk_index}; }
};

/// Streams GuidelineDocs from a JSONL file, one record per line.
///
/// Under Strictness::Abort the first bad record throws RecordError. Under
/// Strictness::Skip bad records are logged, collected in errors(), and
/// skipped. Blank lines are ignored. Besides JSON syntax and missing keys, a
/// record is rejected for an empty id, a duplicate id, or a body that is empty
/// after trimming.
class CorpusReader {
 public:
  CorpusReader(const std::filesystem::path& path, FieldMap fields, Strictness strictness);
  CorpusReader(std::istream& in, FieldMap fields, Strictness strictness);

  CorpusReader(const CorpusReader&) = delete;
  CorpusReader& operator=(const CorpusReader&) = delete;

  std::optional<GuidelineDoc> next();

  const std::vector<RecordError>& errors() const { return errors_; }
  /// FNV-1a-64 over every line consumed so far, each followed by '\n'.
  std::uint64_t fingerprint() const { return fingerprint_; }

 private:
  std::optional<GuidelineDoc> parse_line(const std::string& line);
  void reject(std::size_t line, const std::string& what);

  std::ifstream file_;
  std::istream* in_;
  FieldMap fields_;
  Strictness strictness_;
  std::size_t line_no_ = 0;
  std::vector<RecordError> errors_;
  std::unordered_set<std::string> seen_ids_;
  std::uint64_t fingerprint_;
};

struct CorpusLoad {
  std::vector<GuidelineDoc> docs;
  std::vector<RecordError> errors;
  std::uint64_t fingerprint = 0;
};

CorpusLoad load_corpus(const std::filesystem::path& path, const FieldMap& fields = {},
                       Strictness strictness = Strictness::Abort);

/// Splits on Unicode White_Space code points. Views point into `text`.
std::vector<std::string_view> tokenize(std::string_view text);

/// Overlapping token windows: chunk i covers [i*stride, min(i*stride + chunk_size, L)).
std::vector<Chunk> chunk_doc(const GuidelineDoc& doc, const ChunkParams& params);

}  // namespace gg::corpus
