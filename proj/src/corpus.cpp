#include "gg/corpus.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <istream>
#include <utility>

#include <nlohmann/json.hpp>

#include "gg/hash.hpp"
#include "gg/log.hpp"
#include "gg/text.hpp"

namespace gg::corpus {
namespace {

using nlohmann::json;

constexpr std::array<std::pair<std::string_view, SourceKind>, 9> kKnownSources{{
    {"CCO", SourceKind::CCO},
    {"CDC", SourceKind::CDC},
    {"CMA", SourceKind::CMA},
    {"ICRC", SourceKind::ICRC},
    {"NICE", SourceKind::NICE},
    {"PubMed", SourceKind::PubMed},
    {"SPOR", SourceKind::SPOR},
    {"WHO", SourceKind::WHO},
    {"WikiDoc", SourceKind::WikiDoc},
}};

const json* find_string(const json& obj, const std::string& key, std::string& error) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    error = "missing key \"" + key + "\"";
    return nullptr;
  }
  if (!it->is_string()) {
    error = "key \"" + key + "\" is not a string";
    return nullptr;
  }
  return &*it;
}

}  // namespace

Source Source::parse(std::string_view text) {
  for (const auto& [name, kind] : kKnownSources) {
    if (text == name) return {kind, {}};
  }
  return {SourceKind::Other, std::string(text)};
}

std::string Source::name() const {
  if (kind == SourceKind::Other) return label;
  for (const auto& [name, k] : kKnownSources) {
    if (k == kind) return std::string(name);
  }
  return label;
}

void ChunkParams::validate() const {
  if (chunk_size == 0) throw ConfigError("chunk_size must be positive");
  if (overlap >= chunk_size) {
    throw ConfigError("overlap (" + std::to_string(overlap) + ") must be smaller than chunk_size (" +
                      std::to_string(chunk_size) + ")");
  }
}

std::string ChunkRef::str() const { return doc_id + "/" + std::to_string(chunk_index); }

std::optional<ChunkRef> ChunkRef::parse(std::string_view text) {
  const auto slash = text.rfind('/');
  if (slash == std::string_view::npos || slash == 0 || slash + 1 == text.size()) return std::nullopt;
  const auto digits = text.substr(slash + 1);
  std::uint32_t index = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
  if (ec != std::errc{} || ptr != digits.data() + digits.size()) return std::nullopt;
  return ChunkRef{std::string(text.substr(0, slash)), index};
}

CorpusReader::CorpusReader(const std::filesystem::path& path, FieldMap fields, Strictness strictness)
    : file_(path, std::ios::binary),
      in_(&file_),
      fields_(std::move(fields)),
      strictness_(strictness),
      fingerprint_(kFnvOffsetBasis) {
  if (!file_) throw IoError("cannot open corpus file " + path.string());
}

CorpusReader::CorpusReader(std::istream& in, FieldMap fields, Strictness strictness)
    : in_(&in), fields_(std::move(fields)), strictness_(strictness), fingerprint_(kFnvOffsetBasis) {}

void CorpusReader::reject(std::size_t line, const std::string& what) {
  RecordError err(line, what);
  if (strictness_ == Strictness::Abort) throw err;
  log::warn(std::string("skipping corpus record: ") + err.what());
  errors_.push_back(std::move(err));
}

std::optional<GuidelineDoc> CorpusReader::next() {
  std::string line;
  while (std::getline(*in_, line)) {
    ++line_no_;
    fingerprint_ = fnv1a64(line, fingerprint_);
    fingerprint_ = fnv1a64("\n", fingerprint_);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    if (auto doc = parse_line(line)) return doc;
  }
  return std::nullopt;
}

std::optional<GuidelineDoc> CorpusReader::parse_line(const std::string& line) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    reject(line_no_, std::string("malformed JSON: ") + e.what());
    return std::nullopt;
  }
  if (!obj.is_object()) {
    reject(line_no_, "record is not a JSON object");
    return std::nullopt;
  }

  std::string error;
  const json* id = find_string(obj, fields_.id, error);
  const json* source = id ? find_string(obj, fields_.source, error) : nullptr;
  const json* body = source ? find_string(obj, fields_.text, error) : nullptr;
  if (!body) {
    reject(line_no_, error);
    return std::nullopt;
  }

  GuidelineDoc doc;
  doc.id = id->get<std::string>();
  doc.source = Source::parse(source->get<std::string>());
  doc.body = body->get<std::string>();
  // Title is the one optional field.
  if (auto it = obj.find(fields_.title); it != obj.end()) {
    if (!it->is_string() && !it->is_null()) {
      reject(line_no_, "key \"" + fields_.title + "\" is not a string");
      return std::nullopt;
    }
    if (it->is_string()) doc.title = it->get<std::string>();
  }

  if (doc.id.empty()) {
    reject(line_no_, "empty id");
    return std::nullopt;
  }
  if (text::trim(doc.body).empty()) {
    reject(line_no_, "empty body for id \"" + doc.id + "\"");
    return std::nullopt;
  }
  if (!seen_ids_.insert(doc.id).second) {
    reject(line_no_, "duplicate id \"" + doc.id + "\"");
    return std::nullopt;
  }
  return doc;
}

CorpusLoad load_corpus(const std::filesystem::path& path, const FieldMap& fields, Strictness strictness) {
  CorpusReader reader(path, fields, strictness);
  CorpusLoad out;
  while (auto doc = reader.next()) out.docs.push_back(std::move(*doc));
  out.errors = reader.errors();
  out.fingerprint = reader.fingerprint();
  return out;
}

std::vector<std::string_view> tokenize(std::string_view text) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  std::size_t start = std::string_view::npos;
  while (i < text.size()) {
    const std::size_t ws = text::whitespace_prefix(text.substr(i));
    if (ws > 0) {
      if (start != std::string_view::npos) {
        tokens.push_back(text.substr(start, i - start));
        start = std::string_view::npos;
      }
      i += ws;
    } else {
      if (start == std::string_view::npos) start = i;
      ++i;
    }
  }
  if (start != std::string_view::npos) tokens.push_back(text.substr(start));
  return tokens;
}

std::vector<Chunk> chunk_doc(const GuidelineDoc& doc, const ChunkParams& params) {
  params.validate();
  const auto tokens = tokenize(doc.body);
  const std::size_t total = tokens.size();
  const std::size_t stride = params.stride();

  std::vector<Chunk> chunks;
  for (std::size_t start = 0, index = 0; start < total; start += stride, ++index) {
    const std::size_t end = std::min(start + params.chunk_size, total);
    Chunk c;
    c.doc_id = doc.id;
    c.chunk_index = static_cast<std::uint32_t>(index);
    c.token_span = {start, end};
    c.text = text::join(std::span(tokens).subspan(start, end - start), " ");
    chunks.push_back(std::move(c));
    // Once a window reaches the end every later window would be a suffix of it.
    if (end == total) break;
  }
  return chunks;
}

}  // namespace gg::corpus
