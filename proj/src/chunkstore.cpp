#include "gg/chunkstore.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gg/hash.hpp"
#include "gg/text.hpp"

namespace gg {
namespace {

constexpr std::string_view kSchema = "gg.chunk_store/1";

}  // namespace

ChunkStore::ChunkStore(std::string corpus_fingerprint, corpus::ChunkParams params)
    : fingerprint_(std::move(corpus_fingerprint)), params_(params) {}

void ChunkStore::add(StoredChunk chunk) {
  const auto ref = chunk.chunk.ref();
  if (!by_ref_.emplace(ref, chunks_.size()).second) {
    throw Error("duplicate chunk " + ref.str() + " in chunk store");
  }
  chunks_.push_back(std::move(chunk));
}

const StoredChunk* ChunkStore::find(const corpus::ChunkRef& ref) const {
  auto it = by_ref_.find(ref);
  return it == by_ref_.end() ? nullptr : &chunks_[it->second];
}

std::string ChunkStore::serialize() const {
  std::string out;
  nlohmann::ordered_json header{{"schema", kSchema},
                                {"corpus_fingerprint", fingerprint_},
                                {"chunk_size", params_.chunk_size},
                                {"overlap", params_.overlap},
                                {"documents", documents_},
                                {"chunks", chunks_.size()}};
  out += header.dump();
  out += '\n';
  for (const auto& s : chunks_) {
    nlohmann::ordered_json line{{"doc_id", s.chunk.doc_id},
                                {"chunk_index", s.chunk.chunk_index},
                                {"start", s.chunk.token_span.start},
                                {"end", s.chunk.token_span.end},
                                {"source", s.source},
                                {"title", s.title},
                                {"text", s.chunk.text}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

void ChunkStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write chunk store " + path.string());
  const auto data = serialize();
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("failed writing chunk store " + path.string());
}

ChunkStore ChunkStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open chunk store " + path.string());
  std::string line;
  std::size_t line_no = 0;
  ChunkStore store;
  bool have_header = false;
  std::size_t expected_chunks = 0;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (text::trim(line).empty()) continue;
      const auto j = nlohmann::json::parse(line);
      if (!have_header) {
        if (j.value("schema", std::string()) != kSchema) {
          throw RecordError(line_no, path.string() + ": not a chunk store (missing \"" + std::string(kSchema) +
                                         "\" header)");
        }
        store.fingerprint_ = j.at("corpus_fingerprint").get<std::string>();
        store.params_.chunk_size = j.at("chunk_size").get<std::size_t>();
        store.params_.overlap = j.at("overlap").get<std::size_t>();
        store.documents_ = j.at("documents").get<std::size_t>();
        expected_chunks = j.at("chunks").get<std::size_t>();
        have_header = true;
        continue;
      }
      StoredChunk s;
      s.chunk.doc_id = j.at("doc_id").get<std::string>();
      s.chunk.chunk_index = j.at("chunk_index").get<std::uint32_t>();
      s.chunk.token_span = {j.at("start").get<std::size_t>(), j.at("end").get<std::size_t>()};
      s.chunk.text = j.at("text").get<std::string>();
      s.source = j.at("source").get<std::string>();
      s.title = j.at("title").get<std::string>();
      store.add(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw RecordError(line_no, path.string() + ": " + e.what());
  }
  if (!have_header) throw RecordError(line_no, path.string() + ": empty chunk store");
  if (store.chunks_.size() != expected_chunks) {
    throw IoError(path.string() + ": header promises " + std::to_string(expected_chunks) + " chunks, found " +
                  std::to_string(store.chunks_.size()));
  }
  return store;
}

ChunkStore build_chunk_store(const std::filesystem::path& corpus_path, const corpus::FieldMap& fields,
                             corpus::Strictness strictness, const corpus::ChunkParams& params,
                             std::vector<RecordError>* skipped) {
  params.validate();
  corpus::CorpusReader reader(corpus_path, fields, strictness);
  std::vector<StoredChunk> chunks;
  std::size_t documents = 0;
  while (auto doc = reader.next()) {
    ++documents;
    for (auto& c : corpus::chunk_doc(*doc, params)) {
      chunks.push_back({std::move(c), doc->source.name(), doc->title});
    }
  }
  if (skipped) *skipped = reader.errors();
  if (documents == 0) throw IoError("corpus " + corpus_path.string() + " contains no documents");

  std::uint64_t fp = reader.fingerprint();
  fp = fnv1a64("|chunk_size=" + std::to_string(params.chunk_size) + "|overlap=" + std::to_string(params.overlap), fp);
  ChunkStore store(hex64(fp), params);
  store.set_document_count(documents);
  for (auto& c : chunks) store.add(std::move(c));
  return store;
}

}  // namespace gg
