// Acceptance checks AC1-AC7. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <sstream>

#include "gg/chunkstore.hpp"
#include "gg/cli.hpp"
#include "gg/corpus.hpp"
#include "gg/embedding.hpp"
#include "gg/errors.hpp"
#include "gg/http.hpp"
#include "gg/llm.hpp"
#include "gg/pipeline.hpp"
#include "gg/prompts.hpp"
#include "gg/scoring.hpp"
#include "gg/text.hpp"
#include "gg/vectorstore.hpp"
#include "test_support.hpp"

using namespace gg;
using gg::testing::Rng;
using gg::testing::TempDir;
namespace fs = std::filesystem;

namespace {

class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    if (failures_.size() < 5) failures_.push_back(what);
    ++failed_;
  }
  std::size_t failed() const { return failed_; }
  const std::vector<std::string>& failures() const { return failures_; }

 private:
  std::size_t failed_ = 0;
  std::vector<std::string> failures_;
};

struct Criterion {
  const char* id;
  const char* title;
  double budget_ms;  // 0: no runtime target
  std::function<void(Check&)> body;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

// AC1 ------------------------------------------------------------------------

void score_formula(Check& c) {
  struct Row {
    const char* specialty;
    double followed, not_followed, printed;
  };
  const Row rows[] = {{"Family Medicine", 1.5, 0.5, 0.75}, {"Pediatrics", 1.0, 1.0, 0.50},
                      {"Cardiology", 1.0, 0.5, 0.67},      {"Oncology", 1.0, 0.5, 0.67},
                      {"Endocrinology", 2.0, 0.5, 0.80},   {"Pulmonology", 1.5, 2.0, 0.43},
                      {"Orthopedics", 1.0, 1.0, 0.50}};
  for (const auto& r : rows) {
    const auto s = scoring::compute_score(r.followed, r.not_followed);
    c.expect(s && std::abs(*s - r.printed) <= 0.005,
             std::string(r.specialty) + ": got " + (s ? fmt(*s) : "null") + ", printed " + fmt(r.printed));
  }
  // Gastroenterology prints 0.17 for 2.5 / 1.0; the formula gives 2.5 / 3.5.
  const auto gastro = scoring::compute_score(2.5, 1.0);
  c.expect(gastro && std::abs(*gastro - 2.5 / 3.5) < 1e-12, "Gastroenterology: formula value");
  c.expect(gastro && std::abs(*gastro - 0.17) > 0.005, "Gastroenterology: printed value should not reproduce");
}

// AC2 ------------------------------------------------------------------------

std::vector<std::size_t> oracle_top_k(const vectorstore::VectorIndex& index, const embedding::EmbeddingVector& q,
                                      std::size_t k) {
  std::vector<std::pair<double, std::size_t>> all;
  all.reserve(index.size());
  for (std::size_t e = 0; e < index.size(); ++e) {
    const auto v = index.raw_vector(e);
    double dot = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) dot += double(v[i]) * q[i];
    all.emplace_back(std::clamp(dot, -1.0, 1.0), e);
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back(all[i].second);
  return out;
}

void retrieval_oracle(Check& c) {
  Rng rng(0xAC2);
  for (std::size_t n : {100u, 1000u, 2000u}) {
    for (std::size_t dim : {8u, 64u, 768u}) {
      vectorstore::VectorIndex::Builder b(dim);
      // Every tenth entry repeats an earlier vector so ties occur.
      std::vector<embedding::EmbeddingVector> vectors;
      for (std::size_t i = 0; i < n; ++i) {
        vectors.push_back(i % 10 == 9 ? vectors[rng.uniform(0, i - 1)] : rng.unit_vector(dim));
        b.add({"d" + std::to_string(i), 0}, vectors.back());
      }
      const auto index = std::move(b).build({"fp", "oracle", "2000-01-01T00:00:00Z"});
      for (std::size_t k : {1u, 5u, 10u}) {
        for (int q = 0; q < 20; ++q) {
          const auto query = q % 4 == 0 ? vectors[rng.uniform(0, n - 1)] : rng.unit_vector(dim);
          const auto hits = index.search_top_k(query, k);
          std::vector<std::size_t> got;
          for (const auto& h : hits) got.push_back(h.entry);
          c.expect(got == oracle_top_k(index, query, k),
                   "n=" + std::to_string(n) + " dim=" + std::to_string(dim) + " k=" + std::to_string(k) +
                       " query " + std::to_string(q));
          for (std::size_t r = 0; r < hits.size(); ++r) c.expect(hits[r].rank == r + 1, "ranks are 1-based");
        }
      }
    }
  }
}

// AC3 ------------------------------------------------------------------------

void offline_determinism(Check& c) {
  int attempts = 0;
  const auto previous = http::set_transport_factory(
      [&](const std::string& url, std::chrono::milliseconds) -> std::unique_ptr<http::Transport> {
        ++attempts;
        throw TransportError(0, false, "network access attempted: " + url);
      });
  TempDir work;
  std::ostringstream out, err;
  cli::SelftestOptions opts;
  opts.fixtures = gg::testing::fixture_dir() / "selftest";
  opts.work_dir = work / "w";
  int code = -1;
  try {
    code = cli::cmd_selftest(opts, out, err);
  } catch (...) {
    http::set_transport_factory(previous);
    throw;
  }
  http::set_transport_factory(previous);
  c.expect(code == 0, "selftest exit " + std::to_string(code) + ": " + err.str());
  c.expect(attempts == 0, std::to_string(attempts) + " network attempts");
  for (const char* f : {"run/run.json", "run/table.csv", "run/notes/note-cardio-001.dot", "run/notes/note-pulm-001.dot"})
    c.expect(fs::exists(opts.work_dir / f), std::string("work dir lacks ") + f);
}

// AC4 ------------------------------------------------------------------------

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

void chunker_properties(Check& c) {
  Rng rng(0xAC4);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t L = rng.uniform(1, 400);
    const std::size_t size = rng.uniform(1, 64);
    const std::size_t overlap = rng.uniform(0, size - 1);
    std::vector<std::string> words;
    for (std::size_t i = 0; i < L; ++i) words.push_back("t" + std::to_string(i));
    const corpus::GuidelineDoc doc{"d", {}, "", rng.messy_text(words)};
    const auto chunks = corpus::chunk_doc(doc, {size, overlap});
    const std::string where = "L=" + std::to_string(L) + " size=" + std::to_string(size) +
                              " overlap=" + std::to_string(overlap);
    if (chunks.empty()) {
      c.expect(false, where + ": no chunks");
      continue;
    }
    std::vector<int> covered(L, 0);
    std::vector<std::string> rebuilt;
    bool shaped = true;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      const auto& span = chunks[i].token_span;
      if (span.end <= span.start || span.end > L || span.size() > size) {
        shaped = false;
        break;
      }
      std::fill(covered.begin() + long(span.start), covered.begin() + long(span.end), 1);
      if (i + 1 < chunks.size())
        c.expect(span.end - chunks[i + 1].token_span.start == overlap, where + ": overlap");
      const auto chunk_words = split_words(chunks[i].text);
      c.expect(chunk_words.size() == span.size(), where + ": chunk text length");
      const std::size_t skip = std::min(i == 0 ? 0 : overlap, chunk_words.size());
      rebuilt.insert(rebuilt.end(), chunk_words.begin() + long(skip), chunk_words.end());
    }
    c.expect(shaped, where + ": span shape");
    if (!shaped) continue;
    c.expect(std::count(covered.begin(), covered.end(), 0) == 0, where + ": coverage");
    c.expect(rebuilt == words, where + ": reconstruction");
  }
}

// AC5 ------------------------------------------------------------------------

void embedding_properties(Check& c) {
  using embedding::EmbeddingVector;
  Rng rng(0xAC5);
  for (std::size_t dim : {64u, 256u, 768u}) {
    for (int trial = 0; trial < 200; ++trial) {
      const std::string where = "dim=" + std::to_string(dim) + " trial " + std::to_string(trial);
      auto words = rng.words(rng.uniform(1, 25));
      const auto v = embedding::deterministic_embed(rng.messy_text(words), dim);
      c.expect(std::abs(v.norm() - 1.0) <= embedding::kUnitNormTolerance, where + ": unit norm");

      std::shuffle(words.begin(), words.end(), rng.engine());
      c.expect(embedding::deterministic_embed(rng.messy_text(words), dim) == v, where + ": permutation");

      const auto r = rng.unit_vector(dim);
      std::vector<double> scaled(r.values().begin(), r.values().end());
      const double scale = rng.real(0.01, 100.0);
      for (double& x : scaled) x *= scale;
      c.expect(std::abs(vectorstore::cosine(embedding::normalize(EmbeddingVector(scaled)), r) - 1.0) <= 1e-9,
               where + ": scalar multiple");

      const auto same = embedding::truncate_matryoshka(r, dim);
      bool identical = same.dim() == dim;
      for (std::size_t i = 0; identical && i < dim; ++i) identical = std::abs(same[i] - r[i]) <= 1e-12;
      c.expect(identical, where + ": truncate to full dim");
    }
  }
}

// AC6 ------------------------------------------------------------------------

std::string corrupt_field(const std::vector<unsigned char>& bytes) {
  try {
    vectorstore::decode_index(bytes);
  } catch (const IndexCorruptError& e) {
    return e.field();
  }
  return "";
}

void index_persistence(Check& c) {
  Rng rng(0xAC6);
  vectorstore::VectorIndex::Builder b(48);
  for (std::uint32_t i = 0; i < 300; ++i) b.add({"doc" + std::to_string(i / 4), i % 4}, rng.unit_vector(48));
  const auto index = std::move(b).build({"0123456789abcdef", "hash:signed-feature-hash-v1:48", "2000-01-01T00:00:00Z"});

  TempDir dir;
  vectorstore::save_index(index, dir / "i.ggix");
  const auto loaded = vectorstore::load_index(dir / "i.ggix");
  c.expect(loaded == index, "round trip changed the index");
  c.expect(loaded.metadata() == index.metadata(), "round trip changed the metadata");
  for (std::size_t e = 0; e < index.size(); ++e) {
    const auto a = index.raw_vector(e), l = loaded.raw_vector(e);
    c.expect(std::equal(a.begin(), a.end(), l.begin(), l.end()), "vector " + std::to_string(e) + " differs");
  }

  const auto bytes = vectorstore::encode_index(index);
  auto bad_magic = bytes;
  bad_magic[0] ^= 0xFF;
  c.expect(corrupt_field(bad_magic) == "magic", "bad magic gave '" + corrupt_field(bad_magic) + "'");
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x01;
  c.expect(corrupt_field(flipped) == "checksum", "flipped byte gave '" + corrupt_field(flipped) + "'");
  for (std::size_t len = 0; len < bytes.size(); len += 1 + len / 64) {
    const std::vector<unsigned char> cut(bytes.begin(), bytes.begin() + long(len));
    c.expect(!corrupt_field(cut).empty(), "truncation to " + std::to_string(len) + " bytes loaded");
  }
  auto file = bytes;
  file.resize(file.size() - 1);
  gg::testing::write_text(dir / "cut.ggix", std::string(file.begin(), file.end()));
  bool named = false;
  try {
    vectorstore::load_index(dir / "cut.ggix");
  } catch (const IndexCorruptError&) {
    named = true;
  }
  c.expect(named, "truncated file did not raise IndexCorruptError");
}

// AC7 ------------------------------------------------------------------------

void scoring_edges(Check& c) {
  // Tally and score rules.
  c.expect(!scoring::compute_score(0, 0).has_value(), "0/0 must be null");
  c.expect(scoring::compute_score(0, 3) == 0.0 && scoring::compute_score(3, 0) == 1.0, "score bounds");
  const std::vector<Judgment> mixed{{"a", JudgmentStatus::Followed, "", {}},
                                    {"b", JudgmentStatus::NotFollowed, "", {}},
                                    {"c", JudgmentStatus::MissingTreatment, "", {}}};
  c.expect(scoring::tally(mixed) == scoring::Tally{1, 2}, "MissingTreatment counts as not followed");
  c.expect(scoring::score_note({}) == NoteScore{0, 0, std::nullopt}, "empty note scores null");

  // MissingTreatment is forced locally even when the model says Followed.
  const auto prompts = prompts::PromptSet::load(gg::testing::prompt_dir());
  const std::vector<DiagnosisFinding> findings{{"gout", {}, "gout"}};
  llm::MockLlm forced(std::vector<llm::TranscriptEntry>{
      {"scorer", R"([{"diagnosis":"gout","status":"Followed","rationale":"r","cited_chunks":[]}])"}});
  std::vector<std::string> warnings;
  const auto js = pipeline::run_scorer(findings, {}, forced, prompts, {}, warnings);
  c.expect(js.size() == 1 && js[0].status == JudgmentStatus::MissingTreatment, "empty treatments not forced");

  // Pipeline invariants on the bundled fixture.
  const fs::path fx = gg::testing::fixture_dir() / "selftest";
  const auto no_env = [](const std::string&) -> std::optional<std::string> { return std::nullopt; };
  const Config config = load_config(fx / "config.toml", no_env);
  TempDir dir;
  cli::cmd_ingest(config, {fx / "corpus.jsonl", dir / "chunks.jsonl", false});
  cli::cmd_index(config, {dir / "chunks.jsonl", dir / "index.ggix", false, "2000-01-01T00:00:00Z"});
  const auto index = vectorstore::load_index(dir / "index.ggix");
  const auto store = ChunkStore::load(dir / "chunks.jsonl");
  const embedding::Embedder embedder(config.embedder);
  const auto fixture_prompts = prompts::PromptSet::load(config.prompt_dir);
  llm::MockLlm mock(llm::load_transcript(config.llm.transcript));
  pipeline::Dependencies deps{index, store, embedder, mock, fixture_prompts, config.pipeline, pipeline::frozen_clock(), {}};

  const auto notes = pipeline::load_notes(fx / "notes.jsonl");
  c.expect(notes.size() == 2, "fixture notes");
  for (const auto& note : notes) {
    const auto r = pipeline::evaluate_note(note, deps);
    c.expect(r.done(), note.id + ": " + r.error);
    if (!r.done()) continue;
    c.expect(r.judgments.size() == r.findings.size(), note.id + ": one judgment per finding");
    for (std::size_t i = 0; i < std::min(r.judgments.size(), r.findings.size()); ++i) {
      c.expect(text::fold_key(r.judgments[i].diagnosis) == text::fold_key(r.findings[i].diagnosis),
               note.id + ": judgment order");
      if (r.findings[i].treatments.empty())
        c.expect(r.judgments[i].status == JudgmentStatus::MissingTreatment, note.id + ": forced MissingTreatment");
      for (const auto& ref : r.judgments[i].cited_chunks)
        c.expect(r.evidence.contains(ref), note.id + ": cites " + ref.str() + " outside its evidence");
    }
    const auto t = scoring::tally(r.judgments);
    c.expect(r.score && r.score->followed == t.followed && r.score->not_followed == t.not_followed,
             note.id + ": score matches tally");
    if (r.score && r.score->score) c.expect(*r.score->score >= 0.0 && *r.score->score <= 1.0, note.id + ": bounds");
    c.expect(r.score && r.score->score.has_value() == (t.followed + t.not_followed > 0), note.id + ": null rule");
  }
  c.expect(mock.remaining() == 0, "transcript not fully consumed");
}

}  // namespace

int main() {
  const Criterion criteria[] = {
      {"AC1", "score formula reproduces the published specialty rows", 0, score_formula},
      {"AC2", "top-k search matches a full-sort oracle", 10000, retrieval_oracle},
      {"AC3", "offline fixture run is byte-identical to goldens", 30000, offline_determinism},
      {"AC4", "chunker coverage, overlap and reconstruction", 5000, chunker_properties},
      {"AC5", "embedding norm, permutation, scale and truncation identities", 5000, embedding_properties},
      {"AC6", "index round trip and fault injection", 0, index_persistence},
      {"AC7", "scoring edge rules and pipeline invariants", 0, scoring_edges},
  };

  int failed = 0;
  for (const auto& cr : criteria) {
    Check check;
    const auto start = std::chrono::steady_clock::now();
    try {
      cr.body(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (cr.budget_ms > 0 && ms > cr.budget_ms)
      check.expect(false, "took " + fmt(ms) + " ms, target " + fmt(cr.budget_ms) + " ms");

    const bool ok = check.failed() == 0;
    failed += ok ? 0 : 1;
    std::cout << cr.id << ' ' << (ok ? "PASS" : "FAIL") << "  " << cr.title << " (" << static_cast<long>(ms)
              << " ms)\n";
    for (const auto& f : check.failures()) std::cout << "    " << f << '\n';
    if (check.failed() > check.failures().size())
      std::cout << "    ... " << check.failed() - check.failures().size() << " more\n";
  }
  return failed == 0 ? 0 : 1;
}
