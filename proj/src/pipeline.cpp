#include "gg/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_set>

#include "gg/log.hpp"
#include "gg/scoring.hpp"
#include "gg/text.hpp"

namespace gg::pipeline {
namespace {

using nlohmann::json;

std::string render_findings(std::span<const DiagnosisFinding> findings) {
  json arr = json::array();
  for (const auto& f : findings) arr.push_back({{"diagnosis", f.diagnosis}, {"treatments", f.treatments}});
  return arr.dump(2);
}

std::string render_evidence(const EvidenceBundle& evidence) {
  std::string out;
  for (const auto& hit : evidence.flattened()) {
    out += "[" + hit.chunk_ref.str() + "] (" + hit.source;
    if (!hit.title.empty()) out += "; " + hit.title;
    out += ") " + hit.text + "\n\n";
  }
  if (out.empty()) out = "(no guideline passages were retrieved)\n";
  return out;
}

const json& unwrap_array(const json& j, const char* key) {
  if (j.is_object()) {
    auto it = j.find(key);
    if (it != j.end()) return *it;
  }
  return j;
}

std::string required_string(const json& item, const char* key) {
  auto it = item.find(key);
  if (it == item.end() || !it->is_string()) {
    throw StructuredOutputError(std::string("each item needs a string \"") + key + "\"");
  }
  return it->get<std::string>();
}

std::string optional_string(const json& item, const char* key) {
  auto it = item.find(key);
  if (it == item.end() || it->is_null()) return {};
  if (!it->is_string()) throw StructuredOutputError(std::string("\"") + key + "\" must be a string");
  return it->get<std::string>();
}

std::vector<std::string> optional_string_array(const json& item, const char* key) {
  auto it = item.find(key);
  if (it == item.end() || it->is_null()) return {};
  if (!it->is_array()) throw StructuredOutputError(std::string("\"") + key + "\" must be an array of strings");
  std::vector<std::string> out;
  for (const auto& v : *it) {
    if (!v.is_string()) throw StructuredOutputError(std::string("\"") + key + "\" must be an array of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::vector<std::string> dedupe_folded(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& raw : items) {
    const std::string t(text::trim(raw));
    if (t.empty()) continue;
    if (seen.insert(text::fold_key(t)).second) out.push_back(t);
  }
  return out;
}

// Accepts "doc/3", "doc#3" and bracketed "[doc/3]".
std::optional<ChunkRef> parse_citation(std::string_view raw) {
  std::string s(text::trim(raw));
  if (s.size() >= 2 && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
  if (auto hash = s.rfind('#'); hash != std::string::npos && s.find('/', hash) == std::string::npos) s[hash] = '/';
  return ChunkRef::parse(s);
}

llm::LlmRequest make_request(const std::string& tag, std::string system, std::string user, const PipelineConfig& cfg) {
  llm::LlmRequest req;
  req.tag = tag;
  req.temperature = cfg.temperature;
  req.max_tokens = cfg.max_tokens;
  req.messages.push_back({llm::Role::System, std::move(system)});
  req.messages.push_back({llm::Role::User, std::move(user)});
  return req;
}

void check_compatibility(const vectorstore::VectorIndex& index, const ChunkStore& chunks,
                         const embedding::Embedder& embedder) {
  if (embedder.identity() != index.metadata().embedder_id) {
    throw ConfigError("embedder \"" + embedder.identity() + "\" does not match the index, which was built with \"" +
                      index.metadata().embedder_id + "\"");
  }
  if (embedder.config().output_dim() != index.dim()) {
    throw ConfigError("embedder produces " + std::to_string(embedder.config().output_dim()) +
                      "-dim vectors; index dim is " + std::to_string(index.dim()));
  }
  if (chunks.fingerprint() != index.metadata().corpus_fingerprint) {
    throw ConfigError("chunk store fingerprint " + chunks.fingerprint() + " does not match index fingerprint " +
                      index.metadata().corpus_fingerprint);
  }
}

}  // namespace

void PipelineConfig::validate() const {
  if (n_queries == 0) throw ConfigError("n_queries must be at least 1");
  if (k == 0) throw ConfigError("retrieval k must be at least 1");
  if (!(temperature >= 0.0)) throw ConfigError("temperature must be non-negative");
  if (max_tokens == 0) throw ConfigError("max_tokens must be positive");
}

Clock steady_clock() {
  return [] {
    const auto now = std::chrono::steady_clock::now().time_since_epoch();
    return std::chrono::duration<double, std::milli>(now).count();
  };
}

Clock frozen_clock() {
  return [] { return 0.0; };
}

void ask_json(llm::LlmBackend& llm, llm::LlmRequest request, const prompts::Template& reprompt,
              const std::function<void(const json&)>& accept) {
  auto attempt = [&](const std::string& reply) -> std::optional<std::string> {
    try {
      accept(llm::extract_json_block(reply));
      return std::nullopt;
    } catch (const StructuredOutputError& e) {
      return std::string(e.what());
    } catch (const json::exception& e) {
      return std::string(e.what());
    }
  };

  const std::string first = llm::complete(request, llm);
  const auto first_error = attempt(first);
  if (!first_error) return;

  log::warn(request.tag + ": unusable reply, re-prompting: " + *first_error);
  request.messages.push_back({llm::Role::Assistant, first});
  request.messages.push_back({llm::Role::User, reprompt.render({{"error", *first_error}})});
  const std::string second = llm::complete(request, llm);
  if (const auto second_error = attempt(second)) {
    throw StructuredOutputError(request.tag + " reply unusable after re-prompt: " + *second_error);
  }
}

std::vector<DiagnosisFinding> run_extractor(const MedicalNote& note, llm::LlmBackend& llm,
                                            const prompts::PromptSet& prompts, const PipelineConfig& cfg,
                                            std::vector<std::string>& warnings) {
  const std::map<std::string, std::string> values{{"specialty", note.specialty}, {"note", note.text}};
  auto request = make_request("extractor", prompts.extractor.system.render(values),
                              prompts.extractor.user.render(values), cfg);

  std::vector<DiagnosisFinding> parsed;
  ask_json(llm, std::move(request), prompts.reprompt, [&](const json& j) {
    const json& arr = unwrap_array(j, "findings");
    if (!arr.is_array()) throw StructuredOutputError("expected a JSON array of findings");
    std::vector<DiagnosisFinding> out;
    for (const auto& item : arr) {
      if (!item.is_object()) throw StructuredOutputError("each finding must be a JSON object");
      DiagnosisFinding f;
      f.diagnosis = std::string(text::trim(required_string(item, "diagnosis")));
      if (f.diagnosis.empty()) throw StructuredOutputError("a finding has an empty diagnosis");
      f.treatments = optional_string_array(item, "treatments");
      f.note_evidence = optional_string(item, "evidence");
      out.push_back(std::move(f));
    }
    parsed = std::move(out);
  });

  std::vector<DiagnosisFinding> findings;
  std::map<std::string, std::size_t> by_key;
  for (auto& f : parsed) {
    const std::string quote(text::trim(f.note_evidence));
    if (quote.empty() || note.text.find(quote) == std::string::npos) {
      warnings.push_back("dropped finding \"" + f.diagnosis + "\": evidence quote not found in note");
      log::warn(note.id + ": " + warnings.back());
      continue;
    }
    f.note_evidence = quote;
    const std::string key = text::fold_key(f.diagnosis);
    if (auto it = by_key.find(key); it != by_key.end()) {
      auto& merged = findings[it->second];
      merged.treatments.insert(merged.treatments.end(), f.treatments.begin(), f.treatments.end());
      merged.treatments = dedupe_folded(merged.treatments);
      warnings.push_back("merged repeated diagnosis \"" + f.diagnosis + "\"");
      continue;
    }
    f.treatments = dedupe_folded(f.treatments);
    by_key.emplace(key, findings.size());
    findings.push_back(std::move(f));
  }
  return findings;
}

std::size_t target_query_count(const PipelineConfig& cfg, std::span<const DiagnosisFinding> findings) {
  if (cfg.query_mode == QueryMode::PerDiagnosis) return std::max<std::size_t>(1, findings.size());
  return cfg.n_queries;
}

std::vector<std::string> normalize_queries(std::vector<std::string> proposed, std::size_t n,
                                           std::span<const DiagnosisFinding> findings, const std::string& specialty) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  auto push = [&](const std::string& candidate) {
    if (out.size() >= n) return;
    const std::string q(text::trim(candidate));
    if (q.empty()) return;
    if (seen.insert(text::fold_key(q)).second) out.push_back(q);
  };
  const std::string specialty_query = std::string(text::trim("clinical guidelines " + specialty));

  for (const auto& p : proposed) push(p);
  for (const auto& f : findings) push("guidelines for " + f.diagnosis);
  push(specialty_query);
  for (const auto& f : findings) push("treatment guidelines for " + f.diagnosis);
  for (std::size_t i = 2; out.size() < n; ++i) push(specialty_query + " (" + std::to_string(i) + ")");
  return out;
}

std::vector<std::string> run_query_agent(const MedicalNote& note, std::span<const DiagnosisFinding> findings,
                                         llm::LlmBackend& llm, const prompts::PromptSet& prompts,
                                         const PipelineConfig& cfg, std::vector<std::string>& warnings) {
  const std::size_t n = target_query_count(cfg, findings);
  const std::map<std::string, std::string> values{{"specialty", note.specialty},
                                                  {"note", note.text},
                                                  {"findings", render_findings(findings)},
                                                  {"n_queries", std::to_string(n)}};
  auto request = make_request("query", prompts.query.system.render(values), prompts.query.user.render(values), cfg);

  std::vector<std::string> proposed;
  ask_json(llm, std::move(request), prompts.reprompt, [&](const json& j) {
    const json& arr = unwrap_array(j, "queries");
    if (!arr.is_array()) throw StructuredOutputError("expected a JSON array of query strings");
    std::vector<std::string> out;
    for (const auto& q : arr) {
      if (!q.is_string()) throw StructuredOutputError("every query must be a string");
      out.push_back(q.get<std::string>());
    }
    proposed = std::move(out);
  });

  const std::size_t usable = dedupe_folded(proposed).size();
  auto queries = normalize_queries(std::move(proposed), n, findings, note.specialty);
  if (usable < n) {
    warnings.push_back("query agent returned " + std::to_string(usable) + " usable queries; padded to " +
                       std::to_string(n));
  } else if (usable > n) {
    warnings.push_back("query agent returned " + std::to_string(usable) + " queries; kept the first " +
                       std::to_string(n));
  }
  return queries;
}

EvidenceBundle run_retriever(std::span<const std::string> queries, const vectorstore::VectorIndex& index,
                             const ChunkStore& chunks, const embedding::Embedder& embedder, std::size_t k) {
  check_compatibility(index, chunks, embedder);
  EvidenceBundle bundle;
  if (queries.empty()) return bundle;
  if (index.empty()) {
    for (const auto& q : queries) bundle.per_query.push_back({q, {}});
    return bundle;
  }
  const auto vectors = embedder.embed(queries);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    QueryEvidence qe{queries[i], {}};
    for (const auto& hit : index.search_top_k(vectors[i], k)) {
      const StoredChunk* stored = chunks.find(hit.chunk_ref);
      if (!stored) throw Error("index entry " + hit.chunk_ref.str() + " is missing from the chunk store");
      qe.hits.push_back({hit.chunk_ref, hit.score, hit.rank, stored->source, stored->title, stored->chunk.text});
    }
    bundle.per_query.push_back(std::move(qe));
  }
  return bundle;
}

std::vector<Judgment> run_scorer(std::span<const DiagnosisFinding> findings, const EvidenceBundle& evidence,
                                 llm::LlmBackend& llm, const prompts::PromptSet& prompts, const PipelineConfig& cfg,
                                 std::vector<std::string>& warnings) {
  std::vector<DiagnosisFinding> to_judge;
  std::set<std::string> keys;
  for (const auto& f : findings) {
    if (!f.treatments.empty() && keys.insert(text::fold_key(f.diagnosis)).second) to_judge.push_back(f);
  }

  std::map<std::string, Judgment> judged;
  if (!to_judge.empty()) {
    const std::map<std::string, std::string> values{{"findings", render_findings(to_judge)},
                                                    {"evidence", render_evidence(evidence)}};
    auto request =
        make_request("scorer", prompts.scorer.system.render(values), prompts.scorer.user.render(values), cfg);

    ask_json(llm, std::move(request), prompts.reprompt, [&](const json& j) {
      const json& arr = unwrap_array(j, "judgments");
      if (!arr.is_array()) throw StructuredOutputError("expected a JSON array of judgments");
      std::map<std::string, Judgment> local;
      std::vector<std::string> notes;
      for (const auto& item : arr) {
        if (!item.is_object()) throw StructuredOutputError("each judgment must be a JSON object");
        const std::string diagnosis = required_string(item, "diagnosis");
        const std::string key = text::fold_key(diagnosis);
        if (!keys.count(key)) {
          notes.push_back("ignored judgment for unlisted diagnosis \"" + diagnosis + "\"");
          continue;
        }
        if (local.count(key)) {
          notes.push_back("ignored repeated judgment for \"" + diagnosis + "\"");
          continue;
        }
        const std::string status_text = required_string(item, "status");
        const auto status = parse_status(status_text);
        if (!status) throw StructuredOutputError("unknown status \"" + status_text + "\" for \"" + diagnosis + "\"");
        if (*status == JudgmentStatus::MissingTreatment) {
          throw StructuredOutputError("\"" + diagnosis +
                                      "\" has documented treatments, so its status must be Followed or NotFollowed");
        }
        Judgment jd;
        jd.status = *status;
        jd.rationale = optional_string(item, "rationale");
        for (const auto& raw : optional_string_array(item, "cited_chunks")) {
          const auto ref = parse_citation(raw);
          if (!ref || !evidence.contains(*ref)) {
            notes.push_back("stripped citation \"" + raw + "\" for \"" + diagnosis + "\": not in retrieved evidence");
            continue;
          }
          if (std::find(jd.cited_chunks.begin(), jd.cited_chunks.end(), *ref) == jd.cited_chunks.end()) {
            jd.cited_chunks.push_back(*ref);
          }
        }
        if (jd.cited_chunks.empty()) {
          throw StructuredOutputError("judgment for \"" + diagnosis + "\" cites no retrieved guideline chunk");
        }
        local.emplace(key, std::move(jd));
      }
      for (const auto& f : to_judge) {
        if (!local.count(text::fold_key(f.diagnosis))) {
          throw StructuredOutputError("no judgment for diagnosis \"" + f.diagnosis + "\"");
        }
      }
      judged = std::move(local);
      warnings.insert(warnings.end(), notes.begin(), notes.end());
    });
  }

  std::vector<Judgment> out;
  out.reserve(findings.size());
  for (const auto& f : findings) {
    if (f.treatments.empty()) {
      out.push_back({f.diagnosis, JudgmentStatus::MissingTreatment, "No treatment is documented for this diagnosis.",
                     {}});
      continue;
    }
    Judgment j = judged.at(text::fold_key(f.diagnosis));
    j.diagnosis = f.diagnosis;
    out.push_back(std::move(j));
  }
  return out;
}

NoteReport evaluate_note(const MedicalNote& note, const Dependencies& deps) {
  deps.config.validate();
  NoteReport report;
  report.note_id = note.id;
  report.specialty = note.specialty;
  report.word_count = corpus::tokenize(note.text).size();
  if (report.word_count < kTypicalNoteMinWords || report.word_count > kTypicalNoteMaxWords) {
    report.warnings.push_back("note has " + std::to_string(report.word_count) + " words, outside the typical " +
                              std::to_string(kTypicalNoteMinWords) + "-" + std::to_string(kTypicalNoteMaxWords) +
                              " range");
  }

  auto enter = [&](PipelineState s) {
    report.status = s;
    if (deps.observer) deps.observer(note.id, s);
  };
  auto run_stage = [&](PipelineState stage, const std::function<void()>& body) {
    enter(stage);
    const double start = deps.clock();
    bool ok = true;
    try {
      body();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      ok = false;
      report.failed_stage = stage;
      report.error = e.what();
      log::error(note.id + ": " + std::string(state_name(stage)) + " failed: " + e.what());
    }
    report.timings.push_back({stage, deps.clock() - start});
    if (!ok) enter(PipelineState::Failed);
    return ok;
  };

  enter(PipelineState::Pending);
  const bool done =
      run_stage(PipelineState::Extracting,
                [&] {
                  report.findings = run_extractor(note, deps.llm, deps.prompts, deps.config, report.warnings);
                }) &&
      run_stage(PipelineState::Querying,
                [&] {
                  report.queries =
                      run_query_agent(note, report.findings, deps.llm, deps.prompts, deps.config, report.warnings);
                }) &&
      run_stage(PipelineState::Retrieving,
                [&] {
                  report.evidence =
                      run_retriever(report.queries, deps.index, deps.chunks, deps.embedder, deps.config.k);
                }) &&
      run_stage(PipelineState::Scoring, [&] {
        report.judgments =
            run_scorer(report.findings, report.evidence, deps.llm, deps.prompts, deps.config, report.warnings);
      });
  if (done) {
    report.score = scoring::score_note(report.judgments);
    enter(PipelineState::Done);
  }
  return report;
}

std::vector<NoteReport> evaluate_batch(std::span<const MedicalNote> notes, const Dependencies& deps,
                                       std::size_t workers) {
  deps.config.validate();
  if (workers == 0) workers = 1;
  if (workers > 1 && !deps.llm.supports_concurrency()) {
    throw ConfigError("the " + deps.llm.model() + " LLM backend is sequential; use a single worker");
  }
  check_compatibility(deps.index, deps.chunks, deps.embedder);

  std::vector<NoteReport> reports(notes.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < notes.size(); i = next++) {
      try {
        reports[i] = evaluate_note(notes[i], deps);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  const std::size_t n_threads = std::min(workers, notes.size());
  if (n_threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  return reports;
}

std::vector<MedicalNote> load_notes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open notes file " + path.string());
  std::vector<MedicalNote> notes;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    MedicalNote note;
    try {
      const auto j = json::parse(line);
      note.id = j.at("id").get<std::string>();
      note.specialty = j.value("specialty", std::string());
      note.text = j.at("text").get<std::string>();
    } catch (const json::exception& e) {
      throw RecordError(line_no, path.string() + ": " + e.what());
    }
    if (note.id.empty()) throw RecordError(line_no, "note id is empty");
    if (text::trim(note.text).empty()) throw RecordError(line_no, "note \"" + note.id + "\" has no text");
    if (!ids.insert(note.id).second) throw RecordError(line_no, "duplicate note id \"" + note.id + "\"");
    notes.push_back(std::move(note));
  }
  return notes;
}

}  // namespace gg::pipeline
