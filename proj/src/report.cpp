#include "gg/report.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "gg/errors.hpp"
#include "gg/text.hpp"

namespace gg::report {
namespace {

using nlohmann::json;

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string dot_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': break;
      default: out += c;
    }
  }
  return out + "\"";
}

const char* status_color(JudgmentStatus s) {
  switch (s) {
    case JudgmentStatus::Followed: return "green";
    case JudgmentStatus::NotFollowed: return "red";
    case JudgmentStatus::MissingTreatment: return "orange";
  }
  return "gray";
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional_number(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

PipelineState read_state(const json& j) {
  const auto s = parse_state(j.get<std::string>());
  if (!s) throw Error("unknown pipeline state \"" + j.get<std::string>() + "\"");
  return *s;
}

ChunkRef read_ref(const json& j) {
  auto ref = ChunkRef::parse(j.get<std::string>());
  if (!ref) throw Error("malformed chunk ref \"" + j.get<std::string>() + "\"");
  return *ref;
}

json row_to_json(const scoring::SpecialtyRow& r) {
  return {{"specialty", r.specialty},
          {"mean_followed", r.mean_followed},
          {"mean_not_followed", r.mean_not_followed},
          {"score", optional_number(r.score)},
          {"note_count", r.note_count}};
}

}  // namespace

std::string note_file_stem(const std::string& note_id) {
  std::string out;
  for (char c : note_id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                    c == '_' || c == '-';
    out += ok ? c : '_';
  }
  if (out.empty() || out.front() == '.') out.insert(out.begin(), '_');
  return out;
}

RunReport make_run_report(std::string run_id, std::string generated_at, ConfigSnapshot config,
                          std::span<const NoteReport> reports) {
  RunReport run;
  run.run_id = std::move(run_id);
  run.generated_at = std::move(generated_at);
  run.config = std::move(config);
  for (const auto& r : reports) {
    const std::string stem = "notes/" + note_file_stem(r.note_id);
    run.notes.push_back({r.note_id, r.specialty, r.status, stem + ".json", r.done() ? stem + ".dot" : ""});
  }
  run.specialties = scoring::aggregate_reports(reports);
  return run;
}

void verify_run_report(const RunReport& run, std::span<const NoteReport> reports) {
  for (const auto& ref : run.notes) {
    const bool found = std::any_of(reports.begin(), reports.end(), [&](const NoteReport& r) {
      return r.note_id == ref.note_id && r.status == ref.status;
    });
    if (!found) throw Error("run report references note \"" + ref.note_id + "\" with no matching note report");
  }
  const auto rows = scoring::aggregate_reports(reports);
  if (rows.size() != run.specialties.size()) {
    throw Error("run report has " + std::to_string(run.specialties.size()) + " specialty rows; note reports give " +
                std::to_string(rows.size()));
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& a = rows[i];
    const auto& b = run.specialties[i];
    const bool same = a.specialty == b.specialty && a.note_count == b.note_count &&
                      a.mean_followed == b.mean_followed && a.mean_not_followed == b.mean_not_followed &&
                      a.score == b.score;
    if (!same) throw Error("specialty row \"" + b.specialty + "\" does not match its note reports");
  }
}

json to_json(const NoteReport& r) {
  json findings = json::array();
  for (const auto& f : r.findings) {
    findings.push_back({{"diagnosis", f.diagnosis}, {"treatments", f.treatments}, {"evidence", f.note_evidence}});
  }
  json evidence = json::array();
  for (const auto& q : r.evidence.per_query) {
    json hits = json::array();
    for (const auto& h : q.hits) {
      hits.push_back({{"chunk", h.chunk_ref.str()},
                      {"rank", h.rank},
                      {"score", h.score},
                      {"source", h.source},
                      {"title", h.title},
                      {"text", h.text}});
    }
    evidence.push_back({{"query", q.query}, {"hits", std::move(hits)}});
  }
  json judgments = json::array();
  for (const auto& j : r.judgments) {
    json cited = json::array();
    for (const auto& c : j.cited_chunks) cited.push_back(c.str());
    judgments.push_back({{"diagnosis", j.diagnosis},
                         {"status", status_name(j.status)},
                         {"rationale", j.rationale},
                         {"cited_chunks", std::move(cited)}});
  }
  json timings = json::object();
  for (const auto& t : r.timings) timings[std::string(state_name(t.stage))] = t.millis;

  json score = nullptr;
  if (r.score) {
    score = {{"followed", r.score->followed},
             {"not_followed", r.score->not_followed},
             {"score", optional_number(r.score->score)}};
  }
  return {{"schema_version", kNoteReportSchema},
          {"note_id", r.note_id},
          {"specialty", r.specialty},
          {"word_count", r.word_count},
          {"status", state_name(r.status)},
          {"failed_stage", r.failed_stage ? json(state_name(*r.failed_stage)) : json(nullptr)},
          {"error", r.error.empty() ? json(nullptr) : json(r.error)},
          {"findings", std::move(findings)},
          {"queries", r.queries},
          {"evidence", std::move(evidence)},
          {"judgments", std::move(judgments)},
          {"score", std::move(score)},
          {"warnings", r.warnings},
          {"timings_ms", std::move(timings)}};
}

NoteReport note_report_from_json(const json& j) {
  if (j.value("schema_version", std::string()) != kNoteReportSchema) {
    throw Error("not a note report (expected schema_version \"" + std::string(kNoteReportSchema) + "\")");
  }
  NoteReport r;
  try {
    r.note_id = j.at("note_id").get<std::string>();
    r.specialty = j.at("specialty").get<std::string>();
    r.word_count = j.at("word_count").get<std::size_t>();
    r.status = read_state(j.at("status"));
    if (!j.at("failed_stage").is_null()) r.failed_stage = read_state(j.at("failed_stage"));
    if (!j.at("error").is_null()) r.error = j.at("error").get<std::string>();
    for (const auto& f : j.at("findings")) {
      r.findings.push_back({f.at("diagnosis").get<std::string>(), f.at("treatments").get<std::vector<std::string>>(),
                            f.at("evidence").get<std::string>()});
    }
    r.queries = j.at("queries").get<std::vector<std::string>>();
    for (const auto& q : j.at("evidence")) {
      QueryEvidence qe{q.at("query").get<std::string>(), {}};
      for (const auto& h : q.at("hits")) {
        qe.hits.push_back({read_ref(h.at("chunk")), h.at("score").get<double>(), h.at("rank").get<std::size_t>(),
                           h.at("source").get<std::string>(), h.at("title").get<std::string>(),
                           h.at("text").get<std::string>()});
      }
      r.evidence.per_query.push_back(std::move(qe));
    }
    for (const auto& jd : j.at("judgments")) {
      Judgment out;
      out.diagnosis = jd.at("diagnosis").get<std::string>();
      const auto status = parse_status(jd.at("status").get<std::string>());
      if (!status) throw Error("unknown judgment status in note report");
      out.status = *status;
      out.rationale = jd.at("rationale").get<std::string>();
      for (const auto& c : jd.at("cited_chunks")) out.cited_chunks.push_back(read_ref(c));
      r.judgments.push_back(std::move(out));
    }
    if (const auto& s = j.at("score"); !s.is_null()) {
      r.score = NoteScore{s.at("followed").get<std::size_t>(), s.at("not_followed").get<std::size_t>(),
                          read_optional_number(s.at("score"))};
    }
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    // Timings come back in pipeline order regardless of key order.
    for (const auto& [name, ms] : j.at("timings_ms").items()) {
      r.timings.push_back({read_state(json(name)), ms.get<double>()});
    }
    std::sort(r.timings.begin(), r.timings.end(),
              [](const StageTiming& a, const StageTiming& b) { return a.stage < b.stage; });
  } catch (const json::exception& e) {
    throw Error(std::string("malformed note report: ") + e.what());
  }
  return r;
}

json to_json(const RunReport& run) {
  json notes = json::array();
  std::size_t failed = 0;
  for (const auto& n : run.notes) {
    if (n.status != PipelineState::Done) ++failed;
    notes.push_back({{"note_id", n.note_id},
                     {"specialty", n.specialty},
                     {"status", state_name(n.status)},
                     {"report", n.json_file},
                     {"graph", n.dot_file.empty() ? json(nullptr) : json(n.dot_file)}});
  }
  json rows = json::array();
  for (const auto& r : run.specialties) rows.push_back(row_to_json(r));
  return {{"schema_version", kRunReportSchema},
          {"run_id", run.run_id},
          {"generated_at", run.generated_at},
          {"config",
           {{"embedder_id", run.config.embedder_id},
            {"corpus_fingerprint", run.config.corpus_fingerprint},
            {"model", run.config.model},
            {"query_mode", run.config.query_mode},
            {"n_queries", run.config.n_queries},
            {"k", run.config.k}}},
          {"notes", std::move(notes)},
          {"specialties", std::move(rows)},
          {"summary", {{"notes", run.notes.size()}, {"done", run.notes.size() - failed}, {"failed", failed}}}};
}

RunReport run_report_from_json(const json& j) {
  if (j.value("schema_version", std::string()) != kRunReportSchema) {
    throw Error("not a run report (expected schema_version \"" + std::string(kRunReportSchema) + "\")");
  }
  RunReport run;
  try {
    run.run_id = j.at("run_id").get<std::string>();
    run.generated_at = j.at("generated_at").get<std::string>();
    const auto& c = j.at("config");
    run.config = {c.at("embedder_id").get<std::string>(), c.at("corpus_fingerprint").get<std::string>(),
                  c.at("model").get<std::string>(),       c.at("query_mode").get<std::string>(),
                  c.at("n_queries").get<std::size_t>(),   c.at("k").get<std::size_t>()};
    for (const auto& n : j.at("notes")) {
      run.notes.push_back({n.at("note_id").get<std::string>(), n.at("specialty").get<std::string>(),
                           read_state(n.at("status")), n.at("report").get<std::string>(),
                           n.at("graph").is_null() ? std::string() : n.at("graph").get<std::string>()});
    }
    for (const auto& r : j.at("specialties")) {
      run.specialties.push_back({r.at("specialty").get<std::string>(), r.at("mean_followed").get<double>(),
                                 r.at("mean_not_followed").get<double>(), read_optional_number(r.at("score")),
                                 r.at("note_count").get<std::size_t>()});
    }
  } catch (const json::exception& e) {
    throw Error(std::string("malformed run report: ") + e.what());
  }
  return run;
}

std::string emit_json(const NoteReport& report) { return to_json(report).dump(2) + "\n"; }

std::string emit_json(const RunReport& run) { return to_json(run).dump(2) + "\n"; }

std::string emit_table(std::span<const scoring::SpecialtyRow> rows, TableFormat format) {
  const std::vector<std::string> header{"Specialty", "Followed", "Not followed", "Score"};
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) {
    cells.push_back({r.specialty, fixed2(r.mean_followed), fixed2(r.mean_not_followed),
                     r.score ? fixed2(*r.score) : "n/a"});
  }

  std::string out;
  if (format == TableFormat::Csv) {
    auto line = [&](const std::vector<std::string>& row) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out += ',';
        out += csv_field(row[i]);
      }
      out += "\n";
    };
    line(header);
    for (const auto& row : cells) line(row);
    return out;
  }

  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  auto line = [&](const std::vector<std::string>& row) {
    std::string l;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) l += "  ";
      const std::string pad(width[i] - row[i].size(), ' ');
      // Specialty left-aligned, numbers right-aligned.
      l += i == 0 ? row[i] + pad : pad + row[i];
    }
    while (!l.empty() && l.back() == ' ') l.pop_back();
    out += l + "\n";
  };
  line(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out += std::string(total + 2 * (width.size() - 1), '-') + "\n";
  for (const auto& row : cells) line(row);
  return out;
}

std::string emit_dot(const NoteReport& report) {
  if (!report.done()) throw Error("cannot draw note \"" + report.note_id + "\": evaluation did not complete");

  std::map<ChunkRef, std::string> sources;
  for (const auto& hit : report.evidence.flattened()) sources.emplace(hit.chunk_ref, hit.source);

  std::string out = "digraph " + dot_quote("adherence:" + report.note_id) + " {\n";
  out += "  rankdir=TB;\n";
  out += "  node [fontname=\"Helvetica\"];\n";
  std::string root_label = report.note_id;
  if (!report.specialty.empty()) root_label += "\n" + report.specialty;
  if (report.score && report.score->score) root_label += "\nscore " + fixed2(*report.score->score);
  out += "  \"note\" [label=" + dot_quote(root_label) + ", shape=box, style=\"rounded,filled\", fillcolor=\"lightgray\"];\n";

  std::map<ChunkRef, std::string> leaf_ids;
  for (std::size_t i = 0; i < report.findings.size(); ++i) {
    const auto& f = report.findings[i];
    const std::string dx = "dx" + std::to_string(i + 1);
    const auto key = text::fold_key(f.diagnosis);
    const Judgment* judgment = nullptr;
    for (const auto& j : report.judgments) {
      if (text::fold_key(j.diagnosis) == key) {
        judgment = &j;
        break;
      }
    }
    const std::string status = judgment ? std::string(status_name(judgment->status)) : "unjudged";
    out += "  " + dot_quote(dx) + " [label=" + dot_quote(f.diagnosis + "\n" + status) +
           ", shape=ellipse, style=filled, fillcolor=\"" + (judgment ? status_color(judgment->status) : "gray") +
           "\"];\n";
    out += "  \"note\" -> " + dot_quote(dx) + ";\n";
    for (std::size_t t = 0; t < f.treatments.size(); ++t) {
      const std::string tx = dx + "_tx" + std::to_string(t + 1);
      out += "  " + dot_quote(tx) + " [label=" + dot_quote(f.treatments[t]) + ", shape=box];\n";
      out += "  " + dot_quote(dx) + " -> " + dot_quote(tx) + ";\n";
    }
    if (!judgment) continue;
    for (const auto& ref : judgment->cited_chunks) {
      auto [it, inserted] = leaf_ids.emplace(ref, "g" + std::to_string(leaf_ids.size() + 1));
      if (inserted) {
        const auto src = sources.find(ref);
        const std::string source = src == sources.end() ? "unknown" : src->second;
        out += "  " + dot_quote(it->second) + " [label=" +
               dot_quote(source + ":" + ref.doc_id + "#" + std::to_string(ref.chunk_index)) +
               ", shape=note, style=filled, fillcolor=\"lightyellow\"];\n";
      }
      out += "  " + dot_quote(dx) + " -> " + dot_quote(it->second) + " [style=dashed];\n";
    }
  }
  out += "}\n";
  return out;
}

}  // namespace gg::report
