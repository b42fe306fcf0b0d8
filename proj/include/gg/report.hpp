#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gg/model.hpp"
#include "gg/scoring.hpp"

namespace gg::report {

inline constexpr const char* kNoteReportSchema = "gg.note_report/1";
inline constexpr const char* kRunReportSchema = "gg.run_report/1";

struct ConfigSnapshot {
  std::string embedder_id;
  std::string corpus_fingerprint;
  std::string model;
  std::string query_mode;  // "fixed" or "per_diagnosis"
  std::size_t n_queries = 0;
  std::size_t k = 0;
};

struct NoteRef {
  std::string note_id;
  std::string specialty;
  PipelineState status = PipelineState::Pending;
  std::string json_file;  // relative to the run directory
  std::string dot_file;   // empty for Failed notes
};

struct RunReport {
  std::string run_id;
  std::string generated_at;  // injected, never sampled here
  ConfigSnapshot config;
  std::vector<NoteRef> notes;
  std::vector<scoring::SpecialtyRow> specialties;
};

/// File stem for a note id: characters outside [A-Za-z0-9._-] become '_'.
std::string note_file_stem(const std::string& note_id);

RunReport make_run_report(std::string run_id, std::string generated_at, ConfigSnapshot config,
                          std::span<const NoteReport> reports);

/// Recomputes the specialty rows from the note reports and throws Error if
/// they differ from `run.specialties` or if a referenced note is missing.
void verify_run_report(const RunReport& run, std::span<const NoteReport> reports);

nlohmann::json to_json(const NoteReport& report);
NoteReport note_report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunReport& run);
RunReport run_report_from_json(const nlohmann::json& j);

/// Pretty-printed with sorted keys and a trailing newline. Byte-stable for
/// identical inputs.
std::string emit_json(const NoteReport& report);
std::string emit_json(const RunReport& run);

enum class TableFormat { Csv, AlignedText };

/// Header "Specialty,Followed,Not followed,Score" plus one row per specialty.
/// Numbers use two decimals; a null score prints as "n/a".
std::string emit_table(std::span<const scoring::SpecialtyRow> rows, TableFormat format);

/// Top-down adherence graph: note root -> diagnoses (filled green, red or
/// orange for Followed, NotFollowed, MissingTreatment) -> treatments, plus
/// dashed edges to shared guideline leaves labelled "source:doc_id#chunk".
/// Throws Error for a report that is not Done.
std::string emit_dot(const NoteReport& report);

}  // namespace gg::report
