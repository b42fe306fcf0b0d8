#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gg/corpus.hpp"

namespace gg {

using corpus::ChunkRef;

struct MedicalNote {
  std::string id;
  std::string specialty;
  std::string text;
};

inline constexpr std::size_t kTypicalNoteMinWords = 300;
inline constexpr std::size_t kTypicalNoteMaxWords = 1000;

struct DiagnosisFinding {
  std::string diagnosis;
  std::vector<std::string> treatments;
  std::string note_evidence;  // verbatim substring of the note
};

struct EvidenceHit {
  ChunkRef chunk_ref;
  double score = 0.0;
  std::size_t rank = 0;
  std::string source;
  std::string title;
  std::string text;
};

struct QueryEvidence {
  std::string query;
  std::vector<EvidenceHit> hits;
};

/// Per-query retrieval results. A chunk retrieved by several queries appears
/// under each of them; flattened() lists it once.
struct EvidenceBundle {
  std::vector<QueryEvidence> per_query;

  /// Unique hits in first-seen order (query order, then rank).
  std::vector<EvidenceHit> flattened() const;
  bool contains(const ChunkRef& ref) const;
};

enum class JudgmentStatus { Followed, NotFollowed, MissingTreatment };

std::string_view status_name(JudgmentStatus status);
/// Accepts the canonical names case-insensitively, ignoring spaces,
/// underscores and hyphens ("not followed", "NOT_FOLLOWED").
std::optional<JudgmentStatus> parse_status(std::string_view text);

struct Judgment {
  std::string diagnosis;
  JudgmentStatus status = JudgmentStatus::NotFollowed;
  std::string rationale;
  std::vector<ChunkRef> cited_chunks;
};

struct NoteScore {
  std::size_t followed = 0;
  std::size_t not_followed = 0;
  std::optional<double> score;  // null when there is nothing to score

  bool operator==(const NoteScore&) const = default;
};

/// Pipeline progress for one note. Transitions only move forward through
/// this list; Failed may replace any stage's successor and is terminal.
enum class PipelineState { Pending, Extracting, Querying, Retrieving, Scoring, Done, Failed };

std::string_view state_name(PipelineState state);
std::optional<PipelineState> parse_state(std::string_view text);

struct StageTiming {
  PipelineState stage = PipelineState::Pending;
  double millis = 0.0;
};

struct NoteReport {
  std::string note_id;
  std::string specialty;
  std::size_t word_count = 0;
  PipelineState status = PipelineState::Pending;  // Done or Failed once finished
  std::optional<PipelineState> failed_stage;
  std::string error;
  std::vector<DiagnosisFinding> findings;
  std::vector<std::string> queries;
  EvidenceBundle evidence;
  std::vector<Judgment> judgments;
  std::optional<NoteScore> score;
  std::vector<std::string> warnings;
  std::vector<StageTiming> timings;

  bool done() const { return status == PipelineState::Done; }
};

}  // namespace gg
