#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gg/model.hpp"

namespace gg::scoring {

struct Tally {
  std::size_t followed = 0;
  std::size_t not_followed = 0;

  bool operator==(const Tally&) const = default;
};

/// Followed counts +1 followed. NotFollowed and MissingTreatment each count
/// +1 not followed.
Tally tally(std::span<const Judgment> judgments);

/// followed / (followed + not_followed), or nullopt when both are zero.
/// Accepts fractional inputs so that per-specialty means can be scored.
std::optional<double> compute_score(double followed, double not_followed);

NoteScore score_note(std::span<const Judgment> judgments);

struct SpecialtyRow {
  std::string specialty;
  double mean_followed = 0.0;
  double mean_not_followed = 0.0;
  std::optional<double> score;
  std::size_t note_count = 0;

  bool operator==(const SpecialtyRow&) const = default;
};

struct ScoredNote {
  std::string specialty;
  NoteScore score;
};

/// One row per specialty, sorted by specialty name. The row score is
/// compute_score(sum F, sum N), which equals compute_score over the means.
std::vector<SpecialtyRow> aggregate_specialty(std::span<const ScoredNote> notes);

/// Aggregates the Done reports; Failed reports are left out.
std::vector<SpecialtyRow> aggregate_reports(std::span<const NoteReport> reports);

}  // namespace gg::scoring
