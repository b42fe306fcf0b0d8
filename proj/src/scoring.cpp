#include "gg/scoring.hpp"

#include <cmath>
#include <map>

#include "gg/errors.hpp"

namespace gg::scoring {

Tally tally(std::span<const Judgment> judgments) {
  Tally t;
  for (const auto& j : judgments) {
    if (j.status == JudgmentStatus::Followed) {
      ++t.followed;
    } else {
      ++t.not_followed;
    }
  }
  return t;
}

std::optional<double> compute_score(double followed, double not_followed) {
  if (!(followed >= 0.0) || !(not_followed >= 0.0) || !std::isfinite(followed) || !std::isfinite(not_followed)) {
    throw Error("score counts must be finite and non-negative");
  }
  const double total = followed + not_followed;
  if (total == 0.0) return std::nullopt;
  return followed / total;
}

NoteScore score_note(std::span<const Judgment> judgments) {
  const Tally t = tally(judgments);
  return {t.followed, t.not_followed,
          compute_score(static_cast<double>(t.followed), static_cast<double>(t.not_followed))};
}

std::vector<SpecialtyRow> aggregate_specialty(std::span<const ScoredNote> notes) {
  struct Sums {
    std::size_t followed = 0;
    std::size_t not_followed = 0;
    std::size_t count = 0;
  };
  std::map<std::string, Sums> groups;
  for (const auto& n : notes) {
    auto& g = groups[n.specialty];
    g.followed += n.score.followed;
    g.not_followed += n.score.not_followed;
    ++g.count;
  }
  std::vector<SpecialtyRow> rows;
  rows.reserve(groups.size());
  for (const auto& [specialty, g] : groups) {
    const double count = static_cast<double>(g.count);
    rows.push_back({specialty, static_cast<double>(g.followed) / count, static_cast<double>(g.not_followed) / count,
                    compute_score(static_cast<double>(g.followed), static_cast<double>(g.not_followed)), g.count});
  }
  return rows;
}

std::vector<SpecialtyRow> aggregate_reports(std::span<const NoteReport> reports) {
  std::vector<ScoredNote> scored;
  for (const auto& r : reports) {
    if (!r.done() || !r.score) continue;
    scored.push_back({r.specialty, *r.score});
  }
  return aggregate_specialty(scored);
}

}  // namespace gg::scoring
