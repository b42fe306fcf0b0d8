#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "gg/errors.hpp"
#include "gg/scoring.hpp"
#include "test_support.hpp"

using namespace gg;
using namespace gg::scoring;
using gg::testing::Rng;

namespace {

std::vector<Judgment> judgments(std::initializer_list<JudgmentStatus> statuses) {
  std::vector<Judgment> out;
  int i = 0;
  for (auto s : statuses) out.push_back({"dx" + std::to_string(i++), s, "", {}});
  return out;
}

constexpr auto F = JudgmentStatus::Followed;
constexpr auto NF = JudgmentStatus::NotFollowed;
constexpr auto MT = JudgmentStatus::MissingTreatment;

}  // namespace

TEST_CASE("tally examples") {
  CHECK(tally(judgments({F, F, NF})) == Tally{2, 1});
  CHECK(tally(judgments({MT})) == Tally{0, 1});
  CHECK(tally(judgments({})) == Tally{0, 0});
}

TEST_CASE("compute_score examples") {
  CHECK(*compute_score(1.5, 0.5) == doctest::Approx(0.75));
  CHECK(*compute_score(1.5, 2.0) == doctest::Approx(0.428571).epsilon(1e-5));
  CHECK_FALSE(compute_score(0, 0));
  CHECK(*compute_score(2.0, 0.5) == doctest::Approx(0.80));
  CHECK_THROWS_AS(compute_score(-1, 1), Error);
  CHECK_THROWS_AS(compute_score(1, NAN), Error);
}

TEST_CASE("score_note") {
  const auto s = score_note(judgments({F, MT, NF, F}));
  CHECK(s.followed == 2);
  CHECK(s.not_followed == 2);
  CHECK(*s.score == doctest::Approx(0.5));
  CHECK_FALSE(score_note(judgments({})).score);
}

TEST_CASE("aggregate_specialty examples") {
  SUBCASE("two notes average to 1.5 / 0.5") {
    const std::vector<ScoredNote> notes{{"Family Medicine", {2, 1, 2.0 / 3}}, {"Family Medicine", {1, 0, 1.0}}};
    const auto rows = aggregate_specialty(notes);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].mean_followed == 1.5);
    CHECK(rows[0].mean_not_followed == 0.5);
    CHECK(*rows[0].score == doctest::Approx(0.75));
    CHECK(rows[0].note_count == 2);
  }
  SUBCASE("single note 1 / 1") {
    const std::vector<ScoredNote> notes{{"Pediatrics", {1, 1, 0.5}}};
    const auto rows = aggregate_specialty(notes);
    REQUIRE(rows.size() == 1);
    CHECK(*rows[0].score == doctest::Approx(0.5));
  }
  SUBCASE("empty input") { CHECK(aggregate_specialty(std::span<const ScoredNote>{}).empty()); }
  SUBCASE("all-null group") {
    const std::vector<ScoredNote> notes{{"X", {0, 0, std::nullopt}}};
    const auto rows = aggregate_specialty(notes);
    REQUIRE(rows.size() == 1);
    CHECK_FALSE(rows[0].score);
  }
}

TEST_CASE("aggregate_reports ignores failed reports") {
  NoteReport done;
  done.specialty = "A";
  done.status = PipelineState::Done;
  done.score = NoteScore{1, 0, 1.0};
  NoteReport failed = done;
  failed.status = PipelineState::Failed;
  failed.score.reset();
  const std::vector<NoteReport> reports{done, failed};
  const auto rows = aggregate_reports(reports);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].note_count == 1);
}

TEST_CASE("published specialty rows reproduce from the formula") {
  struct Row {
    const char* specialty;
    double followed, not_followed, printed;
  };
  const Row rows[] = {{"Family Medicine", 1.5, 0.5, 0.75}, {"Pediatrics", 1.0, 1.0, 0.50},
                      {"Cardiology", 1.0, 0.5, 0.67},      {"Oncology", 1.0, 0.5, 0.67},
                      {"Endocrinology", 2.0, 0.5, 0.80},   {"Pulmonology", 1.5, 2.0, 0.43},
                      {"Orthopedics", 1.0, 1.0, 0.50}};
  for (const auto& r : rows) {
    CAPTURE(r.specialty);
    CHECK(std::abs(*compute_score(r.followed, r.not_followed) - r.printed) <= 0.005);
  }
}

TEST_CASE("Gastroenterology row is inconsistent with the formula (expected discrepancy)") {
  // Printed 2.5 / 1.0 / 0.17; the formula gives 2.5 / 3.5 = 0.714. The printed score is treated as a typo.
  const double s = *compute_score(2.5, 1.0);
  CHECK(s == doctest::Approx(0.714286).epsilon(1e-5));
  CHECK(std::abs(s - 0.17) > 0.5);
}

TEST_CASE("property: bounds, permutation and ratio identities") {
  Rng rng(0x5c0);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Judgment> js;
    for (std::size_t i = rng.uniform(0, 12); i > 0; --i) {
      js.push_back({"d", static_cast<JudgmentStatus>(rng.uniform(0, 2)), "", {}});
    }
    const auto t = tally(js);
    CHECK(t.followed + t.not_followed == js.size());
    const auto s = score_note(js);
    if (js.empty()) {
      CHECK_FALSE(s.score);
    } else {
      REQUIRE(s.score);
      CHECK(*s.score >= 0.0);
      CHECK(*s.score <= 1.0);
      CHECK((*s.score == 1.0) == (t.not_followed == 0 && t.followed > 0));
      CHECK((*s.score == 0.0) == (t.followed == 0 && t.not_followed > 0));
    }
    auto shuffled = js;
    std::shuffle(shuffled.begin(), shuffled.end(), rng.engine());
    CHECK(tally(shuffled) == t);

    std::vector<ScoredNote> notes;
    static const char* names[] = {"Cardiology", "Oncology", "Pediatrics"};
    for (std::size_t i = rng.uniform(1, 10); i > 0; --i) {
      const std::size_t f = rng.uniform(0, 5), n = rng.uniform(0, 5);
      notes.push_back({names[rng.uniform(0, 2)], {f, n, compute_score(double(f), double(n))}});
    }
    const auto rows = aggregate_specialty(notes);
    auto permuted = notes;
    std::shuffle(permuted.begin(), permuted.end(), rng.engine());
    CHECK(aggregate_specialty(permuted) == rows);
    CHECK(std::is_sorted(rows.begin(), rows.end(),
                         [](const auto& a, const auto& b) { return a.specialty < b.specialty; }));
    for (const auto& row : rows) {
      double sf = 0, sn = 0;
      std::size_t count = 0;
      for (const auto& n : notes) {
        if (n.specialty != row.specialty) continue;
        sf += double(n.score.followed);
        sn += double(n.score.not_followed);
        ++count;
      }
      CHECK(row.note_count == count);
      CHECK(row.mean_followed == doctest::Approx(sf / double(count)));
      CHECK(row.mean_not_followed == doctest::Approx(sn / double(count)));
      const auto by_sums = compute_score(sf, sn);
      const auto by_means = compute_score(sf / double(count), sn / double(count));
      CHECK(by_sums.has_value() == by_means.has_value());
      if (by_sums) {
        CHECK(*by_sums == doctest::Approx(*by_means).epsilon(1e-12));
        CHECK(*row.score == doctest::Approx(*by_sums).epsilon(1e-12));
      }
    }
  }
}
