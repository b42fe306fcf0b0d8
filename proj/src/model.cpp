#include "gg/model.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <utility>

namespace gg {
namespace {

constexpr std::array<std::pair<std::string_view, PipelineState>, 7> kStates{{
    {"Pending", PipelineState::Pending},
    {"Extracting", PipelineState::Extracting},
    {"Querying", PipelineState::Querying},
    {"Retrieving", PipelineState::Retrieving},
    {"Scoring", PipelineState::Scoring},
    {"Done", PipelineState::Done},
    {"Failed", PipelineState::Failed},
}};

std::string squash(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == ' ' || c == '_' || c == '-') continue;
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::vector<EvidenceHit> EvidenceBundle::flattened() const {
  std::vector<EvidenceHit> out;
  std::set<ChunkRef> seen;
  for (const auto& q : per_query) {
    for (const auto& hit : q.hits) {
      if (seen.insert(hit.chunk_ref).second) out.push_back(hit);
    }
  }
  return out;
}

bool EvidenceBundle::contains(const ChunkRef& ref) const {
  return std::any_of(per_query.begin(), per_query.end(), [&](const QueryEvidence& q) {
    return std::any_of(q.hits.begin(), q.hits.end(), [&](const EvidenceHit& h) { return h.chunk_ref == ref; });
  });
}

std::string_view status_name(JudgmentStatus status) {
  switch (status) {
    case JudgmentStatus::Followed: return "Followed";
    case JudgmentStatus::NotFollowed: return "NotFollowed";
    case JudgmentStatus::MissingTreatment: return "MissingTreatment";
  }
  return "NotFollowed";
}

std::optional<JudgmentStatus> parse_status(std::string_view text) {
  const auto key = squash(text);
  if (key == "followed") return JudgmentStatus::Followed;
  if (key == "notfollowed") return JudgmentStatus::NotFollowed;
  if (key == "missingtreatment") return JudgmentStatus::MissingTreatment;
  return std::nullopt;
}

std::string_view state_name(PipelineState state) {
  for (const auto& [name, s] : kStates) {
    if (s == state) return name;
  }
  return "Pending";
}

std::optional<PipelineState> parse_state(std::string_view text) {
  for (const auto& [name, s] : kStates) {
    if (name == text) return s;
  }
  return std::nullopt;
}

}  // namespace gg
