#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gg/chunkstore.hpp"
#include "gg/embedding.hpp"
#include "gg/llm.hpp"
#include "gg/model.hpp"
#include "gg/prompts.hpp"
#include "gg/vectorstore.hpp"

namespace gg::pipeline {

enum class QueryMode { Fixed, PerDiagnosis };

struct PipelineConfig {
  std::size_t n_queries = 5;
  QueryMode query_mode = QueryMode::Fixed;
  std::size_t k = 4;
  double temperature = 0.0;
  std::size_t max_tokens = 2048;

  void validate() const;
};

/// Milliseconds from an arbitrary origin. Stage timings are differences of
/// two readings, so a constant clock yields zero timings.
using Clock = std::function<double()>;
Clock steady_clock();
Clock frozen_clock();

using StateObserver = std::function<void(const std::string& note_id, PipelineState state)>;

/// Everything a note evaluation needs. References must outlive the call.
struct Dependencies {
  const vectorstore::VectorIndex& index;
  const ChunkStore& chunks;
  const embedding::Embedder& embedder;
  llm::LlmBackend& llm;
  const prompts::PromptSet& prompts;
  PipelineConfig config;
  Clock clock = steady_clock();
  StateObserver observer;
};

/// Parses JSON from a model reply, re-prompting once on failure. `accept`
/// validates the parsed value and throws StructuredOutputError to reject it.
/// A second failure throws StructuredOutputError.
void ask_json(llm::LlmBackend& llm, llm::LlmRequest request, const prompts::Template& reprompt,
              const std::function<void(const nlohmann::json&)>& accept);

/// Findings whose evidence quote is not a substring of the note are dropped
/// with a warning. Diagnoses repeated case-insensitively are merged.
std::vector<DiagnosisFinding> run_extractor(const MedicalNote& note, llm::LlmBackend& llm,
                                            const prompts::PromptSet& prompts, const PipelineConfig& cfg,
                                            std::vector<std::string>& warnings);

/// Number of queries the agent must return for the given mode.
std::size_t target_query_count(const PipelineConfig& cfg, std::span<const DiagnosisFinding> findings);

/// Deduplicates (case-insensitively), truncates, and pads `proposed` to
/// exactly `n` queries. Padding order: "guidelines for {diagnosis}" per
/// finding, "clinical guidelines {specialty}", "treatment guidelines for
/// {diagnosis}" per finding, then "clinical guidelines {specialty} (2)", ...
std::vector<std::string> normalize_queries(std::vector<std::string> proposed, std::size_t n,
                                           std::span<const DiagnosisFinding> findings, const std::string& specialty);

std::vector<std::string> run_query_agent(const MedicalNote& note, std::span<const DiagnosisFinding> findings,
                                         llm::LlmBackend& llm, const prompts::PromptSet& prompts,
                                         const PipelineConfig& cfg, std::vector<std::string>& warnings);

/// Throws ConfigError if the embedder or chunk store does not match the index.
EvidenceBundle run_retriever(std::span<const std::string> queries, const vectorstore::VectorIndex& index,
                             const ChunkStore& chunks, const embedding::Embedder& embedder, std::size_t k);

/// One judgment per finding, in finding order. Findings without treatments are
/// judged MissingTreatment locally and never sent to the model.
std::vector<Judgment> run_scorer(std::span<const DiagnosisFinding> findings, const EvidenceBundle& evidence,
                                 llm::LlmBackend& llm, const prompts::PromptSet& prompts, const PipelineConfig& cfg,
                                 std::vector<std::string>& warnings);

/// Drives one note through every stage. Never throws for stage failures; the
/// returned report is Failed with the stage named and earlier artifacts kept.
NoteReport evaluate_note(const MedicalNote& note, const Dependencies& deps);

/// Evaluates notes on up to `workers` threads; results are in input order.
/// Throws ConfigError if workers > 1 with a backend that is not thread-safe.
std::vector<NoteReport> evaluate_batch(std::span<const MedicalNote> notes, const Dependencies& deps,
                                       std::size_t workers);

/// Reads notes JSONL ({"id", "specialty", "text"}). Duplicate ids and empty
/// texts are record errors.
std::vector<MedicalNote> load_notes(const std::filesystem::path& path);

}  // namespace gg::pipeline
