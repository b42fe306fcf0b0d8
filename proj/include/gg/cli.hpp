#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gg/config.hpp"
#include "gg/report.hpp"
#include "gg/vectorstore.hpp"

namespace gg::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
  kOk = 0,
  kEvaluationFailures = 1,
  kUsageError = 2,
  kDataError = 3,
};

/// Current UTC time as "YYYY-MM-DDTHH:MM:SSZ".
std::string now_utc_iso();

struct IngestOptions {
  fs::path corpus;
  fs::path output;
  bool force = false;
};

struct IngestResult {
  std::size_t documents = 0;
  std::size_t chunks = 0;
  std::string fingerprint;
  std::vector<RecordError> skipped;
};

IngestResult cmd_ingest(const Config& config, const IngestOptions& options);

struct IndexOptions {
  fs::path chunks;
  fs::path output;
  bool force = false;
  std::string timestamp;  // empty: now_utc_iso()
};

/// Texts per embed call while building; bounds memory for large corpora.
inline constexpr std::size_t kIndexEmbedBatch = 1024;

vectorstore::IndexMetadata cmd_index(const Config& config, const IndexOptions& options);

struct EvalOptions {
  fs::path notes;
  fs::path index;
  fs::path chunks;
  fs::path out_dir = "runs";
  std::string run_id;     // empty: derived from the timestamp
  std::string timestamp;  // non-empty pins generated_at and zeroes stage timings
  bool keep_going = false;
  bool force = false;
};

struct EvalResult {
  fs::path run_dir;
  report::RunReport run;
  std::size_t done = 0;
  std::size_t failed = 0;
};

/// Writes notes/<id>.json and notes/<id>.dot per note plus table.csv and
/// run.json under out_dir/run_id.
EvalResult cmd_eval(const Config& config, const EvalOptions& options);

/// Re-derives the specialty table from a run directory's note reports,
/// verifies it against run.json, and renders it.
std::string cmd_report(const fs::path& run_dir, report::TableFormat format);

struct SelftestOptions {
  fs::path fixtures;       // empty: the fixture set shipped with the sources
  fs::path work_dir;       // empty: a fresh temporary directory
  bool update_goldens = false;
};

/// Runs ingest -> index -> eval -> report on the bundled fixtures with the
/// hash embedder and the mock LLM, then compares against the goldens.
int cmd_selftest(const SelftestOptions& options, std::ostream& out, std::ostream& err);

/// Byte comparison of two directory trees. Returns one line per difference
/// ("missing: x", "unexpected: x", "differs: x (line n)").
std::vector<std::string> diff_trees(const fs::path& expected, const fs::path& actual);

/// Entry point behind the `gg` executable.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const EnvLookup& env = process_env());

}  // namespace gg::cli
