#include "gg/cli.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "gg/chunkstore.hpp"
#include "gg/errors.hpp"
#include "gg/log.hpp"
#include "gg/pipeline.hpp"
#include "gg/prompts.hpp"
#include "gg/scoring.hpp"

#ifndef GG_SELFTEST_DIR
#define GG_SELFTEST_DIR "fixtures/selftest"
#endif

namespace gg::cli {
namespace {

constexpr const char* kSelftestTimestamp = "2000-01-01T00:00:00Z";

void refuse_overwrite(const fs::path& path, bool force) {
  if (fs::exists(path) && !force) {
    throw ConfigError(path.string() + " already exists (use --force to overwrite)");
  }
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out.flush()) throw IoError("write failed: " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string query_mode_name(pipeline::QueryMode mode) {
  return mode == pipeline::QueryMode::Fixed ? "fixed" : "per_diagnosis";
}

std::unique_ptr<llm::LlmBackend> make_llm(const Config& config) {
  if (config.llm.backend == LlmBackendKind::Mock) {
    return std::make_unique<llm::MockLlm>(llm::load_transcript(config.llm.transcript), config.llm.model);
  }
  llm::RemoteOptions opts;
  opts.base_url = config.llm.base_url;
  opts.api_key = config.llm.api_key;
  opts.model = config.llm.model;
  opts.retry = config.llm.retry;
  opts.max_in_flight = config.llm.max_in_flight;
  return std::make_unique<llm::RemoteLlm>(std::move(opts));
}

std::string safe_run_id(const std::string& timestamp) {
  std::string id;
  for (char c : timestamp) {
    if (c == ':') continue;
    id += c;
  }
  return "run-" + id;
}

std::vector<NoteReport> load_note_reports(const fs::path& run_dir, const report::RunReport& run) {
  std::vector<NoteReport> reports;
  for (const auto& ref : run.notes) {
    const fs::path file = run_dir / ref.json_file;
    if (!fs::exists(file)) throw IoError("run report references missing note file " + file.string());
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(file));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(file.string() + ": " + e.what());
    }
    reports.push_back(report::note_report_from_json(j));
  }
  return reports;
}

std::set<std::string> relative_files(const fs::path& root) {
  std::set<std::string> out;
  if (!fs::is_directory(root)) return out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out.insert(fs::relative(e.path(), root).generic_string());
  }
  return out;
}

std::size_t first_differing_line(const std::string& a, const std::string& b) {
  std::size_t line = 1;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i] != b[i]) return line;
    if (a[i] == '\n') ++line;
  }
  return line;
}

}  // namespace

std::string now_utc_iso() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

IngestResult cmd_ingest(const Config& config, const IngestOptions& options) {
  config.validate();
  refuse_overwrite(options.output, options.force);
  IngestResult result;
  const ChunkStore store =
      build_chunk_store(options.corpus, config.fields, config.strictness, config.chunk, &result.skipped);
  store.save(options.output);
  result.documents = store.document_count();
  result.chunks = store.chunks().size();
  result.fingerprint = store.fingerprint();
  return result;
}

vectorstore::IndexMetadata cmd_index(const Config& config, const IndexOptions& options) {
  config.validate();
  refuse_overwrite(options.output, options.force);
  const ChunkStore store = ChunkStore::load(options.chunks);
  const embedding::Embedder embedder(config.embedder);

  vectorstore::VectorIndex::Builder builder(config.embedder.output_dim());
  const auto& chunks = store.chunks();
  for (std::size_t begin = 0; begin < chunks.size(); begin += kIndexEmbedBatch) {
    const std::size_t end = std::min(chunks.size(), begin + kIndexEmbedBatch);
    std::vector<std::string> texts;
    texts.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) texts.push_back(chunks[i].chunk.text);
    const auto vectors = embedder.embed(texts);
    for (std::size_t i = begin; i < end; ++i) builder.add(chunks[i].chunk.ref(), vectors[i - begin]);
  }
  vectorstore::IndexMetadata meta{store.fingerprint(), embedder.identity(),
                                  options.timestamp.empty() ? now_utc_iso() : options.timestamp};
  const auto index = std::move(builder).build(meta);
  vectorstore::save_index(index, options.output);
  return meta;
}

EvalResult cmd_eval(const Config& config, const EvalOptions& options) {
  config.validate_for_eval();
  // Everything that can be checked locally is loaded before the first LLM call.
  if (!fs::exists(options.index)) throw IoError("index not found: " + options.index.string());
  if (!fs::exists(options.chunks)) throw IoError("chunk store not found: " + options.chunks.string());
  const auto index = vectorstore::load_index(options.index);
  const auto store = ChunkStore::load(options.chunks);
  const auto prompts = prompts::PromptSet::load(config.prompt_dir);
  const auto notes = pipeline::load_notes(options.notes);
  const embedding::Embedder embedder(config.embedder);

  const bool pinned = !options.timestamp.empty();
  const std::string generated_at = pinned ? options.timestamp : now_utc_iso();
  EvalResult result;
  const std::string run_id = options.run_id.empty() ? safe_run_id(generated_at) : options.run_id;
  result.run_dir = options.out_dir / run_id;
  if (fs::exists(result.run_dir) && !fs::is_empty(result.run_dir)) {
    if (!options.force) {
      throw ConfigError("run directory " + result.run_dir.string() + " is not empty (use --force to overwrite)");
    }
  }

  auto llm = make_llm(config);
  pipeline::Dependencies deps{index, store, embedder, *llm, prompts, config.pipeline,
                              pinned ? pipeline::frozen_clock() : pipeline::steady_clock(),
                              [](const std::string& id, PipelineState s) {
                                log::debug("note " + id + ": " + std::string(state_name(s)));
                              }};
  const auto reports = pipeline::evaluate_batch(notes, deps, config.workers);

  report::ConfigSnapshot snapshot{embedder.identity(),     store.fingerprint(),   llm->model(),
                                  query_mode_name(config.pipeline.query_mode), config.pipeline.n_queries,
                                  config.pipeline.k};
  result.run = report::make_run_report(run_id, generated_at, snapshot, reports);

  if (fs::exists(result.run_dir)) fs::remove_all(result.run_dir);
  fs::create_directories(result.run_dir / "notes");
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& ref = result.run.notes[i];
    write_file(result.run_dir / ref.json_file, report::emit_json(reports[i]));
    if (!ref.dot_file.empty()) write_file(result.run_dir / ref.dot_file, report::emit_dot(reports[i]));
    if (reports[i].done()) {
      ++result.done;
    } else {
      ++result.failed;
    }
  }
  write_file(result.run_dir / "table.csv", report::emit_table(result.run.specialties, report::TableFormat::Csv));
  write_file(result.run_dir / "run.json", report::emit_json(result.run));
  return result;
}

std::string cmd_report(const fs::path& run_dir, report::TableFormat format) {
  const fs::path run_file = run_dir / "run.json";
  if (!fs::exists(run_file)) throw IoError("not a run directory (no run.json): " + run_dir.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(run_file));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(run_file.string() + ": " + e.what());
  }
  const auto run = report::run_report_from_json(j);
  const auto reports = load_note_reports(run_dir, run);
  report::verify_run_report(run, reports);
  return report::emit_table(scoring::aggregate_reports(reports), format);
}

std::vector<std::string> diff_trees(const fs::path& expected, const fs::path& actual) {
  std::vector<std::string> diffs;
  const auto want = relative_files(expected);
  const auto have = relative_files(actual);
  for (const auto& f : want) {
    if (!have.count(f)) {
      diffs.push_back("missing: " + f);
      continue;
    }
    const auto a = read_file(expected / f);
    const auto b = read_file(actual / f);
    if (a != b) diffs.push_back("differs: " + f + " (line " + std::to_string(first_differing_line(a, b)) + ")");
  }
  for (const auto& f : have) {
    if (!want.count(f)) diffs.push_back("unexpected: " + f);
  }
  return diffs;
}

int cmd_selftest(const SelftestOptions& options, std::ostream& out, std::ostream& err) {
  const fs::path fixtures = options.fixtures.empty() ? fs::path(GG_SELFTEST_DIR) : options.fixtures;
  for (const char* name : {"config.toml", "corpus.jsonl", "notes.jsonl", "transcript.jsonl"}) {
    if (!fs::exists(fixtures / name)) {
      err << "selftest: fixture missing: " << (fixtures / name).string() << "\n";
      return kDataError;
    }
  }
  const fs::path golden = fixtures / "golden";
  if (!options.update_goldens && !fs::is_directory(golden)) {
    err << "selftest: golden directory missing: " << golden.string() << "\n";
    return kDataError;
  }

  fs::path work = options.work_dir;
  bool temporary = false;
  if (work.empty()) {
    work = fs::temp_directory_path() /
           ("gg-selftest-" + std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    temporary = true;
  }
  if (fs::exists(work)) fs::remove_all(work);
  fs::create_directories(work);

  // The user's GG_* variables must not leak into a reproducibility check.
  const EnvLookup no_env = [](const std::string&) -> std::optional<std::string> { return std::nullopt; };
  const Config config = load_config(fixtures / "config.toml", no_env);
  if (config.embedder.backend != embedding::BackendKind::DeterministicHash ||
      config.llm.backend != LlmBackendKind::Mock) {
    err << "selftest: fixture config must use the hash embedder and the mock LLM\n";
    return kUsageError;
  }

  cmd_ingest(config, {fixtures / "corpus.jsonl", work / "chunks.jsonl", true});
  cmd_index(config, {work / "chunks.jsonl", work / "index.ggix", true, kSelftestTimestamp});
  EvalOptions eval;
  eval.notes = fixtures / "notes.jsonl";
  eval.index = work / "index.ggix";
  eval.chunks = work / "chunks.jsonl";
  eval.out_dir = work;
  eval.run_id = "run";
  eval.timestamp = kSelftestTimestamp;
  eval.force = true;
  const auto result = cmd_eval(config, eval);
  const std::string table = cmd_report(result.run_dir, report::TableFormat::AlignedText);
  write_file(work / "report.txt", table);
  out << table;
  out << "notes: " << result.done << " done, " << result.failed << " failed\n";

  int code = kOk;
  if (options.update_goldens) {
    if (fs::exists(golden)) fs::remove_all(golden);
    fs::create_directories(golden);
    fs::copy(work, golden, fs::copy_options::recursive);
    out << "selftest: goldens updated in " << golden.string() << "\n";
  } else {
    const auto diffs = diff_trees(golden, work);
    for (const auto& d : diffs) err << "selftest: " << d << "\n";
    if (!diffs.empty()) {
      err << "selftest: FAILED (" << diffs.size() << " difference(s); output kept in " << work.string() << ")\n";
      return kEvaluationFailures;
    }
    out << "selftest: OK\n";
  }
  if (result.failed > 0) code = kEvaluationFailures;
  if (temporary && code == kOk) fs::remove_all(work);
  return code;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const EnvLookup& env) {
  CLI::App app{"Clinical guideline adherence evaluator"};
  app.name("gg");
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file;
  bool verbose = false;
  app.add_option("--config", config_file, "TOML configuration file");
  app.add_flag("-v,--verbose", verbose, "Log debug messages");

  // Flags shared by several commands; each only overrides when given.
  bool strict = false, lenient = false, force = false;
  std::optional<std::size_t> workers, k, queries;
  std::string mock;

  auto* ingest = app.add_subcommand("ingest", "Chunk a guideline corpus into a chunk store");
  IngestOptions ingest_opts;
  ingest->add_option("corpus", ingest_opts.corpus, "Corpus JSONL")->required();
  ingest->add_option("-o,--output", ingest_opts.output, "Chunk store to write")->required();
  ingest->add_flag("--strict", strict, "Abort on the first malformed record");
  ingest->add_flag("--lenient", lenient, "Skip malformed records with a warning");
  ingest->add_flag("--force", force, "Overwrite an existing output");

  auto* index = app.add_subcommand("index", "Embed a chunk store into a vector index");
  IndexOptions index_opts;
  index->add_option("chunks", index_opts.chunks, "Chunk store from `gg ingest`")->required();
  index->add_option("-o,--output", index_opts.output, "Index file to write")->required();
  index->add_option("--timestamp", index_opts.timestamp, "Pin built_at (ISO-8601 UTC)");
  index->add_flag("--force", force, "Overwrite an existing output");

  auto* eval = app.add_subcommand("eval", "Evaluate medical notes against the indexed guidelines");
  EvalOptions eval_opts;
  bool per_diagnosis = false;
  eval->add_option("notes", eval_opts.notes, "Notes JSONL")->required();
  eval->add_option("--index", eval_opts.index, "Index from `gg index`")->required();
  eval->add_option("--chunks", eval_opts.chunks, "Chunk store the index was built from")->required();
  eval->add_option("--out", eval_opts.out_dir, "Parent directory for run directories");
  eval->add_option("--run-id", eval_opts.run_id, "Run directory name");
  eval->add_option("--timestamp", eval_opts.timestamp, "Pin generated_at and zero stage timings");
  eval->add_option("--mock", mock, "Replay a scripted LLM transcript");
  eval->add_option("--workers", workers, "Notes evaluated concurrently");
  eval->add_option("--k", k, "Chunks retrieved per query");
  eval->add_option("--queries", queries, "Queries per note");
  eval->add_flag("--per-diagnosis", per_diagnosis, "One query per extracted diagnosis");
  eval->add_flag("--keep-going", eval_opts.keep_going, "Exit 0 even if some notes failed");
  eval->add_flag("--force", force, "Replace an existing run directory");

  auto* rep = app.add_subcommand("report", "Re-derive and print the specialty table of a run");
  fs::path run_dir;
  std::string format = "text";
  rep->add_option("run_dir", run_dir, "Run directory")->required();
  rep->add_option("--format", format, "text or csv")->check(CLI::IsMember({"text", "csv"}));

  auto* selftest = app.add_subcommand("selftest", "Offline end-to-end check against bundled goldens");
  SelftestOptions selftest_opts;
  selftest->add_option("--fixtures", selftest_opts.fixtures, "Fixture directory");
  selftest->add_option("--work", selftest_opts.work_dir, "Keep outputs in this directory");
  selftest->add_flag("--update-goldens", selftest_opts.update_goldens, "Rewrite the goldens from this run");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  struct SinkReset {
    log::Sink previous;
    ~SinkReset() { log::set_sink(std::move(previous)); }
  } sink_reset{log::set_sink([&err, verbose](log::Level level, std::string_view msg) {
    if (level == log::Level::Debug && !verbose) return;
    err << "[" << log::level_name(level) << "] " << msg << "\n";
  })};

  try {
    if (selftest->parsed()) return cmd_selftest(selftest_opts, out, err);

    if (rep->parsed()) {
      out << cmd_report(run_dir, format == "csv" ? report::TableFormat::Csv : report::TableFormat::AlignedText);
      return kOk;
    }

    if (strict && lenient) throw ConfigError("--strict and --lenient are mutually exclusive");
    Config config = load_config(config_file.empty() ? std::nullopt : std::optional<fs::path>(config_file), env);
    if (strict) config.strictness = corpus::Strictness::Abort;
    if (lenient) config.strictness = corpus::Strictness::Skip;
    if (workers) config.workers = *workers;
    if (k) config.pipeline.k = *k;
    if (queries) config.pipeline.n_queries = *queries;
    if (per_diagnosis) config.pipeline.query_mode = pipeline::QueryMode::PerDiagnosis;
    if (!mock.empty()) {
      config.llm.backend = LlmBackendKind::Mock;
      config.llm.transcript = mock;
    }

    if (ingest->parsed()) {
      ingest_opts.force = force;
      const auto r = cmd_ingest(config, ingest_opts);
      for (const auto& e : r.skipped) err << "skipped " << e.what() << "\n";
      out << "ingested " << r.documents << " documents into " << r.chunks << " chunks (fingerprint "
          << r.fingerprint << ")\n";
      return kOk;
    }
    if (index->parsed()) {
      index_opts.force = force;
      const auto meta = cmd_index(config, index_opts);
      out << "indexed " << index_opts.output.string() << " (" << meta.embedder_id << ")\n";
      return kOk;
    }
    if (eval->parsed()) {
      eval_opts.force = force;
      const auto r = cmd_eval(config, eval_opts);
      out << report::emit_table(r.run.specialties, report::TableFormat::AlignedText);
      out << "run " << r.run_dir.string() << ": " << r.done << " done, " << r.failed << " failed\n";
      if (r.failed > 0) {
        for (const auto& ref : r.run.notes) {
          if (ref.status == PipelineState::Failed) err << "failed: " << ref.note_id << " (see " << ref.json_file << ")\n";
        }
        return eval_opts.keep_going ? kOk : kEvaluationFailures;
      }
      return kOk;
    }
  } catch (const ConfigError& e) {
    err << "gg: config error: " << e.what() << "\n";
    return kUsageError;
  } catch (const IoError& e) {
    err << "gg: " << e.what() << "\n";
    return kDataError;
  } catch (const RecordError& e) {
    err << "gg: " << e.what() << "\n";
    return kDataError;
  } catch (const IndexCorruptError& e) {
    err << "gg: " << e.what() << "\n";
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "gg: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "gg: " << e.what() << "\n";
    return kDataError;
  }
  return kUsageError;
}

}  // namespace gg::cli
