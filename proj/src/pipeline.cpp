#include "codeseq/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <iostream>
#include <set>
#include <thread>

#include "codeseq/dataset.hpp"
#include "codeseq/eval.hpp"
#include "codeseq/problem.hpp"
#include "codeseq/text.hpp"

namespace codeseq {

namespace fs = std::filesystem;

namespace {

constexpr const char* kEntryFile = "entry.json";
constexpr const char* kFilterFile = "filter.json";
constexpr const char* kProblemFile = "problem.json";
constexpr const char* kVariantsFile = "variants.json";
constexpr const char* kTracesFile = "traces.json";
constexpr const char* kIngestSummary = "ingest_summary.json";
constexpr const char* kVariantsArtifact = "Resampled";

void check_keys(const Json& object, const char* where, std::initializer_list<const char*> allowed) {
  if (!object.is_object()) throw ConfigInvalid(std::string(where) + " must be an object");
  for (const auto& [key, value] : object.items()) {
    bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
    if (!known) throw ConfigInvalid(std::string("unknown key ") + where + "." + key);
  }
}

template <typename T>
void read_field(const Json& object, const char* key, T& out) {
  auto it = object.find(key);
  if (it == object.end() || it->is_null()) return;
  try {
    out = it->template get<T>();
  } catch (const Json::exception& e) {
    throw ConfigInvalid(std::string("field ") + key + ": " + e.what());
  }
}

fs::path resolve(const fs::path& base, const std::string& value) {
  fs::path p(value);
  return p.is_absolute() ? p : base / p;
}

void read_path(const Json& object, const char* key, const fs::path& base, fs::path& out) {
  std::string value;
  read_field(object, key, value);
  if (!value.empty()) out = resolve(base, value);
}

void read_path(const Json& object, const char* key, const fs::path& base, std::optional<fs::path>& out) {
  std::string value;
  read_field(object, key, value);
  if (!value.empty()) out = resolve(base, value);
}

AgentEndpoint read_endpoint(const Json& j, const char* where) {
  check_keys(j, where, {"base_url", "path", "model", "api_key_env"});
  AgentEndpoint e;
  read_field(j, "base_url", e.base_url);
  read_field(j, "path", e.path);
  read_field(j, "model", e.model);
  read_field(j, "api_key_env", e.api_key_env);
  return e;
}

void require_range(long long value, long long lo, long long hi, const char* name) {
  if (value < lo || value > hi) {
    throw ConfigInvalid(std::string(name) + " = " + std::to_string(value) + " is outside [" + std::to_string(lo) +
                        ", " + std::to_string(hi) + "]");
  }
}

void require_exists(const std::optional<fs::path>& path, const char* name) {
  if (path && !fs::exists(*path)) throw ConfigInvalid(std::string(name) + " does not exist: " + path->string());
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

bool is_rule_code(ReasonCode code) { return code != ReasonCode::AgentInsufficient; }

std::string join_codes(const std::vector<ReasonCode>& codes) {
  std::vector<std::string> names;
  for (auto c : codes) names.emplace_back(to_string(c));
  return join(names, ",");
}

fs::path with_suffix(fs::path path, const char* ext) { return path.replace_extension(ext); }

}  // namespace

const char* to_string(Subcommand command) {
  switch (command) {
    case Subcommand::Ingest: return "ingest";
    case Subcommand::Filter: return "filter";
    case Subcommand::Generate: return "generate";
    case Subcommand::Supervise: return "supervise";
    case Subcommand::Emit: return "emit";
    case Subcommand::Stats: return "stats";
    case Subcommand::Eval: return "eval";
    case Subcommand::All: return "all";
  }
  return "?";
}

std::optional<Subcommand> subcommand_from_string(std::string_view name) {
  for (auto c : {Subcommand::Ingest, Subcommand::Filter, Subcommand::Generate, Subcommand::Supervise, Subcommand::Emit,
                 Subcommand::Stats, Subcommand::Eval, Subcommand::All}) {
    if (name == to_string(c)) return c;
  }
  return std::nullopt;
}

PipelineConfig PipelineConfig::from_json(const Json& doc, const fs::path& base) {
  check_keys(doc, "config",
             {"corpus", "checkpoint_dir", "output", "filter", "agents", "limits", "sandbox", "workers",
              "resample_count", "seed", "eval", "tokenizer"});
  PipelineConfig c;
  c.checkpoint_dir = base / c.checkpoint_dir;
  c.dataset_path = base / c.dataset_path;
  c.stats_path = base / c.stats_path;
  c.eval_report_path = base / c.eval_report_path;

  if (auto it = doc.find("corpus"); it != doc.end()) {
    check_keys(*it, "corpus", {"records", "bfiles_dir"});
    std::vector<std::string> records;
    read_field(*it, "records", records);
    for (const auto& r : records) c.corpus_records.push_back(resolve(base, r));
    read_path(*it, "bfiles_dir", base, c.bfiles_dir);
  }
  read_path(doc, "checkpoint_dir", base, c.checkpoint_dir);
  if (auto it = doc.find("output"); it != doc.end()) {
    check_keys(*it, "output", {"dataset", "stats", "eval_report", "event_log"});
    read_path(*it, "dataset", base, c.dataset_path);
    read_path(*it, "stats", base, c.stats_path);
    read_path(*it, "eval_report", base, c.eval_report_path);
    read_path(*it, "event_log", base, c.event_log);
  }
  if (auto it = doc.find("filter"); it != doc.end()) {
    check_keys(*it, "filter", {"min_terms", "strict_crossref", "parse_retries"});
    read_field(*it, "min_terms", c.filter.min_terms);
    read_field(*it, "strict_crossref", c.filter.strict_crossref);
    read_field(*it, "parse_retries", c.filter.parse_retries);
  }
  if (auto it = doc.find("agents"); it != doc.end()) {
    check_keys(*it, "agents",
               {"prompt_dir", "max_retries", "initial_backoff_ms", "max_backoff_ms", "max_concurrent_requests",
                "resample_temperature", "audit_log", "mock_script", "working", "guiding"});
    read_path(*it, "prompt_dir", base, c.prompt_dir);
    read_field(*it, "max_retries", c.agents.retry.max_retries);
    long long initial = c.agents.retry.initial_delay.count();
    long long max_delay = c.agents.retry.max_delay.count();
    read_field(*it, "initial_backoff_ms", initial);
    read_field(*it, "max_backoff_ms", max_delay);
    c.agents.retry.initial_delay = std::chrono::milliseconds(initial);
    c.agents.retry.max_delay = std::chrono::milliseconds(max_delay);
    read_field(*it, "max_concurrent_requests", c.agents.max_concurrent_requests);
    read_field(*it, "resample_temperature", c.agents.resample_temperature);
    read_path(*it, "audit_log", base, c.audit_log);
    read_path(*it, "mock_script", base, c.mock_script);
    if (auto w = it->find("working"); w != it->end()) c.working = read_endpoint(*w, "agents.working");
    if (auto g = it->find("guiding"); g != it->end()) c.guiding = read_endpoint(*g, "agents.guiding");
  }
  if (auto it = doc.find("limits"); it != doc.end()) {
    check_keys(*it, "limits", {"max_rounds", "gen_retries", "time_limit_ms", "memory_limit_mb", "output_cap_bytes"});
    read_field(*it, "max_rounds", c.supervision.max_rounds);
    read_field(*it, "gen_retries", c.supervision.gen_retries);
    read_field(*it, "time_limit_ms", c.supervision.limits.time_limit_ms);
    read_field(*it, "memory_limit_mb", c.supervision.limits.memory_limit_mb);
    read_field(*it, "output_cap_bytes", c.supervision.limits.output_cap_bytes);
  }
  if (auto it = doc.find("sandbox"); it != doc.end()) {
    check_keys(*it, "sandbox", {"runner", "sessions"});
    read_path(*it, "runner", base, c.sandbox_runner);
    read_field(*it, "sessions", c.sandbox_sessions);
  }
  read_field(doc, "workers", c.workers);
  read_field(doc, "resample_count", c.resample_count);
  read_field(doc, "seed", c.seed);
  c.eval.seed = c.seed;
  if (auto it = doc.find("eval"); it != doc.end()) {
    check_keys(*it, "eval", {"n", "k", "prefix_len", "seed", "role"});
    read_field(*it, "n", c.eval.n);
    read_field(*it, "k", c.eval.k);
    read_field(*it, "prefix_len", c.eval.prefix_len);
    read_field(*it, "seed", c.eval.seed);
    std::string role;
    read_field(*it, "role", role);
    if (!role.empty()) {
      auto parsed = role_from_string(role);
      if (!parsed) throw ConfigInvalid("eval.role must be Working or Guiding, got " + role);
      c.eval.role = *parsed;
    }
  }
  if (auto it = doc.find("tokenizer"); it != doc.end()) {
    check_keys(*it, "tokenizer", {"vocab"});
    read_path(*it, "vocab", base, c.tokenizer_vocab);
  }
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  Json doc;
  try {
    doc = Json::parse(read_file(path));
  } catch (const std::exception& e) {
    throw ConfigInvalid("cannot read config " + path.string() + ": " + e.what());
  }
  return from_json(doc, fs::absolute(path).parent_path());
}

void PipelineConfig::validate() const {
  require_range(supervision.max_rounds, 0, 100, "limits.max_rounds");
  require_range(supervision.gen_retries, 0, 10, "limits.gen_retries");
  require_range(supervision.limits.time_limit_ms, 1, 600000, "limits.time_limit_ms");
  require_range(supervision.limits.memory_limit_mb, 1, 65536, "limits.memory_limit_mb");
  require_range(supervision.limits.output_cap_bytes, 1, 1 << 30, "limits.output_cap_bytes");
  require_range(static_cast<long long>(filter.min_terms), 1, 100000, "filter.min_terms");
  require_range(filter.parse_retries, 0, 10, "filter.parse_retries");
  require_range(agents.retry.max_retries, 0, 20, "agents.max_retries");
  require_range(agents.retry.initial_delay.count(), 0, 600000, "agents.initial_backoff_ms");
  require_range(agents.retry.max_delay.count(), 0, 3600000, "agents.max_backoff_ms");
  require_range(agents.max_concurrent_requests, 1, 1024, "agents.max_concurrent_requests");
  if (agents.resample_temperature < 0.0 || agents.resample_temperature > 2.0) {
    throw ConfigInvalid("agents.resample_temperature must lie in [0, 2]");
  }
  require_range(sandbox_sessions, 1, 1024, "sandbox.sessions");
  require_range(workers, 0, 1024, "workers");
  require_range(resample_count, 0, 100, "resample_count");
  require_range(static_cast<long long>(eval.n), 1, 1000000, "eval.n");
  require_range(static_cast<long long>(eval.prefix_len), 1, 10000, "eval.prefix_len");
  if (eval.k + 1 > eval.n) throw ConfigInvalid("eval.k must be smaller than eval.n");

  for (const auto& r : corpus_records) require_exists(r, "corpus record file");
  require_exists(bfiles_dir, "corpus.bfiles_dir");
  require_exists(prompt_dir, "agents.prompt_dir");
  require_exists(mock_script, "agents.mock_script");
  require_exists(sandbox_runner, "sandbox.runner");
  require_exists(tokenizer_vocab, "tokenizer.vocab");
  for (const auto* endpoint : {&working, &guiding}) {
    if (*endpoint && (*endpoint)->base_url.empty()) throw ConfigInvalid("agent endpoint without base_url");
  }
}

EventLog::EventLog(const std::optional<fs::path>& path, std::ostream* fallback) : out_(fallback) {
  if (path) {
    if (path->has_parent_path()) fs::create_directories(path->parent_path());
    file_.emplace(*path, std::ios::app);
    if (!*file_) throw std::runtime_error("cannot open event log " + path->string());
    out_ = &*file_;
  }
}

void EventLog::emit(std::string_view event, const Json& fields) {
  if (!out_) return;
  Json line{{"ts", utc_now()}, {"event", event}};
  for (const auto& [key, value] : fields.items()) line[key] = value;
  std::lock_guard lock(mutex_);
  *out_ << dump_json_line(line) << '\n';
  out_->flush();
}

PipelineDeps make_deps(const PipelineConfig& config, std::ostream* log_fallback) {
  PipelineDeps deps;
  auto registry = std::make_shared<const TemplateRegistry>(TemplateRegistry::load(config.prompt_dir));
  auto audit = config.audit_log ? std::make_shared<AuditLog>(*config.audit_log) : std::make_shared<AuditLog>();
  deps.client = std::make_shared<AgentClient>(registry, config.agents, audit);
  if (config.mock_script) {
    auto mock = MockBackend::load(*config.mock_script);
    deps.client->bind(AgentRole::Working, mock);
    deps.client->bind(AgentRole::Guiding, mock);
  } else {
    auto make = [](const AgentEndpoint& e) {
      return std::make_shared<HttpBackend>(HttpBackendConfig{e.base_url, e.path, e.model, e.api_key_env});
    };
    std::shared_ptr<ChatBackend> working;
    if (config.working) {
      working = make(*config.working);
      deps.client->bind(AgentRole::Working, working);
    }
    if (config.guiding) {
      deps.client->bind(AgentRole::Guiding, make(*config.guiding));
    } else if (working) {
      deps.client->bind(AgentRole::Guiding, working);
    }
  }
  if (config.sandbox_runner) {
    SubprocessSandboxConfig sandbox;
    sandbox.runner = *config.sandbox_runner;
    deps.sandbox_factory = subprocess_sandbox_factory(sandbox);
  } else {
    deps.sandbox_factory = []() -> std::unique_ptr<SandboxClient> {
      throw SandboxUnavailable("no sandbox runner configured");
    };
  }
  deps.tokenizer = make_tokenizer(config.tokenizer_vocab);
  deps.events = std::make_shared<EventLog>(config.event_log, log_fallback);
  return deps;
}

Pipeline::Pipeline(PipelineConfig config, PipelineDeps deps)
    : config_(std::move(config)), deps_(std::move(deps)), store_((config_.validate(), config_.checkpoint_dir)) {
  if (!deps_.events) deps_.events = std::make_shared<EventLog>(std::nullopt, nullptr);
  if (!deps_.tokenizer) deps_.tokenizer = make_tokenizer(std::nullopt);
}

int Pipeline::worker_count(bool uses_sandbox) const {
  int n = config_.workers > 0 ? config_.workers : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (uses_sandbox) n = std::min(n, config_.sandbox_sessions);
  return std::max(1, n);
}

RunSummary Pipeline::run(Subcommand command) {
  switch (command) {
    case Subcommand::Ingest: return ingest();
    case Subcommand::Filter: return filter();
    case Subcommand::Generate: return generate();
    case Subcommand::Supervise: return supervise();
    case Subcommand::Emit: return emit();
    case Subcommand::Stats: return stats();
    case Subcommand::Eval: return eval();
    case Subcommand::All: break;
  }
  RunSummary total;
  for (auto step : {&Pipeline::ingest, &Pipeline::filter, &Pipeline::generate, &Pipeline::supervise, &Pipeline::emit,
                    &Pipeline::stats}) {
    RunSummary part = (this->*step)();
    total.processed += part.processed;
    total.skipped += part.skipped;
    if (part.stats) total.stats = part.stats;
    if (part.fault) {
      total.fault = part.fault;
      break;
    }
  }
  return total;
}

SequenceEntry Pipeline::load_entry(const SequenceState& state) const {
  try {
    return entry_from_json(Json::parse(store_.read_artifact(state.sequence_id, kEntryFile)));
  } catch (const CheckpointCorrupt&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointCorrupt(state.sequence_id.str() + "/" + kEntryFile + ": " + e.what());
  }
}

RunSummary Pipeline::ingest() {
  if (config_.corpus_records.empty()) throw ConfigInvalid("corpus.records is empty");
  RunSummary summary;
  std::set<SequenceId> seen;
  std::size_t records_read = 0;
  Json errors = Json::array();

  for (const auto& file : config_.corpus_records) {
    const std::string text = read_file(file);
    for (auto& result : parse_internal_file(text)) {
      ++records_read;
      if (result.error) {
        const auto& err = *result.error;
        errors.push_back(Json{{"file", file.filename().string()},
                              {"record_line", result.first_line},
                              {"line", err.line()},
                              {"kind", to_string(err.kind())},
                              {"message", err.what()}});
        deps_.events->emit("ingest_error", errors.back());
        continue;
      }
      SequenceEntry entry = std::move(*result.entry);
      if (!seen.insert(entry.id).second) {
        deps_.events->emit("ingest_duplicate", {{"sequence_id", entry.id.str()}, {"file", file.string()}});
        continue;
      }
      if (store_.load_state(entry.id)) {
        ++summary.skipped;
        continue;
      }

      std::optional<std::string> corrupt;
      if (config_.bfiles_dir) {
        const fs::path bfile = *config_.bfiles_dir / ("b" + entry.id.str().substr(1) + ".txt");
        if (fs::exists(bfile)) {
          try {
            entry = merge_bfile(entry, parse_bfile(read_file(bfile)));
          } catch (const IngestError& e) {
            corrupt = std::string(to_string(ReasonCode::Corrupt)) + ": " + bfile.filename().string() + ": " + e.what();
          } catch (const std::invalid_argument& e) {
            corrupt = std::string(to_string(ReasonCode::Corrupt)) + ": " + bfile.filename().string() + ": " + e.what();
          }
        }
      }
      store_.write_artifact(entry.id, kEntryFile, dump_json(to_json(entry)));
      auto state = store_.create(entry.id, kEntryFile);
      if (corrupt) {
        store_.reject(state, *corrupt);
        deps_.events->emit("rejected", {{"sequence_id", entry.id.str()}, {"reason", *corrupt}});
      }
      deps_.events->emit("ingested", {{"sequence_id", entry.id.str()}, {"terms", entry.terms.size()}});
      ++summary.processed;
    }
  }
  Json ingest_summary{{"records_read", records_read}, {"ingested", seen.size()}, {"errors", errors}};
  write_file_atomic(store_.global_file(kIngestSummary), dump_json(ingest_summary));
  return summary;
}

RunSummary Pipeline::run_stage(Stage from, bool uses_sandbox, const char* stage_name, Step step) {
  RunSummary summary;
  std::vector<SequenceState> queue;
  for (const auto& id : store_.list()) {
    auto state = store_.load_state(id);
    if (state && state->stage == from) {
      queue.push_back(std::move(*state));
    } else {
      ++summary.skipped;
    }
  }

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::atomic<bool> stop{false};
  std::mutex fault_mutex;

  auto worker = [&] {
    std::unique_ptr<SandboxClient> sandbox;
    while (!stop.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= queue.size()) break;
      const SequenceState& state = queue[i];
      try {
        (this->*step)(state, sandbox);
        done.fetch_add(1);
      } catch (const std::exception& e) {
        std::lock_guard lock(fault_mutex);
        if (!summary.fault) summary.fault = state.sequence_id.str() + ": " + e.what();
        stop.store(true);
        deps_.events->emit("fault", {{"stage", stage_name}, {"sequence_id", state.sequence_id.str()},
                                     {"error", e.what()}});
      }
    }
  };

  const int n = std::min<int>(worker_count(uses_sandbox), static_cast<int>(std::max<std::size_t>(queue.size(), 1)));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int i = 0; i < n; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  summary.processed = done.load();
  deps_.events->emit("stage_done", {{"stage", stage_name}, {"processed", summary.processed},
                                    {"skipped", summary.skipped}, {"fault", summary.fault ? Json(*summary.fault) : Json(nullptr)}});
  return summary;
}

RunSummary Pipeline::filter() { return run_stage(Stage::Ingested, false, "filter", &Pipeline::filter_one); }

RunSummary Pipeline::generate() { return run_stage(Stage::Filtered, false, "generate", &Pipeline::generate_one); }

RunSummary Pipeline::supervise() {
  return run_stage(Stage::ProblemValidated, true, "supervise", &Pipeline::supervise_one);
}

void Pipeline::filter_one(const SequenceState& state, std::unique_ptr<SandboxClient>&) {
  const SequenceEntry entry = load_entry(state);
  const std::string id = entry.id.str();
  FilterVerdict verdict;
  std::string raw;
  try {
    verdict = run_filter(entry, *deps_.client, config_.filter, &raw);
  } catch (const ScriptMiss&) {
    throw;
  } catch (const AgentError& e) {
    store_.reject(state, std::string("AgentError: ") + e.what());
    deps_.events->emit("rejected", {{"sequence_id", id}, {"stage", "filter"}, {"reason", e.what()}});
    return;
  }
  store_.write_artifact(entry.id, kFilterFile, dump_json(to_json(verdict)));
  if (verdict.passed) {
    store_.advance(state, Stage::Filtered, kFilterFile);
    deps_.events->emit("filtered", {{"sequence_id", id}});
  } else {
    const std::string reason = join_codes(verdict.reason_codes);
    store_.reject(state, reason, kFilterFile);
    Json fields{{"sequence_id", id}, {"stage", "filter"}, {"reason", reason}};
    if (!raw.empty()) fields["unparsed_reply"] = raw;
    deps_.events->emit("rejected", fields);
  }
}

void Pipeline::generate_one(const SequenceState& state, std::unique_ptr<SandboxClient>&) {
  const SequenceEntry entry = load_entry(state);
  const std::string id = entry.id.str();
  auto reject = [&](const std::string& reason, std::optional<std::string> artifact = std::nullopt) {
    store_.reject(state, reason, std::move(artifact));
    deps_.events->emit("rejected", {{"sequence_id", id}, {"stage", "generate"}, {"reason", reason}});
  };

  AlgorithmicProblem problem;
  try {
    problem = generate_problem(entry, *deps_.client, ProblemGenConfig{config_.supervision.gen_retries});
    problem = validate_problem(std::move(problem), *deps_.client);
  } catch (const ScriptMiss&) {
    throw;
  } catch (const ProblemError& e) {
    return reject(std::string(to_string(e.kind())) + ": " + e.what());
  } catch (const AgentError& e) {
    return reject(std::string("AgentError: ") + e.what());
  }

  store_.write_artifact(entry.id, kProblemFile, dump_json(to_json(problem)));
  if (!problem.validated) return reject("ValidationMismatch", kProblemFile);

  SequenceState next = state;
  if (config_.resample_count > 0) {
    ResampleResult resampled =
        resample(entry, problem, *deps_.client, config_.resample_count, ResampleConfig{config_.supervision.gen_retries});
    for (const auto& line : resampled.skipped) deps_.events->emit("resample_skipped", {{"sequence_id", id}, {"detail", line}});
    store_.write_artifact(entry.id, kVariantsFile, dump_json(to_json(resampled.variants)));
    next.artifacts[kVariantsArtifact] = kVariantsFile;
  }
  store_.advance(next, Stage::ProblemValidated, kProblemFile);
  deps_.events->emit("problem_validated", {{"sequence_id", id}});
}

void Pipeline::supervise_one(const SequenceState& state, std::unique_ptr<SandboxClient>& sandbox) {
  const std::string id = state.sequence_id.str();
  AlgorithmicProblem problem;
  std::vector<ResampleVariant> variants;
  try {
    problem = problem_from_json(Json::parse(store_.read_artifact(state.sequence_id, kProblemFile)));
    if (state.artifacts.count(kVariantsArtifact)) {
      variants = variants_from_json(Json::parse(store_.read_artifact(state.sequence_id, kVariantsFile)));
    }
  } catch (const CheckpointCorrupt&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointCorrupt(id + ": " + e.what());
  }

  auto attempt = [&]() -> std::optional<std::vector<SolutionTrace>> {
    if (!sandbox) sandbox = deps_.sandbox_factory();
    std::vector<SolutionTrace> traces;
    try {
      traces.push_back(run_supervision(problem, *deps_.client, *sandbox, config_.supervision));
    } catch (const ScriptMiss&) {
      throw;
    } catch (const AgentError& e) {
      const std::string reason = std::string("NoSolution: ") + e.what();
      store_.reject(state, reason);
      deps_.events->emit("rejected", {{"sequence_id", id}, {"stage", "supervise"}, {"reason", reason}});
      return std::nullopt;
    }
    for (const auto& v : variants) {
      try {
        traces.push_back(
            run_supervision(v.problem, *deps_.client, *sandbox, config_.supervision, v.seed_solution, v.resample_index));
      } catch (const ScriptMiss&) {
        throw;
      } catch (const AgentError& e) {
        deps_.events->emit("resample_skipped", {{"sequence_id", id}, {"resample_index", v.resample_index},
                                                {"detail", e.what()}});
      }
    }
    return traces;
  };

  std::optional<std::vector<SolutionTrace>> traces;
  try {
    traces = attempt();
  } catch (const SandboxUnavailable& e) {
    deps_.events->emit("sandbox_retry", {{"sequence_id", id}, {"error", e.what()}});
    sandbox.reset();
    traces = attempt();
  }
  if (!traces) return;

  Json out = Json::array();
  for (const auto& t : *traces) {
    out.push_back(to_json(t));
    deps_.events->emit("trace", {{"sequence_id", id}, {"resample_index", t.resample_index},
                                 {"terminal", to_string(t.terminal)}, {"rounds_used", t.rounds_used}});
  }
  store_.write_artifact(state.sequence_id, kTracesFile, dump_json(out));
  const Stage terminal = traces->front().terminal == Terminal::Solved ? Stage::Solved : Stage::Exhausted;
  store_.advance(state, terminal, kTracesFile);
}

RunSummary Pipeline::emit() {
  RunSummary summary;
  std::vector<TrainingRecord> records;
  try {
    for (const auto& id : store_.list()) {
      const auto state = store_.load_state(id);
      if (state->stage != Stage::Solved && state->stage != Stage::Exhausted) {
        ++summary.skipped;
        continue;
      }
      const AlgorithmicProblem problem = problem_from_json(Json::parse(store_.read_artifact(id, kProblemFile)));
      std::vector<ResampleVariant> variants;
      if (state->artifacts.count(kVariantsArtifact)) {
        variants = variants_from_json(Json::parse(store_.read_artifact(id, kVariantsFile)));
      }
      for (const auto& tj : Json::parse(store_.read_artifact(id, kTracesFile))) {
        const SolutionTrace trace = trace_from_json(tj);
        if (trace.terminal != Terminal::Solved) continue;
        const AlgorithmicProblem* source = &problem;
        for (const auto& v : variants) {
          if (v.resample_index == trace.resample_index) source = &v.problem;
        }
        records.push_back(build_record(*source, trace, trace.resample_index));
      }
      ++summary.processed;
    }
    write_dataset(records, config_.dataset_path);
  } catch (const CheckpointCorrupt&) {
    throw;
  } catch (const std::exception& e) {
    summary.fault = std::string("emit: ") + e.what();
    deps_.events->emit("fault", {{"stage", "emit"}, {"error", e.what()}});
    return summary;
  }
  deps_.events->emit("emitted", {{"records", records.size()}, {"path", config_.dataset_path.string()}});
  return summary;
}

FunnelCounts Pipeline::funnel() const {
  FunnelCounts f;
  const fs::path summary_path = store_.global_file(kIngestSummary);
  if (fs::exists(summary_path)) {
    const auto j = Json::parse(read_file(summary_path));
    f.records_read = j.at("records_read").get<std::size_t>();
  }
  auto reached = [](const SequenceState& s, Stage stage) {
    const Stage effective = s.rejected_at.value_or(s.stage);
    return static_cast<int>(effective) >= static_cast<int>(stage);
  };
  for (const auto& id : store_.list()) {
    const auto s = *store_.load_state(id);
    ++f.ingested;
    bool passed_rules = reached(s, Stage::Filtered);
    if (!passed_rules && s.rejected_at == Stage::Ingested) {
      if (s.artifacts.count(to_string(Stage::Rejected))) {
        const auto verdict = verdict_from_json(Json::parse(store_.read_artifact(id, kFilterFile)));
        passed_rules = std::none_of(verdict.reason_codes.begin(), verdict.reason_codes.end(), is_rule_code);
      } else {
        passed_rules = !starts_with_ci(s.reject_reason.value_or(""), to_string(ReasonCode::Corrupt));
      }
    }
    f.passed_rules += passed_rules ? 1 : 0;
    f.passed_filter += reached(s, Stage::Filtered) ? 1 : 0;
    f.validated += reached(s, Stage::ProblemValidated) ? 1 : 0;
    f.solved += s.stage == Stage::Solved ? 1 : 0;
    f.exhausted += s.stage == Stage::Exhausted ? 1 : 0;
  }
  return f;
}

RunSummary Pipeline::stats() {
  RunSummary summary;
  try {
    const auto records = read_dataset(config_.dataset_path);
    std::vector<SolutionTrace> traces;
    for (const auto& id : store_.list()) {
      const auto state = store_.load_state(id);
      if (state->stage != Stage::Solved && state->stage != Stage::Exhausted) continue;
      for (const auto& tj : Json::parse(store_.read_artifact(id, kTracesFile))) traces.push_back(trace_from_json(tj));
    }
    CorpusStats stats = compute_stats(records, traces, *deps_.tokenizer);
    stats.funnel = funnel();
    write_file_atomic(config_.stats_path, dump_json(to_json(stats)));
    write_file_atomic(with_suffix(config_.stats_path, ".txt"), format_stats_table(stats));
    summary.stats = std::move(stats);
    summary.processed = traces.size();
  } catch (const CheckpointCorrupt&) {
    throw;
  } catch (const std::exception& e) {
    summary.fault = std::string("stats: ") + e.what();
    deps_.events->emit("fault", {{"stage", "stats"}, {"error", e.what()}});
  }
  return summary;
}

RunSummary Pipeline::eval() {
  RunSummary summary;
  try {
    std::vector<SequenceEntry> corpus;
    std::set<SequenceId> training_ids;
    for (const auto& id : store_.list()) {
      const auto state = store_.load_state(id);
      corpus.push_back(load_entry(*state));
      if (state->stage == Stage::Solved || state->stage == Stage::Exhausted) training_ids.insert(id);
    }
    if (fs::exists(config_.dataset_path)) {
      for (const auto& r : read_dataset(config_.dataset_path)) training_ids.insert(r.sequence_id);
    }
    const auto items =
        build_eval_set(corpus, training_ids, config_.eval.n, config_.eval.seed, EvalConfig{config_.eval.prefix_len});
    EvalReport report = evaluate(*deps_.client, items, config_.eval.k, config_.eval.seed, config_.eval.role);
    write_file_atomic(config_.eval_report_path, dump_json(to_json(report)));
    write_file_atomic(with_suffix(config_.eval_report_path, ".txt"), format_eval_table(report));
    summary.processed = items.size();
    summary.eval = std::move(report);
  } catch (const CheckpointCorrupt&) {
    throw;
  } catch (const std::exception& e) {
    summary.fault = std::string("eval: ") + e.what();
    deps_.events->emit("fault", {{"stage", "eval"}, {"error", e.what()}});
  }
  return summary;
}

}  // namespace codeseq
