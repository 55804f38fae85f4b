#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "codeseq/agents.hpp"
#include "codeseq/checkpoint.hpp"
#include "codeseq/filter.hpp"
#include "codeseq/json_io.hpp"
#include "codeseq/sandbox.hpp"
#include "codeseq/stats.hpp"
#include "codeseq/supervision.hpp"
#include "codeseq/tokenizer.hpp"

namespace codeseq {

class ConfigInvalid : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Subcommand { Ingest, Filter, Generate, Supervise, Emit, Stats, Eval, All };

const char* to_string(Subcommand command);
std::optional<Subcommand> subcommand_from_string(std::string_view name);

struct AgentEndpoint {
  std::string base_url;
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key_env;
};

struct EvalSettings {
  std::size_t n = 200;
  std::size_t k = 0;
  std::size_t prefix_len = 10;
  std::uint64_t seed = 0;
  AgentRole role = AgentRole::Working;
};

struct PipelineConfig {
  std::vector<std::filesystem::path> corpus_records;
  std::optional<std::filesystem::path> bfiles_dir;
  std::filesystem::path checkpoint_dir = "checkpoints";
  std::filesystem::path dataset_path = "out/codeseq.jsonl";
  std::filesystem::path stats_path = "out/stats.json";
  std::filesystem::path eval_report_path = "out/eval_report.json";
  std::optional<std::filesystem::path> event_log;

  RuleConfig filter;

  std::filesystem::path prompt_dir = CODESEQ_DEFAULT_PROMPT_DIR;
  AgentClientConfig agents;
  std::optional<std::filesystem::path> audit_log;
  std::optional<AgentEndpoint> working;
  std::optional<AgentEndpoint> guiding;
  std::optional<std::filesystem::path> mock_script;

  SupervisionConfig supervision;
  std::optional<std::filesystem::path> sandbox_runner;
  int sandbox_sessions = 4;

  /// 0 = available hardware parallelism.
  int workers = 0;
  int resample_count = 0;
  std::uint64_t seed = 0;
  EvalSettings eval;
  std::optional<std::filesystem::path> tokenizer_vocab;

  /// Relative paths in the document resolve against `base_dir`.
  static PipelineConfig from_json(const Json& doc, const std::filesystem::path& base_dir);
  static PipelineConfig load(const std::filesystem::path& path);

  /// Range checks and existence of every configured input path. Throws
  /// ConfigInvalid.
  void validate() const;
};

/// Line-delimited structured events. Thread-safe.
class EventLog {
 public:
  /// Writes to `path` when given, else to `fallback` (may be null to drop).
  EventLog(const std::optional<std::filesystem::path>& path, std::ostream* fallback);

  void emit(std::string_view event, const Json& fields = Json::object());

 private:
  std::mutex mutex_;
  std::optional<std::ofstream> file_;
  std::ostream* out_;
};

struct PipelineDeps {
  std::shared_ptr<AgentClient> client;
  SandboxFactory sandbox_factory;
  std::shared_ptr<const Tokenizer> tokenizer;
  std::shared_ptr<EventLog> events;
};

/// Agent client, sandbox factory, tokenizer and event log as described by
/// the config. A mock script binds the mock backend to both roles.
PipelineDeps make_deps(const PipelineConfig& config, std::ostream* log_fallback);

struct RunSummary {
  /// First pipeline-level fault; work on other sequences stops once set.
  std::optional<std::string> fault;
  std::size_t processed = 0;
  std::size_t skipped = 0;
  std::optional<CorpusStats> stats;
  std::optional<EvalReport> eval;

  bool ok() const { return !fault; }
};

class Pipeline {
 public:
  Pipeline(PipelineConfig config, PipelineDeps deps);

  RunSummary run(Subcommand command);

  RunSummary ingest();
  RunSummary filter();
  RunSummary generate();
  RunSummary supervise();
  RunSummary emit();
  RunSummary stats();
  RunSummary eval();

  const CheckpointStore& store() const { return store_; }
  const PipelineConfig& config() const { return config_; }

  /// Worker count after the hardware and sandbox-session caps.
  int worker_count(bool uses_sandbox) const;

 private:
  using Step = void (Pipeline::*)(const SequenceState&, std::unique_ptr<SandboxClient>&);
  RunSummary run_stage(Stage from, bool uses_sandbox, const char* stage_name, Step step);

  void filter_one(const SequenceState& state, std::unique_ptr<SandboxClient>& sandbox);
  void generate_one(const SequenceState& state, std::unique_ptr<SandboxClient>& sandbox);
  void supervise_one(const SequenceState& state, std::unique_ptr<SandboxClient>& sandbox);

  SequenceEntry load_entry(const SequenceState& state) const;
  FunnelCounts funnel() const;

  PipelineConfig config_;
  PipelineDeps deps_;
  CheckpointStore store_;
};

}  // namespace codeseq
