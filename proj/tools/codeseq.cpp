// Command-line driver for the pipeline stages plus a few inspection helpers.

#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "codeseq/checkpoint.hpp"
#include "codeseq/json_io.hpp"
#include "codeseq/pipeline.hpp"

namespace {

using namespace codeseq;

struct Overrides {
  std::string config;
  std::string mock_script;
  std::string checkpoint_dir;
  std::string out;
  std::string sandbox_runner;
  std::string event_log;
  std::optional<int> workers;
  std::optional<int> max_rounds;
  std::optional<int> resample_count;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> eval_k;
  std::optional<std::size_t> eval_n;
  std::optional<std::uint64_t> eval_seed;
  std::string eval_model;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "pipeline config file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--mock-script", o.mock_script, "offline mock agent script")->check(CLI::ExistingFile);
  cmd->add_option("--checkpoint-dir", o.checkpoint_dir, "checkpoint root");
  cmd->add_option("--out", o.out, "dataset output path");
  cmd->add_option("--sandbox-runner", o.sandbox_runner, "sandbox runner executable");
  cmd->add_option("--event-log", o.event_log, "line-delimited event log path");
  cmd->add_option("--workers", o.workers, "worker pool size (0 = hardware parallelism)");
  cmd->add_option("--max-rounds", o.max_rounds, "correction round budget");
  cmd->add_option("--resample", o.resample_count, "resampled variants per sequence");
  cmd->add_option("--seed", o.seed, "rng seed");
}

PipelineConfig build_config(const Overrides& o) {
  PipelineConfig c = PipelineConfig::load(o.config);
  if (!o.mock_script.empty()) c.mock_script = std::filesystem::absolute(o.mock_script);
  if (!o.checkpoint_dir.empty()) c.checkpoint_dir = o.checkpoint_dir;
  if (!o.out.empty()) c.dataset_path = o.out;
  if (!o.sandbox_runner.empty()) c.sandbox_runner = std::filesystem::absolute(o.sandbox_runner);
  if (!o.event_log.empty()) c.event_log = o.event_log;
  if (o.workers) c.workers = *o.workers;
  if (o.max_rounds) c.supervision.max_rounds = *o.max_rounds;
  if (o.resample_count) c.resample_count = *o.resample_count;
  if (o.seed) {
    c.seed = *o.seed;
    c.eval.seed = *o.seed;
  }
  if (o.eval_k) c.eval.k = *o.eval_k;
  if (o.eval_n) c.eval.n = *o.eval_n;
  if (o.eval_seed) c.eval.seed = *o.eval_seed;
  if (!o.eval_model.empty()) {
    auto role = role_from_string(o.eval_model);
    if (!role) throw ConfigInvalid("--model must name an agent role (Working or Guiding), got " + o.eval_model);
    c.eval.role = *role;
  }
  c.validate();
  return c;
}

int run_pipeline(Subcommand command, const Overrides& o) {
  try {
    PipelineConfig config = build_config(o);
    Pipeline pipeline(config, make_deps(config, &std::cerr));
    RunSummary summary = pipeline.run(command);
    if (summary.stats) std::cout << format_stats_table(*summary.stats);
    if (summary.eval) std::cout << format_eval_table(*summary.eval);
    std::cerr << to_string(command) << ": processed " << summary.processed << ", skipped " << summary.skipped << "\n";
    if (summary.fault) {
      std::cerr << "pipeline fault: " << *summary.fault << "\n";
      return 1;
    }
    return 0;
  } catch (const ConfigInvalid& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 2;
  } catch (const CheckpointCorrupt& e) {
    std::cerr << "checkpoint corrupt, refusing to run: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int dump_records(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  int errors = 0;
  for (const auto& r : parse_internal_file(text)) {
    if (r.entry) {
      std::cout << dump_json_line(to_json(*r.entry)) << "\n";
    } else {
      ++errors;
      const auto& e = *r.error;
      std::cout << dump_json_line(Json{{"record_line", r.first_line},
                                       {"error", to_string(e.kind())},
                                       {"line", e.line()},
                                       {"token", e.token()},
                                       {"message", e.what()}})
                << "\n";
    }
  }
  return errors ? 1 : 0;
}

int print_digest(const std::string& path) {
  try {
    const auto doc = nlohmann::json::parse(read_file(path));
    std::cout << bindings_digest(doc.get<Bindings>()) << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"codeseq: build next-term reasoning data from integer sequences"};
  app.require_subcommand(1);

  Overrides o;
  const std::map<std::string, std::pair<Subcommand, std::string>> stages = {
      {"ingest", {Subcommand::Ingest, "parse corpus records and b-files into checkpoints"}},
      {"filter", {Subcommand::Filter, "rule filter plus agent sufficiency check"}},
      {"generate", {Subcommand::Generate, "generate and validate algorithmic problems"}},
      {"supervise", {Subcommand::Supervise, "solve problems with test-driven correction"}},
      {"emit", {Subcommand::Emit, "write training records for solved traces"}},
      {"stats", {Subcommand::Stats, "corpus statistics over the emitted dataset"}},
      {"eval", {Subcommand::Eval, "next-number prediction on held-out sequences"}},
      {"all", {Subcommand::All, "ingest through stats"}},
  };
  std::map<CLI::App*, Subcommand> commands;
  for (const auto& [name, spec] : stages) {
    CLI::App* cmd = app.add_subcommand(name, spec.second);
    add_common(cmd, o);
    if (spec.first == Subcommand::Eval) {
      cmd->add_option("--k", o.eval_k, "demonstrations per prompt");
      cmd->add_option("--n", o.eval_n, "held-out sequences");
      cmd->add_option("--eval-seed", o.eval_seed, "seed for set construction and shots");
      cmd->add_option("--model", o.eval_model, "agent role to query (Working or Guiding)");
    }
    commands[cmd] = spec.first;
  }

  std::string dump_path;
  CLI::App* dump = app.add_subcommand("dump", "print parsed internal-format records as JSON lines");
  dump->add_option("file", dump_path)->required();

  std::string digest_path;
  CLI::App* digest = app.add_subcommand("digest", "print the mock-script digest of a JSON bindings object");
  digest->add_option("file", digest_path)->required();

  CLI11_PARSE(app, argc, argv);

  if (dump->parsed()) return dump_records(dump_path);
  if (digest->parsed()) return print_digest(digest_path);
  for (const auto& [cmd, command] : commands) {
    if (cmd->parsed()) return run_pipeline(command, o);
  }
  return 2;
}
