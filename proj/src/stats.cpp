#include "codeseq/stats.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

namespace codeseq {

CorpusStats compute_stats(const std::vector<TrainingRecord>& records, const std::vector<SolutionTrace>& traces,
                          const Tokenizer& tokenizer) {
  if (records.empty()) throw EmptyCorpus("no training records");

  CorpusStats stats;
  stats.tokenizer_id = tokenizer.id();
  stats.sample_count = records.size();
  for (const auto& r : records) {
    const std::uint64_t in = tokenizer.count(r.input);
    const std::uint64_t out = tokenizer.count(r.output_reasoning) + tokenizer.count(r.output_answer);
    stats.total_tokens += in + out;
    stats.output_tokens += out;
    stats.output_max_tokens = std::max(stats.output_max_tokens, out);
  }

  std::uint64_t first_hits = 0;
  std::uint64_t round_sum = 0;
  for (const auto& t : traces) {
    if (t.terminal != Terminal::Solved) {
      ++stats.exhausted_traces;
      continue;
    }
    ++stats.solved_traces;
    if (t.rounds_used == 0) ++first_hits;
    round_sum += static_cast<std::uint64_t>(t.rounds_used);
    stats.max_correction_rounds = std::max(stats.max_correction_rounds, t.rounds_used);
  }
  if (stats.solved_traces == 0) throw EmptyCorpus("no Solved traces");

  const auto solved = static_cast<double>(stats.solved_traces);
  stats.first_hit_rate = static_cast<double>(first_hits) / solved;
  stats.avg_correction_rounds = static_cast<double>(round_sum) / solved;
  stats.avg_attempts = static_cast<double>(round_sum + stats.solved_traces) / solved;
  stats.max_attempts = stats.max_correction_rounds + 1;
  stats.first_hit_rate_all_traces =
      static_cast<double>(first_hits) / static_cast<double>(stats.solved_traces + stats.exhausted_traces);
  return stats;
}

std::string format_stats_table(const CorpusStats& s) {
  std::ostringstream out;
  auto row = [&](const std::string& name, const std::string& value) {
    out << std::left << std::setw(34) << name << value << "\n";
  };
  auto fixed = [](double v, int digits) {
    std::ostringstream o;
    o << std::fixed << std::setprecision(digits) << v;
    return o.str();
  };
  row("Sample Numbers", std::to_string(s.sample_count));
  row("All Tokens", std::to_string(s.total_tokens));
  row("Output Tokens", std::to_string(s.output_tokens));
  row("Output Max Tokens", std::to_string(s.output_max_tokens));
  row("First Hit Rate", fixed(s.first_hit_rate, 4));
  row("Avg Correction Rounds", fixed(s.avg_correction_rounds, 4));
  row("Max Correction Rounds", std::to_string(s.max_correction_rounds));
  row("Tokenizer", s.tokenizer_id);
  out << "\n";
  row("Solved / Exhausted traces", std::to_string(s.solved_traces) + " / " + std::to_string(s.exhausted_traces));
  row("Avg Attempts (round 0 counted)", fixed(s.avg_attempts, 4));
  row("Max Attempts", std::to_string(s.max_attempts));
  row("First Hit Rate (all traces)", fixed(s.first_hit_rate_all_traces, 4));
  if (s.funnel) {
    const auto& f = *s.funnel;
    out << "\n";
    row("Records read", std::to_string(f.records_read));
    row("Ingested", std::to_string(f.ingested));
    row("Passed rule filter", std::to_string(f.passed_rules));
    row("Passed agent filter", std::to_string(f.passed_filter));
    row("Problems validated", std::to_string(f.validated));
    row("Solved / Exhausted sequences", std::to_string(f.solved) + " / " + std::to_string(f.exhausted));
  }
  return out.str();
}

}  // namespace codeseq
