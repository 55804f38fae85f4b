#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "codeseq/dataset.hpp"
#include "codeseq/supervision.hpp"
#include "codeseq/tokenizer.hpp"

namespace codeseq {

/// Sequence counts at each pipeline gate.
struct FunnelCounts {
  std::size_t records_read = 0;
  std::size_t ingested = 0;
  std::size_t passed_rules = 0;
  std::size_t passed_filter = 0;
  std::size_t validated = 0;
  std::size_t solved = 0;
  std::size_t exhausted = 0;

  bool operator==(const FunnelCounts&) const = default;
};

struct CorpusStats {
  std::size_t sample_count = 0;
  std::uint64_t total_tokens = 0;
  std::uint64_t output_tokens = 0;
  std::uint64_t output_max_tokens = 0;
  /// Solved traces with zero corrections over all Solved traces.
  double first_hit_rate = 0.0;
  /// Correction rounds (rounds_used) over Solved traces.
  double avg_correction_rounds = 0.0;
  int max_correction_rounds = 0;
  std::string tokenizer_id;

  std::size_t solved_traces = 0;
  std::size_t exhausted_traces = 0;
  /// Same averages when every attempt, including round 0, counts as a round.
  double avg_attempts = 0.0;
  int max_attempts = 0;
  /// First hits over all traces, Exhausted included.
  double first_hit_rate_all_traces = 0.0;

  std::optional<FunnelCounts> funnel;

  bool operator==(const CorpusStats&) const = default;
};

/// Throws EmptyCorpus when there are no records or no Solved traces.
CorpusStats compute_stats(const std::vector<TrainingRecord>& records, const std::vector<SolutionTrace>& traces,
                          const Tokenizer& tokenizer);

std::string format_stats_table(const CorpusStats& stats);

}  // namespace codeseq
