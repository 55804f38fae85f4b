#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "codeseq/agents.hpp"
#include "codeseq/problem.hpp"
#include "codeseq/sequence.hpp"
#include "codeseq/supervision.hpp"

namespace codeseq {

/// One SFT sample. Reasoning and final answer are separate fields.
struct TrainingRecord {
  std::string input;
  std::string output_reasoning;
  std::string output_answer;
  SequenceId sequence_id;
  int resample_index = 0;

  bool operator==(const TrainingRecord&) const = default;
};

class EmptyCorpus : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Requires a Solved trace; throws std::invalid_argument otherwise.
TrainingRecord build_record(const AlgorithmicProblem& problem, const SolutionTrace& trace, int resample_index);

/// Problem rephrasing with the validated cases, plus a fresh first solution.
struct ResampleVariant {
  int resample_index = 0;
  AlgorithmicProblem problem;
  std::string seed_solution;
};

struct ResampleResult {
  std::vector<ResampleVariant> variants;
  /// One line per skipped variant.
  std::vector<std::string> skipped;
};

struct ResampleConfig {
  int gen_retries = 2;
};

ResampleResult resample(const SequenceEntry& entry, const AlgorithmicProblem& problem, AgentClient& client, int count,
                        const ResampleConfig& config = {});

/// One JSON object per line with fields input, output_reasoning,
/// output_answer, sequence_id, resample_index in that order.
std::string record_to_line(const TrainingRecord& record);
TrainingRecord record_from_line(std::string_view line);

void write_dataset(const std::vector<TrainingRecord>& records, const std::filesystem::path& path);
std::vector<TrainingRecord> read_dataset(const std::filesystem::path& path);

}  // namespace codeseq
