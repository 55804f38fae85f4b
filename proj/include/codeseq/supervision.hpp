#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "codeseq/agents.hpp"
#include "codeseq/problem.hpp"
#include "codeseq/sandbox.hpp"

namespace codeseq {

enum class CaseStatus { Passed, WrongOutput, RuntimeError, Timeout };

const char* to_string(CaseStatus status);
std::optional<CaseStatus> case_status_from_string(std::string_view name);

struct CaseResult {
  std::size_t case_index = 0;
  CaseStatus status = CaseStatus::Passed;
  std::string actual_output;
  std::optional<std::string> error_message;
  std::optional<std::int64_t> error_line;

  bool operator==(const CaseResult&) const = default;
};

struct TestReport {
  std::vector<CaseResult> per_case;
  bool all_passed = false;

  /// Lowest-index failing case, or nullptr.
  const CaseResult* first_failure() const;
  bool operator==(const TestReport&) const = default;
};

struct SolutionAttempt {
  int round = 0;
  std::string code;
  TestReport report;
  /// Diagnosis that preceded this attempt; absent for round 0.
  std::optional<std::string> failure_reason;
  /// Index of the previous attempt's failing case that was diagnosed.
  std::optional<std::size_t> diagnosed_case;

  bool operator==(const SolutionAttempt&) const = default;
};

enum class Terminal { Solved, Exhausted };

const char* to_string(Terminal terminal);

struct SolutionTrace {
  SequenceId sequence_id;
  int resample_index = 0;
  std::vector<SolutionAttempt> attempts;
  Terminal terminal = Terminal::Exhausted;
  int rounds_used = 0;
  /// Set when an agent failure ended the loop before the budget ran out.
  std::optional<std::string> pipeline_error;

  bool operator==(const SolutionTrace&) const = default;
};

class CodeExtractionError : public AgentParseError {
 public:
  enum class Kind { NoCodeBlock, MultipleCodeBlocks };
  CodeExtractionError(Kind kind, std::string raw_reply);
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct SupervisionConfig {
  int max_rounds = 5;
  int gen_retries = 2;
  ExecLimits limits;
};

/// The body of the only fenced block in `reply`, fences stripped.
std::string extract_single_code_block(std::string_view reply);

struct GenerationOptions {
  int resample_index = 0;
  std::optional<double> temperature;
};

std::string generate_solution(const AlgorithmicProblem& problem, AgentClient& client, int gen_retries,
                              const GenerationOptions& options = {});

/// Runs every case, even after a failure.
TestReport run_tests(const std::string& code, const std::vector<IOCase>& cases, SandboxClient& sandbox,
                     const ExecLimits& limits);

std::string diagnose_failure(const AlgorithmicProblem& problem, const std::string& code, const CaseResult& failed,
                             AgentClient& client);

std::string correct_solution(const AlgorithmicProblem& problem, const std::string& code, const CaseResult& failed,
                             const std::string& reason, AgentClient& client, int gen_retries);

/// Generate, test, then diagnose-and-correct until every test passes or
/// max_rounds corrections are spent. `seed_code`, when given, replaces the
/// round-0 generation. Throws CodeExtractionError/TransportExhausted only
/// when round 0 cannot produce code.
SolutionTrace run_supervision(const AlgorithmicProblem& problem, AgentClient& client, SandboxClient& sandbox,
                              const SupervisionConfig& config, std::optional<std::string> seed_code = std::nullopt,
                              int resample_index = 0);

}  // namespace codeseq
