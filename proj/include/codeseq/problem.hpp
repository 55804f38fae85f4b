#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "codeseq/agents.hpp"
#include "codeseq/sequence.hpp"

namespace codeseq {

/// Exact stdin/stdout pair fed to and expected from a solution.
struct IOCase {
  std::string input;
  std::string expected_output;

  bool operator==(const IOCase&) const = default;
};

/// Evidence for one blind example-case check by the guiding agent.
struct ValidationCheck {
  std::string input;
  std::string expected_output;
  std::string reply;
  std::optional<std::string> extracted;
  bool matched = false;

  bool operator==(const ValidationCheck&) const = default;
};

struct AlgorithmicProblem {
  SequenceId sequence_id;
  std::string description;
  std::vector<IOCase> example_cases;
  std::vector<IOCase> test_cases;
  bool validated = false;
  std::vector<ValidationCheck> validation;

  bool operator==(const AlgorithmicProblem&) const = default;
};

inline constexpr std::size_t kExampleCaseCount = 2;
inline constexpr std::size_t kMinTestCases = 5;
inline constexpr std::size_t kMaxTestCases = 7;

class ProblemError : public std::runtime_error {
 public:
  enum class Kind { CaseCountViolation, CaseInconsistentWithSequence, DuplicateCaseInput, AgentParseError };

  ProblemError(Kind kind, const std::string& what, std::string raw_reply = {});
  Kind kind() const { return kind_; }
  const std::string& raw_reply() const { return raw_reply_; }

 private:
  Kind kind_;
  std::string raw_reply_;
};

const char* to_string(ProblemError::Kind kind);

struct ProblemGenConfig {
  int gen_retries = 2;
};

/// Parses the fenced JSON object the ProblemGen template asks for.
AlgorithmicProblem parse_problem_reply(std::string_view reply, const SequenceId& id);

/// Case counts and example/test input disjointness.
void check_problem_shape(const AlgorithmicProblem& problem);

/// Every case whose index lies in the scraped range must yield that term.
void check_cases_against_sequence(const AlgorithmicProblem& problem, const SequenceEntry& entry);

/// Asks the working agent for a problem and gates it mechanically, making
/// up to 1 + gen_retries requests. Returns an unvalidated problem.
AlgorithmicProblem generate_problem(const SequenceEntry& entry, AgentClient& client, const ProblemGenConfig& config,
                                    int resample_index = 0);

/// The answer in a DirectSolve reply: last fenced block, else the text after
/// an "Output:"/"Answer:" marker, else the whole reply. Normalized.
std::optional<std::string> extract_direct_answer(std::string_view reply);

/// Blind-solves both example inputs with the guiding agent. validated is set
/// iff both normalized answers equal the expected outputs.
AlgorithmicProblem validate_problem(AlgorithmicProblem problem, AgentClient& client);

/// Description followed by the two worked example cases.
std::string render_problem_statement(const AlgorithmicProblem& problem);

}  // namespace codeseq
