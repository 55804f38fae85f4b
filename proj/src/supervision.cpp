#include "codeseq/supervision.hpp"

#include <algorithm>

#include "codeseq/prompts.hpp"
#include "codeseq/text.hpp"

namespace codeseq {

namespace {

ExecResult execute_once_more_on_protocol_error(SandboxClient& sandbox, const ExecRequest& request) {
  try {
    return sandbox.execute(request);
  } catch (const SandboxProtocolError&) {
  }
  try {
    return sandbox.execute(request);
  } catch (const SandboxProtocolError& e) {
    throw SandboxUnavailable(std::string("sandbox protocol failure: ") + e.what());
  }
}

std::string request_code(AgentClient& client, TemplateId id, const Bindings& bindings, int gen_retries,
                         AgentClient::CallOptions options) {
  std::optional<CodeExtractionError> last;
  for (int attempt = 0; attempt <= gen_retries; ++attempt) {
    const std::string reply = client.complete(AgentRole::Working, id, bindings, options);
    try {
      return extract_single_code_block(reply);
    } catch (const CodeExtractionError& e) {
      last = e;
    }
  }
  throw *last;
}

}  // namespace

const char* to_string(CaseStatus status) {
  switch (status) {
    case CaseStatus::Passed: return "Passed";
    case CaseStatus::WrongOutput: return "WrongOutput";
    case CaseStatus::RuntimeError: return "RuntimeError";
    case CaseStatus::Timeout: return "Timeout";
  }
  return "Unknown";
}

std::optional<CaseStatus> case_status_from_string(std::string_view name) {
  for (auto s : {CaseStatus::Passed, CaseStatus::WrongOutput, CaseStatus::RuntimeError, CaseStatus::Timeout}) {
    if (name == to_string(s)) return s;
  }
  return std::nullopt;
}

const char* to_string(Terminal terminal) { return terminal == Terminal::Solved ? "Solved" : "Exhausted"; }

const CaseResult* TestReport::first_failure() const {
  const CaseResult* first = nullptr;
  for (const auto& c : per_case) {
    if (c.status != CaseStatus::Passed && (!first || c.case_index < first->case_index)) first = &c;
  }
  return first;
}

CodeExtractionError::CodeExtractionError(Kind kind, std::string raw_reply)
    : AgentParseError(kind == Kind::NoCodeBlock ? "NoCodeBlock: reply contains no fenced code block"
                                                : "MultipleCodeBlocks: reply contains more than one fenced code block",
                      std::move(raw_reply)),
      kind_(kind) {}

std::string extract_single_code_block(std::string_view reply) {
  auto blocks = extract_fenced_blocks(reply);
  if (blocks.empty()) throw CodeExtractionError(CodeExtractionError::Kind::NoCodeBlock, std::string(reply));
  if (blocks.size() > 1) throw CodeExtractionError(CodeExtractionError::Kind::MultipleCodeBlocks, std::string(reply));
  return std::move(blocks.front().body);
}

std::string generate_solution(const AlgorithmicProblem& problem, AgentClient& client, int gen_retries,
                              const GenerationOptions& options) {
  AgentClient::CallOptions call;
  call.temperature = options.temperature;
  return request_code(client, TemplateId::FirstSolution, first_solution_bindings(problem, options.resample_index),
                      gen_retries, call);
}

TestReport run_tests(const std::string& code, const std::vector<IOCase>& cases, SandboxClient& sandbox,
                     const ExecLimits& limits) {
  TestReport report;
  report.all_passed = true;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const ExecRequest request{code, cases[i].input, limits};
    const ExecResult result = execute_once_more_on_protocol_error(sandbox, request);

    CaseResult c;
    c.case_index = i;
    c.actual_output = normalize_output(result.stdout_text);
    c.error_message = result.error_message;
    c.error_line = result.error_line;
    switch (result.status) {
      case ExecStatus::Ok:
        c.status = c.actual_output == normalize_output(cases[i].expected_output) ? CaseStatus::Passed
                                                                                 : CaseStatus::WrongOutput;
        break;
      case ExecStatus::Error: c.status = CaseStatus::RuntimeError; break;
      case ExecStatus::Timeout: c.status = CaseStatus::Timeout; break;
      case ExecStatus::OutputCapExceeded:
        c.status = CaseStatus::RuntimeError;
        if (!c.error_message) c.error_message = "output exceeded " + std::to_string(limits.output_cap_bytes) + " bytes";
        break;
    }
    report.all_passed = report.all_passed && c.status == CaseStatus::Passed;
    report.per_case.push_back(std::move(c));
  }
  return report;
}

std::string diagnose_failure(const AlgorithmicProblem& problem, const std::string& code, const CaseResult& failed,
                             AgentClient& client) {
  if (failed.status == CaseStatus::Passed) throw std::invalid_argument("diagnose_failure: case passed");
  return client.complete(AgentRole::Guiding, TemplateId::FailureReason, failure_reason_bindings(problem, code, failed));
}

std::string correct_solution(const AlgorithmicProblem& problem, const std::string& code, const CaseResult& failed,
                             const std::string& reason, AgentClient& client, int gen_retries) {
  return request_code(client, TemplateId::Correction, correction_bindings(problem, code, failed, reason), gen_retries,
                      {});
}

SolutionTrace run_supervision(const AlgorithmicProblem& problem, AgentClient& client, SandboxClient& sandbox,
                              const SupervisionConfig& config, std::optional<std::string> seed_code,
                              int resample_index) {
  if (!problem.validated) throw std::invalid_argument("run_supervision: problem is not validated");
  if (config.max_rounds < 0) throw std::invalid_argument("run_supervision: max_rounds must be >= 0");

  SolutionTrace trace;
  trace.sequence_id = problem.sequence_id;
  trace.resample_index = resample_index;

  std::string code = seed_code ? std::move(*seed_code) : generate_solution(problem, client, config.gen_retries);
  trace.attempts.push_back(SolutionAttempt{0, code, run_tests(code, problem.test_cases, sandbox, config.limits), {}, {}});

  while (!trace.attempts.back().report.all_passed && static_cast<int>(trace.attempts.size()) - 1 < config.max_rounds) {
    const SolutionAttempt& previous = trace.attempts.back();
    const CaseResult failed = *previous.report.first_failure();
    std::string reason;
    try {
      reason = diagnose_failure(problem, previous.code, failed, client);
      code = correct_solution(problem, previous.code, failed, reason, client, config.gen_retries);
    } catch (const ScriptMiss&) {
      throw;
    } catch (const AgentError& e) {
      trace.pipeline_error = e.what();
      break;
    }
    SolutionAttempt next;
    next.round = previous.round + 1;
    next.code = code;
    next.failure_reason = std::move(reason);
    next.diagnosed_case = failed.case_index;
    next.report = run_tests(next.code, problem.test_cases, sandbox, config.limits);
    trace.attempts.push_back(std::move(next));
  }

  trace.rounds_used = static_cast<int>(trace.attempts.size()) - 1;
  trace.terminal = trace.attempts.back().report.all_passed ? Terminal::Solved : Terminal::Exhausted;
  return trace;
}

}  // namespace codeseq
