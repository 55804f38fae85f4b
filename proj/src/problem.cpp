#include "codeseq/problem.hpp"

#include <set>
#include <sstream>

#include <json.hpp>

#include "codeseq/prompts.hpp"
#include "codeseq/text.hpp"

namespace codeseq {

namespace {

std::string json_scalar_text(const nlohmann::json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_number_integer() || value.is_number_unsigned()) return value.dump();
  throw std::invalid_argument("case field must be a string or an integer");
}

std::vector<IOCase> parse_cases(const nlohmann::json& array) {
  std::vector<IOCase> cases;
  for (const auto& item : array) {
    cases.push_back(IOCase{json_scalar_text(item.at("input")), json_scalar_text(item.at("output"))});
  }
  return cases;
}

std::optional<nlohmann::json> find_json_object(std::string_view reply) {
  for (const auto& block : extract_fenced_blocks(reply)) {
    auto doc = nlohmann::json::parse(block.body, nullptr, false);
    if (!doc.is_discarded() && doc.is_object()) return doc;
  }
  auto doc = nlohmann::json::parse(reply, nullptr, false);
  if (!doc.is_discarded() && doc.is_object()) return doc;
  return std::nullopt;
}

}  // namespace

ProblemError::ProblemError(Kind kind, const std::string& what, std::string raw_reply)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), raw_reply_(std::move(raw_reply)) {}

const char* to_string(ProblemError::Kind kind) {
  switch (kind) {
    case ProblemError::Kind::CaseCountViolation: return "CaseCountViolation";
    case ProblemError::Kind::CaseInconsistentWithSequence: return "CaseInconsistentWithSequence";
    case ProblemError::Kind::DuplicateCaseInput: return "DuplicateCaseInput";
    case ProblemError::Kind::AgentParseError: return "AgentParseError";
  }
  return "Unknown";
}

AlgorithmicProblem parse_problem_reply(std::string_view reply, const SequenceId& id) {
  auto doc = find_json_object(reply);
  if (!doc) throw ProblemError(ProblemError::Kind::AgentParseError, "no JSON object in reply", std::string(reply));

  AlgorithmicProblem problem;
  problem.sequence_id = id;
  try {
    problem.description = doc->at("description").get<std::string>();
    problem.example_cases = parse_cases(doc->at("example_cases"));
    problem.test_cases = parse_cases(doc->at("test_cases"));
  } catch (const std::exception& e) {
    throw ProblemError(ProblemError::Kind::AgentParseError, e.what(), std::string(reply));
  }
  if (trim(problem.description).empty()) {
    throw ProblemError(ProblemError::Kind::AgentParseError, "empty description", std::string(reply));
  }
  return problem;
}

void check_problem_shape(const AlgorithmicProblem& problem) {
  if (problem.example_cases.size() != kExampleCaseCount) {
    throw ProblemError(ProblemError::Kind::CaseCountViolation,
                       "expected 2 example cases, got " + std::to_string(problem.example_cases.size()));
  }
  if (problem.test_cases.size() < kMinTestCases || problem.test_cases.size() > kMaxTestCases) {
    throw ProblemError(ProblemError::Kind::CaseCountViolation,
                       "expected 5 to 7 test cases, got " + std::to_string(problem.test_cases.size()));
  }
  std::set<std::string> example_inputs;
  for (const auto& c : problem.example_cases) example_inputs.insert(normalize_output(c.input));
  for (const auto& c : problem.test_cases) {
    if (example_inputs.count(normalize_output(c.input))) {
      throw ProblemError(ProblemError::Kind::DuplicateCaseInput, "test input '" + c.input + "' repeats an example");
    }
  }
  for (const auto* cases : {&problem.example_cases, &problem.test_cases}) {
    for (const auto& c : *cases) {
      if (normalize_output(c.expected_output).empty()) {
        throw ProblemError(ProblemError::Kind::CaseInconsistentWithSequence, "empty expected output for input '" +
                                                                                  c.input + "'");
      }
    }
  }
}

void check_cases_against_sequence(const AlgorithmicProblem& problem, const SequenceEntry& entry) {
  for (const auto* cases : {&problem.example_cases, &problem.test_cases}) {
    for (const auto& c : *cases) {
      auto index = parse_bigint(trim(c.input));
      if (!index) {
        throw ProblemError(ProblemError::Kind::CaseInconsistentWithSequence,
                           "input '" + c.input + "' is not a single integer index");
      }
      const BigInt* term = entry.term_at(*index);
      if (!term) continue;  // beyond the scraped range
      const std::string expected = normalize_output(c.expected_output);
      if (expected != term->str()) {
        throw ProblemError(ProblemError::Kind::CaseInconsistentWithSequence,
                           entry.id.str() + ": case claims term(" + index->str() + ")=" + expected + " but it is " +
                               term->str());
      }
    }
  }
}

AlgorithmicProblem generate_problem(const SequenceEntry& entry, AgentClient& client, const ProblemGenConfig& config,
                                    int resample_index) {
  const Bindings bindings = sequence_bindings(entry, resample_index);
  AgentClient::CallOptions options;
  if (resample_index != 0) options.temperature = client.config().resample_temperature;

  std::optional<ProblemError> last;
  for (int attempt = 0; attempt <= config.gen_retries; ++attempt) {
    const std::string reply = client.complete(AgentRole::Working, TemplateId::ProblemGen, bindings, options);
    try {
      AlgorithmicProblem problem = parse_problem_reply(reply, entry.id);
      check_problem_shape(problem);
      check_cases_against_sequence(problem, entry);
      return problem;
    } catch (const ProblemError& e) {
      last = ProblemError(e.kind(), e.what(), reply);
    }
  }
  throw *last;
}

std::optional<std::string> extract_direct_answer(std::string_view reply) {
  const auto blocks = extract_fenced_blocks(reply);
  if (!blocks.empty()) {
    auto answer = normalize_output(blocks.back().body);
    if (answer.empty()) return std::nullopt;
    return answer;
  }

  const auto lines = split_lines(reply);
  for (std::size_t i = lines.size(); i-- > 0;) {
    auto line = trim(lines[i]);
    for (std::string_view marker : {"Output:", "Answer:"}) {
      if (!starts_with_ci(line, marker)) continue;
      std::string answer(trim(line.substr(marker.size())));
      if (answer.empty()) {
        std::string rest;
        for (std::size_t j = i + 1; j < lines.size(); ++j) rest.append(lines[j]).push_back('\n');
        answer = normalize_output(trim(rest));
      }
      if (answer.empty()) return std::nullopt;
      return answer;
    }
  }

  auto answer = normalize_output(trim(reply));
  if (answer.empty()) return std::nullopt;
  return answer;
}

AlgorithmicProblem validate_problem(AlgorithmicProblem problem, AgentClient& client) {
  if (problem.example_cases.size() != kExampleCaseCount) {
    throw ProblemError(ProblemError::Kind::CaseCountViolation, "validation needs exactly 2 example cases");
  }
  problem.validation.clear();
  bool all_matched = true;
  for (const auto& example : problem.example_cases) {
    ValidationCheck check;
    check.input = example.input;
    check.expected_output = example.expected_output;
    check.reply = client.complete(AgentRole::Guiding, TemplateId::DirectSolve, direct_solve_bindings(problem, example));
    check.extracted = extract_direct_answer(check.reply);
    check.matched = check.extracted && *check.extracted == normalize_output(example.expected_output);
    all_matched = all_matched && check.matched;
    problem.validation.push_back(std::move(check));
  }
  problem.validated = all_matched;
  return problem;
}

std::string render_problem_statement(const AlgorithmicProblem& problem) {
  std::ostringstream out;
  out << trim(problem.description) << "\n";
  for (std::size_t i = 0; i < problem.example_cases.size(); ++i) {
    const auto& c = problem.example_cases[i];
    out << "\nExample " << (i + 1) << ":\nInput:\n" << normalize_output(c.input) << "\nOutput:\n"
        << normalize_output(c.expected_output) << "\n";
  }
  return out.str();
}

}  // namespace codeseq
