#include "codeseq/dataset.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "codeseq/checkpoint.hpp"
#include "codeseq/text.hpp"

namespace codeseq {

namespace {

constexpr const char* kFraming =
    "To find the general term, I look for the rule that maps each index to its term, check it against the "
    "example cases, and write a program that reads the index from standard input and prints the term.";

std::string describe_failure(const AlgorithmicProblem& problem, const CaseResult& failed) {
  const IOCase& tc = problem.test_cases.at(failed.case_index);
  std::ostringstream out;
  out << "Input:\n" << normalize_output(tc.input) << "\nExpected output:\n" << normalize_output(tc.expected_output)
      << "\n";
  switch (failed.status) {
    case CaseStatus::WrongOutput:
      out << "Actual output:\n" << (failed.actual_output.empty() ? "(empty)" : failed.actual_output) << "\n";
      break;
    case CaseStatus::RuntimeError:
      out << "Runtime error";
      if (failed.error_line) out << " at line " << *failed.error_line;
      out << ":\n" << failed.error_message.value_or("(no message)") << "\n";
      break;
    case CaseStatus::Timeout: out << "The program exceeded the time limit.\n"; break;
    case CaseStatus::Passed: break;
  }
  return out.str();
}

}  // namespace

TrainingRecord build_record(const AlgorithmicProblem& problem, const SolutionTrace& trace, int resample_index) {
  if (trace.terminal != Terminal::Solved || trace.attempts.empty() || !trace.attempts.back().report.all_passed) {
    throw std::invalid_argument("build_record: trace for " + trace.sequence_id.str() + " is not Solved");
  }

  TrainingRecord record;
  record.input = render_problem_statement(problem);
  record.sequence_id = problem.sequence_id;
  record.resample_index = resample_index;
  record.output_answer = trace.attempts.back().code;

  std::ostringstream reasoning;
  reasoning << kFraming << "\n";
  for (int r = 0; r < trace.rounds_used; ++r) {
    const SolutionAttempt& attempt = trace.attempts[static_cast<std::size_t>(r)];
    const SolutionAttempt& next = trace.attempts[static_cast<std::size_t>(r) + 1];
    const CaseResult* failed = nullptr;
    for (const auto& c : attempt.report.per_case) {
      if (next.diagnosed_case && c.case_index == *next.diagnosed_case) failed = &c;
    }
    if (!failed) failed = attempt.report.first_failure();

    reasoning << "\nAttempt " << (r + 1) << ":\n```python\n" << attempt.code;
    if (!attempt.code.empty() && attempt.code.back() != '\n') reasoning << "\n";
    reasoning << "```\n";
    if (failed) reasoning << "This attempt fails on a test case.\n" << describe_failure(problem, *failed);
    reasoning << "Reason: " << trim(next.failure_reason.value_or("")) << "\n";
  }
  if (trace.rounds_used > 0) reasoning << "\nThe corrected program passes every test case.\n";
  record.output_reasoning = reasoning.str();
  return record;
}

ResampleResult resample(const SequenceEntry& entry, const AlgorithmicProblem& problem, AgentClient& client, int count,
                        const ResampleConfig& config) {
  if (!problem.validated) throw std::invalid_argument("resample: problem is not validated");
  if (count < 0) throw std::invalid_argument("resample: count must be >= 0");

  ResampleResult result;
  for (int index = 1; index <= count; ++index) {
    ResampleVariant variant;
    variant.resample_index = index;
    try {
      AlgorithmicProblem rephrased = generate_problem(entry, client, ProblemGenConfig{config.gen_retries}, index);
      variant.problem = problem;
      variant.problem.description = rephrased.description;
      GenerationOptions options;
      options.resample_index = index;
      options.temperature = client.config().resample_temperature;
      variant.seed_solution = generate_solution(variant.problem, client, config.gen_retries, options);
    } catch (const ScriptMiss&) {
      throw;
    } catch (const std::exception& e) {
      result.skipped.push_back(entry.id.str() + " variant " + std::to_string(index) + ": " + e.what());
      continue;
    }
    result.variants.push_back(std::move(variant));
  }
  return result;
}

std::string record_to_line(const TrainingRecord& record) {
  nlohmann::ordered_json j;
  j["input"] = record.input;
  j["output_reasoning"] = record.output_reasoning;
  j["output_answer"] = record.output_answer;
  j["sequence_id"] = record.sequence_id.str();
  j["resample_index"] = record.resample_index;
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

TrainingRecord record_from_line(std::string_view line) {
  const auto j = nlohmann::json::parse(line);
  TrainingRecord r;
  r.input = j.at("input").get<std::string>();
  r.output_reasoning = j.at("output_reasoning").get<std::string>();
  r.output_answer = j.at("output_answer").get<std::string>();
  r.sequence_id = SequenceId(j.at("sequence_id").get<std::string>());
  r.resample_index = j.at("resample_index").get<int>();
  return r;
}

void write_dataset(const std::vector<TrainingRecord>& records, const std::filesystem::path& path) {
  if (records.empty()) throw EmptyCorpus("no records to write to " + path.string());
  std::string text;
  for (const auto& r : records) text += record_to_line(r) + "\n";
  try {
    write_file_atomic(path, text);
  } catch (const std::exception& e) {
    throw std::runtime_error("writing dataset " + path.string() + ": " + e.what());
  }
}

std::vector<TrainingRecord> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  std::vector<TrainingRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      records.push_back(record_from_line(line));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

}  // namespace codeseq
