#include "codeseq/prompts.hpp"

#include <sstream>

#include "codeseq/text.hpp"

namespace codeseq {

namespace {

std::string bullet_list(const std::vector<std::string>& lines) {
  if (lines.empty()) return "(none)";
  std::string out;
  for (const auto& line : lines) {
    if (!out.empty()) out += '\n';
    out += "- " + line;
  }
  return out;
}

std::string failing_case_text(const AlgorithmicProblem& problem, const CaseResult& failed) {
  const IOCase& tc = problem.test_cases.at(failed.case_index);
  std::ostringstream out;
  out << "Input:\n" << tc.input << "\nExpected output:\n" << tc.expected_output << "\nActual output:\n"
      << (failed.actual_output.empty() ? "(empty)" : failed.actual_output);
  if (failed.error_message) {
    out << "\nError:\n" << *failed.error_message;
    if (failed.error_line) out << " (line " << *failed.error_line << ")";
  }
  return out.str();
}

}  // namespace

Bindings sequence_bindings(const SequenceEntry& entry, int resample_index) {
  std::vector<std::string> shown;
  for (std::size_t i = 0; i < entry.terms.size() && i < kPromptTermLimit; ++i) shown.push_back(entry.terms[i].str());

  std::vector<std::string> crossrefs;
  for (const auto& id : entry.crossrefs) crossrefs.push_back(id.str());

  Bindings b{
      {"sequence_id", entry.id.str()},
      {"sequence_name", entry.name},
      {"sequence_terms", join(shown, ", ")},
      {"offset", std::to_string(entry.offset)},
      {"formulas", bullet_list(entry.formulas)},
      {"programs", bullet_list(entry.programs)},
      {"examples", bullet_list(entry.examples)},
      {"keywords", join(entry.keywords, ", ")},
      {"crossrefs", crossrefs.empty() ? "(none)" : join(crossrefs, ", ")},
  };
  if (resample_index != 0) b["resample_index"] = std::to_string(resample_index);
  return b;
}

Bindings direct_solve_bindings(const AlgorithmicProblem& problem, const IOCase& example) {
  return {{"description", problem.description}, {"input", example.input}};
}

Bindings first_solution_bindings(const AlgorithmicProblem& problem, int resample_index) {
  Bindings b{{"problem", render_problem_statement(problem)}};
  if (resample_index != 0) b["resample_index"] = std::to_string(resample_index);
  return b;
}

Bindings failure_reason_bindings(const AlgorithmicProblem& problem, const std::string& code, const CaseResult& failed) {
  return {
      {"problem", render_problem_statement(problem)},
      {"code", code},
      {"failing_case", failing_case_text(problem, failed)},
  };
}

Bindings correction_bindings(const AlgorithmicProblem& problem, const std::string& code, const CaseResult& failed,
                             const std::string& reason) {
  return {
      {"problem", render_problem_statement(problem)},
      {"code", code},
      {"failing_case", failing_case_text(problem, failed)},
      {"reason", reason},
  };
}

}  // namespace codeseq
