#include "codeseq/json_io.hpp"

#include <stdexcept>

namespace codeseq {

namespace {

template <typename T>
Json optional_json(const std::optional<T>& value) {
  return value ? Json(*value) : Json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->template get<T>();
}

Json bigints_to_json(const std::vector<BigInt>& values) {
  Json out = Json::array();
  for (const auto& v : values) out.push_back(v.str());
  return out;
}

std::vector<BigInt> bigints_from_json(const Json& j) {
  std::vector<BigInt> out;
  for (const auto& v : j) {
    auto parsed = parse_bigint(v.get<std::string>());
    if (!parsed) throw std::runtime_error("invalid integer " + v.get<std::string>());
    out.push_back(*parsed);
  }
  return out;
}

BigInt bigint_from_json(const Json& j) {
  auto parsed = parse_bigint(j.get<std::string>());
  if (!parsed) throw std::runtime_error("invalid integer " + j.get<std::string>());
  return *parsed;
}

Json cases_to_json(const std::vector<IOCase>& cases) {
  Json out = Json::array();
  for (const auto& c : cases) out.push_back(Json{{"input", c.input}, {"output", c.expected_output}});
  return out;
}

std::vector<IOCase> cases_from_json(const Json& j) {
  std::vector<IOCase> out;
  for (const auto& c : j) out.push_back(IOCase{c.at("input").get<std::string>(), c.at("output").get<std::string>()});
  return out;
}

Json report_to_json(const TestReport& report) {
  Json cases = Json::array();
  for (const auto& c : report.per_case) {
    cases.push_back(Json{{"case_index", c.case_index},
                         {"status", to_string(c.status)},
                         {"actual_output", c.actual_output},
                         {"error_message", optional_json(c.error_message)},
                         {"error_line", optional_json(c.error_line)}});
  }
  return Json{{"all_passed", report.all_passed}, {"per_case", cases}};
}

TestReport report_from_json(const Json& j) {
  TestReport report;
  report.all_passed = j.at("all_passed").get<bool>();
  for (const auto& c : j.at("per_case")) {
    CaseResult r;
    r.case_index = c.at("case_index").get<std::size_t>();
    auto status = case_status_from_string(c.at("status").get<std::string>());
    if (!status) throw std::runtime_error("unknown case status " + c.at("status").get<std::string>());
    r.status = *status;
    r.actual_output = c.at("actual_output").get<std::string>();
    r.error_message = optional_from<std::string>(c, "error_message");
    r.error_line = optional_from<std::int64_t>(c, "error_line");
    report.per_case.push_back(std::move(r));
  }
  return report;
}

}  // namespace

std::string dump_json(const Json& j) { return j.dump(2, ' ', false, Json::error_handler_t::replace) + "\n"; }

std::string dump_json_line(const Json& j) { return j.dump(-1, ' ', false, Json::error_handler_t::replace); }

Json to_json(const SequenceEntry& e) {
  Json raw = Json::array();
  for (const auto& r : e.raw) raw.push_back(Json{{"tag", std::string(1, r.tag)}, {"text", r.text}});
  Json crossrefs = Json::array();
  for (const auto& id : e.crossrefs) crossrefs.push_back(id.str());
  return Json{{"id", e.id.str()},
              {"name", e.name},
              {"terms", bigints_to_json(e.terms)},
              {"term_segments", e.term_segments},
              {"offset", e.offset},
              {"offset_declared", e.offset_declared},
              {"first_large_index", optional_json(e.first_large_index)},
              {"identification", optional_json(e.identification)},
              {"formulas", e.formulas},
              {"examples", e.examples},
              {"programs", e.programs},
              {"crossref_lines", e.crossref_lines},
              {"crossrefs", crossrefs},
              {"keywords", e.keywords},
              {"source_url", e.source_url},
              {"raw", raw}};
}

SequenceEntry entry_from_json(const Json& j) {
  SequenceEntry e;
  e.id = SequenceId(j.at("id").get<std::string>());
  e.name = j.at("name").get<std::string>();
  e.terms = bigints_from_json(j.at("terms"));
  e.term_segments = j.at("term_segments").get<std::vector<std::size_t>>();
  e.offset = j.at("offset").get<std::int64_t>();
  e.offset_declared = j.at("offset_declared").get<bool>();
  e.first_large_index = optional_from<std::int64_t>(j, "first_large_index");
  e.identification = optional_from<std::string>(j, "identification");
  e.formulas = j.at("formulas").get<std::vector<std::string>>();
  e.examples = j.at("examples").get<std::vector<std::string>>();
  e.programs = j.at("programs").get<std::vector<std::string>>();
  e.crossref_lines = j.at("crossref_lines").get<std::vector<std::string>>();
  for (const auto& id : j.at("crossrefs")) e.crossrefs.emplace_back(id.get<std::string>());
  e.keywords = j.at("keywords").get<std::vector<std::string>>();
  e.source_url = j.at("source_url").get<std::string>();
  for (const auto& r : j.at("raw")) {
    const auto tag = r.at("tag").get<std::string>();
    e.raw.push_back(RawLine{tag.empty() ? '\0' : tag[0], r.at("text").get<std::string>()});
  }
  return e;
}

Json to_json(const FilterVerdict& v) {
  Json reasons = Json::array();
  for (auto code : v.reason_codes) reasons.push_back(to_string(code));
  Json report = nullptr;
  if (v.agent_report) {
    report = Json{{"planned_steps", v.agent_report->planned_steps},
                  {"per_step_sufficient", v.agent_report->per_step_sufficient},
                  {"overall", v.agent_report->overall}};
  }
  return Json{{"passed", v.passed}, {"reason_codes", reasons}, {"agent_report", report}};
}

FilterVerdict verdict_from_json(const Json& j) {
  FilterVerdict v;
  v.passed = j.at("passed").get<bool>();
  for (const auto& r : j.at("reason_codes")) {
    auto code = reason_from_string(r.get<std::string>());
    if (!code) throw std::runtime_error("unknown reason code " + r.get<std::string>());
    v.reason_codes.push_back(*code);
  }
  const auto& report = j.at("agent_report");
  if (!report.is_null()) {
    SufficiencyReport s;
    s.planned_steps = report.at("planned_steps").get<std::vector<std::string>>();
    s.per_step_sufficient = report.at("per_step_sufficient").get<std::vector<bool>>();
    s.overall = report.at("overall").get<bool>();
    v.agent_report = std::move(s);
  }
  return v;
}

Json to_json(const AlgorithmicProblem& p) {
  Json checks = Json::array();
  for (const auto& c : p.validation) {
    checks.push_back(Json{{"input", c.input},
                          {"expected_output", c.expected_output},
                          {"reply", c.reply},
                          {"extracted", optional_json(c.extracted)},
                          {"matched", c.matched}});
  }
  return Json{{"sequence_id", p.sequence_id.str()},
              {"description", p.description},
              {"example_cases", cases_to_json(p.example_cases)},
              {"test_cases", cases_to_json(p.test_cases)},
              {"validated", p.validated},
              {"validation", checks}};
}

AlgorithmicProblem problem_from_json(const Json& j) {
  AlgorithmicProblem p;
  p.sequence_id = SequenceId(j.at("sequence_id").get<std::string>());
  p.description = j.at("description").get<std::string>();
  p.example_cases = cases_from_json(j.at("example_cases"));
  p.test_cases = cases_from_json(j.at("test_cases"));
  p.validated = j.at("validated").get<bool>();
  for (const auto& c : j.at("validation")) {
    ValidationCheck check;
    check.input = c.at("input").get<std::string>();
    check.expected_output = c.at("expected_output").get<std::string>();
    check.reply = c.at("reply").get<std::string>();
    check.extracted = optional_from<std::string>(c, "extracted");
    check.matched = c.at("matched").get<bool>();
    p.validation.push_back(std::move(check));
  }
  return p;
}

Json to_json(const SolutionTrace& t) {
  Json attempts = Json::array();
  for (const auto& a : t.attempts) {
    attempts.push_back(Json{{"round", a.round},
                            {"code", a.code},
                            {"failure_reason", optional_json(a.failure_reason)},
                            {"diagnosed_case", optional_json(a.diagnosed_case)},
                            {"report", report_to_json(a.report)}});
  }
  return Json{{"sequence_id", t.sequence_id.str()},
              {"resample_index", t.resample_index},
              {"terminal", to_string(t.terminal)},
              {"rounds_used", t.rounds_used},
              {"pipeline_error", optional_json(t.pipeline_error)},
              {"attempts", attempts}};
}

SolutionTrace trace_from_json(const Json& j) {
  SolutionTrace t;
  t.sequence_id = SequenceId(j.at("sequence_id").get<std::string>());
  t.resample_index = j.at("resample_index").get<int>();
  const auto terminal = j.at("terminal").get<std::string>();
  if (terminal == to_string(Terminal::Solved)) {
    t.terminal = Terminal::Solved;
  } else if (terminal == to_string(Terminal::Exhausted)) {
    t.terminal = Terminal::Exhausted;
  } else {
    throw std::runtime_error("unknown terminal status " + terminal);
  }
  t.rounds_used = j.at("rounds_used").get<int>();
  t.pipeline_error = optional_from<std::string>(j, "pipeline_error");
  for (const auto& a : j.at("attempts")) {
    SolutionAttempt attempt;
    attempt.round = a.at("round").get<int>();
    attempt.code = a.at("code").get<std::string>();
    attempt.failure_reason = optional_from<std::string>(a, "failure_reason");
    attempt.diagnosed_case = optional_from<std::size_t>(a, "diagnosed_case");
    attempt.report = report_from_json(a.at("report"));
    t.attempts.push_back(std::move(attempt));
  }
  return t;
}

Json to_json(const std::vector<ResampleVariant>& variants) {
  Json out = Json::array();
  for (const auto& v : variants) {
    out.push_back(Json{{"resample_index", v.resample_index},
                       {"problem", to_json(v.problem)},
                       {"seed_solution", v.seed_solution}});
  }
  return out;
}

std::vector<ResampleVariant> variants_from_json(const Json& j) {
  std::vector<ResampleVariant> out;
  for (const auto& v : j) {
    out.push_back(ResampleVariant{v.at("resample_index").get<int>(), problem_from_json(v.at("problem")),
                                  v.at("seed_solution").get<std::string>()});
  }
  return out;
}

Json to_json(const ChatExchange& x) {
  return Json{{"role", to_string(x.role)},
              {"template", to_string(x.template_id)},
              {"bindings", x.bindings},
              {"request", x.request_text},
              {"reply", x.reply_text},
              {"latency_ms", x.latency_ms},
              {"attempt", x.attempt},
              {"error", optional_json(x.error)}};
}

Json to_json(const CorpusStats& s) {
  Json j{{"sample_count", s.sample_count},
         {"total_tokens", s.total_tokens},
         {"output_tokens", s.output_tokens},
         {"output_max_tokens", s.output_max_tokens},
         {"first_hit_rate", s.first_hit_rate},
         {"avg_correction_rounds", s.avg_correction_rounds},
         {"max_correction_rounds", s.max_correction_rounds},
         {"tokenizer_id", s.tokenizer_id},
         {"solved_traces", s.solved_traces},
         {"exhausted_traces", s.exhausted_traces},
         {"avg_attempts", s.avg_attempts},
         {"max_attempts", s.max_attempts},
         {"first_hit_rate_all_traces", s.first_hit_rate_all_traces}};
  if (s.funnel) {
    const auto& f = *s.funnel;
    j["funnel"] = Json{{"records_read", f.records_read}, {"ingested", f.ingested},
                       {"passed_rules", f.passed_rules}, {"passed_filter", f.passed_filter},
                       {"validated", f.validated},       {"solved", f.solved},
                       {"exhausted", f.exhausted}};
  }
  return j;
}

Json to_json(const EvalItem& item) {
  return Json{{"sequence_id", item.sequence_id.str()},
              {"shown_prefix", bigints_to_json(item.shown_prefix)},
              {"true_next", item.true_next.str()}};
}

EvalItem eval_item_from_json(const Json& j) {
  return EvalItem{SequenceId(j.at("sequence_id").get<std::string>()), bigints_from_json(j.at("shown_prefix")),
                  bigint_from_json(j.at("true_next"))};
}

Json to_json(const EvalReport& r) {
  Json items = Json::array();
  for (const auto& item : r.per_item) {
    items.push_back(Json{{"sequence_id", item.sequence_id.str()},
                         {"raw_reply", item.raw_reply},
                         {"extracted", item.extracted ? Json(item.extracted->str()) : Json(nullptr)},
                         {"correct", item.correct},
                         {"error", optional_json(item.error)}});
  }
  return Json{{"k_shot", r.k_shot},
              {"n_items", r.n_items},
              {"n_correct", r.n_correct},
              {"accuracy", r.accuracy},
              {"per_item", items}};
}

EvalReport eval_report_from_json(const Json& j) {
  EvalReport r;
  r.k_shot = j.at("k_shot").get<std::size_t>();
  r.n_items = j.at("n_items").get<std::size_t>();
  r.n_correct = j.at("n_correct").get<std::size_t>();
  r.accuracy = j.at("accuracy").get<double>();
  for (const auto& item : j.at("per_item")) {
    EvalItemResult res;
    res.sequence_id = SequenceId(item.at("sequence_id").get<std::string>());
    res.raw_reply = item.at("raw_reply").get<std::string>();
    if (!item.at("extracted").is_null()) res.extracted = bigint_from_json(item.at("extracted"));
    res.correct = item.at("correct").get<bool>();
    res.error = optional_from<std::string>(item, "error");
    r.per_item.push_back(std::move(res));
  }
  return r;
}

}  // namespace codeseq
