#include "codeseq/filter.hpp"

#include <algorithm>

#include "codeseq/prompts.hpp"
#include "codeseq/text.hpp"

namespace codeseq {

namespace {

constexpr std::pair<ReasonCode, const char*> kReasonNames[] = {
    {ReasonCode::TooFewTerms, "TooFewTerms"},
    {ReasonCode::DerivedFromOther, "DerivedFromOther"},
    {ReasonCode::NoMathOrProgramField, "NoMathOrProgramField"},
    {ReasonCode::AgentInsufficient, "AgentInsufficient"},
    {ReasonCode::Corrupt, "Corrupt"},
};

std::optional<bool> parse_verdict(std::string_view token) {
  auto t = trim(token);
  while (!t.empty() && (t.back() == '.' || t.back() == '*')) t.remove_suffix(1);
  while (!t.empty() && t.front() == '*') t.remove_prefix(1);
  if (t.size() == 10 && starts_with_ci(t, "SUFFICIENT")) return true;
  if (t.size() == 12 && starts_with_ci(t, "INSUFFICIENT")) return false;
  return std::nullopt;
}

}  // namespace

const char* to_string(ReasonCode code) {
  for (const auto& [c, name] : kReasonNames) {
    if (c == code) return name;
  }
  return "Unknown";
}

std::optional<ReasonCode> reason_from_string(std::string_view name) {
  for (const auto& [c, n] : kReasonNames) {
    if (name == n) return c;
  }
  return std::nullopt;
}

void FilterVerdict::reject(ReasonCode code) {
  if (std::find(reason_codes.begin(), reason_codes.end(), code) == reason_codes.end()) reason_codes.push_back(code);
  passed = false;
}

FilterVerdict apply_rule_filter(const SequenceEntry& entry, const RuleConfig& config) {
  FilterVerdict verdict;
  if (entry.terms.size() < config.min_terms) verdict.reject(ReasonCode::TooFewTerms);

  bool names_other = false;
  for (const auto& id : find_sequence_ids(entry.name)) {
    if (id != entry.id) names_other = true;
  }
  if (names_other && (config.strict_crossref || entry.formulas.empty())) {
    verdict.reject(ReasonCode::DerivedFromOther);
  }

  if (entry.formulas.empty() && entry.programs.empty()) verdict.reject(ReasonCode::NoMathOrProgramField);
  return verdict;
}

SufficiencyReport parse_sufficiency_reply(std::string_view reply) {
  const auto blocks = extract_fenced_blocks(reply);
  const CodeBlock* block = nullptr;
  for (const auto& b : blocks) {
    if (b.body.find("OVERALL") != std::string::npos) block = &b;
  }
  if (!block) throw AgentParseError("sufficiency reply has no fenced block with an OVERALL line", std::string(reply));

  SufficiencyReport report;
  std::optional<bool> overall;
  for (auto raw : split_lines(block->body)) {
    auto line = trim(raw);
    if (line.empty()) continue;
    if (starts_with_ci(line, "OVERALL")) {
      auto colon = line.find(':');
      if (colon == std::string_view::npos) throw AgentParseError("OVERALL line without ':'", std::string(reply));
      overall = parse_verdict(line.substr(colon + 1));
      if (!overall) throw AgentParseError("unreadable OVERALL verdict", std::string(reply));
    } else if (starts_with_ci(line, "STEP")) {
      auto colon = line.find(':');
      auto bar = line.rfind('|');
      if (colon == std::string_view::npos || bar == std::string_view::npos || bar < colon) {
        throw AgentParseError("step line must read 'STEP n: text | VERDICT'", std::string(reply));
      }
      auto verdict = parse_verdict(line.substr(bar + 1));
      if (!verdict) throw AgentParseError("unreadable step verdict", std::string(reply));
      report.planned_steps.emplace_back(trim(line.substr(colon + 1, bar - colon - 1)));
      report.per_step_sufficient.push_back(*verdict);
    }
  }
  if (report.planned_steps.empty()) throw AgentParseError("sufficiency reply lists no steps", std::string(reply));
  if (!overall) throw AgentParseError("sufficiency reply has no OVERALL verdict", std::string(reply));

  const bool all_steps = std::all_of(report.per_step_sufficient.begin(), report.per_step_sufficient.end(),
                                     [](bool b) { return b; });
  if (*overall != all_steps) {
    throw AgentParseError("OVERALL verdict contradicts the per-step verdicts", std::string(reply));
  }
  report.overall = *overall;
  return report;
}

SufficiencyReport agent_sufficiency_check(const SequenceEntry& entry, AgentClient& client, const RuleConfig& config) {
  const Bindings bindings = sequence_bindings(entry);
  std::optional<AgentParseError> last;
  for (int attempt = 0; attempt <= config.parse_retries; ++attempt) {
    const std::string reply = client.complete(AgentRole::Working, TemplateId::Sufficiency, bindings);
    try {
      return parse_sufficiency_reply(reply);
    } catch (const AgentParseError& e) {
      last = e;
    }
  }
  throw AgentParseError(entry.id.str() + ": " + last->what(), last->raw_reply());
}

FilterVerdict run_filter(const SequenceEntry& entry, AgentClient& client, const RuleConfig& config,
                         std::string* raw_reply_on_parse_error) {
  FilterVerdict verdict = apply_rule_filter(entry, config);
  if (!verdict.passed) return verdict;
  try {
    verdict.agent_report = agent_sufficiency_check(entry, client, config);
    if (!verdict.agent_report->overall) verdict.reject(ReasonCode::AgentInsufficient);
  } catch (const AgentParseError& e) {
    if (raw_reply_on_parse_error) *raw_reply_on_parse_error = e.raw_reply();
    verdict.reject(ReasonCode::AgentInsufficient);
  }
  return verdict;
}

}  // namespace codeseq
