#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "codeseq/agents.hpp"
#include "codeseq/sequence.hpp"

namespace codeseq {

enum class ReasonCode { TooFewTerms, DerivedFromOther, NoMathOrProgramField, AgentInsufficient, Corrupt };

const char* to_string(ReasonCode code);
std::optional<ReasonCode> reason_from_string(std::string_view name);

/// Working agent's plan for turning the entry into a problem, with its own
/// judgement of whether the entry carries enough information for each step.
struct SufficiencyReport {
  std::vector<std::string> planned_steps;
  std::vector<bool> per_step_sufficient;
  bool overall = false;

  bool operator==(const SufficiencyReport&) const = default;
};

struct FilterVerdict {
  bool passed = true;
  std::vector<ReasonCode> reason_codes;
  std::optional<SufficiencyReport> agent_report;

  void reject(ReasonCode code);
  bool operator==(const FilterVerdict&) const = default;
};

struct RuleConfig {
  std::size_t min_terms = 8;
  /// Any A-number in the name (other than the entry's own) counts as derived.
  bool strict_crossref = false;
  int parse_retries = 2;
};

/// Reports every violated rule, not only the first.
FilterVerdict apply_rule_filter(const SequenceEntry& entry, const RuleConfig& config);

/// Parses the fenced STEP/OVERALL block. Throws AgentParseError.
SufficiencyReport parse_sufficiency_reply(std::string_view reply);

/// Makes up to 1 + parse_retries attempts; throws AgentParseError carrying
/// the last raw reply when none parses.
SufficiencyReport agent_sufficiency_check(const SequenceEntry& entry, AgentClient& client, const RuleConfig& config);

/// Rule filter followed by the agent check for entries the rules pass.
FilterVerdict run_filter(const SequenceEntry& entry, AgentClient& client, const RuleConfig& config,
                         std::string* raw_reply_on_parse_error = nullptr);

}  // namespace codeseq
