#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "codeseq/agents.hpp"
#include "codeseq/sequence.hpp"

namespace codeseq {

struct EvalItem {
  SequenceId sequence_id;
  std::vector<BigInt> shown_prefix;
  BigInt true_next;

  bool operator==(const EvalItem&) const = default;
};

struct EvalConfig {
  std::size_t prefix_len = 10;
};

class InsufficientHeldOut : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShotOverlap : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Seeded sample of `n` entries outside `training_ids` that have at least
/// prefix_len + 1 terms. Identical for identical inputs.
std::vector<EvalItem> build_eval_set(const std::vector<SequenceEntry>& corpus, const std::set<SequenceId>& training_ids,
                                     std::size_t n, std::uint64_t seed, const EvalConfig& config = {});

Bindings next_number_bindings(const EvalItem& item, const std::vector<EvalItem>& shots, std::size_t k);

/// The NextNumber prompt with k demonstrations before the target prefix.
std::string render_prompt(const EvalItem& item, const std::vector<EvalItem>& shots, std::size_t k,
                          const PromptTemplate& tmpl);

/// Integer after an "Answer:" marker if present, else the last standalone
/// integer in the reply.
std::optional<BigInt> extract_prediction(std::string_view reply);

struct EvalItemResult {
  SequenceId sequence_id;
  std::string raw_reply;
  std::optional<BigInt> extracted;
  bool correct = false;
  std::optional<std::string> error;

  bool operator==(const EvalItemResult&) const = default;
};

struct EvalReport {
  std::size_t k_shot = 0;
  std::size_t n_items = 0;
  std::size_t n_correct = 0;
  double accuracy = 0.0;
  std::vector<EvalItemResult> per_item;

  bool operator==(const EvalReport&) const = default;
};

/// Shots for item i are drawn from the other items with a generator seeded
/// from (seed, i).
std::vector<std::size_t> sample_shots(std::size_t n_items, std::size_t target, std::size_t k, std::uint64_t seed);

EvalReport evaluate(AgentClient& client, const std::vector<EvalItem>& items, std::size_t k, std::uint64_t seed,
                    AgentRole role = AgentRole::Working);

std::string format_eval_table(const EvalReport& report);

}  // namespace codeseq
