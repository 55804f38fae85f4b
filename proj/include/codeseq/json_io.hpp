#pragma once

// Structured (JSON) forms of the pipeline's artifacts. Field order is fixed so
// that equal values always serialize to equal bytes.

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "codeseq/agents.hpp"
#include "codeseq/dataset.hpp"
#include "codeseq/eval.hpp"
#include "codeseq/filter.hpp"
#include "codeseq/problem.hpp"
#include "codeseq/sequence.hpp"
#include "codeseq/stats.hpp"
#include "codeseq/supervision.hpp"

namespace codeseq {

using Json = nlohmann::ordered_json;

/// Pretty-printed with a trailing newline; invalid UTF-8 is replaced.
std::string dump_json(const Json& j);
/// Single line, no trailing newline.
std::string dump_json_line(const Json& j);

Json to_json(const SequenceEntry& entry);
SequenceEntry entry_from_json(const Json& j);

Json to_json(const FilterVerdict& verdict);
FilterVerdict verdict_from_json(const Json& j);

Json to_json(const AlgorithmicProblem& problem);
AlgorithmicProblem problem_from_json(const Json& j);

Json to_json(const SolutionTrace& trace);
SolutionTrace trace_from_json(const Json& j);

Json to_json(const std::vector<ResampleVariant>& variants);
std::vector<ResampleVariant> variants_from_json(const Json& j);

Json to_json(const ChatExchange& exchange);

Json to_json(const CorpusStats& stats);

Json to_json(const EvalItem& item);
EvalItem eval_item_from_json(const Json& j);

Json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const Json& j);

}  // namespace codeseq
