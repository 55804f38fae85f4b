#pragma once

// Binding builders for every pipeline prompt. The mock backend keys replies
// on these exact maps, so scripts and the pipeline share one definition.

#include <string>

#include "codeseq/agents.hpp"
#include "codeseq/problem.hpp"
#include "codeseq/sequence.hpp"
#include "codeseq/supervision.hpp"

namespace codeseq {

/// Terms beyond this many are not shown to agents.
inline constexpr std::size_t kPromptTermLimit = 40;

/// Sufficiency and ProblemGen. A non-zero resample index is bound as
/// `resample_index` so each variant gets its own request.
Bindings sequence_bindings(const SequenceEntry& entry, int resample_index = 0);

Bindings direct_solve_bindings(const AlgorithmicProblem& problem, const IOCase& example);

Bindings first_solution_bindings(const AlgorithmicProblem& problem, int resample_index = 0);

Bindings failure_reason_bindings(const AlgorithmicProblem& problem, const std::string& code, const CaseResult& failed);

Bindings correction_bindings(const AlgorithmicProblem& problem, const std::string& code, const CaseResult& failed,
                             const std::string& reason);

}  // namespace codeseq
