#pragma once

#include "lassolens/dataset.hpp"
#include "lassolens/evidence.hpp"
#include "lassolens/explanation.hpp"
#include "lassolens/llm_client.hpp"
#include "lassolens/selection.hpp"
#include "lassolens/statistics.hpp"
#include "lassolens/validation.hpp"

#include <optional>
#include <vector>

namespace lassolens {

struct ExplainRequest {
    Strategy strategy = StatisticsStrategy{};
    int trials = 1;
    bool use_mock = false;
    std::size_t budget = kDefaultTokenBudget;
};

struct TrialResult {
    Explanation explanation;
    ValidationReport report;
};

struct ExplainOutcome {
    PromptBundle prompt;
    std::optional<BudgetExceeded> infeasible;  // set when the budget gate refused the prompt
    std::vector<TrialResult> trials;
    std::optional<ConsistencyMetrics> consistency;  // two or more trials
};

/// Evidence, prompt, budget gate, then one explanation per trial, each
/// validated against the profile. Live trials run concurrently (bounded by the
/// client's per-endpoint cap); the first failing trial's error is rethrown.
ExplainOutcome run_explanations(const Dataset& dataset, const SelectionMask& mask, const ContrastProfile& profile,
                                const ExplainRequest& request, const LlmConfig& llm);

}  // namespace lassolens
