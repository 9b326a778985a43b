#include "lassolens/pipeline.hpp"

#include "lassolens/error.hpp"

#include <future>

#include <fmt/format.h>

namespace lassolens {

ExplainOutcome run_explanations(const Dataset& dataset, const SelectionMask& mask, const ContrastProfile& profile,
                                const ExplainRequest& request, const LlmConfig& llm) {
    if (request.trials < 1) throw Error(ErrorCode::parameter, fmt::format("trials must be >= 1, got {}", request.trials));
    if (profile.mask_id != mask.id()) throw Error(ErrorCode::contract_violation, "profile was computed for another mask");

    ExplainOutcome out;
    out.prompt = build_prompt(assemble_evidence(dataset, mask, request.strategy), dataset);
    auto verdict = check_budget(out.prompt, request.budget);
    if (auto* exceeded = std::get_if<BudgetExceeded>(&verdict)) {
        out.infeasible = std::move(*exceeded);
        return out;
    }
    const auto& clearance = std::get<BudgetClearance>(verdict);
    const FeatureLexicon lexicon(dataset);

    std::vector<Explanation> explanations;
    if (request.use_mock) {
        for (int t = 0; t < request.trials; ++t) explanations.push_back(template_explanation(out.prompt, clearance, profile, t));
    } else {
        std::vector<std::future<Explanation>> pending;
        for (int t = 0; t < request.trials; ++t) {
            pending.push_back(std::async(std::launch::async, [&, t] {
                return generate_explanation(out.prompt, clearance, llm, t);
            }));
        }
        for (auto& f : pending) f.wait();
        for (auto& f : pending) explanations.push_back(f.get());
    }
    if (explanations.size() >= 2) out.consistency = trial_consistency(explanations, profile, lexicon);
    for (auto& e : explanations) {
        auto report = validate(e, profile, lexicon);
        report.consistency = out.consistency;
        out.trials.push_back({std::move(e), std::move(report)});
    }
    return out;
}

}  // namespace lassolens
