#include "lassolens/evidence.hpp"

#include "lassolens/error.hpp"
#include "lassolens/util.hpp"
#include "prompt_templates.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace lassolens {

namespace {

std::vector<std::size_t> side_rows(const SelectionMask& mask, bool selected) {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < mask.size(); ++r) {
        if (mask[r] == selected) rows.push_back(r);
    }
    return rows;
}

/// Uniform sample without replacement (partial Fisher-Yates), returned in row order.
std::vector<std::size_t> sample_rows(std::vector<std::size_t> rows, std::size_t count, std::mt19937_64& engine) {
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(engine() % (rows.size() - i));
        std::swap(rows[i], rows[j]);
    }
    rows.resize(count);
    std::sort(rows.begin(), rows.end());
    return rows;
}

std::string prompt_fingerprint(const PromptBundle& prompt) { return sha256_hex(prompt.full_text()); }

}  // namespace

class BudgetGate {
  public:
    static BudgetClearance issue(const PromptBundle& prompt, std::size_t budget) {
        return BudgetClearance(prompt_fingerprint(prompt), prompt.estimated_tokens, budget);
    }
};

bool BudgetClearance::covers(const PromptBundle& prompt) const {
    return prompt.estimated_tokens == estimated_tokens_ && prompt_fingerprint(prompt) == fingerprint_;
}

std::string strategy_name(const Strategy& strategy) {
    switch (strategy.index()) {
    case 0: return "S1";
    case 1: return "S2";
    default: return "S3";
    }
}

Strategy parse_strategy(std::string_view name, double fraction, std::uint64_t seed) {
    const auto lowered = to_lower(trim(name));
    Strategy s;
    if (lowered == "s1" || lowered == "statistics") s = StatisticsStrategy{};
    else if (lowered == "s2" || lowered == "subsample") s = SubsampleStrategy{fraction, seed};
    else if (lowered == "s3" || lowered == "full") s = FullDataStrategy{};
    else throw Error(ErrorCode::parameter, "unknown strategy '" + std::string(name) + "' (expected S1, S2 or S3)");
    validate_strategy(s);
    return s;
}

void validate_strategy(const Strategy& strategy) {
    if (const auto* sub = std::get_if<SubsampleStrategy>(&strategy)) {
        if (!(sub->fraction > 0.0 && sub->fraction < 1.0)) {
            throw Error(ErrorCode::parameter, fmt::format("subsample fraction must be in (0, 1), got {}", sub->fraction));
        }
    }
}

std::string render_context(const Dataset& dataset) {
    const auto& ctx = dataset.context();
    std::string out = "Dataset description: ";
    out += ctx.domain_description.empty() ? dataset.name() : ctx.domain_description;
    out += "\n\nAttributes:\n";
    for (const Column* c : dataset.features()) {
        out += fmt::format("- {} ({})", c->name, to_string(c->kind));
        if (auto it = ctx.per_feature.find(c->name); it != ctx.per_feature.end() && !it->second.empty()) {
            out += ": " + it->second;
        }
        out += '\n';
    }
    return out;
}

std::string render_rows(const Dataset& dataset, std::span<const std::size_t> rows) {
    const auto features = dataset.features();
    std::string out;
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (i) out += ',';
        out += features[i]->name;
    }
    out += '\n';
    for (std::size_t r : rows) {
        for (std::size_t i = 0; i < features.size(); ++i) {
            if (i) out += ',';
            const Column& c = *features[i];
            if (c.is_missing(r)) out += "NA";
            else if (c.kind == ColumnKind::numerical) out += shortest_repr(c.numbers[r]);
            else out += c.category(r);
        }
        out += '\n';
    }
    return out;
}

std::size_t subsample_size(std::size_t side_count, double fraction) {
    const auto rounded = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(side_count)));
    return std::clamp<std::size_t>(rounded, 1, side_count);
}

EvidenceBundle assemble_evidence(const Dataset& dataset, const SelectionMask& mask, const Strategy& strategy) {
    validate_strategy(strategy);
    if (mask.size() != dataset.row_count()) throw Error(ErrorCode::selection, "mask length does not match the dataset");
    require_explainable(mask);

    EvidenceBundle b;
    b.strategy = strategy;
    b.dataset_id = dataset.id();
    b.mask_id = mask.id();
    b.context_text = render_context(dataset);
    b.selected_count = mask.selected_count();
    b.rest_count = mask.rest_count();

    if (std::holds_alternative<StatisticsStrategy>(strategy)) {
        b.payload = std::string(templates::kStatisticsEvidence) + "\n\n" + render_profile_table(summarize(dataset, mask));
        return b;
    }

    auto selected = side_rows(mask, true);
    auto rest = side_rows(mask, false);
    std::string description;
    if (const auto* sub = std::get_if<SubsampleStrategy>(&strategy)) {
        std::mt19937_64 engine(sub->seed);
        const auto sel_n = subsample_size(selected.size(), sub->fraction);
        const auto rest_n = subsample_size(rest.size(), sub->fraction);
        selected = sample_rows(std::move(selected), sel_n, engine);
        rest = sample_rows(std::move(rest), rest_n, engine);
        description = fmt::format(fmt::runtime(templates::kSubsampleEvidence),
                                  fmt::arg("pct", display_number(100.0 * sub->fraction)));
    } else {
        description = std::string(templates::kFullEvidence);
    }
    b.selected_rows = std::move(selected);
    b.rest_rows = std::move(rest);
    b.payload = description + "\n\n";
    b.payload += fmt::format("Selected points ({} of {} rows):\n", b.selected_rows.size(), b.selected_count);
    b.payload += render_rows(dataset, b.selected_rows);
    b.payload += fmt::format("\nNon-selected points ({} of {} rows):\n", b.rest_rows.size(), b.rest_count);
    b.payload += render_rows(dataset, b.rest_rows);
    return b;
}

std::string PromptBundle::user_message() const {
    return context + "\n" + evidence + "\n" + task_format;
}

std::string PromptBundle::full_text() const { return instruction + "\n\n" + user_message(); }

PromptBundle build_prompt(const EvidenceBundle& bundle, const Dataset& dataset) {
    if (bundle.dataset_id != dataset.id()) throw Error(ErrorCode::contract_violation, "bundle belongs to another dataset");
    PromptBundle p;
    p.instruction = std::string(templates::kInstruction);
    p.context = render_context(dataset);
    p.evidence = bundle.payload;
    p.task_format = std::string(templates::kTask) + "\n\n" + std::string(templates::kFormat) + "\n";
    p.strategy = bundle.strategy;
    p.template_version = std::string(kTemplateVersion);
    p.mask_id = bundle.mask_id;
    p.estimated_tokens = estimate_tokens(p.full_text());
    return p;
}

std::size_t estimate_tokens(std::string_view text) { return (utf8_length(text) + 3) / 4; }

BudgetVerdict check_budget(const PromptBundle& prompt, std::size_t budget) {
    if (budget == 0) throw Error(ErrorCode::parameter, "token budget must be positive");
    if (prompt.estimated_tokens <= budget) return BudgetGate::issue(prompt, budget);
    BudgetExceeded report;
    report.estimated_tokens = prompt.estimated_tokens;
    report.budget = budget;
    report.strategy = strategy_name(prompt.strategy);
    for (const char* s : {"S1", "S2"}) {
        if (report.strategy != s) report.suggested_strategies.emplace_back(s);
    }
    return report;
}

nlohmann::json to_json(const BudgetExceeded& report) {
    return {{"estimated_tokens", report.estimated_tokens},
            {"budget", report.budget},
            {"strategy", report.strategy},
            {"suggested_strategies", report.suggested_strategies}};
}

nlohmann::json to_json(const PromptBundle& prompt) {
    return {{"instruction", prompt.instruction},
            {"context", prompt.context},
            {"evidence", prompt.evidence},
            {"task_format", prompt.task_format},
            {"estimated_tokens", prompt.estimated_tokens},
            {"strategy", strategy_name(prompt.strategy)},
            {"template_version", prompt.template_version},
            {"mask_id", prompt.mask_id}};
}

}  // namespace lassolens
