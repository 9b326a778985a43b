#include "lassolens/bench.hpp"

#include "lassolens/error.hpp"
#include "lassolens/pipeline.hpp"
#include "lassolens/util.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

namespace lassolens {

namespace {

std::vector<Point2> read_polygon(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::degenerate_polygon, path + " is not a JSON array of [x, y]: " + e.what());
    }
    std::vector<Point2> out;
    for (const auto& v : j) out.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
    return out;
}

std::string optional_number(const std::optional<double>& v) { return v ? fmt::format("{:.2f}", *v) : "-"; }

}  // namespace

BenchReport run_bench(const BenchOptions& opt) {
    if (opt.predicate.has_value() == opt.polygon_path.has_value()) {
        throw Error(ErrorCode::parameter, "give exactly one of a predicate (col=val) or a polygon file");
    }
    if (opt.trials < 1) throw Error(ErrorCode::parameter, "trials must be >= 1");
    const Dataset dataset = load_dataset(opt.data_path, opt.context_path);

    BenchReport report;
    report.dataset_name = dataset.name();
    report.dataset_id = dataset.id();
    report.mock = opt.use_mock;

    SelectionMask mask;
    if (opt.predicate) {
        const auto eq = opt.predicate->find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::parameter, "predicate must look like column=value");
        const std::string column(trim(opt.predicate->substr(0, eq)));
        const std::string value(trim(opt.predicate->substr(eq + 1)));
        mask = select_by_predicate(dataset, column, value);
        report.selection = column + "=" + value;
    } else {
        const auto polygon = read_polygon(*opt.polygon_path);
        const auto embedding = compute_embedding(dataset, opt.embedding);
        mask = select_lasso(embedding, polygon);
        report.selection = fmt::format("lasso ({} vertices)", polygon.size());
    }
    require_explainable(mask);
    report.mask_id = mask.id();
    report.selected_count = mask.selected_count();
    report.rest_count = mask.rest_count();

    const ContrastProfile profile = summarize(dataset, mask);
    report.ranking = profile.ranking;
    if (!opt.out_dir.empty()) write_file((opt.out_dir / "profile.txt").string(), render_profile_table(profile));

    for (const auto& name : opt.strategies) {
        ExplainRequest request;
        request.strategy = parse_strategy(name, opt.fraction, opt.seed);
        request.trials = opt.trials;
        request.use_mock = opt.use_mock;
        request.budget = opt.budget;

        StrategyRow row;
        row.strategy = strategy_name(request.strategy);
        const auto dir = opt.out_dir.empty() ? opt.out_dir : opt.out_dir / row.strategy;
        ExplainOutcome outcome;
        try {
            outcome = run_explanations(dataset, mask, profile, request, opt.llm);
        } catch (const Error& e) {
            row.error = fmt::format("{}: {}", to_string(e.code()), e.what());
            report.rows.push_back(std::move(row));
            continue;
        }
        row.estimated_tokens = outcome.prompt.estimated_tokens;
        if (outcome.infeasible) {
            row.feasible = false;
            row.infeasible = outcome.infeasible;
            if (!dir.empty()) write_file((dir / "budget.json").string(), to_json(*outcome.infeasible).dump(2));
            report.rows.push_back(std::move(row));
            continue;
        }
        if (!dir.empty()) write_file((dir / "prompt.txt").string(), outcome.prompt.full_text());

        row.trials = static_cast<int>(outcome.trials.size());
        std::size_t format_ok = 0;
        for (const auto& t : outcome.trials) {
            const auto& r = t.report;
            format_ok += r.format_ok ? 1 : 0;
            row.mean_precision += r.mention_precision;
            row.mean_recall += r.mention_recall;
            row.verified += r.verified;
            row.contradicted += r.contradicted;
            row.unverifiable += r.unverifiable;
            for (const auto& h : r.hallucinated_features) {
                if (std::find(row.hallucinated.begin(), row.hallucinated.end(), h) == row.hallucinated.end()) {
                    row.hallucinated.push_back(h);
                }
            }
            if (!dir.empty()) {
                const auto stem = fmt::format("trial-{}", t.explanation.trial_index);
                write_file((dir / (stem + ".md")).string(), t.explanation.raw_text);
                write_file((dir / (stem + ".json")).string(), to_json(t.explanation).dump(2));
                write_file((dir / (stem + ".validation.txt")).string(), render_report_table(r, t.explanation.raw_text));
            }
        }
        const double n = static_cast<double>(outcome.trials.size());
        row.format_rate = format_ok / n;
        row.mean_precision /= n;
        row.mean_recall /= n;
        if (outcome.consistency) {
            row.mention_jaccard = outcome.consistency->mention_jaccard;
            row.values_consistent = outcome.consistency->values_consistent;
        }
        report.rows.push_back(std::move(row));
    }

    if (!opt.out_dir.empty()) {
        write_file((opt.out_dir / "report.md").string(), render_markdown(report));
        write_file((opt.out_dir / "report.json").string(), to_json(report).dump(2));
    }
    return report;
}

std::string render_markdown(const BenchReport& r) {
    std::string out = fmt::format("# Strategy comparison: {}\n\n", r.dataset_name);
    out += fmt::format("- dataset id: `{}`\n- selection: `{}` (mask `{}`)\n- selected / rest: {} / {}\n- explainer: {}\n",
                       r.dataset_id, r.selection, r.mask_id, r.selected_count, r.rest_count,
                       r.mock ? "template (mock)" : "chat endpoint");
    out += "- KS ranking:";
    for (std::size_t i = 0; i < r.ranking.size(); ++i) out += (i ? ", " : " ") + r.ranking[i];
    out += "\n\n";
    out += "| Strategy | Feasible | Est. tokens | Trials | Format OK | Precision | Recall | Verified | Contradicted | "
           "Unverifiable | Jaccard | Values consistent |\n";
    out += "|---|---|---|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& row : r.rows) {
        if (!row.error.empty()) {
            out += fmt::format("| {} | error | - | - | - | - | - | - | - | - | - | - |\n", row.strategy);
            continue;
        }
        if (!row.feasible) {
            out += fmt::format("| {} | no (budget {}) | {} | - | - | - | - | - | - | - | - | - |\n", row.strategy,
                               row.infeasible->budget, row.estimated_tokens);
            continue;
        }
        out += fmt::format("| {} | yes | {} | {} | {:.0f}% | {:.2f} | {:.2f} | {} | {} | {} | {} | {} |\n", row.strategy,
                           row.estimated_tokens, row.trials, 100.0 * row.format_rate, row.mean_precision,
                           row.mean_recall, row.verified, row.contradicted, row.unverifiable,
                           optional_number(row.mention_jaccard),
                           row.values_consistent ? (*row.values_consistent ? "yes" : "no") : "-");
    }
    std::string notes;
    for (const auto& row : r.rows) {
        if (!row.error.empty()) notes += fmt::format("- {} failed: {}\n", row.strategy, row.error);
        if (!row.feasible) {
            notes += fmt::format("- {} is infeasible: about {} tokens against a budget of {}; try {}.\n", row.strategy,
                                 row.estimated_tokens, row.infeasible->budget,
                                 fmt::format("{}", fmt::join(row.infeasible->suggested_strategies, " or ")));
        }
        if (!row.hallucinated.empty()) {
            notes += fmt::format("- {} cited unknown attributes: {}\n", row.strategy, fmt::join(row.hallucinated, ", "));
        }
    }
    if (!notes.empty()) out += "\n" + notes;
    return out;
}

nlohmann::json to_json(const BenchReport& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows) {
        nlohmann::json j = {{"strategy", row.strategy},
                            {"feasible", row.feasible && row.error.empty()},
                            {"estimated_tokens", row.estimated_tokens}};
        if (!row.error.empty()) j["error"] = row.error;
        if (row.infeasible) j["budget_report"] = to_json(*row.infeasible);
        if (row.feasible && row.error.empty()) {
            j["trials"] = row.trials;
            j["format_rate"] = row.format_rate;
            j["mention_precision"] = row.mean_precision;
            j["mention_recall"] = row.mean_recall;
            j["verified"] = row.verified;
            j["contradicted"] = row.contradicted;
            j["unverifiable"] = row.unverifiable;
            j["hallucinated_features"] = row.hallucinated;
            j["mention_jaccard"] = row.mention_jaccard ? nlohmann::json(*row.mention_jaccard) : nlohmann::json(nullptr);
            j["values_consistent"] =
                row.values_consistent ? nlohmann::json(*row.values_consistent) : nlohmann::json(nullptr);
        }
        rows.push_back(std::move(j));
    }
    return {{"dataset", r.dataset_name}, {"dataset_id", r.dataset_id},    {"selection", r.selection},
            {"mask_id", r.mask_id},      {"selected_count", r.selected_count}, {"rest_count", r.rest_count},
            {"ranking", r.ranking},      {"mock", r.mock},                {"strategies", std::move(rows)}};
}

}  // namespace lassolens
