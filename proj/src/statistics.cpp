#include "lassolens/statistics.hpp"

#include "lassolens/error.hpp"
#include "lassolens/util.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace lassolens {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

SideStats side_stats(std::span<const double> values, std::size_t missing) {
    SideStats s;
    s.count = values.size();
    s.missing_count = missing;
    if (values.empty()) {
        s.min = s.max = s.mean = s.std = kNaN;
        return s;
    }
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size()));
    // rounding can push the mean a hair outside [min, max] for constant samples
    s.mean = std::clamp(s.mean, s.min, s.max);
    return s;
}

NumericalSummary summarize_numerical(const Column& c, const SelectionMask& mask) {
    std::vector<double> sel;
    std::vector<double> rest;
    std::size_t sel_missing = 0;
    std::size_t rest_missing = 0;
    for (std::size_t r = 0; r < c.numbers.size(); ++r) {
        const double v = c.numbers[r];
        const bool in = mask[r];
        if (std::isnan(v)) {
            (in ? sel_missing : rest_missing)++;
            continue;
        }
        (in ? sel : rest).push_back(v);
    }
    NumericalSummary s;
    s.feature = c.name;
    s.selected = side_stats(sel, sel_missing);
    s.rest = side_stats(rest, rest_missing);
    if (!sel.empty() && !rest.empty()) s.ks = ks_two_sample(sel, rest);
    return s;
}

CategoricalSummary summarize_categorical(const Column& c, const SelectionMask& mask) {
    std::vector<std::size_t> sel(c.categories.size(), 0);
    std::vector<std::size_t> rest(c.categories.size(), 0);
    CategoricalSummary s;
    s.feature = c.name;
    for (std::size_t r = 0; r < c.codes.size(); ++r) {
        const auto code = c.codes[r];
        const bool in = mask[r];
        if (code == Column::kMissingCode) {
            (in ? s.selected_missing : s.rest_missing)++;
            continue;
        }
        (in ? sel : rest)[static_cast<std::size_t>(code)]++;
    }
    std::map<std::string, std::size_t> counts_sel;
    std::map<std::string, std::size_t> counts_rest;
    std::map<std::string, std::size_t> combined;
    for (std::size_t i = 0; i < c.categories.size(); ++i) {
        counts_sel[c.categories[i]] = sel[i];
        counts_rest[c.categories[i]] = rest[i];
        combined[c.categories[i]] = sel[i] + rest[i];
    }
    s.ordering = categorical_ordering(combined);
    for (const auto& cat : s.ordering) {
        s.selected_counts.push_back(counts_sel[cat]);
        s.rest_counts.push_back(counts_rest[cat]);
    }
    if (s.selected_total() > 0 && s.rest_total() > 0) s.ks = ks_categorical(counts_sel, counts_rest, s.ordering);
    return s;
}

std::string fmt_stat(double v) { return std::isnan(v) ? "NA" : display_number(v); }

nlohmann::json side_json(const SideStats& s) {
    auto num = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
    return {{"count", s.count}, {"missing", s.missing_count}, {"min", num(s.min)},
            {"max", num(s.max)}, {"mean", num(s.mean)},       {"std", num(s.std)}};
}

}  // namespace

double ks_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw Error(ErrorCode::undefined_statistic, "KS statistic needs two non-empty samples");
    std::vector<double> xs(a.begin(), a.end());
    std::vector<double> ys(b.begin(), b.end());
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    const double na = static_cast<double>(xs.size());
    const double nb = static_cast<double>(ys.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double best = 0.0;
    while (i < xs.size() && j < ys.size()) {
        const double x = std::min(xs[i], ys[j]);
        while (i < xs.size() && xs[i] == x) ++i;
        while (j < ys.size() && ys[j] == x) ++j;
        best = std::max(best, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    // once either sample is exhausted the remaining gap only shrinks
    return best;
}

double ks_categorical(const std::map<std::string, std::size_t>& counts_a,
                      const std::map<std::string, std::size_t>& counts_b, std::span<const std::string> ordering) {
    for (const auto* counts : {&counts_a, &counts_b}) {
        for (const auto& [cat, n] : *counts) {
            if (n > 0 && std::find(ordering.begin(), ordering.end(), cat) == ordering.end()) {
                throw Error(ErrorCode::ordering, "category ordering is missing '" + cat + "'");
            }
        }
    }
    std::size_t total_a = 0;
    std::size_t total_b = 0;
    for (const auto& [_, n] : counts_a) total_a += n;
    for (const auto& [_, n] : counts_b) total_b += n;
    if (total_a == 0 || total_b == 0) throw Error(ErrorCode::undefined_statistic, "categorical KS needs counts on both sides");
    double cum_a = 0.0;
    double cum_b = 0.0;
    double best = 0.0;
    auto count_of = [](const std::map<std::string, std::size_t>& m, const std::string& k) {
        auto it = m.find(k);
        return it == m.end() ? std::size_t{0} : it->second;
    };
    for (const auto& cat : ordering) {
        cum_a += static_cast<double>(count_of(counts_a, cat));
        cum_b += static_cast<double>(count_of(counts_b, cat));
        best = std::max(best, std::abs(cum_a / static_cast<double>(total_a) - cum_b / static_cast<double>(total_b)));
    }
    return best;
}

std::vector<std::string> categorical_ordering(const std::map<std::string, std::size_t>& combined_counts) {
    std::vector<std::pair<std::string, std::size_t>> items(combined_counts.begin(), combined_counts.end());
    std::stable_sort(items.begin(), items.end(), [](const auto& x, const auto& y) {
        if (x.second != y.second) return x.second > y.second;
        return x.first < y.first;
    });
    std::vector<std::string> out;
    out.reserve(items.size());
    for (auto& [cat, _] : items) out.push_back(std::move(cat));
    return out;
}

std::size_t CategoricalSummary::selected_total() const {
    std::size_t n = 0;
    for (auto c : selected_counts) n += c;
    return n;
}

std::size_t CategoricalSummary::rest_total() const {
    std::size_t n = 0;
    for (auto c : rest_counts) n += c;
    return n;
}

double CategoricalSummary::selected_proportion(std::size_t i) const {
    const auto total = selected_total();
    return total ? static_cast<double>(selected_counts[i]) / static_cast<double>(total) : kNaN;
}

double CategoricalSummary::rest_proportion(std::size_t i) const {
    const auto total = rest_total();
    return total ? static_cast<double>(rest_counts[i]) / static_cast<double>(total) : kNaN;
}

const std::string& feature_name(const FeatureSummary& summary) {
    return std::visit([](const auto& s) -> const std::string& { return s.feature; }, summary);
}

std::optional<double> feature_ks(const FeatureSummary& summary) {
    return std::visit([](const auto& s) { return s.ks; }, summary);
}

const FeatureSummary* ContrastProfile::find(std::string_view feature) const {
    for (const auto& s : summaries) {
        if (feature_name(s) == feature) return &s;
    }
    return nullptr;
}

ContrastProfile summarize(const Dataset& dataset, const SelectionMask& mask) {
    if (mask.size() != dataset.row_count()) throw Error(ErrorCode::selection, "mask length does not match the dataset");
    require_explainable(mask);
    ContrastProfile p;
    p.dataset_id = dataset.id();
    p.mask_id = mask.id();
    p.selected_count = mask.selected_count();
    p.rest_count = mask.rest_count();
    for (const Column* c : dataset.features()) {
        if (c->kind == ColumnKind::numerical) p.summaries.emplace_back(summarize_numerical(*c, mask));
        else p.summaries.emplace_back(summarize_categorical(*c, mask));
    }
    std::vector<std::pair<std::optional<double>, std::string>> order;
    for (const auto& s : p.summaries) order.emplace_back(feature_ks(s), feature_name(s));
    std::sort(order.begin(), order.end(), [](const auto& x, const auto& y) {
        if (x.first.has_value() != y.first.has_value()) return x.first.has_value();
        if (x.first && *x.first != *y.first) return *x.first > *y.first;
        return x.second < y.second;
    });
    for (auto& [_, name] : order) p.ranking.push_back(std::move(name));
    return p;
}

PairedDistribution feature_distribution(const Dataset& dataset, const SelectionMask& mask, const std::string& feature,
                                        int bins) {
    if (bins < 1) throw Error(ErrorCode::parameter, fmt::format("bins must be >= 1, got {}", bins));
    const Column* c = dataset.find(feature);
    if (!c) throw Error(ErrorCode::not_found, "unknown feature '" + feature + "'");
    if (mask.size() != dataset.row_count()) throw Error(ErrorCode::selection, "mask length does not match the dataset");

    if (c->kind == ColumnKind::categorical) {
        PairedCategories out;
        out.categories = c->categories;
        out.selected.assign(c->categories.size(), 0);
        out.rest.assign(c->categories.size(), 0);
        for (std::size_t r = 0; r < c->codes.size(); ++r) {
            if (c->codes[r] == Column::kMissingCode) continue;
            (mask[r] ? out.selected : out.rest)[static_cast<std::size_t>(c->codes[r])]++;
        }
        return out;
    }

    PairedHistogram out;
    const auto n_bins = static_cast<std::size_t>(bins);
    out.selected.assign(n_bins, 0);
    out.rest.assign(n_bins, 0);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (double v : c->numbers) {
        if (std::isnan(v)) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (std::isinf(lo)) {
        out.edges.assign(n_bins + 1, 0.0);
        return out;
    }
    const double width = (hi - lo) / static_cast<double>(n_bins);
    for (std::size_t i = 0; i <= n_bins; ++i) out.edges.push_back(i == n_bins ? hi : lo + width * static_cast<double>(i));
    for (std::size_t r = 0; r < c->numbers.size(); ++r) {
        const double v = c->numbers[r];
        if (std::isnan(v)) continue;
        std::size_t bin = 0;
        if (width > 0.0) bin = std::min(n_bins - 1, static_cast<std::size_t>((v - lo) / width));
        (mask[r] ? out.selected : out.rest)[bin]++;
    }
    return out;
}

std::string render_profile_table(const ContrastProfile& profile) {
    std::string out;
    out += fmt::format("Selected points: {} | Non-selected points: {}\n", profile.selected_count, profile.rest_count);

    bool header = false;
    for (const auto& s : profile.summaries) {
        const auto* n = std::get_if<NumericalSummary>(&s);
        if (!n) continue;
        if (!header) {
            out += "\nNumerical attributes (selected vs non-selected; std is the population standard deviation):\n";
            out += "attribute | sel_min | sel_max | sel_mean | sel_std | sel_missing | rest_min | rest_max | rest_mean | "
                   "rest_std | rest_missing | KS\n";
            header = true;
        }
        out += fmt::format("{} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {}\n", n->feature,
                           fmt_stat(n->selected.min), fmt_stat(n->selected.max), fmt_stat(n->selected.mean),
                           fmt_stat(n->selected.std), n->selected.missing_count, fmt_stat(n->rest.min),
                           fmt_stat(n->rest.max), fmt_stat(n->rest.mean), fmt_stat(n->rest.std),
                           n->rest.missing_count, n->ks ? fmt::format("{:.3f}", *n->ks) : "insufficient data");
    }

    header = false;
    for (const auto& s : profile.summaries) {
        const auto* c = std::get_if<CategoricalSummary>(&s);
        if (!c) continue;
        if (!header) {
            out += "\nCategorical attributes (counts and shares of non-missing points; KS over categories ordered by "
                   "descending overall frequency, ties alphabetical):\n";
            out += "attribute | category | sel_count | sel_share | rest_count | rest_share\n";
            header = true;
        }
        for (std::size_t i = 0; i < c->ordering.size(); ++i) {
            out += fmt::format("{} | {} | {} | {} | {} | {}\n", c->feature, c->ordering[i], c->selected_counts[i],
                               fmt_stat(100.0 * c->selected_proportion(i)) + "%", c->rest_counts[i],
                               fmt_stat(100.0 * c->rest_proportion(i)) + "%");
        }
        out += fmt::format("{} | missing | {} | - | {} | -\n", c->feature, c->selected_missing, c->rest_missing);
        out += fmt::format("{} | KS | {}\n", c->feature, c->ks ? fmt::format("{:.3f}", *c->ks) : "insufficient data");
    }

    out += "\nAttributes ranked by KS (most different first): ";
    for (std::size_t i = 0; i < profile.ranking.size(); ++i) {
        if (i) out += ", ";
        out += profile.ranking[i];
    }
    out += '\n';
    return out;
}

nlohmann::json to_json(const ContrastProfile& profile) {
    nlohmann::json summaries = nlohmann::json::array();
    for (const auto& s : profile.summaries) {
        nlohmann::json js;
        if (const auto* n = std::get_if<NumericalSummary>(&s)) {
            js = {{"feature", n->feature}, {"kind", "numerical"}, {"selected", side_json(n->selected)},
                  {"rest", side_json(n->rest)}};
            js["ks"] = n->ks ? nlohmann::json(*n->ks) : nlohmann::json(nullptr);
        } else {
            const auto& c = std::get<CategoricalSummary>(s);
            nlohmann::json cats = nlohmann::json::array();
            for (std::size_t i = 0; i < c.ordering.size(); ++i) {
                auto prop = [](double p) { return std::isnan(p) ? nlohmann::json(nullptr) : nlohmann::json(p); };
                cats.push_back({{"category", c.ordering[i]},
                                {"selected_count", c.selected_counts[i]},
                                {"rest_count", c.rest_counts[i]},
                                {"selected_proportion", prop(c.selected_proportion(i))},
                                {"rest_proportion", prop(c.rest_proportion(i))}});
            }
            js = {{"feature", c.feature},
                  {"kind", "categorical"},
                  {"ordering_rule", "descending combined frequency, ties lexicographic"},
                  {"categories", std::move(cats)},
                  {"selected_missing", c.selected_missing},
                  {"rest_missing", c.rest_missing}};
            js["ks"] = c.ks ? nlohmann::json(*c.ks) : nlohmann::json(nullptr);
        }
        js["insufficient_data"] = !feature_ks(s).has_value();
        summaries.push_back(std::move(js));
    }
    return {{"dataset_id", profile.dataset_id},
            {"mask_id", profile.mask_id},
            {"selected_count", profile.selected_count},
            {"rest_count", profile.rest_count},
            {"summaries", std::move(summaries)},
            {"ranking", profile.ranking}};
}

nlohmann::json to_json(const PairedDistribution& distribution) {
    if (const auto* h = std::get_if<PairedHistogram>(&distribution)) {
        return {{"kind", "histogram"}, {"edges", h->edges}, {"selected", h->selected}, {"rest", h->rest}};
    }
    const auto& c = std::get<PairedCategories>(distribution);
    return {{"kind", "categories"}, {"categories", c.categories}, {"selected", c.selected}, {"rest", c.rest}};
}

}  // namespace lassolens
