#pragma once

#include "lassolens/dataset.hpp"
#include "lassolens/selection.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace lassolens {

/// Two-sample KS statistic: sup |ECDF_a - ECDF_b| over the pooled sample points.
double ks_two_sample(std::span<const double> a, std::span<const double> b);

/// KS over cumulative category proportions under a fixed ordering.
double ks_categorical(const std::map<std::string, std::size_t>& counts_a,
                      const std::map<std::string, std::size_t>& counts_b,
                      std::span<const std::string> ordering);

/// Descending combined frequency, ties lexicographic.
std::vector<std::string> categorical_ordering(const std::map<std::string, std::size_t>& combined_counts);

/// Per-side statistics over non-missing cells. Population std. min/max/mean/std
/// are NaN when count is 0.
struct SideStats {
    std::size_t count = 0;
    std::size_t missing_count = 0;
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    double std = 0.0;
};

struct NumericalSummary {
    std::string feature;
    SideStats selected;
    SideStats rest;
    std::optional<double> ks;  // absent when either side has no data

    bool insufficient() const { return !ks.has_value(); }
};

struct CategoricalSummary {
    std::string feature;
    std::vector<std::string> ordering;  // also the row order of the count vectors
    std::vector<std::size_t> selected_counts;
    std::vector<std::size_t> rest_counts;
    std::size_t selected_missing = 0;
    std::size_t rest_missing = 0;
    std::optional<double> ks;

    bool insufficient() const { return !ks.has_value(); }
    std::size_t selected_total() const;
    std::size_t rest_total() const;
    double selected_proportion(std::size_t i) const;
    double rest_proportion(std::size_t i) const;
};

using FeatureSummary = std::variant<NumericalSummary, CategoricalSummary>;

const std::string& feature_name(const FeatureSummary& summary);
std::optional<double> feature_ks(const FeatureSummary& summary);

struct ContrastProfile {
    std::string dataset_id;
    std::string mask_id;
    std::size_t selected_count = 0;
    std::size_t rest_count = 0;
    std::vector<FeatureSummary> summaries;  // dataset column order
    std::vector<std::string> ranking;       // ks descending, ties by name, insufficient last

    const FeatureSummary* find(std::string_view feature) const;
};

ContrastProfile summarize(const Dataset& dataset, const SelectionMask& mask);

struct PairedHistogram {
    std::vector<double> edges;  // bins + 1
    std::vector<std::size_t> selected;
    std::vector<std::size_t> rest;
};

struct PairedCategories {
    std::vector<std::string> categories;
    std::vector<std::size_t> selected;
    std::vector<std::size_t> rest;
};

using PairedDistribution = std::variant<PairedHistogram, PairedCategories>;

/// Equal-width bins over the combined min..max; a constant feature fills bin 0.
PairedDistribution feature_distribution(const Dataset& dataset, const SelectionMask& mask,
                                        const std::string& feature, int bins);

/// The statistics block embedded verbatim in S1 prompts.
std::string render_profile_table(const ContrastProfile& profile);

nlohmann::json to_json(const ContrastProfile& profile);
nlohmann::json to_json(const PairedDistribution& distribution);

}  // namespace lassolens
