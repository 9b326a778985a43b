#pragma once

#include "lassolens/dataset.hpp"
#include "lassolens/explanation.hpp"
#include "lassolens/statistics.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace lassolens {

struct TextSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
};

struct ParsedExplanation {
    std::string raw_text;
    std::string summary;
    std::vector<std::string> bullets;
    std::vector<TextSpan> bullet_spans;
    std::vector<std::string> bold_terms;
    std::size_t word_count = 0;
    bool format_ok = false;
};

/// Never throws; a malformed answer just gets format_ok = false.
ParsedExplanation parse_explanation(const std::string& raw_text);

/// Phrases that refer to each feature: normalized name, name without unit
/// suffix, camelCase split, declared aliases and the description's lead phrase.
class FeatureLexicon {
  public:
    FeatureLexicon() = default;
    explicit FeatureLexicon(std::span<const std::string> features);
    explicit FeatureLexicon(const Dataset& dataset);

    struct Mention {
        std::string feature;
        TextSpan span;
    };

    /// Non-overlapping mentions, longest phrase first at each position. Two
    /// mentions separated by a single space or hyphen count as one, owned by
    /// the first.
    std::vector<Mention> find_mentions(std::string_view text) const;
    const std::vector<std::string>& features() const { return features_; }

  private:
    void add(const std::string& feature, const std::string& phrase);
    void finalize();

    std::vector<std::string> features_;
    // phrase tokens -> feature; phrases claimed by two features are dropped
    std::vector<std::pair<std::vector<std::string>, std::string>> phrases_;
};

enum class ClaimKind { mean_like, proportion, range, unclassified };
enum class Verdict { verified, contradicted, unverifiable };

std::string_view to_string(ClaimKind kind);
std::string_view to_string(Verdict verdict);

struct NumericClaim {
    std::string feature;  // matched feature, or the unmatched token
    bool matched = false;
    std::vector<double> values;  // one value, or selected-vs-rest / low-high pair
    /// Half a unit in the last printed digit of each value (after k/M scaling).
    std::vector<double> resolution;
    ClaimKind kind = ClaimKind::unclassified;
    TextSpan span;          // the numbers
    TextSpan clause;        // the clause the claim was read from
    bool ks_context = false;  // numbers introduced as a KS value
};

std::vector<NumericClaim> extract_claims(const ParsedExplanation& parsed, const FeatureLexicon& lexicon);
std::vector<NumericClaim> extract_claims(const ParsedExplanation& parsed, std::span<const std::string> features);

struct ClaimVerdict {
    NumericClaim claim;
    Verdict verdict = Verdict::unverifiable;
    std::string detail;
};

struct FeatureValueConsistency {
    std::string feature;
    bool consistent = true;
    std::vector<std::vector<double>> values_per_trial;
};

struct ConsistencyMetrics {
    std::size_t trials = 0;
    double mention_jaccard = 1.0;
    std::vector<std::string> features_in_all;
    std::vector<std::string> features_in_some;  // mentioned in at least one trial but not all
    std::vector<FeatureValueConsistency> values;
    bool values_consistent = true;
};

struct ValidationReport {
    std::string mask_id;
    std::vector<ClaimVerdict> claims;
    std::size_t verified = 0;
    std::size_t contradicted = 0;
    std::size_t unverifiable = 0;
    std::vector<std::string> mentioned_features;
    std::vector<std::string> top_k_features;
    double mention_precision = 0.0;
    double mention_recall = 0.0;
    std::vector<std::string> hallucinated_features;
    bool format_ok = false;
    std::size_t word_count = 0;
    std::size_t bullet_count = 0;
    std::optional<ConsistencyMetrics> consistency;
};

struct ValidationOptions {
    std::size_t top_k = 5;
    double tol_rel = 0.02;
    double proportion_tolerance_pp = 2.0;
};

/// Throws ErrorCode::validation when the explanation belongs to another mask.
ValidationReport validate(const Explanation& explanation, const ContrastProfile& profile,
                          const FeatureLexicon& lexicon, const ValidationOptions& options = {});

/// Throws ErrorCode::arity for fewer than two explanations.
ConsistencyMetrics trial_consistency(std::span<const Explanation> explanations, const ContrastProfile& profile,
                                     const FeatureLexicon& lexicon, double tol_rel = 0.02);

nlohmann::json to_json(const ValidationReport& report);
nlohmann::json to_json(const ConsistencyMetrics& metrics);
/// Fixed-width table for terminals and the bench report.
std::string render_report_table(const ValidationReport& report, std::string_view raw_text);

}  // namespace lassolens
