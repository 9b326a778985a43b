#pragma once

#include "lassolens/dataset.hpp"
#include "lassolens/selection.hpp"
#include "lassolens/statistics.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace lassolens {

struct StatisticsStrategy {};

struct SubsampleStrategy {
    double fraction = 0.20;
    std::uint64_t seed = 7;
};

struct FullDataStrategy {};

using Strategy = std::variant<StatisticsStrategy, SubsampleStrategy, FullDataStrategy>;

/// "S1", "S2" or "S3".
std::string strategy_name(const Strategy& strategy);
/// Accepts S1/S2/S3 (any case); throws ErrorCode::parameter otherwise.
Strategy parse_strategy(std::string_view name, double fraction = 0.20, std::uint64_t seed = 7);
/// Throws ErrorCode::parameter unless 0 < fraction < 1.
void validate_strategy(const Strategy& strategy);

inline constexpr std::string_view kTemplateVersion = "prompt-v1";
inline constexpr std::size_t kDefaultTokenBudget = 128000;

struct EvidenceBundle {
    Strategy strategy;
    std::string dataset_id;
    std::string mask_id;
    std::string context_text;
    /// Evidence description followed by the serialized statistics or row tables.
    std::string payload;
    std::size_t selected_count = 0;
    std::size_t rest_count = 0;
    /// Rows carried by S2/S3 payloads, ascending; empty for S1.
    std::vector<std::size_t> selected_rows;
    std::vector<std::size_t> rest_rows;
};

/// Domain description plus one line per feature (label column excluded).
std::string render_context(const Dataset& dataset);

/// Header + comma-separated rows of the non-label features, full-precision
/// numbers, missing cells as NA.
std::string render_rows(const Dataset& dataset, std::span<const std::size_t> rows);

/// S2 sample size for one side.
std::size_t subsample_size(std::size_t side_count, double fraction);

EvidenceBundle assemble_evidence(const Dataset& dataset, const SelectionMask& mask, const Strategy& strategy);

struct PromptBundle {
    std::string instruction;
    std::string context;
    std::string evidence;
    std::string task_format;
    std::size_t estimated_tokens = 0;
    Strategy strategy;
    std::string template_version;
    std::string mask_id;

    /// What goes into the user message: context, evidence, task and format.
    std::string user_message() const;
    /// Instruction followed by the user message.
    std::string full_text() const;
};

PromptBundle build_prompt(const EvidenceBundle& bundle, const Dataset& dataset);

/// ceil(code points / 4). A rough proxy for a model tokenizer.
std::size_t estimate_tokens(std::string_view text);

/// Proof that a prompt passed check_budget; generate_explanation insists on one.
class BudgetClearance {
  public:
    std::size_t estimated_tokens() const { return estimated_tokens_; }
    std::size_t budget() const { return budget_; }
    /// True when this clearance was issued for exactly this prompt.
    bool covers(const PromptBundle& prompt) const;

  private:
    friend class BudgetGate;
    BudgetClearance(std::string fingerprint, std::size_t estimated, std::size_t budget)
        : fingerprint_(std::move(fingerprint)), estimated_tokens_(estimated), budget_(budget) {}

    std::string fingerprint_;
    std::size_t estimated_tokens_;
    std::size_t budget_;
};

struct BudgetExceeded {
    std::size_t estimated_tokens = 0;
    std::size_t budget = 0;
    std::string strategy;
    std::vector<std::string> suggested_strategies;
};

using BudgetVerdict = std::variant<BudgetClearance, BudgetExceeded>;

/// ok iff estimated_tokens <= budget. Throws ErrorCode::parameter for budget 0.
BudgetVerdict check_budget(const PromptBundle& prompt, std::size_t budget = kDefaultTokenBudget);

nlohmann::json to_json(const BudgetExceeded& report);
nlohmann::json to_json(const PromptBundle& prompt);

}  // namespace lassolens
