#pragma once

#include "lassolens/embedding.hpp"
#include "lassolens/evidence.hpp"
#include "lassolens/llm_client.hpp"
#include "lassolens/validation.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace lassolens {

struct BenchOptions {
    std::string data_path;
    std::string context_path;
    /// "column=value"; exactly one of predicate / polygon_path is set.
    std::optional<std::string> predicate;
    /// JSON array of [x, y] in embedding coordinates.
    std::optional<std::string> polygon_path;
    std::vector<std::string> strategies = {"S1", "S2", "S3"};
    int trials = 3;
    bool use_mock = false;
    std::size_t budget = kDefaultTokenBudget;
    std::uint64_t seed = 7;  // S2 sampling seed
    double fraction = 0.20;
    EmbeddingParams embedding;  // used for polygon selections
    LlmConfig llm;
    std::filesystem::path out_dir;  // empty: nothing written
};

struct StrategyRow {
    std::string strategy;
    bool feasible = true;
    std::size_t estimated_tokens = 0;
    std::optional<BudgetExceeded> infeasible;
    std::string error;  // set when the trials failed for another reason
    int trials = 0;
    double format_rate = 0.0;
    double mean_precision = 0.0;
    double mean_recall = 0.0;
    std::size_t verified = 0;
    std::size_t contradicted = 0;
    std::size_t unverifiable = 0;
    std::vector<std::string> hallucinated;
    std::optional<double> mention_jaccard;
    std::optional<bool> values_consistent;
};

struct BenchReport {
    std::string dataset_name;
    std::string dataset_id;
    std::string mask_id;
    std::string selection;
    std::size_t selected_count = 0;
    std::size_t rest_count = 0;
    std::vector<std::string> ranking;
    bool mock = false;
    std::vector<StrategyRow> rows;
};

/// Runs every strategy x trial. A strategy refused by the budget gate (or one
/// whose endpoint fails) is recorded and the run moves on.
BenchReport run_bench(const BenchOptions& options);

std::string render_markdown(const BenchReport& report);
nlohmann::json to_json(const BenchReport& report);

}  // namespace lassolens
