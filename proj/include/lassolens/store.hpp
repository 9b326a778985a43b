#pragma once

#include "lassolens/dataset.hpp"
#include "lassolens/embedding.hpp"
#include "lassolens/selection.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace lassolens {

nlohmann::json mask_to_json(const SelectionMask& mask);
SelectionMask mask_from_json(const nlohmann::json& j);

nlohmann::json params_to_json(const EmbeddingParams& params);
/// Missing fields keep their defaults. Throws ErrorCode::parameter on bad types.
EmbeddingParams params_from_json(const nlohmann::json& j);

/// Directory-backed store:
///   datasets/<id>.json, embeddings/<dataset>-<params>.json,
///   masks/<id>.json, explanations/<id>.json
/// Writes go through one mutex; everything read is cached in memory.
class Store {
  public:
    explicit Store(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }

    std::string put_dataset(const Dataset& dataset);
    /// Throws ErrorCode::not_found.
    std::shared_ptr<const Dataset> dataset(const std::string& id);

    /// Only complete embeddings are cached.
    void put_embedding(const Embedding& embedding);
    std::optional<Embedding> embedding(const std::string& dataset_id, const EmbeddingParams& params);

    std::string put_mask(const SelectionMask& mask);
    std::shared_ptr<const SelectionMask> mask(const std::string& id);

    /// Appends an explanation record (explanation, prompt, validation, ...).
    /// Returns its id; "id" and "seq" are filled in.
    std::string put_explanation(nlohmann::json record);
    nlohmann::json explanation(const std::string& id);
    /// Ids in insertion order.
    std::vector<std::string> explanations_for(const std::string& mask_id, const std::string& strategy);

  private:
    std::filesystem::path path_for(const std::string& kind, const std::string& id) const;
    void load_explanation_index();

    std::filesystem::path root_;
    std::mutex mu_;
    std::map<std::string, std::shared_ptr<const Dataset>> datasets_;
    std::map<std::string, std::shared_ptr<const SelectionMask>> masks_;
    std::map<std::string, nlohmann::json> explanations_;
    std::vector<std::string> explanation_order_;
    std::uint64_t next_seq_ = 0;
};

}  // namespace lassolens
