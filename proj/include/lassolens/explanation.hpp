#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json_fwd.hpp>

namespace lassolens {

/// One LLM (or template) answer plus the metadata needed to replay it.
struct Explanation {
    std::string raw_text;
    std::string model;
    std::string strategy;
    int trial_index = 0;
    std::string template_version;
    std::int64_t latency_ms = 0;
    std::string created_at;
    std::string mask_id;
    /// Exact request body sent to the endpoint; empty for the template explainer.
    std::string request_payload;
};

nlohmann::json to_json(const Explanation& explanation);
Explanation explanation_from_json(const nlohmann::json& j);

}  // namespace lassolens
