#include "lassolens/explanation.hpp"

#include <nlohmann/json.hpp>

namespace lassolens {

nlohmann::json to_json(const Explanation& e) {
    return {{"raw_text", e.raw_text},
            {"model", e.model},
            {"strategy", e.strategy},
            {"trial_index", e.trial_index},
            {"template_version", e.template_version},
            {"latency_ms", e.latency_ms},
            {"created_at", e.created_at},
            {"mask_id", e.mask_id},
            {"request_payload", e.request_payload}};
}

Explanation explanation_from_json(const nlohmann::json& j) {
    Explanation e;
    e.raw_text = j.at("raw_text").get<std::string>();
    e.model = j.at("model").get<std::string>();
    e.strategy = j.at("strategy").get<std::string>();
    e.trial_index = j.at("trial_index").get<int>();
    e.template_version = j.at("template_version").get<std::string>();
    e.latency_ms = j.at("latency_ms").get<std::int64_t>();
    e.created_at = j.at("created_at").get<std::string>();
    e.mask_id = j.at("mask_id").get<std::string>();
    e.request_payload = j.value("request_payload", "");
    return e;
}

}  // namespace lassolens
