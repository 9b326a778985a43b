#pragma once

#include "lassolens/evidence.hpp"
#include "lassolens/explanation.hpp"
#include "lassolens/statistics.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

namespace lassolens {

struct LlmConfig {
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string model = "gpt-5-mini";
    /// Name of the environment variable holding the API key. The key itself is
    /// never stored.
    std::string api_key_env = "OPENAI_API_KEY";
    double timeout_seconds = 120.0;
    int max_retries = 3;
    double initial_backoff_seconds = 1.0;
    double backoff_multiplier = 2.0;
    std::optional<double> temperature;
    std::optional<std::int64_t> seed;
    std::size_t max_concurrent = 4;

    /// Throws ErrorCode::config for out-of-range values.
    void validate() const;
};

/// Endpoint split into scheme+host and path.
struct EndpointParts {
    std::string base;  // e.g. https://api.openai.com
    std::string path;  // e.g. /v1/chat/completions
};
EndpointParts split_endpoint(const std::string& endpoint);

/// Chat-completions request body for a prompt.
std::string chat_request_body(const PromptBundle& prompt, const LlmConfig& config);

/// Sends the prompt and records the reply. Retries 5xx, 429 and transport
/// errors with exponential backoff; 401/403 and other 4xx are config errors.
/// Throws ErrorCode::contract_violation if the clearance is for another prompt,
/// ErrorCode::unavailable once retries are exhausted, ErrorCode::empty_response
/// for an empty completion.
Explanation generate_explanation(const PromptBundle& prompt, const BudgetClearance& clearance, const LlmConfig& config,
                                 int trial_index = 0);

/// Deterministic offline explainer. Writes the answer straight from the
/// contrast profile so every claim is checkable.
Explanation template_explanation(const PromptBundle& prompt, const BudgetClearance& clearance,
                                 const ContrastProfile& profile, int trial_index = 0);

/// Current UTC time as ISO 8601 with seconds.
std::string utc_timestamp();

}  // namespace lassolens
