#include "lassolens/llm_client.hpp"

#include "lassolens/error.hpp"
#include "lassolens/util.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

namespace lassolens {

namespace {

using Semaphore = std::counting_semaphore<256>;

Semaphore& endpoint_semaphore(const std::string& endpoint, std::size_t max_concurrent) {
    static std::mutex mu;
    static std::map<std::string, std::unique_ptr<Semaphore>> pool;
    std::lock_guard lock(mu);
    auto& slot = pool[endpoint];
    if (!slot) slot = std::make_unique<Semaphore>(static_cast<std::ptrdiff_t>(std::min<std::size_t>(max_concurrent, 256)));
    return *slot;
}

class SemaphoreGuard {
  public:
    explicit SemaphoreGuard(Semaphore& s) : s_(s) { s_.acquire(); }
    ~SemaphoreGuard() { s_.release(); }
    SemaphoreGuard(const SemaphoreGuard&) = delete;
    SemaphoreGuard& operator=(const SemaphoreGuard&) = delete;

  private:
    Semaphore& s_;
};

void require_clearance(const PromptBundle& prompt, const BudgetClearance& clearance) {
    if (!clearance.covers(prompt)) {
        throw Error(ErrorCode::contract_violation, "budget clearance was issued for a different prompt");
    }
}

std::string number_text(double v) { return display_number(v); }

std::string percent_text(double fraction) { return fmt::format("{:.1f}%", 100.0 * fraction); }

}  // namespace

void LlmConfig::validate() const {
    if (endpoint.empty()) throw Error(ErrorCode::config, "endpoint is empty");
    if (model.empty()) throw Error(ErrorCode::config, "model is empty");
    if (!(timeout_seconds > 0.0)) throw Error(ErrorCode::config, "timeout must be positive");
    if (max_retries < 0) throw Error(ErrorCode::config, "max_retries must be >= 0");
    if (initial_backoff_seconds < 0.0 || backoff_multiplier < 1.0) {
        throw Error(ErrorCode::config, "backoff must be >= 0 with multiplier >= 1");
    }
    if (max_concurrent == 0) throw Error(ErrorCode::config, "max_concurrent must be >= 1");
    split_endpoint(endpoint);
}

EndpointParts split_endpoint(const std::string& endpoint) {
    const auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) throw Error(ErrorCode::config, "endpoint must start with http:// or https://");
    const auto scheme = endpoint.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") throw Error(ErrorCode::config, "unsupported endpoint scheme " + scheme);
    const auto path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {endpoint, "/"};
    return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

std::string chat_request_body(const PromptBundle& prompt, const LlmConfig& config) {
    nlohmann::json body = {{"model", config.model},
                           {"messages",
                            {{{"role", "system"}, {"content", prompt.instruction}},
                             {{"role", "user"}, {"content", prompt.user_message()}}}}};
    if (config.temperature) body["temperature"] = *config.temperature;
    if (config.seed) body["seed"] = *config.seed;
    return body.dump();
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

Explanation generate_explanation(const PromptBundle& prompt, const BudgetClearance& clearance, const LlmConfig& config,
                                 int trial_index) {
    require_clearance(prompt, clearance);
    config.validate();
    const auto [base, path] = split_endpoint(config.endpoint);
    const std::string body = chat_request_body(prompt, config);

    httplib::Headers headers;
    if (const char* key = std::getenv(config.api_key_env.c_str()); key && *key) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    httplib::Client client(base);
    const auto secs = static_cast<time_t>(config.timeout_seconds);
    const auto usecs = static_cast<time_t>((config.timeout_seconds - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    SemaphoreGuard guard(endpoint_semaphore(config.endpoint, config.max_concurrent));
    const int attempts = config.max_retries + 1;
    double backoff = config.initial_backoff_seconds;
    std::string last_failure;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        const auto started = std::chrono::steady_clock::now();
        auto res = client.Post(path, headers, body, "application/json");
        const auto latency =
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count();
        if (!res) {
            last_failure = "transport error: " + httplib::to_string(res.error());
        } else if (res->status == 200) {
            nlohmann::json reply;
            try {
                reply = nlohmann::json::parse(res->body);
            } catch (const nlohmann::json::exception& e) {
                throw Error(ErrorCode::empty_response, std::string("reply is not JSON: ") + e.what());
            }
            std::string text;
            if (reply.contains("choices") && !reply["choices"].empty()) {
                const auto& msg = reply["choices"][0].value("message", nlohmann::json::object());
                if (msg.contains("content") && msg["content"].is_string()) text = msg["content"].get<std::string>();
            }
            if (trim(text).empty()) throw Error(ErrorCode::empty_response, "the model returned an empty completion");
            Explanation e;
            e.raw_text = std::move(text);
            e.model = reply.value("model", config.model);
            e.strategy = strategy_name(prompt.strategy);
            e.trial_index = trial_index;
            e.template_version = prompt.template_version;
            e.latency_ms = latency;
            e.created_at = utc_timestamp();
            e.mask_id = prompt.mask_id;
            e.request_payload = body;
            return e;
        } else if (res->status == 401 || res->status == 403) {
            throw Error(ErrorCode::config, fmt::format("endpoint rejected the credentials (HTTP {}); check ${}", res->status,
                                                       config.api_key_env));
        } else if (res->status == 429 || res->status >= 500) {
            last_failure = fmt::format("HTTP {}", res->status);
        } else {
            throw Error(ErrorCode::config,
                        fmt::format("endpoint rejected the request (HTTP {}): {}", res->status, res->body.substr(0, 300)));
        }
        if (attempt < attempts && backoff > 0.0) {
            std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
            backoff *= config.backoff_multiplier;
        }
    }
    throw Error(ErrorCode::unavailable,
                fmt::format("{} unavailable after {} attempts (last: {})", config.endpoint, attempts, last_failure));
}

Explanation template_explanation(const PromptBundle& prompt, const BudgetClearance& clearance,
                                 const ContrastProfile& profile, int trial_index) {
    require_clearance(prompt, clearance);
    if (profile.mask_id != prompt.mask_id) {
        throw Error(ErrorCode::contract_violation, "profile and prompt refer to different masks");
    }
    std::vector<const FeatureSummary*> top;
    for (const auto& name : profile.ranking) {
        const FeatureSummary* s = profile.find(name);
        if (s && feature_ks(*s) && top.size() < 5) top.push_back(s);
    }

    std::string text;
    if (top.empty()) {
        text = "The selected points cannot be told apart from the rest with the available attributes.\n\n";
    } else {
        text = "The selected points differ most in ";
        const std::size_t named = std::min<std::size_t>(3, top.size());
        for (std::size_t i = 0; i < named; ++i) {
            if (i) text += i + 1 == named ? " and " : ", ";
            text += "**" + feature_name(*top[i]) + "**";
        }
        text += ".\n\n";
    }
    std::size_t bullets = 0;
    for (const FeatureSummary* s : top) {
        if (const auto* n = std::get_if<NumericalSummary>(s)) {
            text += fmt::format("- **{}**: mean {} in the selected points vs {} in the non-selected points.\n", n->feature,
                                number_text(n->selected.mean), number_text(n->rest.mean));
        } else {
            const auto& c = std::get<CategoricalSummary>(*s);
            std::size_t best = 0;
            double gap = -1.0;
            for (std::size_t i = 0; i < c.ordering.size(); ++i) {
                const double g = std::abs(c.selected_proportion(i) - c.rest_proportion(i));
                if (g > gap) {
                    gap = g;
                    best = i;
                }
            }
            text += fmt::format("- **{}**: **{}** makes up {} of the selected points vs {} of the non-selected points.\n",
                                c.feature, c.ordering[best], percent_text(c.selected_proportion(best)),
                                percent_text(c.rest_proportion(best)));
        }
        ++bullets;
    }
    const std::size_t total = profile.selected_count + profile.rest_count;
    if (bullets < 3) {
        text += fmt::format("- The selection holds {} of the {} points.\n", profile.selected_count, total);
        ++bullets;
    }
    if (bullets < 3) {
        text += fmt::format("- The non-selected group holds {} points.\n", profile.rest_count);
        ++bullets;
    }
    if (bullets < 3) text += "- No further attribute separates the two groups.\n";

    Explanation e;
    e.raw_text = std::move(text);
    e.model = "template";
    e.strategy = strategy_name(prompt.strategy);
    e.trial_index = trial_index;
    e.template_version = prompt.template_version;
    e.latency_ms = 0;
    e.created_at = utc_timestamp();
    e.mask_id = prompt.mask_id;
    return e;
}

}  // namespace lassolens
