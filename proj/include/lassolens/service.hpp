#pragma once

#include "lassolens/error.hpp"
#include "lassolens/evidence.hpp"
#include "lassolens/llm_client.hpp"

#include <filesystem>
#include <memory>
#include <string>

namespace lassolens {

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path store_dir = "lassolens-store";
    LlmConfig llm;
    std::size_t token_budget = kDefaultTokenBudget;
};

/// HTTP status used for each error code.
int http_status(ErrorCode code);

/// The JSON API consumed by the browser client:
///   POST /datasets                                   multipart: data, context
///   GET  /datasets/{id}
///   POST /datasets/{id}/embedding                    JSON params
///   GET  /embeddings/{job}
///   POST /datasets/{id}/selections                   {polygon, embedding} | {predicate}
///   GET  /selections/{mask}
///   GET  /selections/{mask}/profile
///   GET  /selections/{mask}/distribution/{feature}?bins=n
///   POST /selections/{mask}/explanations             {strategy, trials, use_mock, fraction, seed, budget}
///   GET  /explanations/{id}
///   GET  /selections/{mask}/trials/{strategy}/consistency
/// Errors come back as {"error": {"code", "message"}} (plus "report" for a
/// refused budget).
class Service {
  public:
    explicit Service(ServiceConfig config);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds to config.port, or to a free port when it is 0. Returns the port.
    int bind();
    /// Blocks until stop().
    void listen();
    void stop();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace lassolens
