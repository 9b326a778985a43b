#include "lassolens/error.hpp"
#include "lassolens/llm_client.hpp"
#include "lassolens/validation.hpp"
#include "support/bank_like.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <thread>

using namespace lassolens;
using lassolens::testing::data_path;

namespace {

std::string completion(const std::string& content) {
    return nlohmann::json{{"model", "stub-model"},
                          {"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}}}}}
        .dump();
}

class StubEndpoint {
  public:
    StubEndpoint() {
        server_.Post("/ok", [this](const httplib::Request& req, httplib::Response& res) {
            last_body = req.body;
            last_auth = req.get_header_value("Authorization");
            res.set_content(completion("- fixed answer"), "application/json");
        });
        server_.Post("/flaky", [this](const httplib::Request&, httplib::Response& res) {
            if (++flaky_calls <= 2) {
                res.status = 500;
                return;
            }
            res.set_content(completion("- third time lucky"), "application/json");
        });
        server_.Post("/slow", [](const httplib::Request&, httplib::Response& res) {
            std::this_thread::sleep_for(std::chrono::milliseconds(600));
            res.set_content(completion("- too late"), "application/json");
        });
        server_.Post("/denied", [](const httplib::Request&, httplib::Response& res) { res.status = 401; });
        server_.Post("/bad", [](const httplib::Request&, httplib::Response& res) { res.status = 400; });
        server_.Post("/empty", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(completion("  "), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~StubEndpoint() {
        server_.stop();
        thread_.join();
    }

    LlmConfig config(const std::string& path) const {
        LlmConfig c;
        c.endpoint = "http://127.0.0.1:" + std::to_string(port_) + path;
        c.api_key_env = "LASSOLENS_TEST_KEY";
        c.timeout_seconds = 5;
        c.initial_backoff_seconds = 0.01;
        return c;
    }

    std::string last_body;
    std::string last_auth;
    std::atomic<int> flaky_calls{0};

  private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

struct PromptFixture {
    Dataset dataset = load_dataset(data_path("penguins.csv"), data_path("penguins.context"));
    SelectionMask mask = select_by_predicate(dataset, "species", "Gentoo");
    ContrastProfile profile = summarize(dataset, mask);
    PromptBundle prompt = build_prompt(assemble_evidence(dataset, mask, StatisticsStrategy{}), dataset);
    BudgetClearance clearance = std::get<BudgetClearance>(check_budget(prompt));
};

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::io;
}

}  // namespace

TEST_CASE("endpoint parsing and request body") {
    const auto parts = split_endpoint("https://api.example.com/v1/chat/completions");
    CHECK(parts.base == "https://api.example.com");
    CHECK(parts.path == "/v1/chat/completions");
    CHECK(split_endpoint("http://localhost:8000").path == "/");
    CHECK_THROWS_AS(split_endpoint("ftp://x/y"), Error);

    const PromptFixture f;
    LlmConfig c;
    c.seed = 5;
    const auto body = nlohmann::json::parse(chat_request_body(f.prompt, c));
    CHECK(body["model"] == "gpt-5-mini");
    CHECK(body["messages"][0]["role"] == "system");
    CHECK(body["messages"][0]["content"] == f.prompt.instruction);
    CHECK(body["messages"][1]["content"] == f.prompt.user_message());
    CHECK(body["seed"] == 5);
    CHECK_FALSE(body.contains("temperature"));
}

TEST_CASE("chat client against a stub endpoint") {
    StubEndpoint stub;
    const PromptFixture f;

    SUBCASE("passes the text through with provenance") {
        setenv("LASSOLENS_TEST_KEY", "sk-test", 1);
        const auto e = generate_explanation(f.prompt, f.clearance, stub.config("/ok"), 2);
        unsetenv("LASSOLENS_TEST_KEY");
        CHECK(e.raw_text == "- fixed answer");
        CHECK(e.model == "stub-model");
        CHECK(e.strategy == "S1");
        CHECK(e.trial_index == 2);
        CHECK(e.mask_id == f.mask.id());
        CHECK(e.template_version == "prompt-v1");
        CHECK(e.request_payload == stub.last_body);
        CHECK(stub.last_auth == "Bearer sk-test");
        CHECK(explanation_from_json(to_json(e)).raw_text == e.raw_text);
    }
    SUBCASE("retries server errors") {
        const auto e = generate_explanation(f.prompt, f.clearance, stub.config("/flaky"));
        CHECK(e.raw_text == "- third time lucky");
        CHECK(stub.flaky_calls == 3);
    }
    SUBCASE("gives up after the last retry") {
        auto c = stub.config("/slow");
        c.timeout_seconds = 0.2;
        c.max_retries = 1;
        try {
            generate_explanation(f.prompt, f.clearance, c);
            FAIL("timeout not reported");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::unavailable);
            CHECK(std::string(e.what()).find("2 attempts") != std::string::npos);
        }
    }
    SUBCASE("client errors are configuration problems") {
        CHECK(code_of([&] { generate_explanation(f.prompt, f.clearance, stub.config("/denied")); }) == ErrorCode::config);
        CHECK(code_of([&] { generate_explanation(f.prompt, f.clearance, stub.config("/bad")); }) == ErrorCode::config);
    }
    SUBCASE("empty completion") {
        CHECK(code_of([&] { generate_explanation(f.prompt, f.clearance, stub.config("/empty")); }) ==
              ErrorCode::empty_response);
    }
    SUBCASE("clearance must match the prompt") {
        auto other = f.prompt;
        other.evidence += "\nextra";
        CHECK(code_of([&] { generate_explanation(other, f.clearance, stub.config("/ok")); }) ==
              ErrorCode::contract_violation);
    }
    SUBCASE("nothing listening") {
        LlmConfig c;
        c.endpoint = "http://127.0.0.1:1/v1/chat/completions";
        c.max_retries = 0;
        CHECK(code_of([&] { generate_explanation(f.prompt, f.clearance, c); }) == ErrorCode::unavailable);
    }
}

TEST_CASE("config validation") {
    LlmConfig c;
    CHECK_NOTHROW(c.validate());
    c.max_concurrent = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.timeout_seconds = 0;
    CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("template explainer") {
    const PromptFixture f;
    const auto e = template_explanation(f.prompt, f.clearance, f.profile);
    const auto parsed = parse_explanation(e.raw_text);
    CHECK(parsed.format_ok);
    CHECK(parsed.bullets.size() == 5);
    CHECK_FALSE(parsed.bold_terms.empty());
    CHECK(e.model == "template");
    CHECK(template_explanation(f.prompt, f.clearance, f.profile).raw_text == e.raw_text);

    const auto report = validate(e, f.profile, FeatureLexicon(f.dataset));
    CHECK(report.contradicted == 0);
    CHECK(report.unverifiable == 0);
    CHECK(report.hallucinated_features.empty());
    CHECK(report.verified == 5);

    SUBCASE("duration bullet carries both means") {
        const auto d = lassolens::testing::bank_like_dataset();
        const auto m = select_by_predicate(d, "deposit", "yes");
        const auto p = build_prompt(assemble_evidence(d, m, StatisticsStrategy{}), d);
        const auto text = template_explanation(p, std::get<BudgetClearance>(check_budget(p)), summarize(d, m)).raw_text;
        const auto at = text.find("- **duration**");
        REQUIRE(at != std::string::npos);
        const auto line = text.substr(at, text.find('\n', at) - at);
        CHECK(line.find("537") != std::string::npos);
        CHECK(line.find("223") != std::string::npos);
    }
    SUBCASE("few attributes still give three bullets") {
        const auto d = lassolens::testing::make_dataset("g,v\na,1.5\na,2.5\nb,3.5\nb,4.5\n", "_kind.v: numerical\n");
        const auto m = select_by_predicate(d, "g", "a");
        const auto p = build_prompt(assemble_evidence(d, m, StatisticsStrategy{}), d);
        const auto prof = summarize(d, m);
        const auto ex = template_explanation(p, std::get<BudgetClearance>(check_budget(p)), prof);
        CHECK(parse_explanation(ex.raw_text).format_ok);
        const auto r = validate(ex, prof, FeatureLexicon(d));
        CHECK(r.contradicted == 0);
        CHECK(r.hallucinated_features.empty());
    }
    SUBCASE("profile for another mask") {
        const auto other = summarize(f.dataset, select_by_predicate(f.dataset, "species", "Adelie"));
        CHECK_THROWS_AS(template_explanation(f.prompt, f.clearance, other), Error);
    }
}
