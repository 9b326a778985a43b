#include "lassolens/bench.hpp"
#include "lassolens/error.hpp"
#include "lassolens/util.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <random>

using namespace lassolens;
using lassolens::testing::data_path;

namespace {

BenchOptions penguin_options() {
    BenchOptions o;
    o.data_path = data_path("penguins.csv");
    o.context_path = data_path("penguins.context");
    o.predicate = "species=Gentoo";
    o.use_mock = true;
    return o;
}

std::filesystem::path fresh_dir(const std::string& tag) {
    std::random_device rd;
    auto dir = std::filesystem::temp_directory_path() / ("lassolens-bench-" + tag + std::to_string(rd()));
    std::filesystem::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("mock trials agree with each other") {
    const auto report = run_bench(penguin_options());
    CHECK(report.selected_count == 119);
    CHECK(report.rest_count == 214);
    REQUIRE(report.rows.size() == 3);
    for (const auto& row : report.rows) {
        INFO(row.strategy);
        CHECK(row.feasible);
        CHECK(row.trials == 3);
        CHECK(row.format_rate == 1.0);
        CHECK(row.contradicted == 0);
        CHECK(row.hallucinated.empty());
        REQUIRE(row.mention_jaccard.has_value());
        CHECK(*row.mention_jaccard == 1.0);
        CHECK(row.values_consistent == true);
    }
    CHECK(report.rows[0].estimated_tokens < report.rows[1].estimated_tokens);
    CHECK(report.rows[1].estimated_tokens < report.rows[2].estimated_tokens);
}

TEST_CASE("budget refusal is reported per strategy") {
    auto o = penguin_options();
    o.budget = 2000;
    o.trials = 1;
    const auto dir = fresh_dir("budget");
    o.out_dir = dir;
    const auto report = run_bench(o);
    REQUIRE(report.rows.size() == 3);
    CHECK(report.rows[0].feasible);
    CHECK(report.rows[1].feasible);
    CHECK_FALSE(report.rows[2].feasible);
    REQUIRE(report.rows[2].infeasible.has_value());
    CHECK(report.rows[2].infeasible->budget == 2000);
    CHECK(report.rows[2].estimated_tokens > 2000);
    CHECK(report.rows[0].verified > 0);
    CHECK_FALSE(report.rows[1].mention_jaccard.has_value());

    CHECK(std::filesystem::exists(dir / "S1" / "prompt.txt"));
    CHECK(std::filesystem::exists(dir / "S1" / "trial-0.md"));
    CHECK(std::filesystem::exists(dir / "S1" / "trial-0.validation.txt"));
    CHECK(std::filesystem::exists(dir / "S3" / "budget.json"));
    CHECK_FALSE(std::filesystem::exists(dir / "S3" / "prompt.txt"));
    const auto md = read_file((dir / "report.md").string());
    CHECK(md.find("S3 is infeasible") != std::string::npos);
    const auto j = nlohmann::json::parse(read_file((dir / "report.json").string()));
    CHECK(j["strategies"][2]["feasible"] == false);
    CHECK(j["strategies"][2]["budget_report"]["budget"] == 2000);
    std::filesystem::remove_all(dir);
}

TEST_CASE("reports are reproducible") {
    auto o = penguin_options();
    o.strategies = {"S1", "S2"};
    o.trials = 2;
    const auto a = fresh_dir("a");
    const auto b = fresh_dir("b");
    o.out_dir = a;
    run_bench(o);
    o.out_dir = b;
    run_bench(o);
    for (const char* f : {"report.md", "report.json", "profile.txt", "S2/prompt.txt"}) {
        INFO(f);
        CHECK(read_file((a / f).string()) == read_file((b / f).string()));
    }
    std::filesystem::remove_all(a);
    std::filesystem::remove_all(b);
}

TEST_CASE("bench options") {
    auto o = penguin_options();
    o.polygon_path = "/nonexistent.json";
    CHECK_THROWS_AS(run_bench(o), Error);
    o = penguin_options();
    o.predicate = "species";
    CHECK_THROWS_AS(run_bench(o), Error);
    o = penguin_options();
    o.strategies = {"S7"};
    CHECK_THROWS_AS(run_bench(o), Error);
    o = penguin_options();
    o.trials = 0;
    CHECK_THROWS_AS(run_bench(o), Error);
}

TEST_CASE("lasso selection through the bench") {
    auto o = penguin_options();
    o.predicate.reset();
    const auto dir = fresh_dir("poly");
    std::filesystem::create_directories(dir);
    write_file((dir / "poly.json").string(), "[[-1000,-1000],[1000,-1000],[1000,1000],[-1000,1000]]");
    o.polygon_path = (dir / "poly.json").string();
    o.embedding.n_epochs = 30;
    o.strategies = {"S1"};
    o.trials = 1;
    // every point selected: nothing to contrast against
    CHECK_THROWS_AS(run_bench(o), Error);
    write_file((dir / "poly.json").string(), "[[-1000,-1000],[0,-1000],[0,1000],[-1000,1000]]");
    const auto report = run_bench(o);
    CHECK(report.selected_count + report.rest_count == 333);
    CHECK(report.selection == "lasso (4 vertices)");
    std::filesystem::remove_all(dir);
}
