#include "lassolens/error.hpp"
#include "lassolens/evidence.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <random>

using namespace lassolens;
using lassolens::testing::data_path;
using lassolens::testing::make_dataset;

namespace {

// `selected` rows with group=in followed by `rest` rows with group=out
Dataset grouped_dataset(std::size_t selected, std::size_t rest, std::uint64_t seed = 1) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(50.0, 10.0);
    std::string csv = "group,score,weight,colour\n";
    const char* colours[] = {"red", "green", "blue"};
    for (std::size_t i = 0; i < selected + rest; ++i) {
        csv += i < selected ? "in," : "out,";
        csv += std::to_string(normal(rng) + (i < selected ? 10.0 : 0.0)) + "," + std::to_string(normal(rng)) + ",";
        csv += colours[rng() % 3];
        csv += '\n';
    }
    return make_dataset(csv, "_domain: synthetic test scores\n_label: group\nscore: test score\n");
}

}  // namespace

TEST_CASE("subsample sizes") {
    CHECK(subsample_size(100, 0.2) == 20);
    CHECK(subsample_size(900, 0.2) == 180);
    CHECK(subsample_size(3, 0.2) == 1);
    CHECK(subsample_size(1, 0.5) == 1);
}

TEST_CASE("strategy parsing") {
    CHECK(strategy_name(parse_strategy("s1")) == "S1");
    CHECK(strategy_name(parse_strategy("S2")) == "S2");
    CHECK(strategy_name(parse_strategy("full")) == "S3");
    CHECK_THROWS_AS(parse_strategy("S4"), Error);
    CHECK_THROWS_AS(parse_strategy("S2", 1.0), Error);
    CHECK_THROWS_AS(parse_strategy("S2", 0.0), Error);
}

TEST_CASE("evidence bundles") {
    const auto d = grouped_dataset(100, 900);
    const auto mask = select_by_predicate(d, "group", "in");

    SUBCASE("S2 samples 20% per side, sorted, from the right side, reproducibly") {
        const auto b = assemble_evidence(d, mask, SubsampleStrategy{0.2, 7});
        CHECK(b.selected_rows.size() == 20);
        CHECK(b.rest_rows.size() == 180);
        CHECK(std::is_sorted(b.selected_rows.begin(), b.selected_rows.end()));
        CHECK(std::is_sorted(b.rest_rows.begin(), b.rest_rows.end()));
        CHECK(std::adjacent_find(b.rest_rows.begin(), b.rest_rows.end()) == b.rest_rows.end());
        for (auto r : b.selected_rows) CHECK(mask[r]);
        for (auto r : b.rest_rows) CHECK_FALSE(mask[r]);

        const auto again = assemble_evidence(d, mask, SubsampleStrategy{0.2, 7});
        CHECK(again.payload == b.payload);
        const auto other = assemble_evidence(d, mask, SubsampleStrategy{0.2, 8});
        CHECK(other.selected_rows != b.selected_rows);
        CHECK(b.payload.find("Selected points (20 of 100 rows):") != std::string::npos);
        CHECK(b.payload.find("20% of the selected") != std::string::npos);
    }
    SUBCASE("S3 carries every row without the label") {
        const auto b = assemble_evidence(d, mask, FullDataStrategy{});
        CHECK(b.selected_rows.size() == 100);
        CHECK(b.rest_rows.size() == 900);
        CHECK(b.payload.find("score,weight,colour\n") != std::string::npos);
        CHECK(b.payload.find("group") == std::string::npos);
    }
    SUBCASE("S1 embeds the statistics table verbatim") {
        const auto b = assemble_evidence(d, mask, StatisticsStrategy{});
        const auto table = render_profile_table(summarize(d, mask));
        CHECK(b.payload.find(table) != std::string::npos);
        CHECK(b.selected_rows.empty());
    }
    SUBCASE("unexplainable masks are rejected") {
        CHECK_THROWS_AS(assemble_evidence(d, select_by_predicate(d, "group", "none"), StatisticsStrategy{}), Error);
    }
}

TEST_CASE("prompt assembly") {
    const auto d = grouped_dataset(100, 900);
    const auto mask = select_by_predicate(d, "group", "in");
    std::vector<std::size_t> tokens;
    for (Strategy s : {Strategy{StatisticsStrategy{}}, Strategy{SubsampleStrategy{}}, Strategy{FullDataStrategy{}}}) {
        const auto p = build_prompt(assemble_evidence(d, mask, s), d);
        CHECK(p.full_text().starts_with("I want you to act as a data analyst."));
        CHECK(p.full_text().find("Only refer to the attributes listed above") != std::string::npos);
        CHECK(p.full_text().find("3-5 bullet points") != std::string::npos);
        CHECK(p.context.find("Dataset description: synthetic test scores") != std::string::npos);
        CHECK(p.context.find("- score (numerical): test score") != std::string::npos);
        CHECK(p.context.find("group") == std::string::npos);
        CHECK(p.template_version == "prompt-v1");
        CHECK(p.mask_id == mask.id());
        CHECK(p.estimated_tokens == estimate_tokens(p.full_text()));
        CHECK(p.full_text() == p.instruction + "\n\n" + p.user_message());
        tokens.push_back(p.estimated_tokens);
    }
    CHECK(tokens[0] < tokens[1]);
    CHECK(tokens[1] < tokens[2]);

    const auto other = grouped_dataset(100, 900, 2);
    CHECK_THROWS_AS(build_prompt(assemble_evidence(d, mask, StatisticsStrategy{}), other), Error);
}

TEST_CASE("token estimate") {
    CHECK(estimate_tokens("") == 0);
    CHECK(estimate_tokens(std::string(400, 'x')) == 100);
    CHECK(estimate_tokens(std::string(401, 'x')) == 101);
    CHECK(estimate_tokens("\xC3\xA9\xC3\xA9\xC3\xA9\xC3\xA9") == 1);  // four code points
}

TEST_CASE("budget gate") {
    const auto d = load_dataset(data_path("penguins.csv"), data_path("penguins.context"));
    const auto mask = select_by_predicate(d, "species", "Gentoo");
    const auto p = build_prompt(assemble_evidence(d, mask, FullDataStrategy{}), d);

    auto at_limit = check_budget(p, p.estimated_tokens);
    REQUIRE(std::holds_alternative<BudgetClearance>(at_limit));
    const auto& clearance = std::get<BudgetClearance>(at_limit);
    CHECK(clearance.covers(p));
    CHECK(clearance.budget() == p.estimated_tokens);

    auto tampered = p;
    tampered.evidence += " ";
    CHECK_FALSE(clearance.covers(tampered));

    auto over = check_budget(p, p.estimated_tokens - 1);
    REQUIRE(std::holds_alternative<BudgetExceeded>(over));
    const auto& report = std::get<BudgetExceeded>(over);
    CHECK(report.strategy == "S3");
    CHECK(report.estimated_tokens == p.estimated_tokens);
    CHECK(report.suggested_strategies == std::vector<std::string>{"S1", "S2"});
    CHECK(to_json(report)["budget"] == p.estimated_tokens - 1);

    CHECK_THROWS_AS(check_budget(p, 0), Error);
    CHECK(std::holds_alternative<BudgetClearance>(check_budget(p)));
}
