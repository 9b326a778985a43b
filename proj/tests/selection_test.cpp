#include "lassolens/error.hpp"
#include "lassolens/selection.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <random>

using namespace lassolens;
using lassolens::testing::make_dataset;

namespace {

Embedding embedding_of(std::vector<double> coords) {
    Embedding e;
    e.dataset_id = "d";
    e.coords = std::move(coords);
    e.complete = true;
    e.epoch = 1;
    return e;
}

}  // namespace

TEST_CASE("point in polygon") {
    const std::vector<Point2> square = {{0, 0}, {2, 0}, {2, 2}, {0, 2}};
    CHECK(point_in_polygon({1, 1}, square));
    CHECK_FALSE(point_in_polygon({3, 1}, square));
    CHECK(point_in_polygon({0, 1}, square));  // on an edge
    CHECK(point_in_polygon({2, 2}, square));  // on a vertex
    CHECK(point_in_polygon({1, 0}, square));

    // even-odd on a self-intersecting bow tie
    const std::vector<Point2> bow = {{0, 0}, {2, 2}, {2, 0}, {0, 2}};
    CHECK(point_in_polygon({0.2, 1.0}, bow));
    CHECK_FALSE(point_in_polygon({1.0, 1.8}, bow));
}

TEST_CASE("lasso selection") {
    std::mt19937_64 rng(21);
    const auto e = embedding_of(lassolens::testing::random_points(rng, 200, 2, 5.0));

    SUBCASE("bounding box selects everything") {
        const std::vector<Point2> box = {{-5.1, -5.1}, {5.1, -5.1}, {5.1, 5.1}, {-5.1, 5.1}};
        const auto m = select_lasso(e, box);
        CHECK(m.selected_count() == 200);
        CHECK(std::holds_alternative<LassoSource>(m.source));
    }
    SUBCASE("disjoint polygon selects nothing") {
        const std::vector<Point2> far = {{10, 10}, {11, 10}, {11, 11}};
        CHECK(select_lasso(e, far).selected_count() == 0);
    }
    SUBCASE("matches the crossing-count oracle") {
        for (int trial = 0; trial < 50; ++trial) {
            const auto poly = lassolens::testing::random_star_polygon(rng, 3 + trial % 20, 0.0, 0.0, 1.0, 5.0);
            const auto m = select_lasso(e, poly);
            for (std::size_t r = 0; r < e.rows(); ++r) {
                CHECK(m[r] == lassolens::testing::brute_point_in_polygon({e.x(r), e.y(r)}, poly));
            }
        }
    }
    SUBCASE("errors") {
        const std::vector<Point2> line = {{0, 0}, {1, 1}};
        try {
            select_lasso(e, line);
            FAIL("two vertices accepted");
        } catch (const Error& err) {
            CHECK(err.code() == ErrorCode::degenerate_polygon);
        }
        auto partial = e;
        partial.complete = false;
        const std::vector<Point2> tri = {{0, 0}, {1, 0}, {0, 1}};
        CHECK_THROWS_AS(select_lasso(partial, tri), Error);
    }
}

TEST_CASE("predicate selection") {
    const auto d = make_dataset("kind,x\nA,1\nB,2\nA,3\n,4\nC,5\n");
    const auto m = select_by_predicate(d, "kind", "A");
    CHECK(m.selected_count() == 2);
    CHECK(m[0]);
    CHECK_FALSE(m[3]);  // missing is never selected
    CHECK(m.dataset_id == d.id());

    CHECK(select_by_predicate(d, "kind", "Z").selected_count() == 0);
    try {
        select_by_predicate(d, "nope", "A");
        FAIL("unknown column accepted");
    } catch (const Error& err) {
        CHECK(err.code() == ErrorCode::predicate);
    }
    const auto numeric = make_dataset("v\n1.5\n2.5\n3.5\n4.5\n5.5\n6.5\n7.5\n8.5\n9.5\n10.5\n11.5\n");
    CHECK_THROWS_AS(select_by_predicate(numeric, "v", "1.5"), Error);
}

TEST_CASE("inversion and explainability") {
    const auto d = make_dataset("kind\nA\nB\nA\nC\n");
    const auto m = select_by_predicate(d, "kind", "A");
    const auto inv = invert(m);
    CHECK(inv.selected_count() + m.selected_count() == d.row_count());
    CHECK(invert(inv).selected == m.selected);
    CHECK(inv.id() != m.id());

    SelectionMask all = m;
    std::fill(all.selected.begin(), all.selected.end(), 1);
    CHECK(invert(all).selected_count() == 0);

    CHECK_THROWS_AS(require_explainable(all), Error);
    CHECK_THROWS_AS(require_explainable(invert(all)), Error);
    CHECK_NOTHROW(require_explainable(m));
}

TEST_CASE("mask ids follow content") {
    const auto d = make_dataset("kind\nA\nB\nA\nC\n");
    const auto a = select_by_predicate(d, "kind", "A");
    auto b = a;
    b.source = LassoSource{{{0, 0}, {1, 0}, {0, 1}}};
    CHECK(a.id() == b.id());
    CHECK(a.id() != select_by_predicate(d, "kind", "B").id());
}
