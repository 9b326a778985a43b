#include "lassolens/embedding.hpp"
#include "lassolens/error.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

using namespace lassolens;
using lassolens::testing::data_path;
using lassolens::testing::make_dataset;

namespace {

FeatureMatrix matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    FeatureMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.values = std::move(values);
    for (std::size_t c = 0; c < cols; ++c) m.column_names.push_back("f" + std::to_string(c));
    return m;
}

// all-pairs distances sorted by (distance, index)
std::vector<std::uint32_t> brute_neighbors(const FeatureMatrix& m, std::size_t r, std::size_t k) {
    std::vector<std::pair<double, std::uint32_t>> d;
    for (std::size_t j = 0; j < m.rows; ++j) {
        if (j == r) continue;
        double s = 0;
        for (std::size_t c = 0; c < m.cols; ++c) s += (m.at(r, c) - m.at(j, c)) * (m.at(r, c) - m.at(j, c));
        d.emplace_back(std::sqrt(s), static_cast<std::uint32_t>(j));
    }
    std::sort(d.begin(), d.end());
    std::vector<std::uint32_t> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back(d[i].second);
    return out;
}

}  // namespace

TEST_CASE("encoding") {
    SUBCASE("constant numerical column encodes to zeros") {
        const auto d = make_dataset("k,x\n5,1.5\n5,2.5\n5,3.5\n", "_kind.k: numerical\n_kind.x: numerical\n");
        const auto m = encode_features(d);
        REQUIRE(m.cols == 2);
        for (std::size_t r = 0; r < 3; ++r) CHECK(m.at(r, 0) == 0.0);
    }
    SUBCASE("one-hot rows sum to one, missing gets its own column") {
        const auto d = make_dataset("c\nred\ngreen\nblue\nred\n\n", "");
        const auto plain = make_dataset("c\nred\ngreen\nblue\nred\n", "");
        CHECK(encode_features(plain).cols == 3);
        const auto m = encode_features(make_dataset("c,x\nred,1\ngreen,2\nblue,3\nNA,4\n", "_kind.x: numerical\n"));
        CHECK(m.cols == 5);
        for (std::size_t r = 0; r < m.rows; ++r) {
            double s = 0;
            for (std::size_t c = 0; c < 4; ++c) s += m.at(r, c);
            CHECK(s == 1.0);
        }
        (void)d;
    }
    SUBCASE("penguins standardized columns have zero mean") {
        const auto d = load_dataset(data_path("penguins.csv"), data_path("penguins.context"));
        const auto m = encode_features(d);
        CHECK(m.cols == 4 + 3 + 2);
        CHECK(std::find(m.column_names.begin(), m.column_names.end(), "species=Gentoo") == m.column_names.end());
        for (std::size_t c = 0; c < m.cols; ++c) {
            if (m.column_names[c].find('=') != std::string::npos) continue;
            double mean = 0, sq = 0;
            for (std::size_t r = 0; r < m.rows; ++r) mean += m.at(r, c);
            mean /= static_cast<double>(m.rows);
            for (std::size_t r = 0; r < m.rows; ++r) sq += (m.at(r, c) - mean) * (m.at(r, c) - mean);
            CHECK(std::abs(mean) < 1e-9);
            CHECK(sq / static_cast<double>(m.rows) == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
    SUBCASE("label-only dataset has nothing to encode") {
        const auto d = make_dataset("y\na\nb\n", "_label: y\n");
        CHECK_THROWS_AS(encode_features(d), Error);
    }
}

TEST_CASE("exact kNN") {
    SUBCASE("collinear points") {
        const auto g = build_knn_graph(matrix(3, 1, {0.0, 1.0, 2.0}), 1);
        CHECK(g.neighbors(0)[0] == 1);
        CHECK(g.neighbors(2)[0] == 1);
        CHECK(g.neighbors(1)[0] == 0);  // tie between 0 and 2 goes to the lower index
    }
    SUBCASE("duplicates resolve by index") {
        const auto g = build_knn_graph(matrix(4, 1, {1.0, 1.0, 1.0, 1.0}), 2);
        CHECK(std::vector<std::uint32_t>(g.neighbors(0).begin(), g.neighbors(0).end()) == std::vector<std::uint32_t>{1, 2});
        CHECK(std::vector<std::uint32_t>(g.neighbors(3).begin(), g.neighbors(3).end()) == std::vector<std::uint32_t>{0, 1});
    }
    SUBCASE("matches brute force on random points") {
        std::mt19937_64 rng(11);
        for (std::size_t n : {50u, 700u}) {  // 700 exercises the threaded path
            const auto m = matrix(n, 3, lassolens::testing::random_points(rng, n, 3));
            const auto g = build_knn_graph(m, 5);
            for (std::size_t r = 0; r < n; r += (n > 100 ? 7 : 1)) {
                const auto expect = brute_neighbors(m, r, 5);
                CHECK(std::vector<std::uint32_t>(g.neighbors(r).begin(), g.neighbors(r).end()) == expect);
            }
        }
    }
    SUBCASE("k out of range") {
        CHECK_THROWS_AS(build_knn_graph(matrix(3, 1, {0, 1, 2}), 3), Error);
        CHECK_THROWS_AS(build_knn_graph(matrix(3, 1, {0, 1, 2}), 0), Error);
    }
}

TEST_CASE("fuzzy simplicial set is symmetric with weights in (0, 1]") {
    std::mt19937_64 rng(3);
    const auto m = matrix(80, 2, lassolens::testing::random_points(rng, 80, 2));
    const auto fuzzy = fuzzy_simplicial_set(build_knn_graph(m, 8));
    std::map<std::pair<std::uint32_t, std::uint32_t>, double> w;
    for (std::size_t i = 0; i < fuzzy.weight.size(); ++i) {
        CHECK(fuzzy.weight[i] > 0.0);
        CHECK(fuzzy.weight[i] <= 1.0 + 1e-12);
        CHECK(fuzzy.head[i] != fuzzy.tail[i]);
        w[{fuzzy.head[i], fuzzy.tail[i]}] = fuzzy.weight[i];
    }
    for (const auto& [edge, weight] : w) {
        auto it = w.find({edge.second, edge.first});
        REQUIRE(it != w.end());
        CHECK(it->second == doctest::Approx(weight).epsilon(1e-12));
    }
}

TEST_CASE("curve fit matches scipy curve_fit") {
    // frozen from scipy.optimize.curve_fit on the same 300-point target
    struct Case {
        double spread, min_dist, a, b;
    };
    for (const auto& c : {Case{1.0, 0.1, 1.57694346, 0.89506088}, Case{2.0, 0.6, 0.21229748, 1.11225393},
                          Case{1.0, 0.5, 0.58303002, 1.33416699}}) {
        const auto p = fit_curve(c.spread, c.min_dist);
        CHECK(p.a == doctest::Approx(c.a).epsilon(1e-5));
        CHECK(p.b == doctest::Approx(c.b).epsilon(1e-5));
    }
}

TEST_CASE("parameter validation") {
    EmbeddingParams p;
    CHECK_THROWS_AS(p.validate(50), Error);  // n_neighbors 50 needs at least 51 rows
    CHECK_NOTHROW(p.validate(51));
    p.min_dist = 3.0;
    CHECK_THROWS_AS(p.validate(100), Error);
    p = {};
    p.n_epochs = 0;
    CHECK_THROWS_AS(p.validate(100), Error);
    CHECK(EmbeddingParams{}.key() != p.key());
}

TEST_CASE("layout") {
    std::mt19937_64 rng(5);
    // two well separated blobs
    std::vector<double> values;
    std::normal_distribution<double> noise(0.0, 0.3);
    for (int i = 0; i < 120; ++i) {
        const double c = i < 60 ? -4.0 : 4.0;
        values.push_back(c + noise(rng));
        values.push_back(noise(rng));
        values.push_back(noise(rng));
    }
    const auto m = matrix(120, 3, values);
    EmbeddingParams p;
    p.n_neighbors = 10;
    p.n_epochs = 120;
    p.snapshot_interval = 25;

    SUBCASE("strict mode is bit-identical across runs") {
        const auto a = compute_embedding(m, p);
        const auto b = compute_embedding(m, p);
        CHECK(a.complete);
        CHECK(a.epoch == 120);
        CHECK(a.coords == b.coords);
        p.seed = 43;
        CHECK(compute_embedding(m, p).coords != a.coords);
    }
    SUBCASE("snapshots strictly increase and end on the final layout") {
        std::vector<Snapshot> shots;
        const auto e = compute_embedding(m, p, [&](const Snapshot& s) { shots.push_back(s); });
        REQUIRE(shots.size() == 5);  // 25, 50, 75, 100, 120
        for (std::size_t i = 1; i < shots.size(); ++i) CHECK(shots[i].epoch > shots[i - 1].epoch);
        CHECK(shots.back().epoch == 120);
        CHECK(shots.back().coords == e.coords);
        for (double v : e.coords) CHECK(std::isfinite(v));
    }
    SUBCASE("blobs stay apart") {
        const auto e = compute_embedding(m, p);
        std::vector<std::string> labels;
        for (int i = 0; i < 120; ++i) labels.push_back(i < 60 ? "a" : "b");
        CHECK(lassolens::testing::silhouette(e.coords, labels) > 0.5);
    }
    SUBCASE("stop request returns a partial layout") {
        std::stop_source stop;
        const auto e = compute_embedding(m, p, [&](const Snapshot& s) {
            if (s.epoch >= 50) stop.request_stop();
        }, stop.get_token());
        CHECK_FALSE(e.complete);
        CHECK(e.epoch >= 50);
        CHECK(e.epoch < 120);
        CHECK(e.coords.size() == 240);
    }
    SUBCASE("fast mode runs and stays finite") {
        p.mode = LayoutMode::fast;
        const auto e = compute_embedding(m, p);
        CHECK(e.complete);
        for (double v : e.coords) CHECK(std::isfinite(v));
    }
}

TEST_CASE("coordinate export") {
    Embedding e;
    e.coords = {0.5, -1.25, 3.0, 4.0};
    CHECK(export_coords_csv(e) == "row_index,x,y\n0,0.5,-1.25\n1,3,4\n");
}
