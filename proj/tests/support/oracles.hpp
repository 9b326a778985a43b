#pragma once

// Brute-force reference implementations used by the tests. Kept deliberately
// independent of the library code they check.

#include "lassolens/dataset.hpp"
#include "lassolens/selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace lassolens::testing {

inline std::string data_path(const std::string& file) { return std::string(LASSOLENS_DATA_DIR) + "/" + file; }

/// max over every sample point t of |#(a <= t)/|a| - #(b <= t)/|b||.
inline double brute_ks(std::span<const double> a, std::span<const double> b) {
    double best = 0.0;
    auto ecdf = [](std::span<const double> s, double t) {
        std::size_t n = 0;
        for (double v : s) n += v <= t ? 1 : 0;
        return static_cast<double>(n) / static_cast<double>(s.size());
    };
    for (auto side : {a, b}) {
        for (double t : side) best = std::max(best, std::abs(ecdf(a, t) - ecdf(b, t)));
    }
    return best;
}

/// Loops over prefixes of the ordering.
inline double brute_categorical_ks(const std::map<std::string, std::size_t>& a,
                                   const std::map<std::string, std::size_t>& b,
                                   const std::vector<std::string>& ordering) {
    double ta = 0, tb = 0;
    for (auto& [k, v] : a) ta += static_cast<double>(v);
    for (auto& [k, v] : b) tb += static_cast<double>(v);
    double best = 0.0;
    for (std::size_t end = 1; end <= ordering.size(); ++end) {
        double ca = 0, cb = 0;
        for (std::size_t i = 0; i < end; ++i) {
            if (auto it = a.find(ordering[i]); it != a.end()) ca += static_cast<double>(it->second);
            if (auto it = b.find(ordering[i]); it != b.end()) cb += static_cast<double>(it->second);
        }
        best = std::max(best, std::abs(ca / ta - cb / tb));
    }
    return best;
}

/// Even-odd crossing count along a vertical ray towards +y.
inline bool brute_point_in_polygon(Point2 p, std::span<const Point2> poly) {
    int crossings = 0;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point2 a = poly[i];
        const Point2 b = poly[(i + 1) % n];
        if ((a.x <= p.x) == (b.x <= p.x)) continue;
        const double t = (p.x - a.x) / (b.x - a.x);
        const double y = a.y + t * (b.y - a.y);
        if (y > p.y) ++crossings;
    }
    return crossings % 2 == 1;
}

/// Mean silhouette coefficient with Euclidean distance in 2-D.
inline double silhouette(std::span<const double> coords, const std::vector<std::string>& labels) {
    const std::size_t n = labels.size();
    std::map<std::string, std::size_t> sizes;
    for (const auto& l : labels) ++sizes[l];
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::map<std::string, double> sum;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            sum[labels[j]] += std::hypot(coords[2 * i] - coords[2 * j], coords[2 * i + 1] - coords[2 * j + 1]);
        }
        if (sizes[labels[i]] == 1) continue;  // contributes 0
        const double a = sum[labels[i]] / static_cast<double>(sizes[labels[i]] - 1);
        double b = INFINITY;
        for (const auto& [label, s] : sum) {
            if (label != labels[i]) b = std::min(b, s / static_cast<double>(sizes[label]));
        }
        total += (b - a) / std::max(a, b);
    }
    return total / static_cast<double>(n);
}

inline Dataset make_dataset(const std::string& csv, const std::string& context = "", const std::string& name = "t") {
    return parse_dataset(csv, context, name);
}

/// Random points in [-scale, scale]^dims.
inline std::vector<double> random_points(std::mt19937_64& rng, std::size_t n, std::size_t dims, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    std::vector<double> out(n * dims);
    for (auto& v : out) v = u(rng);
    return out;
}

/// Star-shaped simple polygon around (cx, cy).
inline std::vector<Point2> random_star_polygon(std::mt19937_64& rng, std::size_t vertices, double cx, double cy,
                                               double r_min, double r_max) {
    std::uniform_real_distribution<double> radius(r_min, r_max);
    std::uniform_real_distribution<double> jitter(0.0, 1.0);
    std::vector<double> angles(vertices);
    for (std::size_t i = 0; i < vertices; ++i) {
        angles[i] = (static_cast<double>(i) + 0.9 * jitter(rng)) * 2.0 * M_PI / static_cast<double>(vertices);
    }
    std::vector<Point2> out;
    for (double a : angles) {
        const double r = radius(rng);
        out.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
    }
    return out;
}

}  // namespace lassolens::testing
