#include "lassolens/embedding.hpp"

#include "lassolens/error.hpp"
#include "lassolens/util.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include <fmt/format.h>

namespace lassolens {

namespace {

constexpr int kNegativeSampleRate = 5;
constexpr double kGradientClip = 4.0;
constexpr double kInitialAlpha = 1.0;
constexpr double kRepulsionStrength = 1.0;
constexpr int kSmoothKnnIterations = 64;
constexpr double kSmoothKnnTolerance = 1e-5;
constexpr double kMinKDistScale = 1e-3;
constexpr int kSpectralIterations = 300;

/// All randomness in the layout flows through one of these.
class LayoutRng {
  public:
    explicit LayoutRng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
    double normal() {
        // Box-Muller; u1 is kept away from zero
        const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

  private:
    std::mt19937_64 engine_;
};

double clip(double v) { return std::clamp(v, -kGradientClip, kGradientClip); }

bool is_connected(const FuzzyGraph& g) {
    if (g.vertices == 0) return true;
    std::vector<std::size_t> offsets(g.vertices + 1, 0);
    for (auto h : g.head) ++offsets[h + 1];
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    std::vector<char> seen(g.vertices, 0);
    std::vector<std::uint32_t> stack{0};
    seen[0] = 1;
    std::size_t visited = 1;
    while (!stack.empty()) {
        const auto v = stack.back();
        stack.pop_back();
        for (std::size_t e = offsets[v]; e < offsets[v + 1]; ++e) {
            const auto t = g.tail[e];
            if (!seen[t]) {
                seen[t] = 1;
                ++visited;
                stack.push_back(t);
            }
        }
    }
    return visited == g.vertices;
}

void orthonormalize(std::vector<std::vector<double>>& basis, const std::vector<double>& fixed) {
    for (std::size_t i = 0; i < basis.size(); ++i) {
        auto& v = basis[i];
        auto remove = [&](const std::vector<double>& u) {
            const double dot = std::inner_product(v.begin(), v.end(), u.begin(), 0.0);
            for (std::size_t r = 0; r < v.size(); ++r) v[r] -= dot * u[r];
        };
        remove(fixed);
        for (std::size_t j = 0; j < i; ++j) remove(basis[j]);
        const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
        if (norm > 0.0) {
            for (double& x : v) x /= norm;
        }
    }
}

/// Two leading non-trivial eigenvectors of the normalized adjacency, i.e. the
/// smallest non-trivial eigenvectors of the normalized Laplacian.
std::vector<double> spectral_layout(const FuzzyGraph& g, LayoutRng& rng) {
    const std::size_t n = g.vertices;
    std::vector<double> degree(n, 0.0);
    for (std::size_t e = 0; e < g.head.size(); ++e) degree[g.head[e]] += g.weight[e];
    std::vector<double> inv_sqrt(n);
    std::vector<double> trivial(n);
    double trivial_norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        inv_sqrt[i] = degree[i] > 0.0 ? 1.0 / std::sqrt(degree[i]) : 0.0;
        trivial[i] = std::sqrt(degree[i]);
        trivial_norm += degree[i];
    }
    trivial_norm = std::sqrt(trivial_norm);
    for (double& t : trivial) t /= trivial_norm;

    // y = (x + D^-1/2 W D^-1/2 x) / 2, eigenvalues in [0, 1]
    auto apply = [&](const std::vector<double>& x) {
        std::vector<double> y(x);
        for (std::size_t e = 0; e < g.head.size(); ++e) {
            const auto h = g.head[e];
            const auto t = g.tail[e];
            y[h] += g.weight[e] * inv_sqrt[h] * inv_sqrt[t] * x[t];
        }
        for (double& v : y) v *= 0.5;
        return y;
    };

    std::vector<std::vector<double>> basis(2, std::vector<double>(n));
    for (auto& v : basis) {
        for (double& x : v) x = rng.uniform() - 0.5;
    }
    orthonormalize(basis, trivial);
    for (int it = 0; it < kSpectralIterations; ++it) {
        for (auto& v : basis) v = apply(v);
        orthonormalize(basis, trivial);
    }

    // Rayleigh-Ritz on the 2x2 projected operator
    const auto m0 = apply(basis[0]);
    const auto m1 = apply(basis[1]);
    const double h00 = std::inner_product(basis[0].begin(), basis[0].end(), m0.begin(), 0.0);
    const double h01 = std::inner_product(basis[0].begin(), basis[0].end(), m1.begin(), 0.0);
    const double h11 = std::inner_product(basis[1].begin(), basis[1].end(), m1.begin(), 0.0);
    const double theta = 0.5 * std::atan2(2.0 * h01, h00 - h11);
    const double c = std::cos(theta);
    const double s = std::sin(theta);

    std::vector<double> coords(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        coords[2 * i] = c * basis[0][i] + s * basis[1][i];
        coords[2 * i + 1] = -s * basis[0][i] + c * basis[1][i];
    }
    return coords;
}

void rescale_to_box(std::vector<double>& coords) {
    for (int d = 0; d < 2; ++d) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::size_t i = d; i < coords.size(); i += 2) {
            lo = std::min(lo, coords[i]);
            hi = std::max(hi, coords[i]);
        }
        const double span = hi - lo;
        for (std::size_t i = d; i < coords.size(); i += 2) {
            coords[i] = span > 0.0 ? 10.0 * (coords[i] - lo) / span : 0.0;
        }
    }
}

std::vector<double> initial_layout(const FuzzyGraph& g, LayoutRng& rng) {
    std::vector<double> coords;
    if (g.vertices > 2 && is_connected(g)) {
        coords = spectral_layout(g, rng);
        double max_abs = 0.0;
        for (double v : coords) max_abs = std::max(max_abs, std::abs(v));
        const double expansion = max_abs > 0.0 ? 10.0 / max_abs : 1.0;
        for (double& v : coords) v = v * expansion + 1e-4 * rng.normal();
    } else {
        coords.resize(2 * g.vertices);
        for (double& v : coords) v = -10.0 + 20.0 * rng.uniform();
    }
    rescale_to_box(coords);
    return coords;
}

struct EdgeSchedule {
    std::vector<std::uint32_t> head;
    std::vector<std::uint32_t> tail;
    std::vector<double> epochs_per_sample;
    std::vector<double> epochs_per_negative_sample;
    std::vector<double> next_sample;
    std::vector<double> next_negative_sample;
};

EdgeSchedule make_schedule(const FuzzyGraph& g, int n_epochs) {
    EdgeSchedule s;
    double max_w = 0.0;
    for (double w : g.weight) max_w = std::max(max_w, w);
    const double floor = max_w / static_cast<double>(n_epochs);
    for (std::size_t e = 0; e < g.weight.size(); ++e) {
        if (g.weight[e] < floor || g.weight[e] <= 0.0) continue;
        s.head.push_back(g.head[e]);
        s.tail.push_back(g.tail[e]);
        const double eps = max_w / g.weight[e];
        s.epochs_per_sample.push_back(eps);
        s.epochs_per_negative_sample.push_back(eps / kNegativeSampleRate);
    }
    s.next_sample = s.epochs_per_sample;
    s.next_negative_sample = s.epochs_per_negative_sample;
    return s;
}

void optimize_edge_range(std::vector<double>& coords, EdgeSchedule& s, std::size_t begin, std::size_t end,
                         CurveParams curve, double alpha, int epoch, LayoutRng& rng) {
    const std::size_t n = coords.size() / 2;
    const double a = curve.a;
    const double b = curve.b;
    for (std::size_t i = begin; i < end; ++i) {
        if (s.next_sample[i] > epoch) continue;
        const std::size_t j = s.head[i];
        const std::size_t k = s.tail[i];
        double* current = &coords[2 * j];
        double* other = &coords[2 * k];
        double dx = current[0] - other[0];
        double dy = current[1] - other[1];
        double dist_sq = dx * dx + dy * dy;
        double coeff = 0.0;
        if (dist_sq > 0.0) {
            coeff = -2.0 * a * b * std::pow(dist_sq, b - 1.0) / (a * std::pow(dist_sq, b) + 1.0);
        }
        const double gx = clip(coeff * dx);
        const double gy = clip(coeff * dy);
        current[0] += gx * alpha;
        current[1] += gy * alpha;
        other[0] -= gx * alpha;
        other[1] -= gy * alpha;
        s.next_sample[i] += s.epochs_per_sample[i];

        const int n_neg = static_cast<int>((epoch - s.next_negative_sample[i]) / s.epochs_per_negative_sample[i]);
        for (int p = 0; p < n_neg; ++p) {
            const std::size_t r = rng.below(n);
            const double* neg = &coords[2 * r];
            dx = current[0] - neg[0];
            dy = current[1] - neg[1];
            dist_sq = dx * dx + dy * dy;
            if (dist_sq > 0.0) {
                coeff = 2.0 * kRepulsionStrength * b / ((0.001 + dist_sq) * (a * std::pow(dist_sq, b) + 1.0));
            } else if (r == j) {
                continue;
            } else {
                coeff = 0.0;
            }
            if (coeff > 0.0) {
                current[0] += clip(coeff * dx) * alpha;
                current[1] += clip(coeff * dy) * alpha;
            }
        }
        s.next_negative_sample[i] += n_neg * s.epochs_per_negative_sample[i];
    }
}

}  // namespace

FeatureMatrix encode_features(const Dataset& dataset) {
    FeatureMatrix m;
    m.rows = dataset.row_count();
    struct Block {
        const Column* column;
        std::size_t offset;
        std::size_t width;
        double mean = 0.0;
        double std = 0.0;
        bool missing_slot = false;
    };
    std::vector<Block> blocks;
    for (const Column* c : dataset.features()) {
        Block b{c, m.cols, 0};
        if (c->kind == ColumnKind::numerical) {
            double sum = 0.0;
            std::size_t count = 0;
            for (double v : c->numbers) {
                if (!std::isnan(v)) {
                    sum += v;
                    ++count;
                }
            }
            b.mean = count ? sum / static_cast<double>(count) : 0.0;
            double ss = 0.0;
            for (double v : c->numbers) {
                if (!std::isnan(v)) ss += (v - b.mean) * (v - b.mean);
            }
            b.std = count ? std::sqrt(ss / static_cast<double>(count)) : 0.0;
            b.width = 1;
            m.column_names.push_back(c->name);
        } else {
            b.missing_slot = c->missing_count() > 0;
            b.width = c->categories.size() + (b.missing_slot ? 1 : 0);
            for (const auto& cat : c->categories) m.column_names.push_back(c->name + "=" + cat);
            if (b.missing_slot) m.column_names.push_back(c->name + "=missing");
        }
        m.cols += b.width;
        blocks.push_back(b);
    }
    if (m.cols == 0) throw Error(ErrorCode::encoding, "dataset has no usable feature columns");
    m.values.assign(m.rows * m.cols, 0.0);
    for (const auto& b : blocks) {
        for (std::size_t r = 0; r < m.rows; ++r) {
            double* row = &m.values[r * m.cols + b.offset];
            if (b.column->kind == ColumnKind::numerical) {
                const double v = b.column->numbers[r];
                row[0] = (std::isnan(v) || b.std == 0.0) ? 0.0 : (v - b.mean) / b.std;
            } else {
                const auto code = b.column->codes[r];
                if (code == Column::kMissingCode) row[b.width - 1] = 1.0;
                else row[static_cast<std::size_t>(code)] = 1.0;
            }
        }
    }
    return m;
}

KnnGraph build_knn_graph(const FeatureMatrix& features, std::size_t n_neighbors) {
    const std::size_t n = features.rows;
    if (n_neighbors == 0 || n_neighbors >= n) {
        throw Error(ErrorCode::parameter,
                    fmt::format("n_neighbors must be in [1, {}), got {}", n, n_neighbors));
    }
    KnnGraph g;
    g.rows = n;
    g.k = n_neighbors;
    g.indices.resize(n * n_neighbors);
    g.distances.resize(n * n_neighbors);

    auto work = [&](std::size_t begin, std::size_t end) {
        std::vector<std::pair<double, std::uint32_t>> candidates(n - 1);
        for (std::size_t i = begin; i < end; ++i) {
            const auto ri = features.row(i);
            std::size_t c = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                const auto rj = features.row(j);
                double d = 0.0;
                for (std::size_t f = 0; f < features.cols; ++f) {
                    const double diff = ri[f] - rj[f];
                    d += diff * diff;
                }
                candidates[c++] = {d, static_cast<std::uint32_t>(j)};
            }
            std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(n_neighbors),
                              candidates.end());
            for (std::size_t k = 0; k < n_neighbors; ++k) {
                g.indices[i * n_neighbors + k] = candidates[k].second;
                g.distances[i * n_neighbors + k] = std::sqrt(candidates[k].first);
            }
        }
    };
    // rows are independent, so splitting them across threads cannot change the result
    const std::size_t threads = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 16);
    if (threads == 1 || n < 512) {
        work(0, n);
    } else {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (n + threads - 1) / threads;
        for (std::size_t t = 0; t < threads; ++t) {
            const std::size_t begin = t * chunk;
            const std::size_t end = std::min(n, begin + chunk);
            if (begin < end) pool.emplace_back(work, begin, end);
        }
    }
    return g;
}

FuzzyGraph fuzzy_simplicial_set(const KnnGraph& knn) {
    const std::size_t n = knn.rows;
    const std::size_t k = knn.k;
    const double target = std::log2(static_cast<double>(k));

    double mean_all = 0.0;
    for (double d : knn.distances) mean_all += d;
    mean_all /= static_cast<double>(knn.distances.size());

    // directed memberships, neighbor lists re-sorted by index for lookup
    std::vector<std::vector<std::pair<std::uint32_t, double>>> directed(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto dists = knn.neighbor_distances(i);
        double rho = 0.0;
        for (double d : dists) {
            if (d > 0.0) {
                rho = d;
                break;
            }
        }
        double lo = 0.0;
        double hi = std::numeric_limits<double>::infinity();
        double mid = 1.0;
        for (int it = 0; it < kSmoothKnnIterations; ++it) {
            double psum = 0.0;
            for (double d : dists) {
                const double excess = d - rho;
                psum += excess > 0.0 ? std::exp(-excess / mid) : 1.0;
            }
            if (std::abs(psum - target) < kSmoothKnnTolerance) break;
            if (psum > target) {
                hi = mid;
                mid = 0.5 * (lo + hi);
            } else {
                lo = mid;
                mid = std::isinf(hi) ? mid * 2.0 : 0.5 * (lo + hi);
            }
        }
        double sigma = mid;
        const double mean_i = std::accumulate(dists.begin(), dists.end(), 0.0) / static_cast<double>(k);
        sigma = std::max(sigma, kMinKDistScale * (rho > 0.0 ? mean_i : mean_all));

        auto& row = directed[i];
        const auto nbrs = knn.neighbors(i);
        row.reserve(k);
        for (std::size_t j = 0; j < k; ++j) {
            const double excess = dists[j] - rho;
            const double w = (excess <= 0.0 || sigma == 0.0) ? 1.0 : std::exp(-excess / sigma);
            row.emplace_back(nbrs[j], w);
        }
        std::sort(row.begin(), row.end());
    }

    auto lookup = [&](std::uint32_t from, std::uint32_t to) {
        const auto& row = directed[from];
        auto it = std::lower_bound(row.begin(), row.end(), std::make_pair(to, -1.0));
        return (it != row.end() && it->first == to) ? it->second : 0.0;
    };

    struct Entry {
        std::uint32_t h, t;
        double w;
    };
    std::vector<Entry> entries;
    entries.reserve(2 * n * k);
    for (std::uint32_t i = 0; i < n; ++i) {
        for (const auto& [j, w_ij] : directed[i]) {
            const double w_ji = lookup(j, i);
            const double w = w_ij + w_ji - w_ij * w_ji;
            if (w <= 0.0) continue;
            entries.push_back({i, j, w});
            entries.push_back({j, i, w});
        }
    }
    std::sort(entries.begin(), entries.end(),
              [](const Entry& x, const Entry& y) { return x.h != y.h ? x.h < y.h : x.t < y.t; });
    entries.erase(std::unique(entries.begin(), entries.end(),
                              [](const Entry& x, const Entry& y) { return x.h == y.h && x.t == y.t; }),
                  entries.end());

    FuzzyGraph g;
    g.vertices = n;
    g.head.reserve(entries.size());
    g.tail.reserve(entries.size());
    g.weight.reserve(entries.size());
    for (const auto& e : entries) {
        g.head.push_back(e.h);
        g.tail.push_back(e.t);
        g.weight.push_back(e.w);
    }
    return g;
}

CurveParams fit_curve(double spread, double min_dist) {
    constexpr int kSamples = 300;
    std::array<double, kSamples> xs{};
    std::array<double, kSamples> ys{};
    for (int i = 0; i < kSamples; ++i) {
        xs[i] = 3.0 * spread * i / (kSamples - 1);
        ys[i] = xs[i] < min_dist ? 1.0 : std::exp(-(xs[i] - min_dist) / spread);
    }
    auto residual_sq = [&](double a, double b) {
        double s = 0.0;
        for (int i = 0; i < kSamples; ++i) {
            const double f = 1.0 / (1.0 + a * std::pow(xs[i], 2.0 * b));
            s += (f - ys[i]) * (f - ys[i]);
        }
        return s;
    };

    // Levenberg-Marquardt from (1, 1)
    double a = 1.0;
    double b = 1.0;
    double lambda = 1e-3;
    double cost = residual_sq(a, b);
    bool converged = false;
    for (int it = 0; it < 500 && !converged; ++it) {
        double jtj00 = 0.0, jtj01 = 0.0, jtj11 = 0.0, g0 = 0.0, g1 = 0.0;
        for (int i = 0; i < kSamples; ++i) {
            const double x = xs[i];
            const double u = x > 0.0 ? std::pow(x, 2.0 * b) : 0.0;
            const double denom = 1.0 + a * u;
            const double f = 1.0 / denom;
            const double r = f - ys[i];
            const double da = -u / (denom * denom);
            const double db = x > 0.0 ? -a * u * 2.0 * std::log(x) / (denom * denom) : 0.0;
            jtj00 += da * da;
            jtj01 += da * db;
            jtj11 += db * db;
            g0 += da * r;
            g1 += db * r;
        }
        bool improved = false;
        while (lambda < 1e12) {
            const double m00 = jtj00 * (1.0 + lambda);
            const double m11 = jtj11 * (1.0 + lambda);
            const double det = m00 * m11 - jtj01 * jtj01;
            const double step_a = -(m11 * g0 - jtj01 * g1) / det;
            const double step_b = -(-jtj01 * g0 + m00 * g1) / det;
            const double trial = residual_sq(a + step_a, b + step_b);
            if (std::isfinite(trial) && trial < cost) {
                a += step_a;
                b += step_b;
                const double gain = cost - trial;
                cost = trial;
                lambda = std::max(lambda * 0.3, 1e-12);
                improved = true;
                converged = gain < 1e-15 * std::max(cost, 1e-300);
                break;
            }
            lambda *= 10.0;
        }
        if (!improved) break;
    }
    return {a, b};
}

void EmbeddingParams::validate(std::size_t rows) const {
    if (n_neighbors == 0 || n_neighbors >= rows) {
        throw Error(ErrorCode::parameter, fmt::format("n_neighbors must be in [1, {}), got {}", rows, n_neighbors));
    }
    if (!(min_dist >= 0.0)) throw Error(ErrorCode::parameter, "min_dist must be non-negative");
    if (!(spread > 0.0)) throw Error(ErrorCode::parameter, "spread must be positive");
    if (min_dist > spread) throw Error(ErrorCode::parameter, "min_dist must not exceed spread");
    if (n_epochs <= 0) throw Error(ErrorCode::parameter, "n_epochs must be positive");
    if (snapshot_interval <= 0) throw Error(ErrorCode::parameter, "snapshot_interval must be positive");
}

std::string EmbeddingParams::key() const {
    return fmt::format("nn={};md={};sp={};seed={};ep={};si={};mode={}", n_neighbors, shortest_repr(min_dist),
                       shortest_repr(spread), seed, n_epochs, snapshot_interval,
                       mode == LayoutMode::strict ? "strict" : "fast");
}

Embedding compute_embedding(const Dataset& dataset, const EmbeddingParams& params, const SnapshotSink& sink,
                            std::stop_token stop) {
    params.validate(dataset.row_count());
    Embedding e = compute_embedding(encode_features(dataset), params, sink, std::move(stop));
    e.dataset_id = dataset.id();
    return e;
}

Embedding compute_embedding(const FeatureMatrix& features, const EmbeddingParams& params, const SnapshotSink& sink,
                            std::stop_token stop) {
    params.validate(features.rows);
    LayoutRng rng(params.seed);
    const FuzzyGraph graph = fuzzy_simplicial_set(build_knn_graph(features, params.n_neighbors));
    const CurveParams curve = fit_curve(params.spread, params.min_dist);

    Embedding out;
    out.params = params;
    out.coords = initial_layout(graph, rng);
    EdgeSchedule schedule = make_schedule(graph, params.n_epochs);

    const std::size_t threads =
        params.mode == LayoutMode::fast ? std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 16) : 1;
    std::vector<LayoutRng> worker_rngs;
    for (std::size_t t = 1; t < threads; ++t) worker_rngs.emplace_back(params.seed + 0x9E3779B97F4A7C15ULL * t);

    int last_reported = 0;
    for (int epoch = 0; epoch < params.n_epochs; ++epoch) {
        if (stop.stop_requested()) return out;
        const double alpha = kInitialAlpha * (1.0 - static_cast<double>(epoch) / params.n_epochs);
        const std::size_t edges = schedule.head.size();
        if (threads == 1) {
            optimize_edge_range(out.coords, schedule, 0, edges, curve, alpha, epoch, rng);
        } else {
            std::vector<std::jthread> pool;
            const std::size_t chunk = (edges + threads - 1) / threads;
            for (std::size_t t = 0; t < threads; ++t) {
                const std::size_t begin = t * chunk;
                const std::size_t end = std::min(edges, begin + chunk);
                LayoutRng* r = t == 0 ? &rng : &worker_rngs[t - 1];
                if (begin < end) {
                    pool.emplace_back([&out, &schedule, curve, r, begin, end, alpha, epoch] {
                        optimize_edge_range(out.coords, schedule, begin, end, curve, alpha, epoch, *r);
                    });
                }
            }
        }
        for (double v : out.coords) {
            if (!std::isfinite(v)) throw NumericalFailure(epoch + 1);
        }
        out.epoch = epoch + 1;
        if (sink && out.epoch % params.snapshot_interval == 0) {
            sink(Snapshot{out.epoch, out.coords});
            last_reported = out.epoch;
        }
    }
    if (sink && last_reported != out.epoch) sink(Snapshot{out.epoch, out.coords});
    out.complete = true;
    return out;
}

std::string export_coords_csv(const Embedding& embedding) {
    std::string out = "row_index,x,y\n";
    for (std::size_t r = 0; r < embedding.rows(); ++r) {
        out += fmt::format("{},{},{}\n", r, shortest_repr(embedding.x(r)), shortest_repr(embedding.y(r)));
    }
    return out;
}

}  // namespace lassolens
