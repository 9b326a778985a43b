#pragma once

#include "lassolens/dataset.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stop_token>
#include <string>
#include <vector>

namespace lassolens {

/// Dense row-major matrix of encoded features.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
    std::vector<std::string> column_names;

    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
};

/// z-scores numerical columns (population std, constant columns become 0,
/// missing cells become 0) and one-hot encodes categorical ones. A "missing"
/// indicator column is added only for categorical columns with missing cells.
/// The label column is skipped.
FeatureMatrix encode_features(const Dataset& dataset);

/// Exact k nearest neighbors by Euclidean distance, self excluded, ties broken
/// by ascending row index.
struct KnnGraph {
    std::size_t rows = 0;
    std::size_t k = 0;
    std::vector<std::uint32_t> indices;  // rows * k, nearest first
    std::vector<double> distances;       // rows * k

    std::span<const std::uint32_t> neighbors(std::size_t r) const { return {indices.data() + r * k, k}; }
    std::span<const double> neighbor_distances(std::size_t r) const { return {distances.data() + r * k, k}; }
};

KnnGraph build_knn_graph(const FeatureMatrix& features, std::size_t n_neighbors);

/// Symmetric weighted graph in COO form, sorted by (head, tail).
struct FuzzyGraph {
    std::size_t vertices = 0;
    std::vector<std::uint32_t> head;
    std::vector<std::uint32_t> tail;
    std::vector<double> weight;
};

/// Smooth-kNN membership strengths, then fuzzy union w + wT - w*wT.
FuzzyGraph fuzzy_simplicial_set(const KnnGraph& knn);

struct CurveParams {
    double a = 0.0;
    double b = 0.0;
};

/// Least-squares fit of 1 / (1 + a d^(2b)) to the min_dist/spread target curve.
CurveParams fit_curve(double spread, double min_dist);

enum class LayoutMode {
    strict,  // single-threaded, bit-exact across runs
    fast,    // lock-free parallel updates, statistically reproducible only
};

struct EmbeddingParams {
    std::size_t n_neighbors = 50;
    double min_dist = 0.6;
    double spread = 2.0;
    std::uint64_t seed = 42;
    int n_epochs = 500;
    int snapshot_interval = 25;
    LayoutMode mode = LayoutMode::strict;

    /// Throws ErrorCode::parameter when invalid for a dataset of `rows` rows.
    void validate(std::size_t rows) const;
    /// Canonical text form; the embedding cache key is built from it.
    std::string key() const;
};

struct Snapshot {
    int epoch = 0;
    std::vector<double> coords;  // rows * 2, interleaved x, y
};

using SnapshotSink = std::function<void(const Snapshot&)>;

struct Embedding {
    std::string dataset_id;
    EmbeddingParams params;
    std::vector<double> coords;  // rows * 2, interleaved x, y
    int epoch = 0;
    bool complete = false;

    std::size_t rows() const { return coords.size() / 2; }
    double x(std::size_t r) const { return coords[2 * r]; }
    double y(std::size_t r) const { return coords[2 * r + 1]; }
};

/// Full pipeline: kNN -> fuzzy set -> (a, b) fit -> spectral or random init
/// -> negative-sampling SGD. A snapshot is emitted every snapshot_interval
/// epochs and once more after the last epoch if that epoch was not already
/// reported. A stop request returns the partial layout with complete = false.
Embedding compute_embedding(const Dataset& dataset, const EmbeddingParams& params,
                            const SnapshotSink& sink = {}, std::stop_token stop = {});

Embedding compute_embedding(const FeatureMatrix& features, const EmbeddingParams& params,
                            const SnapshotSink& sink = {}, std::stop_token stop = {});

/// "row_index,x,y" lines with a header, coordinates at full precision.
std::string export_coords_csv(const Embedding& embedding);

}  // namespace lassolens
