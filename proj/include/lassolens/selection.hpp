#pragma once

#include "lassolens/dataset.hpp"
#include "lassolens/embedding.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace lassolens {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

struct LassoSource {
    std::vector<Point2> polygon;
};

struct PredicateSource {
    std::string column;
    std::string value;
};

struct SelectionMask {
    std::string dataset_id;
    std::vector<std::uint8_t> selected;
    std::variant<LassoSource, PredicateSource> source;
    bool inverted = false;

    std::size_t size() const { return selected.size(); }
    std::size_t selected_count() const;
    std::size_t rest_count() const { return size() - selected_count(); }
    bool operator[](std::size_t row) const { return selected[row] != 0; }

    /// Content-derived opaque id: identical selections share an id.
    std::string id() const;
};

/// Even-odd rule; points on an edge or vertex count as inside.
bool point_in_polygon(Point2 p, std::span<const Point2> polygon);

SelectionMask select_lasso(const Embedding& embedding, std::span<const Point2> polygon);

/// Missing cells are never selected.
SelectionMask select_by_predicate(const Dataset& dataset, const std::string& column, const std::string& value);

SelectionMask invert(const SelectionMask& mask);

/// Throws ErrorCode::selection unless 1 <= selected_count <= size - 1.
void require_explainable(const SelectionMask& mask);

}  // namespace lassolens
