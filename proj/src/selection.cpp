#include "lassolens/selection.hpp"

#include "lassolens/error.hpp"
#include "lassolens/util.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

namespace lassolens {

namespace {

bool on_segment(Point2 p, Point2 a, Point2 b) {
    const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    if (cross != 0.0) return false;
    return p.x >= std::min(a.x, b.x) && p.x <= std::max(a.x, b.x) && p.y >= std::min(a.y, b.y) &&
           p.y <= std::max(a.y, b.y);
}

}  // namespace

std::size_t SelectionMask::selected_count() const {
    return static_cast<std::size_t>(std::count(selected.begin(), selected.end(), std::uint8_t{1}));
}

std::string SelectionMask::id() const {
    std::string key = dataset_id;
    key += '\n';
    key.append(selected.begin(), selected.end());
    return "m" + content_id(key);
}

bool point_in_polygon(Point2 p, std::span<const Point2> polygon) {
    const std::size_t n = polygon.size();
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point2 a = polygon[i];
        const Point2 b = polygon[j];
        if (on_segment(p, a, b)) return true;
        if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) inside = !inside;
    }
    return inside;
}

SelectionMask select_lasso(const Embedding& embedding, std::span<const Point2> polygon) {
    if (polygon.size() < 3) {
        throw Error(ErrorCode::degenerate_polygon,
                    fmt::format("lasso polygon needs at least 3 vertices, got {}", polygon.size()));
    }
    if (!embedding.complete) throw Error(ErrorCode::selection, "embedding is not complete");
    SelectionMask mask;
    mask.dataset_id = embedding.dataset_id;
    mask.source = LassoSource{{polygon.begin(), polygon.end()}};
    mask.selected.resize(embedding.rows());
    for (std::size_t r = 0; r < embedding.rows(); ++r) {
        mask.selected[r] = point_in_polygon({embedding.x(r), embedding.y(r)}, polygon) ? 1 : 0;
    }
    return mask;
}

SelectionMask select_by_predicate(const Dataset& dataset, const std::string& column, const std::string& value) {
    const Column* col = dataset.find(column);
    if (!col) throw Error(ErrorCode::predicate, "unknown column '" + column + "'");
    if (col->kind != ColumnKind::categorical) {
        throw Error(ErrorCode::predicate, "column '" + column + "' is numerical; predicates need a categorical column");
    }
    SelectionMask mask;
    mask.dataset_id = dataset.id();
    mask.source = PredicateSource{column, value};
    mask.selected.assign(dataset.row_count(), 0);
    const auto it = std::lower_bound(col->categories.begin(), col->categories.end(), value);
    if (it == col->categories.end() || *it != value) return mask;
    const auto code = static_cast<std::int32_t>(it - col->categories.begin());
    for (std::size_t r = 0; r < dataset.row_count(); ++r) mask.selected[r] = col->codes[r] == code ? 1 : 0;
    return mask;
}

SelectionMask invert(const SelectionMask& mask) {
    SelectionMask out = mask;
    for (auto& s : out.selected) s = s ? 0 : 1;
    out.inverted = !mask.inverted;
    return out;
}

void require_explainable(const SelectionMask& mask) {
    const std::size_t n = mask.selected_count();
    if (n == 0) throw Error(ErrorCode::selection, "selection is empty");
    if (n == mask.size()) throw Error(ErrorCode::selection, "selection contains every row; nothing to contrast with");
}

}  // namespace lassolens
