#include "lassolens/error.hpp"

#include <fmt/format.h>

namespace lassolens {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::io: return "io";
    case ErrorCode::structural: return "structural";
    case ErrorCode::empty_dataset: return "empty_dataset";
    case ErrorCode::context_mismatch: return "context_mismatch";
    case ErrorCode::undecidable_kind: return "undecidable_kind";
    case ErrorCode::encoding: return "encoding";
    case ErrorCode::parameter: return "parameter";
    case ErrorCode::numerical_failure: return "numerical_failure";
    case ErrorCode::degenerate_polygon: return "degenerate_polygon";
    case ErrorCode::predicate: return "predicate";
    case ErrorCode::undefined_statistic: return "undefined_statistic";
    case ErrorCode::ordering: return "ordering";
    case ErrorCode::selection: return "selection";
    case ErrorCode::config: return "config";
    case ErrorCode::unavailable: return "unavailable";
    case ErrorCode::empty_response: return "empty_response";
    case ErrorCode::contract_violation: return "contract_violation";
    case ErrorCode::arity: return "arity";
    case ErrorCode::validation: return "validation";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::budget_exceeded: return "budget_exceeded";
    }
    return "unknown";
}

RaggedRowError::RaggedRowError(std::size_t row_index, std::size_t expected, std::size_t actual)
    : Error(ErrorCode::structural,
            fmt::format("ragged row {}: expected {} fields, found {}", row_index, expected, actual)),
      row_index_(row_index) {}

NumericalFailure::NumericalFailure(int epoch)
    : Error(ErrorCode::numerical_failure,
            fmt::format("non-finite coordinates at epoch {}", epoch)),
      epoch_(epoch) {}

}  // namespace lassolens
