#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace lassolens {

enum class ErrorCode {
    io,
    structural,
    empty_dataset,
    context_mismatch,
    undecidable_kind,
    encoding,
    parameter,
    numerical_failure,
    degenerate_polygon,
    predicate,
    undefined_statistic,
    ordering,
    selection,
    config,
    unavailable,
    empty_response,
    contract_violation,
    arity,
    validation,
    not_found,
    budget_exceeded,
};

std::string_view to_string(ErrorCode code);

/// Base of every error raised by the library. The code is stable and is what
/// the HTTP layer reports as the machine-readable error code.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

/// A data row whose field count differs from the header.
class RaggedRowError : public Error {
  public:
    RaggedRowError(std::size_t row_index, std::size_t expected, std::size_t actual);

    std::size_t row_index() const noexcept { return row_index_; }

  private:
    std::size_t row_index_;
};

/// Non-finite coordinates during layout optimization.
class NumericalFailure : public Error {
  public:
    explicit NumericalFailure(int epoch);

    int epoch() const noexcept { return epoch_; }

  private:
    int epoch_;
};

}  // namespace lassolens
