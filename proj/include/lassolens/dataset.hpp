#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lassolens {

enum class ColumnKind { numerical, categorical };

std::string_view to_string(ColumnKind kind);

/// A typed column. Numerical cells live in `numbers` (NaN marks a missing
/// cell); categorical cells are indices into `categories` (-1 marks missing).
/// Only the vector matching `kind` is populated.
struct Column {
    static constexpr std::int32_t kMissingCode = -1;

    std::string name;
    ColumnKind kind = ColumnKind::categorical;
    std::vector<double> numbers;
    std::vector<std::int32_t> codes;
    std::vector<std::string> categories;  // sorted, unique

    std::size_t size() const { return kind == ColumnKind::numerical ? numbers.size() : codes.size(); }
    bool is_missing(std::size_t row) const {
        return kind == ColumnKind::numerical ? std::isnan(numbers[row]) : codes[row] == kMissingCode;
    }
    std::size_t missing_count() const;

    /// Category token for a categorical cell; must not be called on a missing cell.
    const std::string& category(std::size_t row) const { return categories[static_cast<std::size_t>(codes[row])]; }

    static Column make_numerical(std::string name, std::vector<double> values);
    /// Builds the sorted category dictionary from raw tokens; std::nullopt is missing.
    static Column make_categorical(std::string name, const std::vector<std::optional<std::string>>& tokens);
};

/// Domain text plus per-feature descriptions and the directives that ride in
/// the same file.
struct DatasetContext {
    std::string domain_description;
    std::map<std::string, std::string> per_feature;
    std::map<std::string, ColumnKind> kind_overrides;
    std::map<std::string, std::vector<std::string>> aliases;
    std::optional<std::string> label_column;
};

class Dataset {
  public:
    Dataset() = default;
    /// Validates the structural invariants and derives the content id.
    Dataset(std::string name, std::vector<Column> columns, DatasetContext context);

    const std::string& id() const { return id_; }
    const std::string& name() const { return name_; }
    const std::vector<Column>& columns() const { return columns_; }
    std::size_t row_count() const { return row_count_; }
    const DatasetContext& context() const { return context_; }

    const Column* find(std::string_view column_name) const;
    const Column& column(std::string_view column_name) const;
    bool is_label(std::string_view column_name) const;

    /// Columns that take part in embedding and statistics (everything but the label).
    std::vector<const Column*> features() const;

    bool operator==(const Dataset& other) const;

  private:
    std::string id_;
    std::string name_;
    std::vector<Column> columns_;
    std::size_t row_count_ = 0;
    DatasetContext context_;
};

/// Cells are raw tokens; missing tokens are "" and "NA" in any case.
ColumnKind infer_column_kind(std::span<const std::string> cells);

/// RFC-4180 style parse: quoted fields, doubled quotes, CRLF or LF rows.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

/// Parses a context file; `column_names` is used to reject unknown keys.
DatasetContext parse_context(std::string_view text, std::span<const std::string> column_names);

/// In-memory form of load_dataset, used by the HTTP upload path.
Dataset parse_dataset(std::string_view csv_text, std::string_view context_text, std::string name);

Dataset load_dataset(const std::string& data_path, const std::string& context_path);

/// Versioned JSON blob; stable across runs and the input of the content id.
std::string serialize_canonical(const Dataset& dataset);
Dataset deserialize_canonical(std::string_view blob);

}  // namespace lassolens
