#include "lassolens/dataset.hpp"

#include "lassolens/error.hpp"
#include "lassolens/util.hpp"

#include <algorithm>
#include <filesystem>
#include <limits>
#include <set>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace lassolens {

namespace {

constexpr double kNumericShare = 0.95;
constexpr std::size_t kMinDistinctNumeric = 10;
constexpr int kCanonicalVersion = 1;

constexpr std::string_view kDomainKey = "_domain";
constexpr std::string_view kLabelKey = "_label";
constexpr std::string_view kKindPrefix = "_kind.";
constexpr std::string_view kAliasPrefix = "_aliases.";

nlohmann::json content_json(const std::vector<Column>& columns, const DatasetContext& ctx) {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : columns) {
        nlohmann::json jc;
        jc["name"] = c.name;
        jc["kind"] = to_string(c.kind);
        if (c.kind == ColumnKind::numerical) {
            nlohmann::json values = nlohmann::json::array();
            for (double v : c.numbers) {
                if (std::isnan(v)) values.push_back(nullptr);
                else values.push_back(v);
            }
            jc["values"] = std::move(values);
        } else {
            jc["categories"] = c.categories;
            jc["codes"] = c.codes;
        }
        cols.push_back(std::move(jc));
    }
    nlohmann::json jctx;
    jctx["domain"] = ctx.domain_description;
    jctx["per_feature"] = ctx.per_feature;
    nlohmann::json kinds = nlohmann::json::object();
    for (const auto& [k, v] : ctx.kind_overrides) kinds[k] = to_string(v);
    jctx["kind_overrides"] = std::move(kinds);
    jctx["aliases"] = ctx.aliases;
    jctx["label"] = ctx.label_column ? nlohmann::json(*ctx.label_column) : nlohmann::json(nullptr);
    return {{"columns", std::move(cols)}, {"context", std::move(jctx)}};
}

ColumnKind parse_kind(std::string_view text) {
    const auto lowered = to_lower(trim(text));
    if (lowered == "numerical") return ColumnKind::numerical;
    if (lowered == "categorical") return ColumnKind::categorical;
    throw Error(ErrorCode::context_mismatch, "unknown column kind '" + std::string(text) + "'");
}

Column build_column(const std::string& name, std::span<const std::string> raw, std::optional<ColumnKind> override_kind) {
    const ColumnKind kind = override_kind ? *override_kind : infer_column_kind(raw);
    if (kind == ColumnKind::numerical) {
        std::vector<double> values;
        values.reserve(raw.size());
        for (const auto& cell : raw) {
            if (is_missing_token(cell)) {
                values.push_back(std::numeric_limits<double>::quiet_NaN());
                continue;
            }
            auto parsed = parse_finite(cell);
            values.push_back(parsed ? *parsed : std::numeric_limits<double>::quiet_NaN());
        }
        if (std::all_of(values.begin(), values.end(), [](double v) { return std::isnan(v); })) {
            throw Error(ErrorCode::undecidable_kind, "column '" + name + "' has no numeric cells");
        }
        return Column::make_numerical(name, std::move(values));
    }
    std::vector<std::optional<std::string>> tokens;
    tokens.reserve(raw.size());
    for (const auto& cell : raw) {
        if (is_missing_token(cell)) tokens.emplace_back(std::nullopt);
        else tokens.emplace_back(std::string(trim(cell)));
    }
    return Column::make_categorical(name, tokens);
}

}  // namespace

std::string_view to_string(ColumnKind kind) {
    return kind == ColumnKind::numerical ? "numerical" : "categorical";
}

std::size_t Column::missing_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < size(); ++i) n += is_missing(i) ? 1 : 0;
    return n;
}

Column Column::make_numerical(std::string name, std::vector<double> values) {
    Column c;
    c.name = std::move(name);
    c.kind = ColumnKind::numerical;
    c.numbers = std::move(values);
    return c;
}

Column Column::make_categorical(std::string name, const std::vector<std::optional<std::string>>& tokens) {
    Column c;
    c.name = std::move(name);
    c.kind = ColumnKind::categorical;
    std::set<std::string> dictionary;
    for (const auto& t : tokens) {
        if (t) dictionary.insert(*t);
    }
    if (dictionary.empty()) {
        throw Error(ErrorCode::undecidable_kind, "column '" + c.name + "' has only missing cells");
    }
    c.categories.assign(dictionary.begin(), dictionary.end());
    c.codes.reserve(tokens.size());
    for (const auto& t : tokens) {
        if (!t) {
            c.codes.push_back(kMissingCode);
            continue;
        }
        auto it = std::lower_bound(c.categories.begin(), c.categories.end(), *t);
        c.codes.push_back(static_cast<std::int32_t>(it - c.categories.begin()));
    }
    return c;
}

Dataset::Dataset(std::string name, std::vector<Column> columns, DatasetContext context)
    : name_(std::move(name)), columns_(std::move(columns)), context_(std::move(context)) {
    if (columns_.empty()) throw Error(ErrorCode::empty_dataset, "dataset has no columns");
    row_count_ = columns_.front().size();
    if (row_count_ == 0) throw Error(ErrorCode::empty_dataset, "dataset has no rows");
    std::unordered_set<std::string> names;
    for (const auto& c : columns_) {
        if (c.name.empty()) throw Error(ErrorCode::structural, "empty column name");
        if (!names.insert(c.name).second) throw Error(ErrorCode::structural, "duplicate column name '" + c.name + "'");
        if (c.size() != row_count_) throw Error(ErrorCode::structural, "column '" + c.name + "' has wrong length");
        if (c.kind == ColumnKind::numerical) {
            for (double v : c.numbers) {
                if (std::isinf(v)) throw Error(ErrorCode::structural, "non-finite value in '" + c.name + "'");
            }
        }
    }
    const auto check_key = [&](const std::string& key) {
        if (!names.count(key)) throw Error(ErrorCode::context_mismatch, "context references unknown column '" + key + "'");
    };
    for (const auto& [k, _] : context_.per_feature) check_key(k);
    for (const auto& [k, _] : context_.kind_overrides) check_key(k);
    for (const auto& [k, _] : context_.aliases) check_key(k);
    if (context_.label_column) check_key(*context_.label_column);
    id_ = content_id(content_json(columns_, context_).dump());
}

const Column* Dataset::find(std::string_view column_name) const {
    for (const auto& c : columns_) {
        if (c.name == column_name) return &c;
    }
    return nullptr;
}

const Column& Dataset::column(std::string_view column_name) const {
    const Column* c = find(column_name);
    if (!c) throw Error(ErrorCode::not_found, "unknown column '" + std::string(column_name) + "'");
    return *c;
}

bool Dataset::is_label(std::string_view column_name) const {
    return context_.label_column && *context_.label_column == column_name;
}

std::vector<const Column*> Dataset::features() const {
    std::vector<const Column*> out;
    for (const auto& c : columns_) {
        if (!is_label(c.name)) out.push_back(&c);
    }
    return out;
}

bool Dataset::operator==(const Dataset& other) const {
    return serialize_canonical(*this) == serialize_canonical(other);
}

ColumnKind infer_column_kind(std::span<const std::string> cells) {
    std::size_t present = 0;
    std::size_t numeric = 0;
    bool non_integer = false;
    std::set<double> distinct;
    for (const auto& cell : cells) {
        if (is_missing_token(cell)) continue;
        ++present;
        if (auto v = parse_finite(cell)) {
            ++numeric;
            if (*v != std::floor(*v)) non_integer = true;
            if (distinct.size() <= kMinDistinctNumeric) distinct.insert(*v);
        }
    }
    if (present == 0) throw Error(ErrorCode::undecidable_kind, "all cells are missing");
    const bool mostly_numeric = static_cast<double>(numeric) >= kNumericShare * static_cast<double>(present);
    const bool enough_distinct = distinct.size() > kMinDistinctNumeric;
    // binary numeric columns (two distinct values) have integer values, so they fall through here
    if (mostly_numeric && (enough_distinct || non_integer) && distinct.size() > 2) return ColumnKind::numerical;
    return ColumnKind::categorical;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        // a line with a single empty field is a blank line
        if (!(row.size() == 1 && row.front().empty())) rows.push_back(std::move(row));
        row.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"' && !field_started) {
            in_quotes = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\n') {
            end_row();
        } else if (c == '\r') {
            if (i + 1 < text.size() && text[i + 1] == '\n') continue;
            end_row();
        } else {
            field += c;
            field_started = true;
        }
    }
    if (in_quotes) throw Error(ErrorCode::structural, "unterminated quoted field");
    if (field_started || !field.empty() || !row.empty()) end_row();
    return rows;
}

DatasetContext parse_context(std::string_view text, std::span<const std::string> column_names) {
    DatasetContext ctx;
    const std::set<std::string, std::less<>> known(column_names.begin(), column_names.end());
    auto require = [&](std::string_view column) {
        if (!known.count(column)) {
            throw Error(ErrorCode::context_mismatch, "context references unknown column '" + std::string(column) + "'");
        }
        return std::string(column);
    };
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        const std::string_view line = trim(text.substr(pos, eol - pos));
        pos = eol + 1;
        if (line.empty() || line.front() == '#') continue;
        const auto colon = line.find(':');
        if (colon == std::string_view::npos) {
            throw Error(ErrorCode::context_mismatch, "context line without ':' separator: " + std::string(line));
        }
        const std::string_view key = trim(line.substr(0, colon));
        const std::string value(trim(line.substr(colon + 1)));
        if (key == kDomainKey) {
            if (!ctx.domain_description.empty()) ctx.domain_description += ' ';
            ctx.domain_description += value;
        } else if (key == kLabelKey) {
            ctx.label_column = require(value);
        } else if (key.starts_with(kKindPrefix)) {
            ctx.kind_overrides[require(key.substr(kKindPrefix.size()))] = parse_kind(value);
        } else if (key.starts_with(kAliasPrefix)) {
            auto& list = ctx.aliases[require(key.substr(kAliasPrefix.size()))];
            std::size_t start = 0;
            while (start <= value.size()) {
                std::size_t comma = value.find(',', start);
                if (comma == std::string::npos) comma = value.size();
                const auto alias = trim(std::string_view(value).substr(start, comma - start));
                if (!alias.empty()) list.emplace_back(alias);
                start = comma + 1;
            }
        } else if (key.starts_with("_")) {
            throw Error(ErrorCode::context_mismatch, "unknown context directive '" + std::string(key) + "'");
        } else {
            ctx.per_feature[require(key)] = value;
        }
    }
    return ctx;
}

Dataset parse_dataset(std::string_view csv_text, std::string_view context_text, std::string name) {
    auto rows = parse_csv(csv_text);
    if (rows.empty()) throw Error(ErrorCode::empty_dataset, "data file is empty");
    const auto& header = rows.front();
    if (rows.size() == 1) throw Error(ErrorCode::empty_dataset, "data file has a header but no rows");
    std::vector<std::string> names;
    names.reserve(header.size());
    for (const auto& h : header) names.emplace_back(trim(h));

    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != names.size()) throw RaggedRowError(r - 1, names.size(), rows[r].size());
    }
    DatasetContext ctx = parse_context(context_text, names);

    std::vector<Column> columns;
    columns.reserve(names.size());
    std::vector<std::string> cells(rows.size() - 1);
    for (std::size_t c = 0; c < names.size(); ++c) {
        for (std::size_t r = 1; r < rows.size(); ++r) cells[r - 1] = std::move(rows[r][c]);
        std::optional<ColumnKind> override_kind;
        if (auto it = ctx.kind_overrides.find(names[c]); it != ctx.kind_overrides.end()) override_kind = it->second;
        try {
            columns.push_back(build_column(names[c], cells, override_kind));
        } catch (const Error& e) {
            if (e.code() != ErrorCode::undecidable_kind) throw;
            throw Error(ErrorCode::undecidable_kind, "column '" + names[c] + "': " + e.what());
        }
    }
    return Dataset(std::move(name), std::move(columns), std::move(ctx));
}

Dataset load_dataset(const std::string& data_path, const std::string& context_path) {
    const std::string data = read_file(data_path);
    const std::string context = context_path.empty() ? std::string() : read_file(context_path);
    return parse_dataset(data, context, std::filesystem::path(data_path).stem().string());
}

std::string serialize_canonical(const Dataset& dataset) {
    nlohmann::json blob = content_json(dataset.columns(), dataset.context());
    blob["format"] = "lassolens.dataset";
    blob["version"] = kCanonicalVersion;
    blob["name"] = dataset.name();
    blob["id"] = dataset.id();
    return blob.dump();
}

Dataset deserialize_canonical(std::string_view text) {
    nlohmann::json blob;
    try {
        blob = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::structural, std::string("corrupt dataset blob: ") + e.what());
    }
    if (blob.value("format", "") != "lassolens.dataset" || blob.value("version", 0) != kCanonicalVersion) {
        throw Error(ErrorCode::structural, "unsupported dataset blob version");
    }
    std::vector<Column> columns;
    for (const auto& jc : blob.at("columns")) {
        Column c;
        c.name = jc.at("name").get<std::string>();
        if (jc.at("kind") == "numerical") {
            c.kind = ColumnKind::numerical;
            for (const auto& v : jc.at("values")) {
                c.numbers.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
            }
        } else {
            c.kind = ColumnKind::categorical;
            c.categories = jc.at("categories").get<std::vector<std::string>>();
            c.codes = jc.at("codes").get<std::vector<std::int32_t>>();
        }
        columns.push_back(std::move(c));
    }
    const auto& jctx = blob.at("context");
    DatasetContext ctx;
    ctx.domain_description = jctx.at("domain").get<std::string>();
    ctx.per_feature = jctx.at("per_feature").get<std::map<std::string, std::string>>();
    for (const auto& [k, v] : jctx.at("kind_overrides").items()) ctx.kind_overrides[k] = parse_kind(v.get<std::string>());
    ctx.aliases = jctx.at("aliases").get<std::map<std::string, std::vector<std::string>>>();
    if (!jctx.at("label").is_null()) ctx.label_column = jctx.at("label").get<std::string>();
    Dataset ds(blob.at("name").get<std::string>(), std::move(columns), std::move(ctx));
    if (ds.id() != blob.at("id").get<std::string>()) throw Error(ErrorCode::structural, "dataset blob id mismatch");
    return ds;
}

}  // namespace lassolens
