#include "lassolens/store.hpp"

#include "lassolens/error.hpp"
#include "lassolens/util.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace lassolens {

namespace fs = std::filesystem;

nlohmann::json mask_to_json(const SelectionMask& mask) {
    std::string bits(mask.size(), '0');
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) bits[i] = '1';
    }
    nlohmann::json source;
    if (const auto* lasso = std::get_if<LassoSource>(&mask.source)) {
        nlohmann::json poly = nlohmann::json::array();
        for (const auto& p : lasso->polygon) poly.push_back({p.x, p.y});
        source = {{"type", "lasso"}, {"polygon", std::move(poly)}};
    } else {
        const auto& pred = std::get<PredicateSource>(mask.source);
        source = {{"type", "predicate"}, {"column", pred.column}, {"value", pred.value}};
    }
    return {{"id", mask.id()},
            {"dataset_id", mask.dataset_id},
            {"selected", std::move(bits)},
            {"source", std::move(source)},
            {"inverted", mask.inverted}};
}

SelectionMask mask_from_json(const nlohmann::json& j) {
    SelectionMask m;
    m.dataset_id = j.at("dataset_id").get<std::string>();
    for (char c : j.at("selected").get<std::string>()) m.selected.push_back(c == '1' ? 1 : 0);
    const auto& src = j.at("source");
    if (src.at("type") == "lasso") {
        LassoSource lasso;
        for (const auto& p : src.at("polygon")) lasso.polygon.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        m.source = std::move(lasso);
    } else {
        m.source = PredicateSource{src.at("column").get<std::string>(), src.at("value").get<std::string>()};
    }
    m.inverted = j.value("inverted", false);
    if (j.contains("id") && j["id"] != m.id()) throw Error(ErrorCode::io, "stored mask does not match its id");
    return m;
}

nlohmann::json params_to_json(const EmbeddingParams& p) {
    return {{"n_neighbors", p.n_neighbors},
            {"min_dist", p.min_dist},
            {"spread", p.spread},
            {"seed", p.seed},
            {"n_epochs", p.n_epochs},
            {"snapshot_interval", p.snapshot_interval},
            {"mode", p.mode == LayoutMode::strict ? "strict" : "fast"}};
}

EmbeddingParams params_from_json(const nlohmann::json& j) {
    EmbeddingParams p;
    if (j.is_null()) return p;
    if (!j.is_object()) throw Error(ErrorCode::parameter, "embedding parameters must be a JSON object");
    try {
        p.n_neighbors = j.value("n_neighbors", p.n_neighbors);
        p.min_dist = j.value("min_dist", p.min_dist);
        p.spread = j.value("spread", p.spread);
        p.seed = j.value("seed", p.seed);
        p.n_epochs = j.value("n_epochs", p.n_epochs);
        p.snapshot_interval = j.value("snapshot_interval", p.snapshot_interval);
        const auto mode = j.value("mode", std::string("strict"));
        if (mode == "strict") p.mode = LayoutMode::strict;
        else if (mode == "fast") p.mode = LayoutMode::fast;
        else throw Error(ErrorCode::parameter, "mode must be 'strict' or 'fast'");
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::parameter, std::string("bad embedding parameters: ") + e.what());
    }
    return p;
}

Store::Store(fs::path root) : root_(std::move(root)) {
    for (const char* sub : {"datasets", "embeddings", "masks", "explanations"}) fs::create_directories(root_ / sub);
    load_explanation_index();
}

fs::path Store::path_for(const std::string& kind, const std::string& id) const {
    // ids are hex digests with a one-letter prefix at most; anything else is not ours
    const bool safe = !id.empty() && std::all_of(id.begin(), id.end(), [](char c) {
        return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || c == '-';
    });
    if (!safe) throw Error(ErrorCode::not_found, fmt::format("no {} with id '{}'", kind, id));
    return root_ / (kind + "s") / (id + ".json");
}

std::string Store::put_dataset(const Dataset& dataset) {
    std::lock_guard lock(mu_);
    const auto path = path_for("dataset", dataset.id());
    if (!fs::exists(path)) write_file(path.string(), serialize_canonical(dataset));
    datasets_.try_emplace(dataset.id(), std::make_shared<const Dataset>(dataset));
    return dataset.id();
}

std::shared_ptr<const Dataset> Store::dataset(const std::string& id) {
    std::lock_guard lock(mu_);
    if (auto it = datasets_.find(id); it != datasets_.end()) return it->second;
    const auto path = path_for("dataset", id);
    if (!fs::exists(path)) throw Error(ErrorCode::not_found, fmt::format("no dataset with id '{}'", id));
    auto d = std::make_shared<const Dataset>(deserialize_canonical(read_file(path.string())));
    datasets_.emplace(id, d);
    return d;
}

namespace {
std::string embedding_key(const std::string& dataset_id, const EmbeddingParams& params) {
    return dataset_id + "-" + content_id(params.key());
}
}  // namespace

void Store::put_embedding(const Embedding& e) {
    if (!e.complete) return;
    nlohmann::json j = {{"dataset_id", e.dataset_id},
                        {"params", params_to_json(e.params)},
                        {"params_key", e.params.key()},
                        {"epoch", e.epoch},
                        {"coords", e.coords}};
    std::lock_guard lock(mu_);
    const auto path = path_for("embedding", embedding_key(e.dataset_id, e.params));
    if (!fs::exists(path)) write_file(path.string(), j.dump());
}

std::optional<Embedding> Store::embedding(const std::string& dataset_id, const EmbeddingParams& params) {
    std::lock_guard lock(mu_);
    const auto path = path_for("embedding", embedding_key(dataset_id, params));
    if (!fs::exists(path)) return std::nullopt;
    const auto j = nlohmann::json::parse(read_file(path.string()));
    if (j.at("params_key") != params.key()) return std::nullopt;
    Embedding e;
    e.dataset_id = dataset_id;
    e.params = params;
    e.epoch = j.at("epoch").get<int>();
    e.coords = j.at("coords").get<std::vector<double>>();
    e.complete = true;
    return e;
}

std::string Store::put_mask(const SelectionMask& mask) {
    const std::string id = mask.id();
    std::lock_guard lock(mu_);
    const auto path = path_for("mask", id);
    if (!fs::exists(path)) write_file(path.string(), mask_to_json(mask).dump());
    masks_.try_emplace(id, std::make_shared<const SelectionMask>(mask));
    return id;
}

std::shared_ptr<const SelectionMask> Store::mask(const std::string& id) {
    std::lock_guard lock(mu_);
    if (auto it = masks_.find(id); it != masks_.end()) return it->second;
    const auto path = path_for("mask", id);
    if (!fs::exists(path)) throw Error(ErrorCode::not_found, fmt::format("no selection with id '{}'", id));
    auto m = std::make_shared<const SelectionMask>(mask_from_json(nlohmann::json::parse(read_file(path.string()))));
    masks_.emplace(id, m);
    return m;
}

void Store::load_explanation_index() {
    std::vector<std::pair<std::uint64_t, std::string>> order;
    for (const auto& entry : fs::directory_iterator(root_ / "explanations")) {
        if (entry.path().extension() != ".json") continue;
        auto j = nlohmann::json::parse(read_file(entry.path().string()));
        const auto id = j.at("id").get<std::string>();
        const auto seq = j.at("seq").get<std::uint64_t>();
        next_seq_ = std::max(next_seq_, seq + 1);
        order.emplace_back(seq, id);
        explanations_.emplace(id, std::move(j));
    }
    std::sort(order.begin(), order.end());
    for (auto& [seq, id] : order) explanation_order_.push_back(std::move(id));
}

std::string Store::put_explanation(nlohmann::json record) {
    std::lock_guard lock(mu_);
    record["seq"] = next_seq_++;
    record.erase("id");
    const std::string id = "x" + content_id(record.dump());
    record["id"] = id;
    write_file(path_for("explanation", id).string(), record.dump(2));
    explanations_.emplace(id, std::move(record));
    explanation_order_.push_back(id);
    return id;
}

nlohmann::json Store::explanation(const std::string& id) {
    std::lock_guard lock(mu_);
    if (auto it = explanations_.find(id); it != explanations_.end()) return it->second;
    throw Error(ErrorCode::not_found, fmt::format("no explanation with id '{}'", id));
}

std::vector<std::string> Store::explanations_for(const std::string& mask_id, const std::string& strategy) {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    for (const auto& id : explanation_order_) {
        const auto& r = explanations_.at(id);
        if (r.at("mask_id") == mask_id && r.at("strategy") == strategy) out.push_back(id);
    }
    return out;
}

}  // namespace lassolens
