#include "lassolens/service.hpp"

#include "lassolens/pipeline.hpp"
#include "lassolens/statistics.hpp"
#include "lassolens/store.hpp"
#include "lassolens/util.hpp"

#include <map>
#include <mutex>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

namespace lassolens {

using nlohmann::json;

int http_status(ErrorCode code) {
    switch (code) {
    case ErrorCode::not_found: return 404;
    case ErrorCode::budget_exceeded: return 422;
    case ErrorCode::unavailable: return 503;
    case ErrorCode::empty_response: return 502;
    case ErrorCode::config:
    case ErrorCode::numerical_failure:
    case ErrorCode::contract_violation:
    case ErrorCode::io: return 500;
    default: return 400;
    }
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message, json extra = json::object()) {
    json body = {{"error", {{"code", std::string(to_string(code))}, {"message", message}}}};
    for (auto& [k, v] : extra.items()) body[k] = v;
    send_json(res, http_status(code), body);
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
        return json::parse(req.body);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::parameter, std::string("request body is not valid JSON: ") + e.what());
    }
}

template <typename T>
T field(const json& body, const char* name, T fallback) {
    if (!body.contains(name) || body[name].is_null()) return fallback;
    try {
        return body[name].get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::parameter, fmt::format("field '{}' has the wrong type", name));
    }
}

json coords_json(const std::vector<double>& coords) {
    json out = json::array();
    for (std::size_t i = 0; i + 1 < coords.size(); i += 2) out.push_back({coords[i], coords[i + 1]});
    return out;
}

struct EmbeddingJob {
    std::string id;
    std::string dataset_id;
    EmbeddingParams params;

    std::mutex mu;
    std::string status = "running";
    int epoch = 0;
    std::vector<double> coords;
    std::optional<Embedding> result;
    std::string error_code;
    std::string error_message;

    std::jthread worker;
};

}  // namespace

struct Service::Impl {
    ServiceConfig config;
    Store store;
    httplib::Server server;

    std::mutex jobs_mu;
    std::map<std::string, std::shared_ptr<EmbeddingJob>> jobs;
    std::mutex profiles_mu;
    std::map<std::string, std::shared_ptr<const ContrastProfile>> profiles;

    explicit Impl(ServiceConfig c) : config(std::move(c)), store(config.store_dir) { routes(); }

    ~Impl() {
        std::lock_guard lock(jobs_mu);
        for (auto& [id, job] : jobs) job->worker.request_stop();
        for (auto& [id, job] : jobs) {
            if (job->worker.joinable()) job->worker.join();
        }
    }

    template <typename F>
    static httplib::Server::Handler guarded(F f) {
        return [f](const httplib::Request& req, httplib::Response& res) {
            try {
                f(req, res);
            } catch (const Error& e) {
                send_error(res, e.code(), e.what());
            } catch (const json::exception& e) {
                send_error(res, ErrorCode::parameter, e.what());
            } catch (const std::exception& e) {
                send_error(res, ErrorCode::io, e.what());
            }
        };
    }

    std::shared_ptr<const ContrastProfile> profile_for(const std::string& mask_id) {
        {
            std::lock_guard lock(profiles_mu);
            if (auto it = profiles.find(mask_id); it != profiles.end()) return it->second;
        }
        const auto mask = store.mask(mask_id);
        const auto dataset = store.dataset(mask->dataset_id);
        auto p = std::make_shared<const ContrastProfile>(summarize(*dataset, *mask));
        std::lock_guard lock(profiles_mu);
        return profiles.try_emplace(mask_id, std::move(p)).first->second;
    }

    std::shared_ptr<EmbeddingJob> start_job(const std::string& dataset_id, const EmbeddingParams& params) {
        const auto dataset = store.dataset(dataset_id);
        params.validate(dataset->row_count());
        const std::string job_id = "e" + content_id(dataset_id + "\n" + params.key());

        std::lock_guard lock(jobs_mu);
        if (auto it = jobs.find(job_id); it != jobs.end()) {
            std::lock_guard job_lock(it->second->mu);
            if (it->second->status != "failed" && it->second->status != "cancelled") return it->second;
            if (it->second->worker.joinable()) it->second->worker.join();
        }
        auto job = std::make_shared<EmbeddingJob>();
        job->id = job_id;
        job->dataset_id = dataset_id;
        job->params = params;
        jobs[job_id] = job;

        if (auto cached = store.embedding(dataset_id, params)) {
            job->status = "complete";
            job->epoch = cached->epoch;
            job->coords = cached->coords;
            job->result = std::move(*cached);
            return job;
        }
        EmbeddingJob* raw = job.get();
        job->worker = std::jthread([this, raw, dataset](std::stop_token stop) {
            try {
                auto sink = [raw](const Snapshot& s) {
                    std::lock_guard l(raw->mu);
                    raw->epoch = s.epoch;
                    raw->coords = s.coords;
                };
                Embedding e = compute_embedding(*dataset, raw->params, sink, stop);
                if (e.complete) store.put_embedding(e);
                std::lock_guard l(raw->mu);
                raw->epoch = e.epoch;
                raw->coords = e.coords;
                raw->status = e.complete ? "complete" : "cancelled";
                raw->result = std::move(e);
            } catch (const Error& err) {
                std::lock_guard l(raw->mu);
                raw->status = "failed";
                raw->error_code = std::string(to_string(err.code()));
                raw->error_message = err.what();
            } catch (const std::exception& err) {
                std::lock_guard l(raw->mu);
                raw->status = "failed";
                raw->error_code = "io";
                raw->error_message = err.what();
            }
        });
        return job;
    }

    std::shared_ptr<EmbeddingJob> job(const std::string& id) {
        std::lock_guard lock(jobs_mu);
        auto it = jobs.find(id);
        if (it == jobs.end()) throw Error(ErrorCode::not_found, fmt::format("no embedding job with id '{}'", id));
        return it->second;
    }

    static json job_json(EmbeddingJob& j) {
        std::lock_guard lock(j.mu);
        json out = {{"job_id", j.id},
                    {"dataset_id", j.dataset_id},
                    {"status", j.status},
                    {"epoch", j.epoch},
                    {"n_epochs", j.params.n_epochs},
                    {"params", params_to_json(j.params)},
                    {"coords", j.coords.empty() ? json(nullptr) : coords_json(j.coords)}};
        if (j.status == "failed") out["error"] = {{"code", j.error_code}, {"message", j.error_message}};
        return out;
    }

    static json dataset_json(const Dataset& d) {
        json columns = json::array();
        for (const auto& c : d.columns()) {
            columns.push_back({{"name", c.name},
                               {"kind", std::string(to_string(c.kind))},
                               {"missing", c.missing_count()},
                               {"label", d.is_label(c.name)}});
        }
        return {{"dataset_id", d.id()}, {"name", d.name()}, {"rows", d.row_count()}, {"columns", std::move(columns)}};
    }

    void routes() {
        server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
            const std::string message = res.status == 404 ? "no such route" : fmt::format("HTTP {}", res.status);
            json body = {{"error", {{"code", res.status == 404 ? "not_found" : "parameter"}, {"message", message}}}};
            res.set_content(body.dump(), "application/json");
            return httplib::Server::HandlerResponse::Handled;
        });

        server.Post("/datasets", guarded([this](const httplib::Request& req, httplib::Response& res) {
            if (!req.is_multipart_form_data() || !req.has_file("data")) {
                throw Error(ErrorCode::parameter, "expected multipart form data with a 'data' file");
            }
            const auto data = req.get_file_value("data");
            const std::string context = req.has_file("context") ? req.get_file_value("context").content : "";
            std::string name = req.has_file("name") ? req.get_file_value("name").content : data.filename;
            if (const auto dot = name.rfind('.'); dot != std::string::npos && dot > 0) name.resize(dot);
            if (name.empty()) name = "dataset";
            const Dataset d = parse_dataset(data.content, context, name);
            store.put_dataset(d);
            send_json(res, 201, dataset_json(d));
        }));

        server.Get("/datasets/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, dataset_json(*store.dataset(req.path_params.at("id"))));
        }));

        server.Post("/datasets/:id/embedding", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto params = params_from_json(parse_body(req));
            params.validate(store.dataset(req.path_params.at("id"))->row_count());
            auto j = start_job(req.path_params.at("id"), params);
            send_json(res, 202, job_json(*j));
        }));

        server.Get("/embeddings/:job", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, job_json(*job(req.path_params.at("job"))));
        }));

        server.Post("/datasets/:id/selections", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto dataset = store.dataset(req.path_params.at("id"));
            const json body = parse_body(req);
            SelectionMask mask;
            if (body.contains("predicate")) {
                const auto& p = body["predicate"];
                mask = select_by_predicate(*dataset, field<std::string>(p, "column", ""), field<std::string>(p, "value", ""));
            } else if (body.contains("polygon")) {
                std::vector<Point2> polygon;
                if (!body["polygon"].is_array()) throw Error(ErrorCode::degenerate_polygon, "polygon must be an array of [x, y]");
                for (const auto& v : body["polygon"]) {
                    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
                        throw Error(ErrorCode::degenerate_polygon, "polygon vertices must be [x, y] number pairs");
                    }
                    polygon.push_back({v[0].get<double>(), v[1].get<double>()});
                }
                const auto job_id = field<std::string>(body, "embedding", "");
                if (job_id.empty()) throw Error(ErrorCode::parameter, "a polygon selection needs the 'embedding' job id");
                auto j = job(job_id);
                std::optional<Embedding> e;
                {
                    std::lock_guard lock(j->mu);
                    e = j->result;
                }
                if (!e || j->dataset_id != dataset->id()) {
                    throw Error(ErrorCode::selection, "embedding " + job_id + " is not complete for this dataset");
                }
                mask = select_lasso(*e, polygon);
            } else {
                throw Error(ErrorCode::parameter, "selection needs a 'polygon' or a 'predicate'");
            }
            if (field<bool>(body, "invert", false)) mask = invert(mask);
            const auto id = store.put_mask(mask);
            send_json(res, 201, {{"mask_id", id},
                                 {"dataset_id", mask.dataset_id},
                                 {"size", mask.size()},
                                 {"selected_count", mask.selected_count()},
                                 {"rest_count", mask.rest_count()}});
        }));

        server.Get("/selections/:mask", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto mask = store.mask(req.path_params.at("mask"));
            json out = mask_to_json(*mask);
            std::vector<std::size_t> rows;
            for (std::size_t i = 0; i < mask->size(); ++i) {
                if ((*mask)[i]) rows.push_back(i);
            }
            out["selected_rows"] = rows;
            out["selected_count"] = mask->selected_count();
            out["rest_count"] = mask->rest_count();
            send_json(res, 200, out);
        }));

        server.Get("/selections/:mask/profile", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, to_json(*profile_for(req.path_params.at("mask"))));
        }));

        server.Get("/selections/:mask/distribution/:feature",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       const auto mask = store.mask(req.path_params.at("mask"));
                       const auto dataset = store.dataset(mask->dataset_id);
                       int bins = 20;
                       if (req.has_param("bins")) {
                           const auto parsed = parse_finite(req.get_param_value("bins"));
                           if (!parsed || *parsed != static_cast<int>(*parsed)) {
                               throw Error(ErrorCode::parameter, "bins must be an integer");
                           }
                           bins = static_cast<int>(*parsed);
                       }
                       const auto& feature = req.path_params.at("feature");
                       if (!dataset->find(feature)) {
                           throw Error(ErrorCode::not_found, fmt::format("no feature named '{}'", feature));
                       }
                       json out = to_json(feature_distribution(*dataset, *mask, feature, bins));
                       out["feature"] = feature;
                       send_json(res, 200, out);
                   }));

        server.Post("/selections/:mask/explanations", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto mask_id = req.path_params.at("mask");
            const auto mask = store.mask(mask_id);
            const auto dataset = store.dataset(mask->dataset_id);
            const json body = parse_body(req);
            ExplainRequest request;
            const double fraction = field<double>(body, "fraction", 0.20);
            const auto seed = field<std::uint64_t>(body, "seed", 7);
            request.strategy = parse_strategy(field<std::string>(body, "strategy", "S1"), fraction, seed);
            request.trials = field<int>(body, "trials", 1);
            request.use_mock = field<bool>(body, "use_mock", false);
            request.budget = field<std::size_t>(body, "budget", config.token_budget);

            const auto profile = profile_for(mask_id);
            auto outcome = run_explanations(*dataset, *mask, *profile, request, config.llm);
            if (outcome.infeasible) {
                send_error(res, ErrorCode::budget_exceeded,
                           fmt::format("{} prompt needs about {} tokens, over the budget of {}",
                                       outcome.infeasible->strategy, outcome.infeasible->estimated_tokens,
                                       outcome.infeasible->budget),
                           {{"report", to_json(*outcome.infeasible)}});
                return;
            }
            const std::string strategy = strategy_name(request.strategy);
            json strategy_params = json::object();
            if (const auto* sub = std::get_if<SubsampleStrategy>(&request.strategy)) {
                strategy_params = {{"fraction", sub->fraction}, {"seed", sub->seed}};
            }
            json ids = json::array();
            for (const auto& trial : outcome.trials) {
                ids.push_back(store.put_explanation({{"mask_id", mask_id},
                                                     {"dataset_id", dataset->id()},
                                                     {"strategy", strategy},
                                                     {"strategy_params", strategy_params},
                                                     {"mock", request.use_mock},
                                                     {"explanation", to_json(trial.explanation)},
                                                     {"prompt", to_json(outcome.prompt)},
                                                     {"validation", to_json(trial.report)}}));
            }
            json out = {{"explanation_ids", std::move(ids)},
                        {"strategy", strategy},
                        {"estimated_tokens", outcome.prompt.estimated_tokens}};
            out["consistency"] = outcome.consistency ? to_json(*outcome.consistency) : json(nullptr);
            send_json(res, 201, out);
        }));

        server.Get("/explanations/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, store.explanation(req.path_params.at("id")));
        }));

        server.Get("/selections/:mask/trials/:strategy/consistency",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       const auto mask_id = req.path_params.at("mask");
                       const auto mask = store.mask(mask_id);
                       const auto dataset = store.dataset(mask->dataset_id);
                       const auto strategy = strategy_name(parse_strategy(req.path_params.at("strategy")));
                       std::vector<Explanation> explanations;
                       for (const auto& id : store.explanations_for(mask_id, strategy)) {
                           explanations.push_back(explanation_from_json(store.explanation(id).at("explanation")));
                       }
                       const auto metrics =
                           trial_consistency(explanations, *profile_for(mask_id), FeatureLexicon(*dataset));
                       send_json(res, 200, to_json(metrics));
                   }));
    }
};

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {
    impl_->config.llm.validate();
}

Service::~Service() { stop(); }

int Service::bind() {
    auto& c = impl_->config;
    if (c.port == 0) {
        c.port = impl_->server.bind_to_any_port(c.host);
        if (c.port <= 0) throw Error(ErrorCode::config, "could not bind to " + c.host);
    } else if (!impl_->server.bind_to_port(c.host, c.port)) {
        throw Error(ErrorCode::config, fmt::format("could not bind to {}:{}", c.host, c.port));
    }
    return c.port;
}

void Service::listen() { impl_->server.listen_after_bind(); }

void Service::stop() {
    if (impl_) impl_->server.stop();
}

}  // namespace lassolens
