#include "lassolens/bench.hpp"
#include "lassolens/dataset.hpp"
#include "lassolens/embedding.hpp"
#include "lassolens/error.hpp"
#include "lassolens/selection.hpp"
#include "lassolens/service.hpp"
#include "lassolens/statistics.hpp"
#include "lassolens/util.hpp"

#include <csignal>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

namespace {

lassolens::Service* g_service = nullptr;

void on_signal(int) {
    if (g_service) g_service->stop();
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text + ",") {
        if (c == ',' || c == ' ') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    return out;
}

void add_llm_options(CLI::App* app, lassolens::LlmConfig& llm) {
    app->add_option("--endpoint", llm.endpoint, "Chat-completions URL")->capture_default_str();
    app->add_option("--model", llm.model, "Model name")->capture_default_str();
    app->add_option("--api-key-env", llm.api_key_env, "Environment variable holding the API key")->capture_default_str();
    app->add_option("--timeout", llm.timeout_seconds, "Request timeout in seconds")->capture_default_str();
    app->add_option("--retries", llm.max_retries, "Retries after the first attempt")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lassolens: explain lasso selections on tabular embeddings"};
    app.require_subcommand(1);

    // bench
    lassolens::BenchOptions bench;
    std::string strategies = "S1,S2,S3";
    std::string out_dir;
    auto* bench_cmd = app.add_subcommand("bench", "Compare evidence strategies on one selection");
    bench_cmd->add_option("--data", bench.data_path, "CSV file")->required()->check(CLI::ExistingFile);
    bench_cmd->add_option("--context", bench.context_path, "Context file")->required()->check(CLI::ExistingFile);
    auto* select_opt = bench_cmd->add_option("--select", bench.predicate, "Predicate selection, column=value");
    auto* polygon_opt =
        bench_cmd->add_option("--polygon", bench.polygon_path, "Polygon JSON in embedding coordinates")->check(CLI::ExistingFile);
    select_opt->excludes(polygon_opt);
    bench_cmd->add_option("--strategies", strategies, "Comma-separated subset of S1,S2,S3")->capture_default_str();
    bench_cmd->add_option("--trials", bench.trials, "Trials per strategy")->capture_default_str();
    bench_cmd->add_flag("--mock", bench.use_mock, "Use the deterministic template explainer");
    bench_cmd->add_option("--budget", bench.budget, "Token budget")->capture_default_str();
    bench_cmd->add_option("--seed", bench.seed, "S2 sampling seed")->capture_default_str();
    bench_cmd->add_option("--fraction", bench.fraction, "S2 sampling fraction")->capture_default_str();
    bench_cmd->add_option("--embedding-seed", bench.embedding.seed, "Embedding seed (polygon selections)")
        ->capture_default_str();
    bench_cmd->add_option("--out", out_dir, "Output directory")->required();
    add_llm_options(bench_cmd, bench.llm);

    // serve
    lassolens::ServiceConfig serve;
    std::string store_dir = "lassolens-store";
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API");
    serve_cmd->add_option("--host", serve.host)->capture_default_str();
    serve_cmd->add_option("--port", serve.port)->capture_default_str();
    serve_cmd->add_option("--store", store_dir, "Store directory")->capture_default_str();
    serve_cmd->add_option("--budget", serve.token_budget, "Token budget")->capture_default_str();
    add_llm_options(serve_cmd, serve.llm);

    // embed
    std::string data, context, coords_out;
    lassolens::EmbeddingParams params;
    bool fast = false;
    auto* embed_cmd = app.add_subcommand("embed", "Compute a 2-D embedding and write row_index,x,y");
    embed_cmd->add_option("--data", data)->required()->check(CLI::ExistingFile);
    embed_cmd->add_option("--context", context)->required()->check(CLI::ExistingFile);
    embed_cmd->add_option("--neighbors", params.n_neighbors)->capture_default_str();
    embed_cmd->add_option("--min-dist", params.min_dist)->capture_default_str();
    embed_cmd->add_option("--spread", params.spread)->capture_default_str();
    embed_cmd->add_option("--epochs", params.n_epochs)->capture_default_str();
    embed_cmd->add_option("--seed", params.seed)->capture_default_str();
    embed_cmd->add_flag("--fast", fast, "Multi-threaded, not reproducible");
    embed_cmd->add_option("--out", coords_out, "CSV output (default stdout)");

    // profile
    std::string predicate;
    auto* profile_cmd = app.add_subcommand("profile", "Print the contrast profile of a predicate selection");
    profile_cmd->add_option("--data", data)->required()->check(CLI::ExistingFile);
    profile_cmd->add_option("--context", context)->required()->check(CLI::ExistingFile);
    profile_cmd->add_option("--select", predicate, "column=value")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*bench_cmd) {
            bench.strategies = split_list(strategies);
            bench.out_dir = out_dir;
            const auto report = lassolens::run_bench(bench);
            std::cout << lassolens::render_markdown(report);
        } else if (*serve_cmd) {
            serve.store_dir = store_dir;
            lassolens::Service service(serve);
            const int port = service.bind();
            g_service = &service;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            fmt::print("listening on http://{}:{}\n", serve.host, port);
            std::fflush(stdout);
            service.listen();
            g_service = nullptr;
        } else if (*embed_cmd) {
            params.mode = fast ? lassolens::LayoutMode::fast : lassolens::LayoutMode::strict;
            const auto dataset = lassolens::load_dataset(data, context);
            const auto embedding = lassolens::compute_embedding(dataset, params);
            const auto csv = lassolens::export_coords_csv(embedding);
            if (coords_out.empty()) std::cout << csv;
            else lassolens::write_file(coords_out, csv);
        } else if (*profile_cmd) {
            const auto eq = predicate.find('=');
            if (eq == std::string::npos) throw lassolens::Error(lassolens::ErrorCode::parameter, "--select expects column=value");
            const auto dataset = lassolens::load_dataset(data, context);
            const auto mask = lassolens::select_by_predicate(dataset, predicate.substr(0, eq), predicate.substr(eq + 1));
            lassolens::require_explainable(mask);
            std::cout << lassolens::render_profile_table(lassolens::summarize(dataset, mask));
        }
    } catch (const lassolens::Error& e) {
        fmt::print(stderr, "error [{}]: {}\n", lassolens::to_string(e.code()), e.what());
        return 1;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}
