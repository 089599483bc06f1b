// searchgym command-line entry point: index, serve, run, score, synth.
//
// Reports go to stdout as JSON; logs go to stderr. Exit code 0 on success,
// 2 on usage or setup errors.

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "searchgym/searchgym.hpp"

namespace fs = std::filesystem;
using namespace searchgym;

namespace {

constexpr int kExitSetup = 2;

void configure_logging() {
    auto logger = spdlog::stderr_color_mt("searchgym");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
    const char* level = std::getenv("SEARCHGYM_LOG");
    const std::string value = level ? level : "info";
    if (value == "error") {
        spdlog::set_level(spdlog::level::err);
    } else if (value == "debug") {
        spdlog::set_level(spdlog::level::debug);
    } else {
        spdlog::set_level(spdlog::level::info);
    }
}

struct IndexArgs {
    std::string corpus;
    std::string out;
    std::string embedder = "hash";
    std::string endpoint;
    std::size_t dim = 768;
};

struct ServeArgs {
    std::string index;
    std::string corpus;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::size_t top_m = 15;
    std::size_t top_k = 10;
    std::size_t preview_chars = 150;
    std::string reranker = "lexical";
    std::string endpoint;
    std::size_t max_query_chars = 512;
};

struct RunArgs {
    std::string dataset;
    std::string corpus;
    std::string index;
    std::string policy = "oracle";
    std::string endpoint;
    std::string search_url;
    int stage = 1;
    std::size_t max_turns = 16;
    std::optional<std::size_t> budget;
    std::string token_counter = "chars_div_4";
    std::string trace;
    std::string weights;
    std::size_t parallel = 1;
    std::uint64_t seed = 7;
    std::size_t dim = 768;
};

struct ScoreArgs {
    std::string trace;
    std::string dataset;
    std::string corpus;
    int stage = 1;
    std::string weights;
};

struct SynthArgs {
    std::size_t docs = 200;
    std::size_t samples = 50;
    std::uint64_t seed = 1;
    std::string corpus_out;
    std::string dataset_out;
};

int cmd_index(const IndexArgs& a) {
    EmbedderConfig config;
    config.kind = a.embedder == "remote" ? EmbedderKind::remote : EmbedderKind::hash;
    config.dim = a.dim;
    if (!a.endpoint.empty()) config.endpoint = a.endpoint;
    config.validate();

    auto corpus = load_corpus(a.corpus);
    for (const auto& w : corpus_warnings(corpus)) spdlog::warn("{}", w);
    const std::size_t n = corpus.size();
    VectorIndex index = build_index(std::move(corpus), config);
    write_index_file(a.out, index, fs::absolute(a.corpus).lexically_normal().string());
    std::cout << "indexed " << n << " documents" << std::endl;
    return 0;
}

int cmd_serve(const ServeArgs& a) {
    PipelineConfig pipeline;
    pipeline.top_m = a.top_m;
    pipeline.top_k = a.top_k;
    pipeline.preview_chars = a.preview_chars;
    pipeline.reranker = a.reranker == "remote" ? RerankerKind::remote : RerankerKind::lexical;
    if (!a.endpoint.empty()) pipeline.endpoint = a.endpoint;
    ServerConfig config{a.port, a.host, a.index, pipeline, a.max_query_chars};
    if (a.port < 1) throw InvalidConfigError("port must be within [1, 65535]");
    config.validate();

    // Signals are handled by a dedicated thread via sigwait.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    SearchServer server;
    server.set_logger([](const std::string& method, const std::string& path, int status) {
        spdlog::info("{} {} {}", method, path, status);
    });
    if (server.bind(config.host, config.port) < 0) {
        spdlog::error("cannot bind {}:{}", config.host, config.port);
        return kExitSetup;
    }
    server.start();
    spdlog::info("listening on {}:{}, loading index {}", config.host, config.port, config.index_path);

    try {
        std::optional<fs::path> corpus_override;
        if (!a.corpus.empty()) corpus_override = a.corpus;
        auto index = std::make_shared<const VectorIndex>(load_index(config.index_path, corpus_override));
        spdlog::info("index ready: {} documents, dim {}", index->size(), index->dim());
        server.set_service(std::make_shared<const SearchService>(index, config.pipeline, config.max_query_chars));
    } catch (const std::exception& e) {
        spdlog::error("cannot load index: {}", e.what());
        server.stop();
        return kExitSetup;
    }

    int sig = 0;
    sigwait(&signals, &sig);
    spdlog::info("signal {} received, shutting down", sig);
    server.stop();
    return 0;
}

TokenCounter parse_counter(const std::string& s) {
    return s == "whitespace_words" ? TokenCounter::whitespace_words : TokenCounter::chars_div_4;
}

StageWeights weights_for(int stage, const std::string& path) {
    if (path.empty()) return StageWeights::defaults(stage);
    StageWeights w = load_stage_weights(path);
    if (w.stage != stage) throw InvalidWeightsError("weights file is for stage " + std::to_string(w.stage));
    return w;
}

int cmd_run(const RunArgs& a) {
    EpisodeConfig config;
    config.stage = a.stage;
    config.max_turns = a.max_turns;
    config.context_budget_tokens = a.budget.value_or(default_budget_for_stage(a.stage));
    config.budget_overridden = a.budget.has_value();
    config.token_counter = parse_counter(a.token_counter);
    config.validate();
    const StageWeights weights = weights_for(a.stage, a.weights);

    auto corpus = std::make_shared<const std::vector<Document>>(load_corpus(a.corpus));
    const auto dataset = load_dataset(a.dataset, *corpus);
    spdlog::info("loaded {} documents and {} samples", corpus->size(), dataset.size());

    ToolRegistry tools;
    if (!a.search_url.empty()) {
        tools = make_http_tools(a.search_url);
    } else {
        std::shared_ptr<const VectorIndex> index;
        if (!a.index.empty()) {
            auto parsed = read_index_file(a.index);
            index = std::make_shared<const VectorIndex>(parsed.meta.embedder, std::move(parsed.entries), corpus);
        } else {
            EmbedderConfig embedder;
            embedder.dim = a.dim;
            index = std::make_shared<const VectorIndex>(build_index(corpus, embedder));
        }
        tools = make_local_tools(std::make_shared<const SearchService>(index, PipelineConfig{}));
    }

    PolicyFactory factory;
    if (a.policy == "oracle") {
        factory = [corpus](const QaSample& s) { return std::make_unique<OraclePolicy>(s, *corpus); };
    } else if (a.policy == "random") {
        const auto names = tools.names();
        factory = [seed = a.seed, names](const QaSample&) { return std::make_unique<RandomPolicy>(seed, names); };
    } else {
        if (a.endpoint.empty()) throw InvalidConfigError("--policy remote requires --endpoint");
        factory = [endpoint = a.endpoint](const QaSample&) { return std::make_unique<RemotePolicy>(endpoint); };
    }

    const auto scored = run_batch(dataset, factory, tools, config, weights, a.parallel);
    if (!a.trace.empty()) {
        std::ofstream out(a.trace, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + a.trace);
        for (const auto& s : scored) write_trace(out, s.episode);
    }
    std::cout << to_json(summarize(scored)).dump() << std::endl;
    return 0;
}

int cmd_score(const ScoreArgs& a) {
    const StageWeights weights = weights_for(a.stage, a.weights);
    std::vector<QaSample> dataset;
    if (a.corpus.empty()) {
        dataset = load_dataset_unverified(a.dataset);
    } else {
        dataset = load_dataset(a.dataset, load_corpus(a.corpus));
    }
    std::ifstream in(a.trace, std::ios::binary);
    if (!in) throw IoError("cannot open " + a.trace);
    auto scored = score_trace(read_trace(in), dataset, weights);
    for (const auto& s : scored) {
        nlohmann::ordered_json row;
        row["sample_id"] = s.episode.sample_id;
        const auto reward = to_json(s.reward);
        for (const auto& [k, v] : reward.items()) row[k] = v;
        std::cout << row.dump() << '\n';
    }
    nlohmann::ordered_json agg;
    agg["aggregate"] = aggregate_rewards(scored);
    std::cout << agg.dump() << std::endl;
    return 0;
}

int cmd_synth(const SynthArgs& a) {
    const auto world = make_synthetic_world(a.docs, a.samples, a.seed);
    std::ofstream corpus(a.corpus_out, std::ios::binary | std::ios::trunc);
    if (!corpus) throw IoError("cannot write " + a.corpus_out);
    write_corpus(corpus, world.corpus);
    std::ofstream dataset(a.dataset_out, std::ios::binary | std::ios::trunc);
    if (!dataset) throw IoError("cannot write " + a.dataset_out);
    write_dataset(dataset, world.samples);
    std::cout << "wrote " << world.corpus.size() << " documents and " << world.samples.size() << " samples"
              << std::endl;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    configure_logging();

    CLI::App app{"searchgym: simulated search engine, agent episodes and verifiable rewards"};
    app.require_subcommand(1);

    IndexArgs index_args;
    auto* index = app.add_subcommand("index", "Embed a corpus and write an index file");
    index->add_option("--corpus", index_args.corpus, "Corpus JSONL")->required();
    index->add_option("--out", index_args.out, "Output index file")->required();
    index->add_option("--embedder", index_args.embedder)->check(CLI::IsMember({"hash", "remote"}));
    index->add_option("--endpoint", index_args.endpoint, "Remote embedder base URL");
    index->add_option("--dim", index_args.dim)->check(CLI::Range(8, 1 << 20));

    ServeArgs serve_args;
    auto* serve = app.add_subcommand("serve", "Serve /search, /scrape and /health");
    serve->add_option("--index", serve_args.index)->required();
    serve->add_option("--corpus", serve_args.corpus, "Corpus path overriding the one recorded in the index");
    serve->add_option("--host", serve_args.host);
    serve->add_option("--port", serve_args.port)->check(CLI::Range(1, 65535));
    serve->add_option("--top-m", serve_args.top_m)->check(CLI::PositiveNumber);
    serve->add_option("--top-k", serve_args.top_k)->check(CLI::PositiveNumber);
    serve->add_option("--preview-chars", serve_args.preview_chars)->check(CLI::PositiveNumber);
    serve->add_option("--reranker", serve_args.reranker)->check(CLI::IsMember({"lexical", "remote"}));
    serve->add_option("--endpoint", serve_args.endpoint, "Remote reranker base URL");
    serve->add_option("--max-query-chars", serve_args.max_query_chars)->check(CLI::PositiveNumber);

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "Run one episode per dataset sample and report");
    run->add_option("--dataset", run_args.dataset)->required();
    run->add_option("--corpus", run_args.corpus)->required();
    run->add_option("--index", run_args.index, "Prebuilt index (default: build a hash index in memory)");
    run->add_option("--policy", run_args.policy)->check(CLI::IsMember({"oracle", "random", "remote"}));
    run->add_option("--endpoint", run_args.endpoint, "Remote policy base URL");
    run->add_option("--search-url", run_args.search_url, "Use a running search server instead of in-process search");
    run->add_option("--stage", run_args.stage)->required()->check(CLI::IsMember({1, 2, 3}));
    run->add_option("--max-turns", run_args.max_turns)->check(CLI::PositiveNumber);
    run->add_option("--budget", run_args.budget)->check(CLI::Range(std::size_t{256}, std::size_t{1} << 30));
    run->add_option("--token-counter", run_args.token_counter)
        ->check(CLI::IsMember({"chars_div_4", "whitespace_words"}));
    run->add_option("--trace", run_args.trace, "Write the episode trace JSONL here");
    run->add_option("--weights", run_args.weights, "Stage weight JSON");
    run->add_option("--parallel", run_args.parallel)->check(CLI::Range(1, 256));
    run->add_option("--seed", run_args.seed, "Random policy seed");
    run->add_option("--dim", run_args.dim)->check(CLI::Range(8, 1 << 20));

    ScoreArgs score_args;
    auto* score = app.add_subcommand("score", "Re-score a trace offline");
    score->add_option("--trace", score_args.trace)->required();
    score->add_option("--dataset", score_args.dataset)->required();
    score->add_option("--corpus", score_args.corpus, "Also verify supporting doc ids");
    score->add_option("--stage", score_args.stage)->required()->check(CLI::IsMember({1, 2, 3}));
    score->add_option("--weights", score_args.weights, "Stage weight JSON");

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "Write a synthetic corpus and dataset");
    synth->add_option("--docs", synth_args.docs)->check(CLI::Range(4, 1000000));
    synth->add_option("--samples", synth_args.samples);
    synth->add_option("--seed", synth_args.seed);
    synth->add_option("--corpus-out", synth_args.corpus_out)->required();
    synth->add_option("--dataset-out", synth_args.dataset_out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitSetup;
    }

    try {
        if (*index) return cmd_index(index_args);
        if (*serve) return cmd_serve(serve_args);
        if (*run) return cmd_run(run_args);
        if (*score) return cmd_score(score_args);
        if (*synth) return cmd_synth(synth_args);
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitSetup;
    }
    return kExitSetup;
}
