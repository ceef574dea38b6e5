#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "xforge/corpus.hpp"
#include "xforge/diversify.hpp"
#include "xforge/generation.hpp"
#include "xforge/http_backend.hpp"
#include "xforge/judge.hpp"
#include "xforge/log.hpp"
#include "xforge/mock_backends.hpp"
#include "xforge/pipeline.hpp"
#include "xforge/refinement.hpp"
#include "xforge/review.hpp"
#include "xforge/review_server.hpp"
#include "xforge/seed.hpp"
#include "xforge/stats.hpp"
#include "xforge/synthetic.hpp"

namespace fs = std::filesystem;
using namespace xforge;

namespace {

struct BackendArgs {
    std::string config;
    bool mock = false;
};

void add_backend_flags(CLI::App* cmd, BackendArgs& args) {
    cmd->add_option("--config", args.config, "Pipeline config whose backends and roles to use");
    cmd->add_flag("--mock-backends", args.mock, "Use the deterministic in-process mock stack");
}

struct Backends {
    backends::Registry registry;
    pipeline::PipelineConfig config;
};

Backends make_backends(const BackendArgs& args) {
    Backends b;
    if (!args.config.empty()) b.config = pipeline::load_config(args.config);
    if (args.mock) {
        pipeline::use_mock_roles(b.config);
        b.registry = mock::make_mock_registry();
        return b;
    }
    if (args.config.empty()) throw backends::ConfigurationError("either --config or --mock-backends is required");
    std::shared_ptr<backends::ResponseCache> cache;
    if (b.config.response_cache) cache = std::make_shared<backends::ResponseCache>(*b.config.response_cache);
    b.registry = backends::build_http_registry(b.config.backends, cache);
    return b;
}

std::string pick(const std::string& explicit_name, const std::string& role) {
    return explicit_name.empty() ? role : explicit_name;
}

review::ReviewServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"xforge: mine cross-lingual instruction data from web text"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Debug logging");

    // ingest ---------------------------------------------------------------
    auto* ingest = app.add_subcommand("ingest", "Filter a line-delimited {text, url} corpus");
    std::string lang_arg = "sw", in_path, out_path;
    std::size_t limit = 1000000, len_min = 64, len_max = 2048;
    ingest->add_option("--lang", lang_arg)->required();
    ingest->add_option("--input", in_path)->required();
    ingest->add_option("--out", out_path)->required();
    ingest->add_option("--limit", limit);
    ingest->add_option("--min-chars", len_min);
    ingest->add_option("--max-chars", len_max);

    // seed -----------------------------------------------------------------
    auto* seed_cmd = app.add_subcommand("seed", "Build and split seed data");
    seed_cmd->require_subcommand(1);
    auto* seed_build = seed_cmd->add_subcommand("build", "Merge native turns and translated pairs");
    std::string native_path, translated_path;
    seed_build->add_option("--lang", lang_arg)->required();
    seed_build->add_option("--native", native_path);
    seed_build->add_option("--translated", translated_path);
    seed_build->add_option("--out", out_path)->required();

    auto* seed_split = seed_cmd->add_subcommand("split", "Split seed into tuning and rating-source sets");
    std::size_t tuning_size = 2500;
    std::uint64_t rng_seed = 0;
    std::string tuning_out, rating_out;
    seed_split->add_option("--input", in_path)->required();
    seed_split->add_option("--tuning-size", tuning_size);
    seed_split->add_option("--seed", rng_seed);
    seed_split->add_option("--tuning-out", tuning_out)->required();
    seed_split->add_option("--rating-out", rating_out)->required();

    // gen ------------------------------------------------------------------
    auto* gen = app.add_subcommand("gen", "Instruction generation");
    gen->require_subcommand(1);
    auto* gen_export = gen->add_subcommand("export-train", "Write instruction-generator training data");
    gen_export->add_option("--seed-file", in_path)->required();
    gen_export->add_option("--out", out_path)->required();

    auto* gen_cands = gen->add_subcommand("candidates", "Generate candidate instructions for documents");
    BackendArgs gen_backends;
    std::string backend_name;
    std::size_t workers = 4;
    gen_cands->add_option("--docs", in_path)->required();
    gen_cands->add_option("--out", out_path)->required();
    gen_cands->add_option("--backend", backend_name, "Generator backend (default: config role)");
    gen_cands->add_option("--workers", workers);
    add_backend_flags(gen_cands, gen_backends);

    // refine ---------------------------------------------------------------
    auto* refine = app.add_subcommand("refine", "Iterative evaluator-based refinement");
    refine->require_subcommand(1);
    auto* refine_run = refine->add_subcommand("run", "Run or resume the refinement loop");
    BackendArgs refine_backends;
    std::string docs_path, cands_path, run_dir;
    int iterations = 3;
    std::size_t promotion_cap = 200000;
    refine_run->add_option("--docs", docs_path)->required();
    refine_run->add_option("--candidates", cands_path)->required();
    refine_run->add_option("--tuning", tuning_out)->required();
    refine_run->add_option("--rating", rating_out)->required();
    refine_run->add_option("--run-dir", run_dir)->required();
    refine_run->add_option("--out", out_path, "Promoted samples of the last iteration")->required();
    refine_run->add_option("--iterations", iterations);
    refine_run->add_option("--promotion-cap", promotion_cap);
    refine_run->add_option("--seed", rng_seed);
    refine_run->add_option("--workers", workers);
    add_backend_flags(refine_run, refine_backends);

    // diversify ------------------------------------------------------------
    auto* div = app.add_subcommand("diversify", "Cluster instructions and sample evenly per cluster");
    BackendArgs div_backends;
    std::size_t k = 1000, total = 32000, restarts = 1;
    std::string cache_path;
    bool normalize = false;
    div->add_option("--input", in_path)->required();
    div->add_option("--out", out_path)->required();
    div->add_option("--k", k);
    div->add_option("--total", total);
    div->add_option("--seed", rng_seed);
    div->add_option("--restarts", restarts);
    div->add_option("--cache", cache_path, "Embedding cache file");
    div->add_option("--backend", backend_name, "Embedding backend (default: config role)");
    div->add_flag("--normalize", normalize, "L2-normalise embeddings before clustering");
    add_backend_flags(div, div_backends);

    // judge ----------------------------------------------------------------
    auto* judge_cmd = app.add_subcommand("judge", "Pairwise judge evaluation");
    judge_cmd->require_subcommand(1);
    auto* judge_run = judge_cmd->add_subcommand("run", "Judge two response files in both orders");
    BackendArgs judge_backends;
    std::string prompts_path, a_path, b_path;
    bool strict = false;
    judge_run->add_option("--prompts", prompts_path)->required();
    judge_run->add_option("--a", a_path, "Subject model responses {prompt_id, response}")->required();
    judge_run->add_option("--b", b_path, "Baseline model responses")->required();
    judge_run->add_option("--out", out_path, "Verdicts file")->required();
    judge_run->add_option("--judge", backend_name)->required();
    judge_run->add_option("--workers", workers);
    judge_run->add_flag("--strict", strict, "Only accept the bare 'x y' score line");
    add_backend_flags(judge_run, judge_backends);

    auto* judge_report = judge_cmd->add_subcommand("report", "Aggregate verdicts into W/S reports");
    std::vector<std::string> report_specs;
    std::string report_json;
    judge_report->add_option("--prompts", prompts_path)->required();
    judge_report
        ->add_option("--verdicts", report_specs, "model:lang:path, one per report cell")
        ->required();
    judge_report->add_option("--json", report_json, "Write the machine-readable report here");

    // stats ----------------------------------------------------------------
    auto* stats_cmd = app.add_subcommand("stats", "Length and verb-noun statistics");
    std::size_t review_per_lang = 0;
    std::string review_out;
    stats_cmd->add_option("--input", in_path)->required();
    stats_cmd->add_option("--out", out_path, "Machine-readable stats file")->required();
    stats_cmd->add_option("--review-per-lang", review_per_lang, "Also draw this many review tasks per language");
    stats_cmd->add_option("--review-out", review_out);
    stats_cmd->add_option("--seed", rng_seed);

    // serve ----------------------------------------------------------------
    auto* serve = app.add_subcommand("serve", "Serve human-review tasks over HTTP");
    int port = 8080;
    std::string host = "127.0.0.1", tasks_path, log_path, static_dir;
    std::vector<std::string> annotators;
    serve->add_option("--port", port);
    serve->add_option("--host", host);
    serve->add_option("--tasks", tasks_path)->required();
    serve->add_option("--annotations", log_path, "Annotation log (default: <tasks>.annotations.jsonl)");
    serve->add_option("--annotators", annotators, "Registered annotator ids")->required()->delimiter(',');
    serve->add_option("--static", static_dir, "Directory of UI assets to serve under /");

    // run ------------------------------------------------------------------
    auto* run = app.add_subcommand("run", "Run every stage end to end");
    BackendArgs run_backends;
    run->add_option("--config", run_backends.config)->required();
    run->add_flag("--mock-backends", run_backends.mock);

    // synth ----------------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "Write a synthetic corpus and seed fixture");
    std::string synth_dir;
    std::size_t n_docs = 1000, n_native = 60, n_translated = 60;
    synth->add_option("--out-dir", synth_dir)->required();
    synth->add_option("--lang", lang_arg);
    synth->add_option("--docs", n_docs);
    synth->add_option("--native", n_native);
    synth->add_option("--translated", n_translated);
    synth->add_option("--seed", rng_seed);

    CLI11_PARSE(app, argc, argv);
    if (verbose) log::set_level(log::Level::debug);

    try {
        if (ingest->parsed()) {
            const auto r = corpus::ingest(fs::path(in_path), LanguageCode(lang_arg), limit,
                                          corpus::LengthBounds{len_min, len_max});
            corpus::write_documents(out_path, r.documents);
            std::cout << json(r.stats).dump(2) << "\n";
        } else if (seed_build->parsed()) {
            std::vector<seed::NativeTurn> native;
            std::vector<seed::TranslatedPair> translated;
            if (!native_path.empty()) native = seed::load_native(native_path);
            if (!translated_path.empty()) translated = seed::load_translated(translated_path);
            const auto built = seed::build_seed(native, translated, LanguageCode(lang_arg));
            write_samples(out_path, built.samples);
            std::cout << "seed samples: " << built.samples.size()
                      << " (skipped native turns: " << built.skipped_native << ")\n";
        } else if (seed_split->parsed()) {
            const auto split = seed::split_seed(load_samples(in_path), tuning_size, rng_seed);
            write_samples(tuning_out, split.tuning);
            write_samples(rating_out, split.rating_source);
            std::cout << "tuning: " << split.tuning.size() << ", rating source: " << split.rating_source.size()
                      << "\n";
        } else if (gen_export->parsed()) {
            const auto records = generation::export_generator_train(load_samples(in_path));
            generation::write_records(out_path, records);
            std::cout << "records: " << records.size() << "\n";
        } else if (gen_cands->parsed()) {
            auto b = make_backends(gen_backends);
            generation::GenerationOptions opts;
            opts.sampling = b.config.sampling;
            opts.workers = workers;
            const auto docs = corpus::load_documents(in_path);
            const auto r = generation::generate_candidates(
                docs, *b.registry.chat(pick(backend_name, b.config.roles.generator)), opts);
            generation::write_candidates(out_path, r.candidates);
            std::cout << "candidates: " << r.candidates.size() << ", dropped: " << r.dropped.size() << "\n";
        } else if (refine_run->parsed()) {
            auto b = make_backends(refine_backends);
            const auto docs = corpus::load_documents(docs_path);
            refinement::RefinementConfig rc;
            rc.iterations = iterations;
            rc.promotion_cap = promotion_cap;
            rc.rng_seed = rng_seed;
            rc.workers = workers;
            rc.synthesis.workers = workers;
            refinement::IterationModels models;
            models.evaluator = [&](int it) -> std::shared_ptr<backends::ChatClient> {
                const auto name = pipeline::role_for_iteration(b.config.roles.evaluator, it);
                return b.registry.has_chat(name) ? b.registry.chat(name) : nullptr;
            };
            models.follower = [&](int it) -> std::shared_ptr<backends::ChatClient> {
                if (b.config.roles.follower.empty()) return nullptr;
                const auto name = pipeline::role_for_iteration(b.config.roles.follower, it);
                return b.registry.has_chat(name) ? b.registry.chat(name) : nullptr;
            };
            const auto r = refinement::run_refinement(docs, generation::load_candidates(cands_path),
                                                      load_samples(tuning_out), load_samples(rating_out), rc,
                                                      models, fs::path(run_dir));
            if (r.status == refinement::RunStatus::paused) {
                std::cout << "paused: iteration " << r.paused_at << " needs its evaluator; see " << run_dir
                          << "/it" << r.paused_at << "/evaluator_train.jsonl\n";
                return 3;
            }
            write_samples(out_path, r.promoted());
            for (const auto& it : r.iterations) std::cout << json(it).dump() << "\n";
        } else if (div->parsed()) {
            auto b = make_backends(div_backends);
            diversify::DiversifyOptions opts;
            opts.k = k;
            opts.total = total;
            opts.rng_seed = rng_seed;
            opts.normalize = normalize;
            opts.kmeans.restarts = restarts;
            diversify::EmbeddingCache cache =
                cache_path.empty() ? diversify::EmbeddingCache() : diversify::EmbeddingCache(cache_path);
            const auto r = diversify::diversify(load_samples(in_path),
                                                *b.registry.embedding(pick(backend_name, b.config.roles.embedder)),
                                                cache, opts);
            write_samples(out_path, r.selected);
            std::cout << "selected: " << r.selected.size() << " from " << k << " clusters, inertia "
                      << r.model.inertia << "\n";
        } else if (judge_run->parsed()) {
            auto b = make_backends(judge_backends);
            judge::JudgeOptions opts;
            opts.strict = strict;
            opts.workers = workers;
            const auto r = judge::judge_all(judge::load_prompts(prompts_path), judge::load_responses(a_path),
                                            judge::load_responses(b_path), *b.registry.chat(backend_name), opts);
            write_jsonl(out_path, to_json_records(r.verdicts));
            std::cout << "verdicts: " << r.verdicts.size() << ", failed: " << r.failures.size()
                      << ", unmatched: " << r.unmatched.size() << "\n";
            if (!r.failures.empty()) return 2;
        } else if (judge_report->parsed()) {
            std::unordered_map<std::string, judge::EvalPrompt> prompts;
            for (auto& p : judge::load_prompts(prompts_path)) prompts.emplace(p.id, p);
            std::vector<judge::ReportCell> cells;
            json out = json::array();
            for (const auto& spec : report_specs) {
                const auto a = spec.find(':');
                const auto bpos = a == std::string::npos ? a : spec.find(':', a + 1);
                if (bpos == std::string::npos) throw std::invalid_argument("--verdicts expects model:lang:path");
                judge::ReportCell cell{spec.substr(0, a), LanguageCode(spec.substr(a + 1, bpos - a - 1)), {}};
                cell.report = judge::aggregate(from_json_records<judge::JudgeVerdict>(load_jsonl(spec.substr(bpos + 1))),
                                               prompts);
                out.push_back({{"model", cell.model}, {"lang", cell.lang}, {"report", cell.report}});
                cells.push_back(std::move(cell));
            }
            std::cout << judge::format_ws_table(cells);
            if (!report_json.empty()) write_json(report_json, out);
        } else if (stats_cmd->parsed()) {
            const auto samples = load_samples(in_path);
            std::vector<std::string> instructions;
            for (const auto& s : samples) instructions.push_back(s.instruction_en);
            write_json(out_path, stats::stats_document(samples, stats::verb_noun_stats(instructions)));
            std::cout << stats::format_length_table(stats::per_language(samples));
            if (review_per_lang > 0) {
                if (review_out.empty()) throw std::invalid_argument("--review-per-lang needs --review-out");
                const auto tasks = stats::review_sample(samples, review_per_lang, rng_seed);
                review::write_tasks(review_out, tasks);
                std::cout << "review tasks: " << tasks.size() << "\n";
            }
        } else if (serve->parsed()) {
            if (log_path.empty()) log_path = tasks_path + ".annotations.jsonl";
            auto store = review::ReviewStore::open(tasks_path, log_path);
            for (const auto& a : annotators) store->register_annotator(a);
            std::optional<fs::path> assets;
            if (!static_dir.empty()) assets = static_dir;
            review::ReviewServer server(*store, assets);
            const int bound = server.bind(host, port);
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cout << "serving " << store->task_count() << " tasks on http://" << host << ":" << bound << "\n"
                      << std::flush;
            server.run();
            g_server = nullptr;
        } else if (run->parsed()) {
            auto b = make_backends(run_backends);
            const auto m = pipeline::run_all(b.config, b.registry);
            json j = m;
            std::cout << j.dump(2) << "\n";
            if (m.status == pipeline::StageStatus::paused) return 3;
            if (m.status == pipeline::StageStatus::failed) return 2;
        } else if (synth->parsed()) {
            synthetic::CorpusOptions opts;
            opts.documents = n_docs;
            const auto paths = synthetic::write_fixture(synth_dir, LanguageCode(lang_arg), opts, n_native,
                                                        n_translated, rng_seed);
            std::cout << paths.corpus.string() << "\n" << paths.native.string() << "\n"
                      << paths.translated.string() << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "xforge: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
