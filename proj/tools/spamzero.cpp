#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "spamzero/errors.hpp"
#include "spamzero/runner.hpp"

namespace {

using namespace spamzero;
using nlohmann::json;

void write_output(const std::string& content, const std::string& out_path) {
    if (out_path.empty() || out_path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write output file: " + out_path);
    out << content;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Zero-shot spam email classification harness"};
    app.require_subcommand(1);

    // ingest
    std::string ingest_corpus, ingest_records_out, ingest_manifest_out;
    auto* ingest = app.add_subcommand("ingest", "Scan a SpamAssassin corpus tree");
    ingest->add_option("--corpus", ingest_corpus, "corpus root directory")->required();
    ingest->add_option("--out", ingest_records_out, "record stream path (default stdout)");
    ingest->add_option("--manifest", ingest_manifest_out, "manifest path (default stderr)");

    // run
    RunConfig run_cfg;
    std::string run_corpus, run_scenario_name = "raw", run_summarizer, run_estimator =
        "chars_div_4";
    std::string run_cache_dir, run_store_dir = "runs", run_prompt_dir, run_backend_config;
    std::vector<std::string> run_backends;
    std::size_t run_limit = 0;
    auto* run = app.add_subcommand("run", "Execute a classification scenario");
    run->add_option("--corpus", run_corpus, "corpus root directory")->required();
    run->add_option("--scenario", run_scenario_name, "raw|summary (default raw)");
    run->add_option("--backend", run_backends, "classifier backend id (repeatable)")->required();
    run->add_option("--summarizer", run_summarizer, "summarizer backend id (summary scenario)");
    run->add_option("--budget", run_cfg.budget, "content token budget (default 512)");
    run->add_option("--estimator", run_estimator,
                    "chars_div_4|whitespace_words (default chars_div_4)");
    run->add_option("--concurrency", run_cfg.concurrency, "parallel emails (default 4)");
    run->add_option("--cache-dir", run_cache_dir, "completion cache directory");
    run->add_option("--store-dir", run_store_dir, "run store directory (default runs)");
    run->add_option("--prompt-dir", run_prompt_dir, "prompt template directory override");
    run->add_option("--limit", run_limit, "sample size (default: whole corpus)");
    run->add_option("--seed", run_cfg.seed, "sampling seed (default 0)");
    run->add_option("--config", run_backend_config, "backend config JSON file");

    // report
    std::vector<std::string> report_runs;
    std::string report_store_dir = "runs", report_format = "md", report_out;
    auto* rep = app.add_subcommand("report", "Render metric tables for stored runs");
    rep->add_option("--run", report_runs, "run id (repeatable)")->required();
    rep->add_option("--store-dir", report_store_dir, "run store directory (default runs)");
    rep->add_option("--format", report_format, "md|csv|jsonl (default md)");
    rep->add_option("--out", report_out, "output path (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) {
            std::ostringstream records;
            IngestManifest m = cmd_ingest(ingest_corpus, records);
            write_output(records.str(), ingest_records_out);
            json mj{{"total", m.total},
                    {"per_category", m.per_category},
                    {"spam_count", m.spam_count},
                    {"ham_count", m.ham_count},
                    {"spam_fraction", m.spam_fraction},
                    {"parse_warnings", m.parse_warnings}};
            if (ingest_manifest_out.empty()) std::cerr << mj.dump(2) << '\n';
            else write_output(mj.dump(2) + "\n", ingest_manifest_out);
        } else if (*run) {
            run_cfg.corpus_root = run_corpus;
            auto scenario = scenario_from_name(run_scenario_name);
            if (!scenario) throw Error("unknown scenario: " + run_scenario_name);
            run_cfg.scenario = *scenario;
            auto estimator = estimator_from_name(run_estimator);
            if (!estimator) throw Error("unknown estimator: " + run_estimator);
            run_cfg.estimator = *estimator;
            run_cfg.backends = run_backends;
            run_cfg.summarizer_backend = run_summarizer;
            run_cfg.cache_dir = run_cache_dir;
            run_cfg.store_dir = run_store_dir;
            run_cfg.prompt_dir = run_prompt_dir;
            if (run_limit > 0) run_cfg.limit = run_limit;

            auto configs = run_backend_config.empty() ? builtin_backend_configs()
                                                      : load_backend_configs(run_backend_config);
            RunResult result = cmd_run(run_cfg, configs);
            std::cout << "run_id: " << result.run_id << '\n'
                      << "requests: " << result.usage.requests << '\n'
                      << "prompt_tokens: " << result.usage.prompt_tokens << '\n'
                      << "completion_tokens: " << result.usage.completion_tokens << '\n';
        } else if (*rep) {
            auto format = report_format_from_name(report_format);
            if (!format) throw Error("unknown format: " + report_format);
            write_output(cmd_report(report_store_dir, report_runs, *format), report_out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
