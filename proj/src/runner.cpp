#include "spamzero/runner.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "spamzero/errors.hpp"
#include "spamzero/text.hpp"

namespace spamzero {

using nlohmann::json;
namespace fs = std::filesystem;

std::map<std::string, BackendConfig> builtin_backend_configs() {
    BackendConfig mock;
    mock.backend_id = "mock";
    mock.endpoint_url = "mock";
    mock.model_name = "mock";
    mock.max_completion_tokens = 16;
    mock.api_key_env.clear();
    return {{"mock", mock}};
}

namespace {

BackendConfig backend_from_json(const json& j, const BackendConfig& defaults) {
    BackendConfig cfg = defaults;
    cfg.backend_id = j.value("backend_id", cfg.backend_id);
    cfg.endpoint_url = j.value("endpoint_url", cfg.endpoint_url);
    cfg.model_name = j.value("model_name", cfg.model_name);
    cfg.temperature = j.value("temperature", cfg.temperature);
    cfg.max_completion_tokens = j.value("max_completion_tokens", cfg.max_completion_tokens);
    cfg.timeout_seconds = j.value("timeout_seconds", cfg.timeout_seconds);
    cfg.max_retries = j.value("max_retries", cfg.max_retries);
    cfg.rate_limit_per_minute = j.value("rate_limit_per_minute", cfg.rate_limit_per_minute);
    cfg.api_key_env = j.value("api_key_env", cfg.api_key_env);
    return cfg;
}

}  // namespace

std::map<std::string, BackendConfig> load_backend_configs(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read backend config: " + path.string());
    json j = json::parse(in, nullptr, false, /*ignore_comments=*/true);
    if (j.is_discarded()) throw Error("backend config is not valid JSON: " + path.string());

    auto out = builtin_backend_configs();
    BackendConfig defaults;
    if (j.contains("defaults")) defaults = backend_from_json(j["defaults"], defaults);
    for (const json& b : j.value("backends", json::array())) {
        BackendConfig cfg = backend_from_json(b, defaults);
        if (cfg.backend_id.empty()) throw Error("backend entry without backend_id");
        out[cfg.backend_id] = cfg;
    }
    return out;
}

IngestManifest cmd_ingest(const fs::path& corpus_root, std::ostream& records) {
    IngestManifest m;
    ParseStats stats;
    for (const RawMessage& raw : scan_corpus(corpus_root)) {
        EmailContent e = parse_message(raw, &stats);
        ++m.total;
        ++m.per_category[std::string(category_name(raw.category))];
        if (e.gold_label == GoldLabel::spam) ++m.spam_count;
        else ++m.ham_count;
        json rec{{"id", e.id},
                 {"category", category_name(raw.category)},
                 {"gold_label", label_name(e.gold_label)},
                 {"subject", e.subject},
                 {"body_length", e.body.size()}};
        records << rec.dump() << '\n';
    }
    m.parse_warnings = stats.warnings;
    m.spam_fraction = m.total == 0 ? 0.0
                                   : static_cast<double>(m.spam_count) /
                                         static_cast<double>(m.total);
    return m;
}

std::string derive_run_id(const RunConfig& cfg, const std::string& prompt_digest,
                          const std::string& corpus_digest) {
    std::ostringstream material;
    material << scenario_name(cfg.scenario) << '\x1f';
    for (const auto& b : cfg.backends) material << b << '\x1f';
    material << cfg.summarizer_backend << '\x1f' << cfg.budget << '\x1f'
             << estimator_name(cfg.estimator) << '\x1f'
             << (cfg.limit ? std::to_string(*cfg.limit) : "all") << '\x1f' << cfg.seed << '\x1f'
             << prompt_digest << '\x1f' << corpus_digest;
    return text::sha256_hex(material.str()).substr(0, 12);
}

namespace {

std::vector<EmailContent> load_corpus(const fs::path& root) {
    std::vector<EmailContent> out;
    for (const RawMessage& raw : scan_corpus(root)) {
        out.push_back(parse_message(raw));
    }
    return out;
}

std::vector<EmailContent> sample_corpus(std::vector<EmailContent> corpus,
                                        std::optional<std::size_t> limit, std::uint64_t seed) {
    if (!limit || *limit >= corpus.size()) return corpus;
    std::mt19937_64 rng(seed);
    std::vector<EmailContent> out;
    out.reserve(*limit);
    // std::sample keeps corpus order
    std::sample(corpus.begin(), corpus.end(), std::back_inserter(out), *limit, rng);
    return out;
}

json run_manifest_json(const RunConfig& cfg, const std::string& run_id,
                       const std::string& prompt_digest,
                       const std::vector<EmailContent>& corpus) {
    json emails = json::array();
    for (const auto& e : corpus) {
        emails.push_back({{"id", e.id}, {"gold", label_name(e.gold_label)}});
    }
    return json{{"run_id", run_id},
                {"scenario", scenario_name(cfg.scenario)},
                {"backends", cfg.backends},
                {"summarizer", cfg.summarizer_backend},
                {"budget", cfg.budget},
                {"estimator", estimator_name(cfg.estimator)},
                {"prompt_digest", prompt_digest},
                {"corpus_root", cfg.corpus_root.string()},
                {"concurrency", cfg.concurrency},
                {"limit", cfg.limit ? json(*cfg.limit) : json(nullptr)},
                {"seed", cfg.seed},
                {"emails", emails}};
}

fs::path manifest_path(const fs::path& store_dir, const std::string& run_id) {
    return store_dir / (run_id + ".manifest.json");
}

}  // namespace

RunResult cmd_run(const RunConfig& cfg,
                  const std::map<std::string, BackendConfig>& backend_configs) {
    if (cfg.backends.empty()) throw Error("no classifier backends selected");
    if (cfg.scenario == Scenario::summary && cfg.summarizer_backend.empty()) {
        throw Error("--summarizer is required for the summary scenario");
    }

    const PromptSet prompts =
        cfg.prompt_dir.empty() ? PromptSet::builtin() : PromptSet::load(cfg.prompt_dir);

    std::vector<EmailContent> corpus =
        sample_corpus(load_corpus(cfg.corpus_root), cfg.limit, cfg.seed);
    if (corpus.empty()) throw Error("corpus is empty after sampling");

    std::string corpus_material;
    for (const auto& e : corpus) corpus_material += e.id;
    const std::string run_id = derive_run_id(cfg, prompts.digest(),
                                             text::sha256_hex(corpus_material));

    auto get_cfg = [&](const std::string& id) -> const BackendConfig& {
        auto it = backend_configs.find(id);
        if (it == backend_configs.end()) throw Error("unknown backend: " + id);
        return it->second;
    };

    std::vector<std::unique_ptr<Backend>> owned;
    std::vector<Backend*> classifiers;
    for (const auto& id : cfg.backends) {
        owned.push_back(make_backend(get_cfg(id)));
        classifiers.push_back(owned.back().get());
    }
    Backend* summarizer = nullptr;
    if (cfg.scenario == Scenario::summary) {
        owned.push_back(make_backend(get_cfg(cfg.summarizer_backend)));
        summarizer = owned.back().get();
    }

    CompletionCache cache =
        cfg.cache_dir.empty() ? CompletionCache{} : CompletionCache{cfg.cache_dir};
    RunStore store(cfg.store_dir);

    {
        std::ofstream out(manifest_path(cfg.store_dir, run_id), std::ios::binary | std::ios::trunc);
        out << run_manifest_json(cfg, run_id, prompts.digest(), corpus).dump(2) << '\n';
        if (!out) throw Error("cannot write run manifest under " + cfg.store_dir.string());
    }

    TruncationPolicy policy;
    policy.max_content_tokens = cfg.budget;
    policy.estimator = cfg.estimator;
    PipelineContext ctx{&prompts, policy, &cache};

    RunScenarioOptions options;
    options.run_id = run_id;
    options.scenario = cfg.scenario;
    options.concurrency = cfg.concurrency;
    options.store = &store;

    RunResult result;
    result.run_id = run_id;
    result.sets = run_scenario(corpus, classifiers, summarizer, ctx, options);
    for (const auto& set : result.sets) {
        for (const auto& p : set.predictions) {
            result.usage.prompt_tokens += p.prompt_tokens;
            result.usage.completion_tokens += p.completion_tokens;
            if (!p.cached) ++result.usage.requests;
        }
    }
    return result;
}

std::string cmd_report(const fs::path& store_dir, const std::vector<std::string>& run_ids,
                       ReportFormat format) {
    if (run_ids.empty()) throw EmptyInput("report: no run ids");
    std::vector<MetricsRow> rows;
    RunStore store(store_dir);

    for (const std::string& run_id : run_ids) {
        std::ifstream in(manifest_path(store_dir, run_id), std::ios::binary);
        if (!in) throw UnknownRun("no manifest for run " + run_id);
        json manifest = json::parse(in, nullptr, false);
        if (manifest.is_discarded()) throw UnknownRun("unreadable manifest for run " + run_id);

        const Scenario scenario =
            scenario_from_name(manifest.value("scenario", "raw")).value_or(Scenario::raw);
        std::map<std::string, GoldLabel> gold;
        std::vector<std::string> email_order;
        for (const json& e : manifest.value("emails", json::array())) {
            const std::string id = e.value("id", "");
            gold[id] = label_from_name(e.value("gold", "ham")).value_or(GoldLabel::ham);
            email_order.push_back(id);
        }

        auto records = store.load(run_id);
        for (const json& backend_json : manifest.value("backends", json::array())) {
            const std::string backend_id = backend_json.get<std::string>();
            PredictionSet set;
            set.run_id = run_id;
            set.scenario = scenario;
            set.backend_id = backend_id;
            for (const std::string& id : email_order) {
                auto it = records.find(RunStore::triple_key(id, backend_id, scenario));
                if (it != records.end()) set.predictions.push_back(it->second);
            }
            rows.push_back(metrics_row(set, gold));
        }
    }
    return report(rows, format);
}

}  // namespace spamzero
