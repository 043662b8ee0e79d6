#include "spamzero/pipeline.hpp"

#include <atomic>
#include <cstdio>
#include <ctime>
#include <exception>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include <unistd.h>

#include <json.hpp>

#include "spamzero/errors.hpp"
#include "spamzero/text.hpp"

namespace spamzero {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view scenario_name(Scenario s) {
    return s == Scenario::raw ? "raw" : "summary";
}

std::optional<Scenario> scenario_from_name(std::string_view name) {
    if (name == "raw") return Scenario::raw;
    if (name == "summary") return Scenario::summary;
    return std::nullopt;
}

std::string_view pred_label_name(PredLabel l) {
    switch (l) {
        case PredLabel::spam: return "spam";
        case PredLabel::ham: return "ham";
        case PredLabel::unparseable: return "unparseable";
    }
    return "?";
}

std::optional<PredLabel> pred_label_from_name(std::string_view name) {
    if (name == "spam") return PredLabel::spam;
    if (name == "ham") return PredLabel::ham;
    if (name == "unparseable") return PredLabel::unparseable;
    return std::nullopt;
}

PredLabel parse_label(std::string_view completion_text) {
    for (const std::string& w : text::words(completion_text)) {
        if (w == "spam") return PredLabel::spam;
        if (w == "ham") return PredLabel::ham;
    }
    return PredLabel::unparseable;
}

// ---------------------------------------------------------------------------
// CompletionCache
// ---------------------------------------------------------------------------

CompletionCache::CompletionCache(fs::path dir) : dir_(std::move(dir)) {
    if (!dir_.empty()) fs::create_directories(dir_);
}

std::string CompletionCache::key(const BackendConfig& cfg, const ChatMessages& messages,
                                 int max_completion_tokens) {
    std::string material = cfg.backend_id;
    material.push_back('\x1f');
    material += cfg.model_name;
    material.push_back('\x1f');
    for (const auto& m : messages) {
        material += (m.role == Role::system) ? "system" : "user";
        material.push_back('\x1e');
        material += m.text;
        material.push_back('\x1f');
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g\x1f%d", cfg.temperature, max_completion_tokens);
    material += buf;
    return text::sha256_hex(material);
}

std::optional<CompletionCache::Entry> CompletionCache::get(const std::string& key) const {
    if (!enabled()) return std::nullopt;
    const fs::path p = dir_ / key.substr(0, 2) / key;
    std::ifstream in(p, std::ios::binary);
    if (!in) return std::nullopt;
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) return std::nullopt;
    Entry e;
    e.completion = j.value("completion", "");
    e.prompt_tokens = j.value("prompt_tokens", 0ull);
    e.completion_tokens = j.value("completion_tokens", 0ull);
    return e;
}

void CompletionCache::put(const std::string& key, const Entry& entry) const {
    if (!enabled()) return;
    const fs::path shard = dir_ / key.substr(0, 2);
    fs::create_directories(shard);
    const fs::path final_path = shard / key;
    static std::atomic<std::uint64_t> tmp_seq{0};
    const fs::path tmp = shard / (key + ".tmp." + std::to_string(::getpid()) + "." +
                                  std::to_string(tmp_seq.fetch_add(1)));
    json j{{"completion", entry.completion},
           {"prompt_tokens", entry.prompt_tokens},
           {"completion_tokens", entry.completion_tokens}};
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << j.dump();
    }
    fs::rename(tmp, final_path);
}

// ---------------------------------------------------------------------------
// RunStore
// ---------------------------------------------------------------------------

namespace {

json prediction_to_json(const std::string& run_id, const Prediction& p) {
    json j;
    j["run_id"] = run_id;
    j["email_id"] = p.email_id;
    j["scenario"] = scenario_name(p.scenario);
    j["backend_id"] = p.backend_id;
    j["label"] = pred_label_name(p.label);
    j["raw_completion"] = p.raw_completion;
    if (p.summary_text) j["summary_text"] = *p.summary_text;
    else j["summary_text"] = nullptr;
    j["prompt_tokens"] = p.prompt_tokens;
    j["completion_tokens"] = p.completion_tokens;
    j["cached"] = p.cached;
    j["timestamp"] = static_cast<std::int64_t>(std::time(nullptr));
    return j;
}

Prediction prediction_from_json(const json& j) {
    Prediction p;
    p.email_id = j.value("email_id", "");
    p.scenario = scenario_from_name(j.value("scenario", "raw")).value_or(Scenario::raw);
    p.backend_id = j.value("backend_id", "");
    p.label = pred_label_from_name(j.value("label", "unparseable"))
                  .value_or(PredLabel::unparseable);
    p.raw_completion = j.value("raw_completion", "");
    if (j.contains("summary_text") && !j["summary_text"].is_null()) {
        p.summary_text = j["summary_text"].get<std::string>();
    }
    p.prompt_tokens = j.value("prompt_tokens", 0ull);
    p.completion_tokens = j.value("completion_tokens", 0ull);
    p.cached = j.value("cached", false);
    return p;
}

}  // namespace

RunStore::RunStore(fs::path dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
}

fs::path RunStore::record_path(const std::string& run_id) const {
    return dir_ / (run_id + ".jsonl");
}

std::string RunStore::triple_key(const std::string& email_id, const std::string& backend_id,
                                 Scenario scenario) {
    return email_id + "\x1f" + backend_id + "\x1f" + std::string(scenario_name(scenario));
}

void RunStore::append(const std::string& run_id, const Prediction& p) {
    std::lock_guard lock(mu_);
    std::ofstream out(record_path(run_id), std::ios::binary | std::ios::app);
    if (!out) throw Error("run store is not writable: " + record_path(run_id).string());
    out << prediction_to_json(run_id, p).dump() << '\n';
    out.flush();
    if (!out) throw Error("run store write failed: " + record_path(run_id).string());
}

std::map<std::string, Prediction> RunStore::load(const std::string& run_id) const {
    std::map<std::string, Prediction> out;
    std::ifstream in(record_path(run_id), std::ios::binary);
    if (!in) return out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) continue;  // torn trailing write from an interrupt
        Prediction p = prediction_from_json(j);
        out[triple_key(p.email_id, p.backend_id, p.scenario)] = p;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pipeline steps
// ---------------------------------------------------------------------------

CompletionResult cached_complete(Backend& backend, const ChatMessages& messages,
                                 const CompletionCache* cache,
                                 std::optional<int> max_tokens_override) {
    const int max_tokens = max_tokens_override.value_or(backend.config().max_completion_tokens);
    std::string key;
    if (cache && cache->enabled()) {
        key = CompletionCache::key(backend.config(), messages, max_tokens);
        if (auto hit = cache->get(key)) {
            return {hit->completion, hit->prompt_tokens, hit->completion_tokens, true};
        }
    }
    ChatExchange ex = backend.complete(messages, max_tokens_override);
    if (!key.empty()) {
        cache->put(key, {ex.completion_text, ex.prompt_tokens, ex.completion_tokens});
    }
    return {ex.completion_text, ex.prompt_tokens, ex.completion_tokens, false};
}

Prediction classify_raw(const EmailContent& e, Backend& backend, const PipelineContext& ctx) {
    Prediction p;
    p.email_id = e.id;
    p.scenario = Scenario::raw;
    p.backend_id = backend.config().backend_id;
    try {
        PreparedContent prepared = truncate_body(e, ctx.policy);
        ChatMessages messages = render_raw_classification(prepared, *ctx.prompts);
        CompletionResult res = cached_complete(backend, messages, ctx.cache);
        p.raw_completion = res.text;
        p.label = parse_label(res.text);
        p.prompt_tokens = res.prompt_tokens;
        p.completion_tokens = res.completion_tokens;
        p.cached = res.cached;
    } catch (const AuthError&) {
        throw;
    } catch (const std::exception& ex) {
        p.label = PredLabel::unparseable;
        p.raw_completion = std::string("[error] ") + ex.what();
    }
    return p;
}

CompletionResult summarize(const EmailContent& e, Backend& summarizer,
                           const PipelineContext& ctx) {
    PreparedContent prepared = truncate_body(e, ctx.policy);
    ChatMessages messages = render_summarization(prepared, *ctx.prompts);
    CompletionResult res = cached_complete(summarizer, messages, ctx.cache, 500);
    res.text = sanitize_delimiters(res.text);
    return res;
}

namespace {

Prediction classify_summary_text(const EmailContent& e, const CompletionResult& summary,
                                 Backend& classifier, const PipelineContext& ctx) {
    Prediction p;
    p.email_id = e.id;
    p.scenario = Scenario::summary;
    p.backend_id = classifier.config().backend_id;
    p.summary_text = summary.text;
    try {
        ChatMessages messages = render_summary_classification(summary.text, *ctx.prompts);
        CompletionResult res = cached_complete(classifier, messages, ctx.cache);
        p.raw_completion = res.text;
        p.label = parse_label(res.text);
        p.prompt_tokens = summary.prompt_tokens + res.prompt_tokens;
        p.completion_tokens = summary.completion_tokens + res.completion_tokens;
        p.cached = summary.cached && res.cached;
    } catch (const AuthError&) {
        throw;
    } catch (const std::exception& ex) {
        p.label = PredLabel::unparseable;
        p.raw_completion = std::string("[error] ") + ex.what();
    }
    return p;
}

Prediction failed_summary_prediction(const EmailContent& e, const std::string& backend_id,
                                     const std::string& note) {
    Prediction p;
    p.email_id = e.id;
    p.scenario = Scenario::summary;
    p.backend_id = backend_id;
    p.label = PredLabel::unparseable;
    p.raw_completion = note;
    p.summary_text = std::string{};
    return p;
}

// Bounded-parallelism loop; rethrows the first worker exception.
void parallel_for(std::size_t n, int concurrency, const std::function<void(std::size_t)>& fn) {
    const int workers = std::max(1, std::min<int>(concurrency, static_cast<int>(n)));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mu;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n || failed.load()) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mu);
                    if (!first_error) first_error = std::current_exception();
                    failed.store(true);
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

Prediction classify_from_summary(const EmailContent& e, Backend& summarizer, Backend& classifier,
                                 const PipelineContext& ctx) {
    CompletionResult summary;
    try {
        summary = summarize(e, summarizer, ctx);
    } catch (const AuthError&) {
        throw;
    } catch (const std::exception& ex) {
        return failed_summary_prediction(e, classifier.config().backend_id,
                                         std::string("[error] summarization failed: ") + ex.what());
    }
    return classify_summary_text(e, summary, classifier, ctx);
}

std::vector<PredictionSet> run_scenario(const std::vector<EmailContent>& corpus,
                                        std::vector<Backend*> classifiers, Backend* summarizer,
                                        const PipelineContext& ctx,
                                        const RunScenarioOptions& options) {
    if (corpus.empty()) throw EmptyInput("run_scenario: corpus is empty");
    if (options.scenario == Scenario::summary && summarizer == nullptr) {
        throw Error("summary scenario requires a summarizer backend");
    }

    std::map<std::string, Prediction> resumed;
    if (options.store) resumed = options.store->load(options.run_id);

    PolicySnapshot snapshot{ctx.policy.max_content_tokens,
                            std::string(estimator_name(ctx.policy.estimator)),
                            ctx.prompts->digest()};

    std::vector<PredictionSet> sets;
    sets.reserve(classifiers.size());
    for (Backend* b : classifiers) {
        PredictionSet set;
        set.run_id = options.run_id;
        set.scenario = options.scenario;
        set.backend_id = b->config().backend_id;
        set.predictions.resize(corpus.size());
        set.policy = snapshot;
        sets.push_back(std::move(set));
    }

    auto emit = [&](std::size_t set_idx, std::size_t email_idx, Prediction p, bool was_resumed) {
        if (options.store && !was_resumed) options.store->append(options.run_id, p);
        sets[set_idx].predictions[email_idx] = std::move(p);
    };

    if (options.scenario == Scenario::raw) {
        parallel_for(corpus.size(), options.concurrency, [&](std::size_t i) {
            for (std::size_t bi = 0; bi < classifiers.size(); ++bi) {
                const std::string key = RunStore::triple_key(
                    corpus[i].id, classifiers[bi]->config().backend_id, Scenario::raw);
                if (auto it = resumed.find(key); it != resumed.end()) {
                    emit(bi, i, it->second, true);
                } else {
                    emit(bi, i, classify_raw(corpus[i], *classifiers[bi], ctx), false);
                }
            }
        });
        return sets;
    }

    // Summary scenario: one summarization stage, shared across classifiers.
    std::vector<std::optional<CompletionResult>> summaries(corpus.size());
    std::vector<std::string> summary_errors(corpus.size());
    parallel_for(corpus.size(), options.concurrency, [&](std::size_t i) {
        bool all_resumed = true;
        for (Backend* b : classifiers) {
            if (!resumed.count(RunStore::triple_key(corpus[i].id, b->config().backend_id,
                                                    Scenario::summary))) {
                all_resumed = false;
                break;
            }
        }
        if (all_resumed) return;
        try {
            summaries[i] = summarize(corpus[i], *summarizer, ctx);
        } catch (const AuthError&) {
            throw;
        } catch (const std::exception& ex) {
            summary_errors[i] = std::string("[error] summarization failed: ") + ex.what();
        }
    });

    parallel_for(corpus.size(), options.concurrency, [&](std::size_t i) {
        for (std::size_t bi = 0; bi < classifiers.size(); ++bi) {
            Backend& b = *classifiers[bi];
            const std::string key =
                RunStore::triple_key(corpus[i].id, b.config().backend_id, Scenario::summary);
            if (auto it = resumed.find(key); it != resumed.end()) {
                emit(bi, i, it->second, true);
            } else if (summaries[i]) {
                emit(bi, i, classify_summary_text(corpus[i], *summaries[i], b, ctx), false);
            } else {
                emit(bi, i,
                     failed_summary_prediction(corpus[i], b.config().backend_id,
                                               summary_errors[i]),
                     false);
            }
        }
    });
    return sets;
}

}  // namespace spamzero
