#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "spamzero/backend.hpp"
#include "spamzero/content_prep.hpp"
#include "spamzero/corpus.hpp"
#include "spamzero/prompts.hpp"

namespace spamzero {

enum class Scenario { raw, summary };
enum class PredLabel { spam, ham, unparseable };

std::string_view scenario_name(Scenario s);
std::optional<Scenario> scenario_from_name(std::string_view name);
std::string_view pred_label_name(PredLabel l);
std::optional<PredLabel> pred_label_from_name(std::string_view name);

/// First standalone "spam" or "ham" word wins; anything else is
/// unparseable. Total: never throws.
PredLabel parse_label(std::string_view completion_text);

struct Prediction {
    std::string email_id;
    Scenario scenario = Scenario::raw;
    std::string backend_id;
    PredLabel label = PredLabel::unparseable;
    std::string raw_completion;
    std::optional<std::string> summary_text;
    std::uint64_t prompt_tokens = 0;
    std::uint64_t completion_tokens = 0;
    bool cached = false;
};

struct PolicySnapshot {
    std::size_t budget = 0;
    std::string estimator;
    std::string prompt_digest;
};

struct PredictionSet {
    std::string run_id;
    Scenario scenario = Scenario::raw;
    std::string backend_id;
    std::vector<Prediction> predictions;  // corpus order
    PolicySnapshot policy;
};

/// Content-addressed completion store: <dir>/<first2ofdigest>/<digest>,
/// written via temp-file rename. Disabled when constructed with an empty
/// path.
class CompletionCache {
public:
    struct Entry {
        std::string completion;
        std::uint64_t prompt_tokens = 0;
        std::uint64_t completion_tokens = 0;
    };

    CompletionCache() = default;
    explicit CompletionCache(std::filesystem::path dir);

    bool enabled() const { return !dir_.empty(); }
    std::optional<Entry> get(const std::string& key) const;
    void put(const std::string& key, const Entry& entry) const;

    /// Digest over everything that determines the model's output.
    static std::string key(const BackendConfig& cfg, const ChatMessages& messages,
                           int max_completion_tokens);

private:
    std::filesystem::path dir_;
};

/// Append-only JSONL store, one object per Prediction. Appends are
/// serialized and flushed per record so an interrupted run can resume.
class RunStore {
public:
    explicit RunStore(std::filesystem::path dir);

    std::filesystem::path record_path(const std::string& run_id) const;
    void append(const std::string& run_id, const Prediction& p);

    /// Previously persisted predictions for a run, keyed by
    /// (email_id, backend_id, scenario).
    std::map<std::string, Prediction> load(const std::string& run_id) const;

    static std::string triple_key(const std::string& email_id, const std::string& backend_id,
                                  Scenario scenario);

private:
    std::filesystem::path dir_;
    std::mutex mu_;
};

struct PipelineContext {
    const PromptSet* prompts = nullptr;
    TruncationPolicy policy;
    const CompletionCache* cache = nullptr;
};

struct CompletionResult {
    std::string text;
    std::uint64_t prompt_tokens = 0;
    std::uint64_t completion_tokens = 0;
    bool cached = false;
};

CompletionResult cached_complete(Backend& backend, const ChatMessages& messages,
                                 const CompletionCache* cache,
                                 std::optional<int> max_tokens_override = std::nullopt);

Prediction classify_raw(const EmailContent& e, Backend& backend, const PipelineContext& ctx);

/// Stage 1 of the summary scenario. Completion budget is pinned at 500
/// tokens; the result is delimiter-sanitized before reuse.
CompletionResult summarize(const EmailContent& e, Backend& summarizer,
                           const PipelineContext& ctx);

Prediction classify_from_summary(const EmailContent& e, Backend& summarizer, Backend& classifier,
                                 const PipelineContext& ctx);

struct RunScenarioOptions {
    std::string run_id;
    Scenario scenario = Scenario::raw;
    int concurrency = 4;
    RunStore* store = nullptr;  // optional persistence
};

/// Runs one scenario over the corpus for every classifier backend.
/// Summaries are produced once per email and shared across classifiers.
/// Backend failures degrade to unparseable predictions; AuthError and
/// store I/O failures abort.
std::vector<PredictionSet> run_scenario(const std::vector<EmailContent>& corpus,
                                        std::vector<Backend*> classifiers, Backend* summarizer,
                                        const PipelineContext& ctx,
                                        const RunScenarioOptions& options);

}  // namespace spamzero
