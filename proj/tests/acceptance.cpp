// Acceptance suite: one criterion per test case, one printed verdict line
// each. Criteria needing external resources (the real SpamAssassin
// snapshot, a live remote backend) report SKIPPED when the resource is
// not configured.

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <unistd.h>

#include "spamzero/backend.hpp"
#include "spamzero/content_prep.hpp"
#include "spamzero/corpus.hpp"
#include "spamzero/metrics.hpp"
#include "spamzero/pipeline.hpp"
#include "spamzero/runner.hpp"
#include "spamzero/text.hpp"

using namespace spamzero;
namespace fs = std::filesystem;

namespace {

const fs::path kSyntheticCorpus = fs::path(SPAMZERO_TEST_DATA_DIR) / "synthetic_corpus";

struct Verdict {
    const char* name;
    bool failed = true;
    ~Verdict() { std::printf("[acceptance] %s: %s\n", name, failed ? "FAIL" : "PASS"); }
    void pass() { failed = false; }
};

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() /
               ("spamzero_accept_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

// ---------------------------------------------------------------------------
// Independent brute-force oracle for the mock keyword rule (criterion 3).
// Reads the raw fixture files directly; shares no code with the pipeline.
// ---------------------------------------------------------------------------

struct BruteForceMetrics {
    double ac, ba, pr, re, f1;
    std::uint64_t tp, fp, tn, fn;
};

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

bool brute_force_is_spam_prediction(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string content = lower(buf.str());
    for (const char* kw : {"viagra", "winner", "free money", "click here", "unsubscribe now"}) {
        if (content.find(kw) != std::string::npos) return true;
    }
    return false;
}

BruteForceMetrics brute_force_counts(const fs::path& corpus_root) {
    BruteForceMetrics m{};
    for (const auto& [dir, gold_spam] :
         {std::pair{corpus_root / "spam", true}, std::pair{corpus_root / "easy_ham", false}}) {
        for (const auto& entry : fs::directory_iterator(dir)) {
            const bool pred_spam = brute_force_is_spam_prediction(entry.path());
            if (gold_spam && pred_spam) ++m.tp;
            else if (gold_spam) ++m.fn;
            else if (pred_spam) ++m.fp;
            else ++m.tn;
        }
    }
    const double tp = static_cast<double>(m.tp), fp = static_cast<double>(m.fp);
    const double tn = static_cast<double>(m.tn), fn = static_cast<double>(m.fn);
    m.ac = (tp + tn) / (tp + tn + fp + fn);
    m.ba = 0.5 * (tp / (tp + fn) + tn / (tn + fp));
    m.pr = tp / (tp + fp);
    m.re = tp / (tp + fn);
    m.f1 = 2.0 * m.pr * m.re / (m.pr + m.re);
    return m;
}

RunConfig synthetic_run_config(const fs::path& cache_dir, const fs::path& store_dir) {
    RunConfig cfg;
    cfg.corpus_root = kSyntheticCorpus;
    cfg.scenario = Scenario::raw;
    cfg.backends = {"mock"};
    cfg.cache_dir = cache_dir;
    cfg.store_dir = store_dir;
    cfg.concurrency = 4;
    return cfg;
}

}  // namespace

TEST_CASE("criterion 1: F1 identity against the published table rows") {
    Verdict v{"criterion 1 (F1 identity, 6 published rows)"};
    struct Row {
        double pr, re, f1;
    };
    // Tables 3 and 4: (PR, RE, F1) per model, raw then summary scenario.
    const Row rows[] = {
        {0.645353, 0.970063, 0.775073}, {0.794055, 0.982143, 0.878140},
        {0.904357, 0.893908, 0.899102}, {0.856190, 0.947313, 0.899450},
        {0.979248, 0.919916, 0.948655}, {0.984798, 0.785037, 0.873644},
    };
    for (const Row& r : rows) {
        REQUIRE(std::abs(f1(r.pr, r.re) - r.f1) < 5e-6);
    }
    v.pass();
}

TEST_CASE("criterion 2: corpus fidelity on the real SpamAssassin snapshot") {
    const char* root = std::getenv("SPAMASSASSIN_ROOT");
    if (!root || !*root) {
        std::printf("[acceptance] criterion 2 (corpus fidelity): SKIPPED — set "
                    "SPAMASSASSIN_ROOT to the 2003/2005 snapshot directory\n");
        return;
    }
    Verdict v{"criterion 2 (corpus fidelity: 6,047 messages, ~31% spam)"};
    std::ostringstream records;
    IngestManifest m = cmd_ingest(root, records);
    REQUIRE(m.total == 6047);
    REQUIRE(m.spam_fraction == doctest::Approx(0.31).epsilon(0.0323));  // 0.31 +/- 0.01
    REQUIRE(std::abs(m.spam_fraction - 0.31) <= 0.01);
    v.pass();
}

TEST_CASE("criterion 3: mock-run metrics equal the brute-force oracle exactly") {
    Verdict v{"criterion 3 (oracle equivalence on the 60-email corpus)"};
    const BruteForceMetrics expected = brute_force_counts(kSyntheticCorpus);
    REQUIRE(expected.tp + expected.fp + expected.tn + expected.fn == 60);
    REQUIRE(expected.fp > 0);  // the fixture exercises every matrix cell
    REQUIRE(expected.fn > 0);

    TempDir cache("c3_cache");
    TempDir store("c3_store");
    RunResult result = cmd_run(synthetic_run_config(cache.path, store.path),
                               builtin_backend_configs());
    REQUIRE(result.sets.size() == 1);
    REQUIRE(result.sets[0].predictions.size() == 60);

    std::map<std::string, GoldLabel> gold;
    for (const RawMessage& raw : scan_corpus(kSyntheticCorpus)) {
        EmailContent e = parse_message(raw);
        gold[e.id] = e.gold_label;
    }
    const ConfusionMatrix m = confusion(result.sets[0], gold);
    REQUIRE(m.tp == expected.tp);
    REQUIRE(m.fp == expected.fp);
    REQUIRE(m.tn == expected.tn);
    REQUIRE(m.fn == expected.fn);
    REQUIRE(m.unparseable_count == 0);

    const MetricsRow row = metrics_row(result.sets[0], gold);
    REQUIRE(*row.ac == expected.ac);
    REQUIRE(*row.ba == expected.ba);
    REQUIRE(*row.pr == expected.pr);
    REQUIRE(*row.re == expected.re);
    REQUIRE(*row.f1 == expected.f1);
    v.pass();
}

TEST_CASE("criterion 4: the summary stage loses keywords beyond its window") {
    Verdict v{"criterion 4 (two-stage information flow flips raw spam to summary ham)"};
    EmailContent fixture{
        "flip-fixture", "Quarterly savings notice",
        "Greetings valued member. Your account statement is ready. "
        "Check the attached totals. For bonus free money click here today. Goodbye.",
        GoldLabel::spam};

    const PromptSet prompts = PromptSet::builtin();
    PipelineContext ctx;
    ctx.prompts = &prompts;

    BackendConfig cfg;
    cfg.backend_id = "mock";
    cfg.endpoint_url = "mock";
    cfg.model_name = "mock";
    MockBackend backend(cfg);

    Prediction raw = classify_raw(fixture, backend, ctx);
    REQUIRE(raw.label == PredLabel::spam);

    Prediction summary = classify_from_summary(fixture, backend, backend, ctx);
    REQUIRE(summary.label == PredLabel::ham);
    REQUIRE(summary.summary_text.has_value());
    REQUIRE(summary.summary_text->find("free money") == std::string::npos);
    v.pass();
}

TEST_CASE("criterion 5: warm-cache rerun makes zero backend calls, identical report") {
    Verdict v{"criterion 5 (determinism and cache replay)"};
    TempDir cache("c5_cache");
    TempDir store1("c5_store1");
    TempDir store2("c5_store2");

    RunResult first = cmd_run(synthetic_run_config(cache.path, store1.path),
                              builtin_backend_configs());
    REQUIRE(first.usage.requests == 60);

    RunResult second = cmd_run(synthetic_run_config(cache.path, store2.path),
                               builtin_backend_configs());
    REQUIRE(second.usage.requests == 0);  // every completion replayed from cache
    REQUIRE(second.run_id == first.run_id);

    const std::string report1 = cmd_report(store1.path, {first.run_id}, ReportFormat::markdown);
    const std::string report2 = cmd_report(store2.path, {second.run_id}, ReportFormat::markdown);
    REQUIRE(report1 == report2);
    REQUIRE(!report1.empty());

    for (std::size_t i = 0; i < first.sets[0].predictions.size(); ++i) {
        const Prediction& a = first.sets[0].predictions[i];
        const Prediction& b = second.sets[0].predictions[i];
        REQUIRE(a.label == b.label);
        REQUIRE(a.raw_completion == b.raw_completion);
        REQUIRE(b.cached);
    }
    v.pass();
}

// ---------------------------------------------------------------------------
// Criterion 6: property suites, >= 200 random cases each.
// ---------------------------------------------------------------------------

namespace {

std::string random_text(std::mt19937_64& rng, std::size_t max_len) {
    static const std::string alphabet =
        "abcdefghijklmnopqrstuvwxyz ABCDE #\n\t.!?-##—é日";
    std::uniform_int_distribution<std::size_t> len_dist(0, max_len);
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    std::string raw;
    const std::size_t len = len_dist(rng);
    for (std::size_t i = 0; i < len; ++i) raw.push_back(alphabet[pick(rng)]);
    // picking bytes can tear multi-byte chars; keep only valid prefixes of
    // the multi-byte alphabet entries by appending them whole sometimes
    if (len_dist(rng) % 3 == 0) raw += "é日—";
    return raw;
}

EmailContent random_email(std::mt19937_64& rng) {
    return EmailContent{"prop", random_text(rng, 40), random_text(rng, 400), GoldLabel::ham};
}

}  // namespace

TEST_CASE("criterion 6a: truncation budget safety, idempotence, monotonicity") {
    Verdict v{"criterion 6a (truncation properties, 300 cases)"};
    std::mt19937_64 rng(20260826);
    std::uniform_int_distribution<std::size_t> budget_dist(1, 96);
    for (int i = 0; i < 300; ++i) {
        TruncationPolicy policy;
        policy.max_content_tokens = budget_dist(rng);
        policy.estimator = (i % 2 == 0) ? Estimator::chars_div_4 : Estimator::whitespace_words;
        EmailContent e = random_email(rng);

        PreparedContent out = truncate_body(e, policy);
        // budget safety
        const bool within = estimate_tokens(out.subject, policy) +
                                estimate_tokens(out.body, policy) <=
                            policy.max_content_tokens;
        REQUIRE((within || out.body.empty()));

        // idempotence
        EmailContent again{e.id, out.subject, out.body, e.gold_label};
        PreparedContent twice = truncate_body(again, policy);
        REQUIRE(twice.subject == out.subject);
        REQUIRE(twice.body == out.body);

        // monotonicity: a larger budget never shortens the body
        TruncationPolicy bigger = policy;
        bigger.max_content_tokens = policy.max_content_tokens + 1 + (i % 7);
        PreparedContent more = truncate_body(e, bigger);
        REQUIRE(more.body.size() >= out.body.size());
    }
    v.pass();
}

TEST_CASE("criterion 6b: sanitize_delimiters never emits ### and is idempotent") {
    Verdict v{"criterion 6b (sanitizer properties, 300 cases)"};
    std::mt19937_64 rng(42);
    for (int i = 0; i < 300; ++i) {
        std::string s = random_text(rng, 200);
        std::string clean = sanitize_delimiters(s);
        REQUIRE(clean.find("###") == std::string::npos);
        REQUIRE(sanitize_delimiters(clean) == clean);
    }
    v.pass();
}

TEST_CASE("criterion 6c: parse_label is total and obeys the word rules") {
    Verdict v{"criterion 6c (parse_label properties, 300 cases)"};
    std::mt19937_64 rng(7);
    const std::vector<std::string> fillers = {"the", "hamster", "spammy", "x9", "result",
                                              "is:", "(note)", "ANSWER", "shampoo"};
    std::uniform_int_distribution<std::size_t> len_dist(0, 8);
    std::uniform_int_distribution<std::size_t> pick(0, fillers.size() - 1);
    std::uniform_int_distribution<int> which(0, 2);
    for (int i = 0; i < 300; ++i) {
        // random filler words (none a standalone spam/ham), then maybe a label
        std::vector<std::string> parts;
        const std::size_t n = len_dist(rng);
        for (std::size_t k = 0; k < n; ++k) parts.push_back(fillers[pick(rng)]);
        const int label = which(rng);  // 0: none, 1: spam, 2: ham
        if (label == 1) parts.push_back("Spam.");
        if (label == 2) parts.push_back("HAM!");
        for (std::size_t k = 0; k < len_dist(rng); ++k) parts.push_back(fillers[pick(rng)]);

        std::string joined;
        for (const auto& p : parts) {
            if (!joined.empty()) joined += ' ';
            joined += p;
        }
        PredLabel got = parse_label(joined);  // total: must not throw
        if (label == 0) REQUIRE(got == PredLabel::unparseable);
        if (label == 1) REQUIRE(got == PredLabel::spam);
        if (label == 2) REQUIRE(got == PredLabel::ham);

        // totality on arbitrary bytes too
        parse_label(random_text(rng, 100));
    }
    v.pass();
}

TEST_CASE("criterion 6d: metric bounds on random confusion matrices") {
    Verdict v{"criterion 6d (metric bound properties, 400 cases)"};
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<std::uint64_t> count(0, 200);
    int checked = 0;
    while (checked < 400) {
        ConfusionMatrix m;
        m.tp = count(rng);
        m.fp = count(rng);
        m.tn = count(rng);
        m.fn = count(rng);
        if (m.positives() == 0 || m.negatives() == 0) continue;
        ++checked;
        const double ac = accuracy(m);
        const double ba = balanced_accuracy(m);
        const double re = recall(m);
        REQUIRE((ac >= 0.0 && ac <= 1.0));
        REQUIRE((ba >= 0.0 && ba <= 1.0));
        REQUIRE((re >= 0.0 && re <= 1.0));
        auto pr = precision(m);
        if (pr) {
            REQUIRE((*pr >= 0.0 && *pr <= 1.0));
            const double f = f1(*pr, re);
            REQUIRE(f >= std::min(*pr, re) - 1e-12);
            REQUIRE(f <= std::max(*pr, re) + 1e-12);
            REQUIRE(std::abs(f - (*pr + re == 0 ? 0.0 : 2.0 * *pr * re / (*pr + re))) < 1e-12);
        }
    }
    v.pass();
}

TEST_CASE("criterion 7: optional live smoke test against a remote backend") {
    const char* config_path = std::getenv("SPAMZERO_LIVE_CONFIG");
    const char* backend_id = std::getenv("SPAMZERO_LIVE_BACKEND");
    const char* corpus_root = std::getenv("SPAMASSASSIN_ROOT");
    if (!config_path || !backend_id || !corpus_root) {
        std::printf("[acceptance] criterion 7 (live smoke): SKIPPED — set "
                    "SPAMZERO_LIVE_CONFIG, SPAMZERO_LIVE_BACKEND, and SPAMASSASSIN_ROOT "
                    "to run 20 live classifications\n");
        return;
    }
    Verdict v{"criterion 7 (live smoke: 20 emails, parse coverage >= 70%)"};
    TempDir store("c7_store");
    RunConfig cfg;
    cfg.corpus_root = corpus_root;
    cfg.scenario = Scenario::raw;
    cfg.backends = {backend_id};
    cfg.store_dir = store.path;
    cfg.limit = 20;
    cfg.seed = 7;
    RunResult result = cmd_run(cfg, load_backend_configs(config_path));

    std::map<std::string, GoldLabel> gold;
    for (const RawMessage& raw : scan_corpus(corpus_root)) {
        EmailContent e = parse_message(raw);
        gold[e.id] = e.gold_label;
    }
    MetricsRow row = metrics_row(result.sets[0], gold);
    REQUIRE(row.total == 20);
    REQUIRE(row.coverage >= 0.70);
    const std::string rendered = cmd_report(store.path, {result.run_id}, ReportFormat::markdown);
    REQUIRE(rendered.find("| " + std::string(backend_id) + " |") != std::string::npos);
    v.pass();
}
