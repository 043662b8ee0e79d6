#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "spamzero/backend.hpp"
#include "spamzero/metrics.hpp"
#include "spamzero/pipeline.hpp"

namespace spamzero {

struct IngestManifest {
    std::uint64_t total = 0;
    std::map<std::string, std::uint64_t> per_category;
    std::uint64_t spam_count = 0;
    std::uint64_t ham_count = 0;
    double spam_fraction = 0.0;
    std::uint64_t parse_warnings = 0;
};

struct RunConfig {
    std::filesystem::path corpus_root;
    Scenario scenario = Scenario::raw;
    std::vector<std::string> backends;  // backend_ids from the backend config
    std::string summarizer_backend;     // summary scenario only
    std::size_t budget = 512;
    Estimator estimator = Estimator::chars_div_4;
    int concurrency = 4;
    std::filesystem::path cache_dir;
    std::filesystem::path store_dir = "runs";
    std::filesystem::path prompt_dir;  // empty: built-in templates
    std::optional<std::size_t> limit;
    std::uint64_t seed = 0;
};

/// Parses a backend config file: {"defaults": {...}, "backends": [...]}.
/// A "mock" backend is always available even without a file.
std::map<std::string, BackendConfig> load_backend_configs(const std::filesystem::path& path);
std::map<std::string, BackendConfig> builtin_backend_configs();

/// Scans and parses the corpus, streaming one JSON record per message
/// (id, category, gold_label, subject, body_length) to `records`.
IngestManifest cmd_ingest(const std::filesystem::path& corpus_root, std::ostream& records);

/// Same run inputs always produce the same run id (resume key).
std::string derive_run_id(const RunConfig& cfg, const std::string& prompt_digest,
                          const std::string& corpus_digest);

struct RunResult {
    std::string run_id;
    std::vector<PredictionSet> sets;
    UsageTotals usage;
};

RunResult cmd_run(const RunConfig& cfg,
                  const std::map<std::string, BackendConfig>& backend_configs);

/// Merges persisted runs into metric rows and renders them.
std::string cmd_report(const std::filesystem::path& store_dir,
                       const std::vector<std::string>& run_ids, ReportFormat format);

}  // namespace spamzero
