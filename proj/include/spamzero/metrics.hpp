#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spamzero/corpus.hpp"
#include "spamzero/pipeline.hpp"

namespace spamzero {

/// Binary confusion counts with spam as the positive class. Unparseable
/// predictions are excluded from the matrix and tallied separately.
struct ConfusionMatrix {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;
    std::uint64_t unparseable_count = 0;

    std::uint64_t positives() const { return tp + fn; }
    std::uint64_t negatives() const { return tn + fp; }
    std::uint64_t parsed() const { return tp + fp + tn + fn; }
};

ConfusionMatrix confusion(const PredictionSet& preds,
                          const std::map<std::string, GoldLabel>& gold);

double accuracy(const ConfusionMatrix& cm);           // throws EmptyMatrix
double balanced_accuracy(const ConfusionMatrix& cm);  // throws OneClassAbsent
std::optional<double> precision(const ConfusionMatrix& cm);
double recall(const ConfusionMatrix& cm);             // throws NoPositives
double f1(double pr, double re);

struct MetricsRow {
    std::string backend_id;
    std::string scenario;
    std::optional<double> ac, ba, pr, re, f1;
    double coverage = 0.0;  // parsed / total
    std::uint64_t total = 0;
    std::uint64_t unparseable_count = 0;
    std::uint64_t prompt_tokens = 0;
    std::uint64_t completion_tokens = 0;
};

/// Evaluates one PredictionSet into a report row; metrics that have no
/// defined value (degenerate matrices) stay empty rather than 0 or 1.
MetricsRow metrics_row(const PredictionSet& preds,
                       const std::map<std::string, GoldLabel>& gold);

enum class ReportFormat { markdown, csv, jsonl };
std::optional<ReportFormat> report_format_from_name(std::string_view name);

/// One table per scenario, columns Model/AC/BA/PR/RE/F1 at 6 decimal
/// places, plus coverage and usage totals.
std::string report(const std::vector<MetricsRow>& rows, ReportFormat format);

}  // namespace spamzero
