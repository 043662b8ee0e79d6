#include "spamzero/metrics.hpp"

#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "spamzero/errors.hpp"

namespace spamzero {

using nlohmann::json;

ConfusionMatrix confusion(const PredictionSet& preds,
                          const std::map<std::string, GoldLabel>& gold) {
    ConfusionMatrix cm;
    for (const Prediction& p : preds.predictions) {
        auto it = gold.find(p.email_id);
        if (it == gold.end()) {
            throw MissingGold("no gold label for email " + p.email_id);
        }
        if (p.label == PredLabel::unparseable) {
            ++cm.unparseable_count;
            continue;
        }
        const bool gold_spam = it->second == GoldLabel::spam;
        const bool pred_spam = p.label == PredLabel::spam;
        if (gold_spam && pred_spam) ++cm.tp;
        else if (gold_spam && !pred_spam) ++cm.fn;
        else if (!gold_spam && pred_spam) ++cm.fp;
        else ++cm.tn;
    }
    return cm;
}

double accuracy(const ConfusionMatrix& cm) {
    const std::uint64_t total = cm.positives() + cm.negatives();
    if (total == 0) throw EmptyMatrix("accuracy undefined: no parsed predictions");
    return static_cast<double>(cm.tp + cm.tn) / static_cast<double>(total);
}

double balanced_accuracy(const ConfusionMatrix& cm) {
    if (cm.positives() == 0 || cm.negatives() == 0) {
        throw OneClassAbsent("balanced accuracy undefined: one class absent");
    }
    return 0.5 * (static_cast<double>(cm.tp) / static_cast<double>(cm.positives()) +
                  static_cast<double>(cm.tn) / static_cast<double>(cm.negatives()));
}

std::optional<double> precision(const ConfusionMatrix& cm) {
    if (cm.tp + cm.fp == 0) return std::nullopt;
    return static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
}

double recall(const ConfusionMatrix& cm) {
    if (cm.positives() == 0) throw NoPositives("recall undefined: no positives");
    return static_cast<double>(cm.tp) / static_cast<double>(cm.positives());
}

double f1(double pr, double re) {
    if (pr + re == 0.0) return 0.0;
    return 2.0 * pr * re / (pr + re);
}

MetricsRow metrics_row(const PredictionSet& preds,
                       const std::map<std::string, GoldLabel>& gold) {
    MetricsRow row;
    row.backend_id = preds.backend_id;
    row.scenario = std::string(scenario_name(preds.scenario));
    row.total = preds.predictions.size();
    for (const Prediction& p : preds.predictions) {
        row.prompt_tokens += p.prompt_tokens;
        row.completion_tokens += p.completion_tokens;
    }

    const ConfusionMatrix cm = confusion(preds, gold);
    row.unparseable_count = cm.unparseable_count;
    row.coverage = row.total == 0
                       ? 0.0
                       : static_cast<double>(cm.parsed()) / static_cast<double>(row.total);
    if (cm.parsed() > 0) row.ac = accuracy(cm);
    if (cm.positives() > 0 && cm.negatives() > 0) row.ba = balanced_accuracy(cm);
    row.pr = precision(cm);
    if (cm.positives() > 0) row.re = recall(cm);
    if (row.pr && row.re) row.f1 = f1(*row.pr, *row.re);
    return row;
}

std::optional<ReportFormat> report_format_from_name(std::string_view name) {
    if (name == "md" || name == "markdown") return ReportFormat::markdown;
    if (name == "csv") return ReportFormat::csv;
    if (name == "jsonl") return ReportFormat::jsonl;
    return std::nullopt;
}

namespace {

std::string fmt6(std::optional<double> v, std::string_view undefined_mark) {
    if (!v) return std::string(undefined_mark);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", *v);
    return buf;
}

std::string markdown_report(const std::vector<MetricsRow>& rows) {
    std::ostringstream out;
    for (std::string_view scenario : {"raw", "summary"}) {
        bool any = false;
        for (const auto& r : rows) any = any || r.scenario == scenario;
        if (!any) continue;
        out << "## Prediction from " << (scenario == "raw" ? "truncated content" : "summary")
            << "\n\n";
        out << "| Model | AC | BA | PR | RE | F1 | Coverage |\n";
        out << "|---|---|---|---|---|---|---|\n";
        for (const auto& r : rows) {
            if (r.scenario != scenario) continue;
            out << "| " << r.backend_id << " | " << fmt6(r.ac, "—") << " | " << fmt6(r.ba, "—")
                << " | " << fmt6(r.pr, "—") << " | " << fmt6(r.re, "—") << " | "
                << fmt6(r.f1, "—") << " | " << fmt6(r.coverage, "—") << " |\n";
        }
        out << "\n";
        for (const auto& r : rows) {
            if (r.scenario != scenario) continue;
            out << "- " << r.backend_id << ": " << r.total << " emails, "
                << r.unparseable_count << " unparseable, " << r.prompt_tokens
                << " prompt tokens, " << r.completion_tokens << " completion tokens\n";
        }
        out << "\n";
    }
    return out.str();
}

std::string csv_report(const std::vector<MetricsRow>& rows) {
    std::ostringstream out;
    out << "model,scenario,ac,ba,pr,re,f1,coverage\n";
    for (const auto& r : rows) {
        out << r.backend_id << ',' << r.scenario << ',' << fmt6(r.ac, "") << ','
            << fmt6(r.ba, "") << ',' << fmt6(r.pr, "") << ',' << fmt6(r.re, "") << ','
            << fmt6(r.f1, "") << ',' << fmt6(r.coverage, "") << '\n';
    }
    return out.str();
}

json row_to_json(const MetricsRow& r) {
    auto opt = [](std::optional<double> v) { return v ? json(*v) : json(nullptr); };
    return json{{"model", r.backend_id},
                {"scenario", r.scenario},
                {"ac", opt(r.ac)},
                {"ba", opt(r.ba)},
                {"pr", opt(r.pr)},
                {"re", opt(r.re)},
                {"f1", opt(r.f1)},
                {"coverage", r.coverage},
                {"total", r.total},
                {"unparseable", r.unparseable_count},
                {"prompt_tokens", r.prompt_tokens},
                {"completion_tokens", r.completion_tokens}};
}

}  // namespace

std::string report(const std::vector<MetricsRow>& rows, ReportFormat format) {
    if (rows.empty()) throw EmptyInput("report: no rows");
    switch (format) {
        case ReportFormat::markdown:
            return markdown_report(rows);
        case ReportFormat::csv:
            return csv_report(rows);
        case ReportFormat::jsonl: {
            std::ostringstream out;
            for (const auto& r : rows) out << row_to_json(r).dump() << '\n';
            return out.str();
        }
    }
    return {};
}

}  // namespace spamzero
