#pragma once

#include <cstdint>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "r2kg/text.hpp"

namespace r2kg {

// One sample's gold labels and its prediction; nullopt prediction = Abstain.
// Label comparison everywhere is exact equality after case-fold + trim, with
// duplicates collapsed.
struct EvalRecord {
    std::string id;
    std::vector<std::string> gold;
    std::optional<std::vector<std::string>> prediction;

    static EvalRecord make(std::string id, std::vector<std::string> gold,
                           std::optional<std::vector<std::string>> prediction) {
        EvalRecord r{std::move(id), std::move(gold), std::move(prediction)};
        if (normalized_set(r.gold).empty()) {
            throw std::invalid_argument("record '" + r.id + "' has no gold labels");
        }
        if (r.prediction && normalized_set(*r.prediction).empty()) {
            r.prediction.reset(); // an empty prediction is an abstention
        }
        return r;
    }

    bool answered() const { return prediction.has_value(); }

    static std::set<std::string> normalized_set(const std::vector<std::string>& labels) {
        std::set<std::string> out;
        for (const auto& l : labels) {
            std::string n = text::normalize_label(l);
            if (!n.empty()) out.insert(std::move(n));
        }
        return out;
    }
};

struct SampleCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
};

inline SampleCounts sample_counts(const EvalRecord& r) {
    SampleCounts c;
    const auto gold = EvalRecord::normalized_set(r.gold);
    const auto pred = EvalRecord::normalized_set(*r.prediction);
    for (const auto& p : pred) {
        if (gold.count(p)) {
            ++c.tp;
        } else {
            ++c.fp;
        }
    }
    for (const auto& g : gold) {
        if (!pred.count(g)) ++c.fn;
    }
    return c;
}

// Fraction of samples that received an answer at all.
inline double coverage(const std::vector<EvalRecord>& records) {
    if (records.empty()) throw std::invalid_argument("no records");
    std::size_t answered = 0;
    for (const auto& r : records) answered += r.answered() ? 1 : 0;
    return static_cast<double>(answered) / static_cast<double>(records.size());
}

// Quality metrics are computed over the answered set only. They are undefined
// (not zero) when every sample abstained.

inline std::optional<double> micro_f1(const std::vector<EvalRecord>& records) {
    std::uint64_t tp = 0, fp = 0, fn = 0;
    bool any = false;
    for (const auto& r : records) {
        if (!r.answered()) continue;
        any = true;
        SampleCounts c = sample_counts(r);
        tp += c.tp;
        fp += c.fp;
        fn += c.fn;
    }
    if (!any) return std::nullopt;
    const double precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp);
    const double recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn);
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

inline std::optional<double> samplewise_f1(const std::vector<EvalRecord>& records) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : records) {
        if (!r.answered()) continue;
        ++n;
        SampleCounts c = sample_counts(r);
        const double precision = c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / (c.tp + c.fp);
        const double recall = c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / (c.tp + c.fn);
        if (precision + recall > 0.0) sum += 2.0 * precision * recall / (precision + recall);
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

// A sample hits when any predicted label belongs to the gold set; on boolean
// tasks this is plain accuracy.
inline std::optional<double> hit_rate(const std::vector<EvalRecord>& records) {
    std::size_t hits = 0, n = 0;
    for (const auto& r : records) {
        if (!r.answered()) continue;
        ++n;
        const auto gold = EvalRecord::normalized_set(r.gold);
        for (const auto& p : EvalRecord::normalized_set(*r.prediction)) {
            if (gold.count(p)) {
                ++hits;
                break;
            }
        }
    }
    if (n == 0) return std::nullopt;
    return static_cast<double>(hits) / static_cast<double>(n);
}

struct MetricCounts {
    std::size_t n_total = 0;
    std::size_t n_answered = 0;
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
};

struct MetricReport {
    double coverage = 0.0;
    std::optional<double> micro_f1;
    std::optional<double> samplewise_f1;
    std::optional<double> hit_rate;
    MetricCounts counts;
};

inline MetricReport compute_report(const std::vector<EvalRecord>& records) {
    MetricReport report;
    report.coverage = coverage(records);
    report.micro_f1 = micro_f1(records);
    report.samplewise_f1 = samplewise_f1(records);
    report.hit_rate = hit_rate(records);
    report.counts.n_total = records.size();
    for (const auto& r : records) {
        if (!r.answered()) continue;
        report.counts.n_answered += 1;
        SampleCounts c = sample_counts(r);
        report.counts.tp += c.tp;
        report.counts.fp += c.fp;
        report.counts.fn += c.fn;
    }
    return report;
}

inline nlohmann::ordered_json report_to_json(const MetricReport& r) {
    nlohmann::ordered_json j;
    j["coverage"] = r.coverage;
    auto opt = [](const std::optional<double>& v) {
        return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
    };
    j["micro_f1"] = opt(r.micro_f1);
    j["samplewise_f1"] = opt(r.samplewise_f1);
    j["hit_rate"] = opt(r.hit_rate);
    j["counts"] = {{"n_total", r.counts.n_total},
                   {"n_answered", r.counts.n_answered},
                   {"tp", r.counts.tp},
                   {"fp", r.counts.fp},
                   {"fn", r.counts.fn}};
    return j;
}

// Percent table in the Cvg / F1 (M) / F1 (S) / Hit layout, one row per group.
inline std::string render_report_table(
    const std::vector<std::pair<std::string, MetricReport>>& rows) {
    auto cell = [](const std::optional<double>& v) -> std::string {
        if (!v) return "n/a";
        std::ostringstream os;
        os << std::fixed << std::setprecision(1) << (*v * 100.0);
        return os.str();
    };
    std::size_t name_width = 5;
    for (const auto& [name, _] : rows) name_width = std::max(name_width, name.size());

    std::ostringstream os;
    os << std::left << std::setw(static_cast<int>(name_width)) << "group" << std::right
       << std::setw(8) << "Cvg" << std::setw(9) << "F1 (M)" << std::setw(9) << "F1 (S)"
       << std::setw(8) << "Hit" << "\n";
    for (const auto& [name, report] : rows) {
        os << std::left << std::setw(static_cast<int>(name_width)) << name << std::right
           << std::setw(8) << cell(report.coverage) << std::setw(9) << cell(report.micro_f1)
           << std::setw(9) << cell(report.samplewise_f1) << std::setw(8) << cell(report.hit_rate)
           << "\n";
    }
    return os.str();
}

} // namespace r2kg
