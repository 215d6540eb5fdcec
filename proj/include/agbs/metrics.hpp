#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "agbs/engine.hpp"
#include "agbs/errors.hpp"

namespace agbs::metrics {

// Per-sample outcome. attack_correct is populated only for samples the
// victim answered correctly on the clean question (the T-restricted
// accounting); attack_latency_s only when an attack-phase query happened.
struct EvalRecord {
    std::string qa_id;
    bool clean_correct = false;
    std::optional<bool> attack_correct;
    double clean_latency_s = 0.0;
    std::optional<double> attack_latency_s;
    bool adversarial_accepted = false;
    double final_similarity = 1.0;
};

struct MetricsSummary {
    std::string model;
    std::string dataset;
    double a_clean = 0.0;            // percent
    double a_attack = 0.0;           // percent
    std::optional<double> asr;       // percent; empty when a_clean == 0
    double t_avg_s = 0.0;
    std::size_t n_total = 0;
    std::size_t n_clean_correct = 0;
};

// ASR identity. Undefined (not 0, not 100) when the model got nothing
// right to begin with.
inline std::optional<double> asr_from_accuracies(double a_clean_pct, double a_attack_pct) {
    if (a_clean_pct <= 0.0) return std::nullopt;
    return (1.0 - a_attack_pct / a_clean_pct) * 100.0;
}

inline MetricsSummary compute_metrics(const std::vector<EvalRecord>& records) {
    if (records.empty()) throw validation_error("compute_metrics: no records");
    MetricsSummary summary;
    summary.n_total = records.size();

    std::size_t attack_correct = 0;
    double latency_sum = 0.0;
    std::size_t latency_count = 0;
    for (const EvalRecord& record : records) {
        if (record.clean_correct) {
            ++summary.n_clean_correct;
            if (record.attack_correct.value_or(false)) ++attack_correct;
        }
        if (record.attack_latency_s) {
            latency_sum += *record.attack_latency_s;
            ++latency_count;
        }
    }
    const double n = static_cast<double>(summary.n_total);
    summary.a_clean = 100.0 * static_cast<double>(summary.n_clean_correct) / n;
    summary.a_attack = 100.0 * static_cast<double>(attack_correct) / n;
    summary.asr = asr_from_accuracies(summary.a_clean, summary.a_attack);
    summary.t_avg_s = latency_count ? latency_sum / static_cast<double>(latency_count) : 0.0;
    return summary;
}

enum class SweepAxis { search_scope, sigma, omega };

inline const char* to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::search_scope: return "search_scope";
        case SweepAxis::sigma: return "sigma";
        case SweepAxis::omega: return "omega";
    }
    return "?";
}

inline std::optional<SweepAxis> sweep_axis_from(std::string_view s) {
    if (s == "search_scope") return SweepAxis::search_scope;
    if (s == "sigma") return SweepAxis::sigma;
    if (s == "omega") return SweepAxis::omega;
    return std::nullopt;
}

// Axis value of a config, as it appears in the sweep table.
inline double axis_value(const engine::AttackConfig& config, SweepAxis axis) {
    switch (axis) {
        case SweepAxis::search_scope: return static_cast<double>(config.k);
        case SweepAxis::sigma: return config.sigma_th;
        case SweepAxis::omega: return config.omega;
    }
    return 0.0;
}

struct SweepRow {
    double axis = 0.0;
    MetricsSummary summary;
};

// Run one summary per config variant. Variants must differ only along the
// chosen axis; anything else is a config mistake the caller should hear
// about rather than a silently confounded table.
inline std::vector<SweepRow> sweep(const std::vector<engine::AttackConfig>& configs, SweepAxis axis,
                                   const std::function<MetricsSummary(const engine::AttackConfig&)>& run_one) {
    if (configs.size() < 2)
        throw validation_error("sweep: need at least 2 configs along the axis");
    for (const engine::AttackConfig& config : configs) {
        engine::AttackConfig normalized = config;
        engine::AttackConfig baseline = configs.front();
        switch (axis) {
            case SweepAxis::search_scope: normalized.k = baseline.k; break;
            case SweepAxis::sigma: normalized.sigma_th = baseline.sigma_th; break;
            case SweepAxis::omega: normalized.omega = baseline.omega; break;
        }
        if (!(normalized == baseline))
            throw validation_error("sweep: configs differ off the '" + std::string(to_string(axis)) +
                                   "' axis");
    }

    std::vector<SweepRow> rows;
    rows.reserve(configs.size());
    for (const engine::AttackConfig& config : configs)
        rows.push_back(SweepRow{axis_value(config, axis), run_one(config)});
    return rows;
}

// Aligned trend series for the rank / similarity trend plots: step i
// averages the i-th trace entry of every result that got that far.
struct TrendPoint {
    std::size_t step = 0;
    double mean_rank = 0.0;
    double mean_sigma_sim = 0.0;
    std::size_t n = 0;
};

inline std::vector<TrendPoint> trend_series(const std::vector<engine::AdversarialResult>& results) {
    if (results.empty()) throw validation_error("trend_series: no results");
    std::size_t longest = 0;
    for (const engine::AdversarialResult& r : results)
        longest = std::max(longest, r.state.trace.size());

    std::vector<TrendPoint> series;
    series.reserve(longest);
    for (std::size_t step = 0; step < longest; ++step) {
        TrendPoint point;
        point.step = step;
        for (const engine::AdversarialResult& r : results) {
            if (step >= r.state.trace.size()) continue;
            point.mean_rank += static_cast<double>(r.state.trace[step].rank);
            point.mean_sigma_sim += r.state.trace[step].sigma_sim;
            ++point.n;
        }
        point.mean_rank /= static_cast<double>(point.n);
        point.mean_sigma_sim /= static_cast<double>(point.n);
        series.push_back(point);
    }
    return series;
}

inline void emit_traces(const std::vector<engine::AdversarialResult>& results,
                        const std::filesystem::path& path) {
    const std::vector<TrendPoint> series = trend_series(results);
    std::ofstream out(path);
    if (!out) throw io_error("cannot write trace file: " + path.string());
    for (const TrendPoint& point : series) {
        nlohmann::json line{{"step", point.step},
                            {"mean_rank", point.mean_rank},
                            {"mean_sigma_sim", point.mean_sigma_sim},
                            {"n", point.n}};
        out << line.dump() << '\n';
    }
}

// Fixed-point formatting with explicit round-half-away, so 62.125 renders
// as 62.13 and the rendered tables match the conventional table style.
inline std::string format_fixed(double value, int decimals = 2) {
    if (std::isnan(value)) return "nan";
    double scale = std::pow(10.0, decimals);
    double rounded = static_cast<double>(std::llround(value * scale)) / scale;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, rounded);
    return std::string(buf);
}

inline std::string format_asr(const std::optional<double>& asr) {
    // Undefined ASR renders as a dash, never as 0 or 100.
    return asr ? format_fixed(*asr) : "—";
}

enum class ReportFormat { markdown, csv };

// Deterministic report: one row per summary, fixed column order
// model, dataset, A_clean, A_attack, ASR, AVG.
inline std::string render_report(const std::vector<MetricsSummary>& summaries,
                                 ReportFormat format) {
    if (summaries.empty()) throw validation_error("render_report: no summaries");
    std::string out;
    if (format == ReportFormat::markdown) {
        out += "| model | dataset | A_clean | A_attack | ASR | AVG |\n";
        out += "|---|---|---|---|---|---|\n";
        for (const MetricsSummary& s : summaries) {
            out += "| " + s.model + " | " + s.dataset + " | " + format_fixed(s.a_clean) + " | " +
                   format_fixed(s.a_attack) + " | " + format_asr(s.asr) + " | " +
                   format_fixed(s.t_avg_s) + "s |\n";
        }
    } else {
        out += "model,dataset,a_clean,a_attack,asr,avg_s\n";
        for (const MetricsSummary& s : summaries) {
            out += s.model + "," + s.dataset + "," + format_fixed(s.a_clean) + "," +
                   format_fixed(s.a_attack) + "," + (s.asr ? format_fixed(*s.asr) : "") + "," +
                   format_fixed(s.t_avg_s) + "\n";
        }
    }
    return out;
}

inline void to_json(nlohmann::json& j, const EvalRecord& r) {
    j = nlohmann::json{{"qa_id", r.qa_id},
                       {"clean_correct", r.clean_correct},
                       {"clean_latency_s", r.clean_latency_s},
                       {"adversarial_accepted", r.adversarial_accepted},
                       {"final_similarity", r.final_similarity}};
    if (r.attack_correct) j["attack_correct"] = *r.attack_correct;
    if (r.attack_latency_s) j["attack_latency_s"] = *r.attack_latency_s;
}

inline void from_json(const nlohmann::json& j, EvalRecord& r) {
    r.qa_id = j.value("qa_id", "");
    r.clean_correct = j.value("clean_correct", false);
    r.clean_latency_s = j.value("clean_latency_s", 0.0);
    r.adversarial_accepted = j.value("adversarial_accepted", false);
    r.final_similarity = j.value("final_similarity", 1.0);
    if (j.contains("attack_correct")) r.attack_correct = j["attack_correct"].get<bool>();
    if (j.contains("attack_latency_s")) r.attack_latency_s = j["attack_latency_s"].get<double>();
}

inline void to_json(nlohmann::json& j, const MetricsSummary& s) {
    j = nlohmann::json{{"model", s.model},
                       {"dataset", s.dataset},
                       {"a_clean", s.a_clean},
                       {"a_attack", s.a_attack},
                       {"t_avg_s", s.t_avg_s},
                       {"n_total", s.n_total},
                       {"n_clean_correct", s.n_clean_correct}};
    if (s.asr) j["asr"] = *s.asr;
}

}  // namespace agbs::metrics
