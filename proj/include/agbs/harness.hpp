#pragma once

#include <atomic>
#include <chrono>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "agbs/corpus.hpp"
#include "agbs/engine.hpp"
#include "agbs/errors.hpp"
#include "agbs/grading.hpp"
#include "agbs/http_mlm_backend.hpp"
#include "agbs/http_victim.hpp"
#include "agbs/metrics.hpp"
#include "agbs/mlm_backend.hpp"
#include "agbs/run_config.hpp"
#include "agbs/segmentation.hpp"
#include "agbs/victim.hpp"

namespace agbs::harness {

namespace detail {

inline void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto work = [&] {
        while (!failed.load()) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) break;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                failed = true;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

inline std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return std::string(buf);
}

}  // namespace detail

struct AttackedSample {
    corpus::QAPair pair;
    engine::AdversarialResult result;
};

// Everything a run needs, resolved from config: the sampled corpus, the MLM
// backend, the tagger, and one victim client per endpoint.
class RunContext {
public:
    explicit RunContext(config::RunConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        std::filesystem::create_directories(cfg_.out_dir);

        const corpus::LoadResult loaded =
            corpus::load_dataset(cfg_.dataset_path, cfg_.dataset_format, cfg_.answer_kind);
        if (!loaded.rejects.empty()) {
            corpus::write_rejects_sidecar(
                loaded.rejects,
                cfg_.out_dir / (cfg_.dataset_path.stem().string() + ".rejects.jsonl"));
        }
        if (loaded.pairs.empty())
            throw validation_error("dataset has no valid records: " + cfg_.dataset_path.string());
        sample_ = corpus::sample(loaded.pairs, cfg_.sample_n, cfg_.sample_seed);
        reject_count_ = loaded.rejects.size();

        if (cfg_.backend_kind == config::BackendKind::mock) {
            backend_ = std::make_shared<mlm::MockMlmBackend>(cfg_.backend_seed);
        } else {
            backend_ = std::make_shared<mlm::HttpMlmBackend>(cfg_.backend_url);
        }

        if (cfg_.tagger_kind == config::TaggerKind::rule) {
            tagger_ = std::make_shared<text::RuleTagger>();
        } else {
            std::ifstream in(cfg_.tagger_dict_path);
            if (!in) throw io_error("cannot open tagger dictionary: " + cfg_.tagger_dict_path.string());
            nlohmann::json dict = nlohmann::json::parse(in, nullptr, false);
            if (dict.is_discarded() || !dict.is_object())
                throw validation_error("tagger dictionary must be a JSON object of word -> tag");
            std::map<std::string, std::string> entries;
            for (const auto& [word, tag] : dict.items()) entries[word] = tag.get<std::string>();
            tagger_ = std::make_shared<text::StubTagger>(std::move(entries));
        }
    }

    const config::RunConfig& cfg() const { return cfg_; }
    const std::vector<corpus::QAPair>& sample_pairs() const { return sample_.pairs; }
    mlm::MlmBackend& backend() const { return *backend_; }
    const text::PosTagger& tagger() const { return *tagger_; }

    std::shared_ptr<victim::VictimClient> make_victim(const config::EndpointConfig& ec) const {
        if (ec.endpoint.protocol == victim::Protocol::scripted) {
            std::set<std::string> poison(ec.poison_tokens.begin(), ec.poison_tokens.end());
            return victim::scripted_victim_for(sample_.pairs, std::move(poison),
                                               ec.endpoint.name.empty() ? "scripted"
                                                                        : ec.endpoint.name);
        }
        return victim::make_http_victim(ec.endpoint);
    }

    // Run metadata goes to disk before any victim traffic so a crashed run
    // still tells you what it was.
    void write_run_metadata(config::RunMode mode) const {
        nlohmann::json roster = nlohmann::json::array();
        for (const config::EndpointConfig& e : cfg_.endpoints) {
            roster.push_back(nlohmann::json{{"name", e.endpoint.name},
                                            {"protocol", victim::to_string(e.endpoint.protocol)},
                                            {"base_url", e.endpoint.base_url},
                                            {"model_id", e.endpoint.model_id}});
        }
        nlohmann::json metadata{
            {"config_hash", config::config_hash(cfg_.raw)},
            {"mode", config::to_string(mode)},
            {"sample_seed", cfg_.sample_seed},
            {"sample_n", cfg_.sample_n},
            {"backend_id", backend_->id()},
            {"backend_seed", cfg_.backend_seed},
            {"tagger_id", tagger_->id()},
            {"endpoints", roster},
            {"dataset", cfg_.dataset_path.string()},
            {"rejected_records", reject_count_},
            {"timestamp_utc", detail::utc_timestamp()},
            {"avg_latency_semantics", "attack-phase victim inference time"},
        };
        std::ofstream out(cfg_.out_dir / "run_metadata.json");
        if (!out) throw io_error("cannot write run metadata");
        out << metadata.dump(2) << '\n';
    }

private:
    config::RunConfig cfg_;
    corpus::CorpusSample sample_;
    std::size_t reject_count_ = 0;
    std::shared_ptr<mlm::MlmBackend> backend_;
    std::shared_ptr<text::PosTagger> tagger_;
};

// Generate adversarial rewrites for every sampled question. Sequential
// unless both the backend and the tagger declare themselves shareable.
inline std::vector<AttackedSample> attack_samples(const RunContext& ctx, bool static_variant) {
    const auto& pairs = ctx.sample_pairs();
    std::vector<AttackedSample> out(pairs.size());
    const std::size_t workers =
        ctx.backend().shareable() && ctx.tagger().shareable() ? 8 : 1;
    detail::parallel_for(pairs.size(), workers, [&](std::size_t i) {
        const corpus::QAPair& pair = pairs[i];
        engine::AdversarialResult result =
            static_variant
                ? engine::attack_sentence_static(pair.question, ctx.cfg().attack, ctx.backend(),
                                                 ctx.tagger())
                : engine::attack_sentence(pair.question, ctx.cfg().attack, ctx.backend(),
                                          ctx.tagger());
        out[i] = AttackedSample{pair, std::move(result)};
    });
    return out;
}

inline void write_adversarial_corpus(const std::vector<AttackedSample>& samples,
                                     const std::filesystem::path& path,
                                     const std::string& trace_ref) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write adversarial corpus: " + path.string());
    for (const AttackedSample& s : samples) {
        nlohmann::json line{{"qa_id", s.pair.id},
                            {"original", s.result.original_text},
                            {"adversarial", s.result.adversarial_text},
                            {"final_similarity", s.result.final_similarity},
                            {"accepted", s.result.accepted},
                            {"trace_ref", trace_ref}};
        out << line.dump() << '\n';
    }
}

inline void write_traces(const std::vector<AttackedSample>& samples,
                         const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write trace file: " + path.string());
    for (const AttackedSample& s : samples) engine::write_trace_jsonl(out, s.pair.id, s.result);
}

inline void write_segmentations(const RunContext& ctx, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write segmentations: " + path.string());
    for (const corpus::QAPair& pair : ctx.sample_pairs()) {
        const text::SentenceSegmentation seg = text::segment(pair.question, ctx.tagger());
        nlohmann::json tokens = nlohmann::json::array();
        for (std::size_t i = 0; i < seg.stream.tokens.size(); ++i)
            tokens.push_back(nlohmann::json{{"text", seg.stream.tokens[i].text},
                                            {"tag", seg.tags[i]}});
        nlohmann::json clauses = nlohmann::json::array();
        for (const text::ClauseSpan& c : seg.clauses)
            clauses.push_back(nlohmann::json{{"start", c.start},
                                             {"checking_point", c.end_checking_point},
                                             {"keywords", c.keyword_positions}});
        nlohmann::json line{{"qa_id", pair.id},
                            {"tokens", tokens},
                            {"clauses", clauses},
                            {"sentence_boundaries", seg.sentence_boundaries}};
        out << line.dump() << '\n';
    }
}

// attack subcommand: adversarial corpus + step traces + aggregated trend.
inline std::vector<AttackedSample> run_attack(const RunContext& ctx) {
    ctx.write_run_metadata(config::RunMode::attack);
    std::vector<AttackedSample> samples = attack_samples(ctx, /*static_variant=*/false);

    write_adversarial_corpus(samples, ctx.cfg().out_dir / "adversarial.jsonl", "trace.jsonl");
    write_traces(samples, ctx.cfg().out_dir / "trace.jsonl");
    std::vector<engine::AdversarialResult> results;
    results.reserve(samples.size());
    for (const AttackedSample& s : samples) results.push_back(s.result);
    metrics::emit_traces(results, ctx.cfg().out_dir / "trend.jsonl");
    if (ctx.cfg().dump_segmentations)
        write_segmentations(ctx, ctx.cfg().out_dir / "segmentations.jsonl");
    return samples;
}

struct CleanOutcome {
    bool done = false;  // false while the query is outstanding or failed
    bool correct = false;
    double latency_s = 0.0;
    std::string response;
};

inline grading::GradingOutcome grade_response(const corpus::QAPair& pair,
                                              const std::string& response) {
    return pair.answer_kind == corpus::AnswerKind::numeric
               ? grading::grade_numeric(response, pair.gold_answer)
               : grading::grade_text(response, pair.gold_answer);
}

// Victim accuracy on the unmodified questions, filled in place so partial
// progress survives a mid-pass endpoint failure. Shared by evaluate, sweep
// and ablate so every variant scores against the same clean-correct set.
inline void clean_pass(const RunContext& ctx, victim::VictimClient& client,
                       victim::Protocol protocol, std::size_t workers,
                       std::vector<CleanOutcome>& outcomes) {
    const auto& pairs = ctx.sample_pairs();
    outcomes.assign(pairs.size(), CleanOutcome{});
    detail::parallel_for(pairs.size(), workers, [&](std::size_t i) {
        const std::string prompt =
            victim::build_prompt(pairs[i].answer_kind, protocol, pairs[i].question);
        const victim::VictimResponse response = client.query(prompt);
        outcomes[i] = CleanOutcome{true, grade_response(pairs[i], response.raw_text).correct,
                                   response.latency_s, response.raw_text};
    });
}

inline std::vector<CleanOutcome> clean_pass(const RunContext& ctx, victim::VictimClient& client,
                                            victim::Protocol protocol, std::size_t workers) {
    std::vector<CleanOutcome> outcomes;
    clean_pass(ctx, client, protocol, workers, outcomes);
    return outcomes;
}

// Attack-phase pass over the clean-correct set, also filled in place.
// Samples whose adversarial rewrite made no substitution are graded on the
// original text without a second query: the victim already answered it, so
// they count as attack survival rather than free successes.
inline void attack_pass(victim::VictimClient& client, victim::Protocol protocol,
                        const std::vector<AttackedSample>& samples,
                        const std::vector<CleanOutcome>& clean, std::size_t workers,
                        std::vector<metrics::EvalRecord>& records) {
    records.assign(samples.size(), metrics::EvalRecord{});
    detail::parallel_for(samples.size(), workers, [&](std::size_t i) {
        const AttackedSample& sample = samples[i];
        metrics::EvalRecord record;
        record.qa_id = sample.pair.id;
        record.clean_correct = clean[i].correct;
        record.clean_latency_s = clean[i].latency_s;
        record.adversarial_accepted = sample.result.accepted;
        record.final_similarity = sample.result.final_similarity;
        if (record.clean_correct) {
            if (sample.result.accepted) {
                const std::string prompt = victim::build_prompt(
                    sample.pair.answer_kind, protocol, sample.result.adversarial_text);
                const victim::VictimResponse response = client.query(prompt);
                record.attack_correct = grade_response(sample.pair, response.raw_text).correct;
                record.attack_latency_s = response.latency_s;
            } else {
                record.attack_correct = true;
            }
        }
        records[i] = std::move(record);
    });
}

inline std::vector<metrics::EvalRecord> attack_pass(victim::VictimClient& client,
                                                    victim::Protocol protocol,
                                                    const std::vector<AttackedSample>& samples,
                                                    const std::vector<CleanOutcome>& clean,
                                                    std::size_t workers) {
    std::vector<metrics::EvalRecord> records;
    attack_pass(client, protocol, samples, clean, workers, records);
    return records;
}

inline void write_eval_records(const std::vector<metrics::EvalRecord>& records,
                               const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write eval records: " + path.string());
    for (const metrics::EvalRecord& record : records) {
        out << nlohmann::json(record).dump() << '\n';
    }
}

struct EvaluateArtifacts {
    std::vector<AttackedSample> samples;
    std::vector<metrics::MetricsSummary> summaries;
};

// evaluate subcommand: attack (or reuse), query victims on clean and
// adversarial questions, grade, aggregate, report. On endpoint failure the
// records collected so far are persisted before the error propagates.
inline EvaluateArtifacts run_evaluate(const RunContext& ctx) {
    if (ctx.cfg().endpoints.empty())
        throw validation_error("evaluate: config has no victim endpoints");
    ctx.write_run_metadata(config::RunMode::evaluate);

    std::vector<AttackedSample> samples = attack_samples(ctx, /*static_variant=*/false);
    write_adversarial_corpus(samples, ctx.cfg().out_dir / "adversarial.jsonl", "trace.jsonl");
    write_traces(samples, ctx.cfg().out_dir / "trace.jsonl");
    {
        std::vector<engine::AdversarialResult> results;
        results.reserve(samples.size());
        for (const AttackedSample& s : samples) results.push_back(s.result);
        metrics::emit_traces(results, ctx.cfg().out_dir / "trend.jsonl");
    }
    if (ctx.cfg().dump_segmentations)
        write_segmentations(ctx, ctx.cfg().out_dir / "segmentations.jsonl");

    const std::string dataset_name = ctx.cfg().dataset_path.stem().string();
    EvaluateArtifacts artifacts;
    artifacts.samples = samples;

    for (const config::EndpointConfig& ec : ctx.cfg().endpoints) {
        const std::shared_ptr<victim::VictimClient> client = ctx.make_victim(ec);
        const auto records_path =
            ctx.cfg().out_dir / ("eval_records." + ec.endpoint.name + ".jsonl");
        std::vector<CleanOutcome> clean;
        std::vector<metrics::EvalRecord> records;
        try {
            clean_pass(ctx, *client, ec.endpoint.protocol, ec.endpoint.max_concurrency, clean);
            attack_pass(*client, ec.endpoint.protocol, samples, clean,
                        ec.endpoint.max_concurrency, records);
            write_eval_records(records, records_path);
            metrics::MetricsSummary summary = metrics::compute_metrics(records);
            summary.model = ec.endpoint.name;
            summary.dataset = dataset_name;
            artifacts.summaries.push_back(summary);
        } catch (const error&) {
            // Persist whatever completed so the run stays diagnosable.
            std::vector<metrics::EvalRecord> partial;
            for (const metrics::EvalRecord& r : records)
                if (!r.qa_id.empty()) partial.push_back(r);
            if (partial.empty()) {
                for (std::size_t i = 0; i < clean.size(); ++i) {
                    if (!clean[i].done) continue;
                    metrics::EvalRecord r;
                    r.qa_id = samples[i].pair.id;
                    r.clean_correct = clean[i].correct;
                    r.clean_latency_s = clean[i].latency_s;
                    r.adversarial_accepted = samples[i].result.accepted;
                    r.final_similarity = samples[i].result.final_similarity;
                    partial.push_back(std::move(r));
                }
            }
            write_eval_records(partial, records_path);
            if (!artifacts.summaries.empty()) {
                std::ofstream out(ctx.cfg().out_dir / "report.md");
                out << metrics::render_report(artifacts.summaries,
                                              metrics::ReportFormat::markdown);
            }
            throw;
        }
    }

    nlohmann::json summary_json = nlohmann::json::array();
    for (const metrics::MetricsSummary& s : artifacts.summaries) summary_json.push_back(s);
    {
        std::ofstream out(ctx.cfg().out_dir / "metrics.json");
        out << summary_json.dump(2) << '\n';
    }
    {
        std::ofstream out(ctx.cfg().out_dir / "report.md");
        out << metrics::render_report(artifacts.summaries, metrics::ReportFormat::markdown);
    }
    {
        std::ofstream out(ctx.cfg().out_dir / "report.csv");
        out << metrics::render_report(artifacts.summaries, metrics::ReportFormat::csv);
    }
    return artifacts;
}

// One summary per attack-config variant against one endpoint, sharing the
// clean pass. Used by both sweep and ablate.
inline metrics::MetricsSummary evaluate_variant(const RunContext& ctx,
                                                const config::EndpointConfig& ec,
                                                victim::VictimClient& client,
                                                const std::vector<CleanOutcome>& clean,
                                                const engine::AttackConfig& attack_cfg,
                                                bool static_variant, const std::string& label) {
    config::RunConfig variant_cfg = ctx.cfg();
    variant_cfg.attack = attack_cfg;

    const auto& pairs = ctx.sample_pairs();
    std::vector<AttackedSample> samples(pairs.size());
    const std::size_t workers =
        ctx.backend().shareable() && ctx.tagger().shareable() ? 8 : 1;
    detail::parallel_for(pairs.size(), workers, [&](std::size_t i) {
        engine::AdversarialResult result =
            static_variant ? engine::attack_sentence_static(pairs[i].question, attack_cfg,
                                                            ctx.backend(), ctx.tagger())
                           : engine::attack_sentence(pairs[i].question, attack_cfg, ctx.backend(),
                                                     ctx.tagger());
        samples[i] = AttackedSample{pairs[i], std::move(result)};
    });

    std::vector<metrics::EvalRecord> records =
        attack_pass(client, ec.endpoint.protocol, samples, clean, ec.endpoint.max_concurrency);
    metrics::MetricsSummary summary = metrics::compute_metrics(records);
    summary.model = label;
    summary.dataset = ctx.cfg().dataset_path.stem().string();
    return summary;
}

// sweep subcommand: vary exactly one axis, same sample and seed everywhere.
inline std::vector<metrics::SweepRow> run_sweep(const RunContext& ctx, metrics::SweepAxis axis,
                                                const std::vector<double>& values) {
    if (ctx.cfg().endpoints.empty())
        throw validation_error("sweep: config has no victim endpoints");
    if (values.size() < 2) throw validation_error("sweep: need at least 2 axis values");
    ctx.write_run_metadata(config::RunMode::sweep);

    std::vector<engine::AttackConfig> variants;
    for (double value : values) {
        engine::AttackConfig variant = ctx.cfg().attack;
        switch (axis) {
            case metrics::SweepAxis::search_scope:
                variant.k = static_cast<std::size_t>(value);
                break;
            case metrics::SweepAxis::sigma: variant.sigma_th = value; break;
            case metrics::SweepAxis::omega: variant.omega = value; break;
        }
        variants.push_back(variant);
    }

    const config::EndpointConfig& ec = ctx.cfg().endpoints.front();
    const std::shared_ptr<victim::VictimClient> client = ctx.make_victim(ec);
    const std::vector<CleanOutcome> clean = clean_pass(ctx, *client, ec.endpoint.protocol, ec.endpoint.max_concurrency);

    std::vector<metrics::SweepRow> rows = metrics::sweep(
        variants, axis, [&](const engine::AttackConfig& attack_cfg) {
            return evaluate_variant(ctx, ec, *client, clean, attack_cfg, false, ec.endpoint.name);
        });

    std::ofstream out(ctx.cfg().out_dir / "sweep.csv");
    if (!out) throw io_error("cannot write sweep.csv");
    out << to_string(axis) << ",model,dataset,a_clean,a_attack,asr,avg_s\n";
    for (const metrics::SweepRow& row : rows) {
        out << metrics::format_fixed(row.axis, axis == metrics::SweepAxis::search_scope ? 0 : 2)
            << ',' << row.summary.model << ',' << row.summary.dataset << ','
            << metrics::format_fixed(row.summary.a_clean) << ','
            << metrics::format_fixed(row.summary.a_attack) << ','
            << (row.summary.asr ? metrics::format_fixed(*row.summary.asr) : "") << ','
            << metrics::format_fixed(row.summary.t_avg_s) << '\n';
    }
    return rows;
}

struct AblationResult {
    metrics::MetricsSummary dynamic_row;
    metrics::MetricsSummary static_row;
};

// ablate subcommand: dynamic vs pinned-rank static on the identical sample.
inline AblationResult run_ablate(const RunContext& ctx) {
    if (ctx.cfg().endpoints.empty())
        throw validation_error("ablate: config has no victim endpoints");
    ctx.write_run_metadata(config::RunMode::ablate);

    const config::EndpointConfig& ec = ctx.cfg().endpoints.front();
    const std::shared_ptr<victim::VictimClient> client = ctx.make_victim(ec);
    const std::vector<CleanOutcome> clean = clean_pass(ctx, *client, ec.endpoint.protocol, ec.endpoint.max_concurrency);

    AblationResult result;
    result.dynamic_row = evaluate_variant(ctx, ec, *client, clean, ctx.cfg().attack, false,
                                          ec.endpoint.name + "/dynamic");
    result.static_row = evaluate_variant(ctx, ec, *client, clean, ctx.cfg().attack, true,
                                         ec.endpoint.name + "/static");

    std::ofstream out(ctx.cfg().out_dir / "ablate.csv");
    if (!out) throw io_error("cannot write ablate.csv");
    out << metrics::render_report({result.dynamic_row, result.static_row},
                                  metrics::ReportFormat::csv);
    return result;
}

}  // namespace agbs::harness
