// agbs: adversarial rewrites of QA prompts via adaptive greedy binary
// search over masked-LM candidate ranks, plus the evaluation harness that
// measures victim robustness (A_clean / A_attack / ASR / AVG).
//
// Subcommands: attack, evaluate, sweep, ablate, report.
// Exit codes: 0 ok, 2 config/validation, 3 transport, 4 internal.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "agbs/harness.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string dataset;
    std::string dataset_format;
    std::string answer_kind;
    std::string model;
    std::string backend;
    std::string tagger;
    std::string tagger_dict;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> sample_n;
    std::optional<double> sigma_th;
    std::optional<std::size_t> search_k;
    std::optional<std::size_t> step_s;
    bool require_final_similarity = false;
    bool dump_segmentations = false;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "Run config file (.json or .toml)");
    cmd->add_option("--dataset", flags.dataset, "Dataset file (overrides config)");
    cmd->add_option("--format", flags.dataset_format, "Dataset format: jsonl|csv");
    cmd->add_option("--answer-kind", flags.answer_kind, "Answer kind: numeric|text");
    cmd->add_option("--model", flags.model, "Only use the endpoint with this name");
    cmd->add_option("--backend", flags.backend, "MLM backend: mock | http:<base_url>");
    cmd->add_option("--tagger", flags.tagger, "POS tagger: rule | stub");
    cmd->add_option("--tagger-dict", flags.tagger_dict, "Dictionary file for the stub tagger");
    cmd->add_option("--seed", flags.seed, "Sampling seed (overrides config)");
    cmd->add_option("--n", flags.sample_n, "Sample size (overrides config)");
    cmd->add_option("--sigma", flags.sigma_th, "Similarity threshold sigma_th");
    cmd->add_option("--k", flags.search_k, "Search scope k");
    cmd->add_option("--step", flags.step_s, "Rank step s");
    cmd->add_option("--out", flags.out_dir, "Output directory");
    cmd->add_flag("--require-final-similarity", flags.require_final_similarity,
                  "Reject samples whose final similarity falls below sigma_th - 0.05");
    cmd->add_flag("--dump-segmentations", flags.dump_segmentations,
                  "Also write segmentations.jsonl for fixture authoring");
}

// Precedence: flags > config file > defaults. Flags overlay the raw JSON so
// the config hash in run metadata covers exactly what ran.
agbs::config::RunConfig resolve_config(const CommonFlags& flags) {
    nlohmann::json raw = nlohmann::json::object();
    if (!flags.config_path.empty())
        raw = agbs::config::load_config_json(flags.config_path);

    auto section = [&](const char* name) -> nlohmann::json& {
        if (!raw.contains(name) || !raw[name].is_object()) raw[name] = nlohmann::json::object();
        return raw[name];
    };
    if (!flags.dataset.empty()) section("dataset")["path"] = flags.dataset;
    if (!flags.dataset_format.empty()) section("dataset")["format"] = flags.dataset_format;
    if (!flags.answer_kind.empty()) section("dataset")["answer_kind"] = flags.answer_kind;
    if (flags.seed) section("sample")["seed"] = *flags.seed;
    if (flags.sample_n) section("sample")["n"] = *flags.sample_n;
    if (flags.sigma_th) section("attack")["sigma_th"] = *flags.sigma_th;
    if (flags.search_k) section("attack")["k"] = *flags.search_k;
    if (flags.step_s) section("attack")["step_s"] = *flags.step_s;
    if (flags.require_final_similarity) section("attack")["require_final_similarity"] = true;
    if (!flags.backend.empty()) {
        if (flags.backend == "mock") {
            section("backend")["kind"] = "mock";
        } else {
            std::string url = flags.backend;
            if (url.rfind("http:", 0) == 0 && url.rfind("http://", 0) != 0)
                url = url.substr(5);  // http:<base_url> shorthand
            section("backend")["kind"] = "http";
            section("backend")["url"] = url;
        }
    }
    if (!flags.tagger.empty()) section("tagger")["kind"] = flags.tagger;
    if (!flags.tagger_dict.empty()) section("tagger")["dict_path"] = flags.tagger_dict;
    if (!flags.out_dir.empty()) raw["out_dir"] = flags.out_dir;
    if (flags.dump_segmentations) raw["dump_segmentations"] = true;

    agbs::config::RunConfig cfg = agbs::config::config_from_json(raw);
    if (!flags.model.empty()) {
        std::erase_if(cfg.endpoints, [&](const agbs::config::EndpointConfig& e) {
            return e.endpoint.name != flags.model;
        });
        if (cfg.endpoints.empty())
            throw agbs::validation_error("no endpoint named '" + flags.model + "' in the roster");
    }
    return cfg;
}

int run_report(const std::string& metrics_path, const std::string& format,
               const std::string& out_path) {
    std::ifstream in(metrics_path);
    if (!in) throw agbs::io_error("cannot open metrics file: " + metrics_path);
    nlohmann::json parsed = nlohmann::json::parse(in, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_array())
        throw agbs::validation_error("metrics file must be a JSON array of summaries");

    std::vector<agbs::metrics::MetricsSummary> summaries;
    for (const nlohmann::json& j : parsed) {
        agbs::metrics::MetricsSummary s;
        s.model = j.value("model", "");
        s.dataset = j.value("dataset", "");
        s.a_clean = j.value("a_clean", 0.0);
        s.a_attack = j.value("a_attack", 0.0);
        if (j.contains("asr")) s.asr = j["asr"].get<double>();
        s.t_avg_s = j.value("t_avg_s", 0.0);
        s.n_total = j.value("n_total", std::size_t{0});
        s.n_clean_correct = j.value("n_clean_correct", std::size_t{0});
        summaries.push_back(std::move(s));
    }
    const auto fmt = format == "csv" ? agbs::metrics::ReportFormat::csv
                                     : agbs::metrics::ReportFormat::markdown;
    const std::string document = agbs::metrics::render_report(summaries, fmt);
    if (out_path.empty()) {
        std::cout << document;
    } else {
        std::ofstream out(out_path);
        if (!out) throw agbs::io_error("cannot write report: " + out_path);
        out << document;
    }
    return 0;
}

void print_summaries(const std::vector<agbs::metrics::MetricsSummary>& summaries) {
    std::cout << agbs::metrics::render_report(summaries, agbs::metrics::ReportFormat::markdown);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adversarial QA rewrites via adaptive greedy binary search"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string axis_name = "search_scope";
    std::vector<double> axis_values;
    std::string metrics_path;
    std::string report_format = "markdown";
    std::string report_out;

    CLI::App* attack = app.add_subcommand("attack", "Generate the adversarial corpus");
    add_common_flags(attack, flags);

    CLI::App* evaluate =
        app.add_subcommand("evaluate", "Attack, query victims, grade, and report metrics");
    add_common_flags(evaluate, flags);

    CLI::App* sweep = app.add_subcommand("sweep", "Metrics across one attack-config axis");
    add_common_flags(sweep, flags);
    sweep->add_option("--axis", axis_name, "Axis: search_scope | sigma | omega");
    sweep->add_option("--values", axis_values, "Axis values")->delimiter(',');

    CLI::App* ablate = app.add_subcommand("ablate", "Dynamic vs static rank strategy");
    add_common_flags(ablate, flags);

    CLI::App* report = app.add_subcommand("report", "Re-render a report from metrics.json");
    report->add_option("--metrics", metrics_path, "metrics.json from an evaluate run")->required();
    report->add_option("--report-format", report_format, "markdown | csv");
    report->add_option("--out", report_out, "Write to file instead of stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (report->parsed()) return run_report(metrics_path, report_format, report_out);

        agbs::config::RunConfig cfg = resolve_config(flags);
        agbs::harness::RunContext ctx(cfg);

        if (attack->parsed()) {
            const auto samples = agbs::harness::run_attack(ctx);
            std::size_t accepted = 0;
            for (const auto& s : samples)
                if (s.result.accepted) ++accepted;
            std::cout << "attacked " << samples.size() << " questions, " << accepted
                      << " accepted; artifacts in " << cfg.out_dir.string() << "\n";
        } else if (evaluate->parsed()) {
            const auto artifacts = agbs::harness::run_evaluate(ctx);
            print_summaries(artifacts.summaries);
        } else if (sweep->parsed()) {
            const auto axis = agbs::metrics::sweep_axis_from(axis_name);
            if (!axis)
                throw agbs::validation_error("unknown sweep axis: " + axis_name);
            if (axis_values.empty())
                throw agbs::validation_error("sweep: --values is required (comma separated)");
            const auto rows = agbs::harness::run_sweep(ctx, *axis, axis_values);
            std::vector<agbs::metrics::MetricsSummary> summaries;
            for (const auto& row : rows) summaries.push_back(row.summary);
            print_summaries(summaries);
        } else if (ablate->parsed()) {
            const auto result = agbs::harness::run_ablate(ctx);
            print_summaries({result.dynamic_row, result.static_row});
        }
        return 0;
    } catch (const agbs::validation_error& ex) {
        std::cerr << "error (config/validation): " << ex.what() << "\n";
        return 2;
    } catch (const agbs::transport_error& ex) {
        std::cerr << "error (transport): " << ex.what() << "\n";
        return 3;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 4;
    }
}
