#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "agbs/harness.hpp"
#include "support/test_servers.hpp"

using namespace agbs;
namespace fs = std::filesystem;

namespace {

fs::path data_dir() { return fs::path(AGBS_TEST_DATA_DIR); }

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json fixture_config_json(const fs::path& out_dir,
                                   const std::vector<std::string>& poison) {
    nlohmann::json j{
        {"dataset",
         {{"path", (data_dir() / "qa20.jsonl").string()},
          {"format", "jsonl"},
          {"answer_kind", "text"}}},
        {"sample", {{"n", 20}, {"seed", 7}}},
        {"attack",
         {{"sigma_th", 0.8}, {"k", 100}, {"step_s", 10}, {"max_adjust_iters", 6}}},
        {"backend", {{"kind", "mock"}}},
        {"tagger", {{"kind", "stub"}, {"dict_path", (data_dir() / "qa20_tags.json").string()}}},
        {"out_dir", out_dir.string()},
    };
    j["endpoints"] = nlohmann::json::array({nlohmann::json{
        {"name", "scripted-victim"}, {"protocol", "scripted"}, {"poison_tokens", poison}}});
    return j;
}

config::RunConfig fixture_config(const fs::path& out_dir, const std::vector<std::string>& poison) {
    return config::config_from_json(fixture_config_json(out_dir, poison));
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("attack run writes corpus, traces and trend, deterministically") {
    const fs::path out1 = fresh_dir("agbs_run1");
    const fs::path out2 = fresh_dir("agbs_run2");

    harness::RunContext ctx1(fixture_config(out1, {}));
    harness::run_attack(ctx1);
    harness::RunContext ctx2(fixture_config(out2, {}));
    harness::run_attack(ctx2);

    for (const char* name : {"adversarial.jsonl", "trace.jsonl", "trend.jsonl"}) {
        INFO(name);
        CHECK(slurp(out1 / name) == slurp(out2 / name));
    }

    // Every sampled question appears once, and accepted rewrites differ
    // from their originals.
    std::ifstream in(out1 / "adversarial.jsonl");
    std::string line;
    std::size_t lines = 0, accepted = 0;
    while (std::getline(in, line)) {
        const nlohmann::json record = nlohmann::json::parse(line);
        ++lines;
        if (record.at("accepted").get<bool>()) {
            ++accepted;
            CHECK(record.at("adversarial") != record.at("original"));
        }
    }
    CHECK(lines == 20);
    CHECK(accepted == 20);  // every fixture question has a keyword to hit

    CHECK(fs::exists(out1 / "run_metadata.json"));
}

TEST_CASE("evaluate with a scripted echo victim yields zero ASR") {
    const fs::path out = fresh_dir("agbs_eval_echo");
    harness::RunContext ctx(fixture_config(out, {}));
    const harness::EvaluateArtifacts artifacts = harness::run_evaluate(ctx);

    REQUIRE(artifacts.summaries.size() == 1);
    const metrics::MetricsSummary& s = artifacts.summaries[0];
    CHECK(s.a_clean == Catch::Approx(100.0));
    CHECK(s.a_attack == Catch::Approx(100.0));
    REQUIRE(s.asr.has_value());
    CHECK(*s.asr == Catch::Approx(0.0).margin(1e-12));

    CHECK(fs::exists(out / "report.md"));
    CHECK(fs::exists(out / "report.csv"));
    CHECK(fs::exists(out / "metrics.json"));
    CHECK(fs::exists(out / "eval_records.scripted-victim.jsonl"));
}

TEST_CASE("evaluate against an always-wrong http victim leaves ASR undefined") {
    agbs_test::VictimTestServer server;
    server.answer = [](const std::string&) { return std::string("no idea whatsoever"); };

    const fs::path out = fresh_dir("agbs_eval_wrong");
    nlohmann::json j = fixture_config_json(out, {});
    j["endpoints"] = nlohmann::json::array({nlohmann::json{{"name", "wrong-bot"},
                                                           {"protocol", "openai_compatible"},
                                                           {"base_url", server.base_url()},
                                                           {"model_id", "wrong"},
                                                           {"max_concurrency", 4}}});
    harness::RunContext ctx(config::config_from_json(j));
    const harness::EvaluateArtifacts artifacts = harness::run_evaluate(ctx);

    REQUIRE(artifacts.summaries.size() == 1);
    CHECK(artifacts.summaries[0].a_clean == 0.0);
    CHECK_FALSE(artifacts.summaries[0].asr.has_value());
    const std::string report = slurp(out / "report.md");
    CHECK(report.find("—") != std::string::npos);
}

TEST_CASE("evaluate records attack latency from the http victim") {
    agbs_test::VictimTestServer server;
    server.answer = [](const std::string& prompt) {
        // Parrot a keyed answer: correct for q06/q07 (gold 15) only.
        return std::string("15");
    };
    server.delay_ms = 5;

    const fs::path out = fresh_dir("agbs_eval_latency");
    nlohmann::json j = fixture_config_json(out, {});
    j["endpoints"] = nlohmann::json::array({nlohmann::json{{"name", "fifteen-bot"},
                                                           {"protocol", "ollama_style"},
                                                           {"base_url", server.base_url()},
                                                           {"model_id", "fifteen"},
                                                           {"max_concurrency", 4}}});
    harness::RunContext ctx(config::config_from_json(j));
    const harness::EvaluateArtifacts artifacts = harness::run_evaluate(ctx);

    REQUIRE(artifacts.summaries.size() == 1);
    const metrics::MetricsSummary& s = artifacts.summaries[0];
    CHECK(s.n_clean_correct == 2);              // q06 and q07 both answer 15
    CHECK(s.a_clean == Catch::Approx(10.0));
    CHECK(s.a_attack == Catch::Approx(10.0));   // parrot survives the attack
    CHECK(s.t_avg_s > 0.0);
}

TEST_CASE("endpoint failure mid-run persists partial records and propagates") {
    agbs_test::VictimTestServer server;
    server.answer = [](const std::string&) { return std::string("answer"); };
    server.succeed_first = 5;  // five clean queries, then the endpoint dies

    const fs::path out = fresh_dir("agbs_eval_partial");
    nlohmann::json j = fixture_config_json(out, {});
    j["endpoints"] = nlohmann::json::array({nlohmann::json{{"name", "dying-bot"},
                                                           {"protocol", "openai_compatible"},
                                                           {"base_url", server.base_url()},
                                                           {"model_id", "dying"},
                                                           {"max_retries", 0},
                                                           {"backoff_base_s", 0.001},
                                                           {"max_concurrency", 1}}});
    harness::RunContext ctx(config::config_from_json(j));
    CHECK_THROWS_AS(harness::run_evaluate(ctx), transport_error);

    const fs::path records_path = out / "eval_records.dying-bot.jsonl";
    REQUIRE(fs::exists(records_path));
    std::ifstream in(records_path);
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line)) {
        const nlohmann::json record = nlohmann::json::parse(line);
        CHECK(record.contains("qa_id"));
        ++lines;
    }
    CHECK(lines == 5);
}

TEST_CASE("sweep emits one row per sigma value over the same sample") {
    const fs::path out = fresh_dir("agbs_sweep");
    harness::RunContext ctx(fixture_config(out, {}));
    const auto rows = harness::run_sweep(ctx, metrics::SweepAxis::sigma, {0.3, 0.8});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].axis == 0.3);
    CHECK(rows[1].axis == 0.8);
    CHECK(rows[0].summary.a_clean == rows[1].summary.a_clean);  // shared clean pass

    const std::string csv = slurp(out / "sweep.csv");
    CHECK(csv.find("sigma,") == 0);
    CHECK_THROWS_AS(harness::run_sweep(ctx, metrics::SweepAxis::sigma, {0.8}),
                    validation_error);
}

TEST_CASE("ablate produces paired dynamic and static rows") {
    const fs::path out = fresh_dir("agbs_ablate");
    harness::RunContext ctx(fixture_config(out, {}));
    const harness::AblationResult result = harness::run_ablate(ctx);
    CHECK(result.dynamic_row.model == "scripted-victim/dynamic");
    CHECK(result.static_row.model == "scripted-victim/static");
    CHECK(result.dynamic_row.a_clean == result.static_row.a_clean);
    CHECK(fs::exists(out / "ablate.csv"));
}

TEST_CASE("segmentation dump flag writes fixture-authoring jsonl") {
    const fs::path out = fresh_dir("agbs_segdump");
    nlohmann::json j = fixture_config_json(out, {});
    j["dump_segmentations"] = true;
    harness::RunContext ctx(config::config_from_json(j));
    harness::run_attack(ctx);
    REQUIRE(fs::exists(out / "segmentations.jsonl"));

    std::ifstream in(out / "segmentations.jsonl");
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line)) {
        const nlohmann::json record = nlohmann::json::parse(line);
        CHECK(record.contains("tokens"));
        CHECK(record.contains("clauses"));
        CHECK(record.contains("sentence_boundaries"));
        ++lines;
    }
    CHECK(lines == 20);
}

TEST_CASE("dataset rejects land in the sidecar under the out dir") {
    const fs::path out = fresh_dir("agbs_rejects");
    const fs::path dataset = fs::temp_directory_path() / "mixed.jsonl";
    {
        std::ofstream f(dataset);
        f << R"({"question": "Good question stays here?", "answer": "yes"})" << "\n";
        f << R"({"question": "No answer on this one"})" << "\n";
    }
    nlohmann::json j = fixture_config_json(out, {});
    j["dataset"]["path"] = dataset.string();
    j["tagger"] = {{"kind", "rule"}};
    harness::RunContext ctx(config::config_from_json(j));
    CHECK(fs::exists(out / "mixed.rejects.jsonl"));
    CHECK(ctx.sample_pairs().size() == 1);
}

#ifdef AGBS_CLI_PATH
TEST_CASE("cli exit codes: 0 on success, 2 on config errors") {
    const fs::path out = fresh_dir("agbs_cli");
    const std::string cli = AGBS_CLI_PATH;

    const std::string ok = cli + " attack --dataset " + (data_dir() / "qa20.jsonl").string() +
                           " --backend mock --tagger stub --tagger-dict " +
                           (data_dir() / "qa20_tags.json").string() + " --n 20 --seed 7 --k 100" +
                           " --step 10 --out " + (out / "a").string() + " > /dev/null 2>&1";
    const int ok_status = std::system(ok.c_str());
    CHECK(WEXITSTATUS(ok_status) == 0);

    const std::string bad = cli + " attack --dataset /missing/nowhere.jsonl --backend mock --out " +
                            (out / "b").string() + " > /dev/null 2>&1";
    const int bad_status = std::system(bad.c_str());
    CHECK(WEXITSTATUS(bad_status) == 2);

    // Re-running the same attack config reproduces identical bytes.
    const std::string rerun = cli + " attack --dataset " + (data_dir() / "qa20.jsonl").string() +
                              " --backend mock --tagger stub --tagger-dict " +
                              (data_dir() / "qa20_tags.json").string() +
                              " --n 20 --seed 7 --k 100 --step 10 --out " + (out / "c").string() +
                              " > /dev/null 2>&1";
    REQUIRE(WEXITSTATUS(std::system(rerun.c_str())) == 0);
    CHECK(slurp(out / "a" / "adversarial.jsonl") == slurp(out / "c" / "adversarial.jsonl"));
}

TEST_CASE("cli flags override config file values") {
    const fs::path out = fresh_dir("agbs_cli_precedence");
    const fs::path cfg_path = out / "run.json";
    {
        nlohmann::json j = fixture_config_json(out / "from_config", {});
        std::ofstream f(cfg_path);
        f << j.dump(2);
    }
    const std::string cli = AGBS_CLI_PATH;
    const std::string cmd = cli + " attack --config " + cfg_path.string() + " --out " +
                            (out / "from_flag").string() + " --n 5 > /dev/null 2>&1";
    REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
    CHECK(!fs::exists(out / "from_config" / "adversarial.jsonl"));
    REQUIRE(fs::exists(out / "from_flag" / "adversarial.jsonl"));

    std::ifstream in(out / "from_flag" / "adversarial.jsonl");
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 5);  // --n beat the config's 20
}
#endif
