#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "agbs/metrics.hpp"

using namespace agbs::metrics;
using agbs::engine::AdversarialResult;
using agbs::engine::AttackConfig;
using agbs::engine::TraceEntry;

namespace {

std::vector<EvalRecord> synthetic_records(std::size_t n_total, std::size_t n_clean,
                                          std::size_t n_attack_survive) {
    std::vector<EvalRecord> records;
    for (std::size_t i = 0; i < n_total; ++i) {
        EvalRecord r;
        r.qa_id = "q" + std::to_string(i);
        r.clean_correct = i < n_clean;
        if (r.clean_correct) {
            r.attack_correct = i < n_attack_survive;
            r.attack_latency_s = 0.5;
        }
        records.push_back(r);
    }
    return records;
}

}  // namespace

TEST_CASE("asr identity reproduces printed table values") {
    CHECK(*asr_from_accuracies(88.00, 33.33) == Catch::Approx(62.13).margin(0.01));
    CHECK(*asr_from_accuracies(27.50, 2.50) == Catch::Approx(90.91).margin(0.01));
    CHECK(*asr_from_accuracies(17.50, 0.00) == Catch::Approx(100.00).margin(0.01));
    CHECK(*asr_from_accuracies(50.0, 50.0) == Catch::Approx(0.0).margin(1e-12));
    CHECK_FALSE(asr_from_accuracies(0.0, 0.0).has_value());
}

TEST_CASE("compute_metrics aggregates the T-restricted counts") {
    const MetricsSummary s = compute_metrics(synthetic_records(20, 10, 4));
    CHECK(s.n_total == 20);
    CHECK(s.n_clean_correct == 10);
    CHECK(s.a_clean == Catch::Approx(50.0));
    CHECK(s.a_attack == Catch::Approx(20.0));
    REQUIRE(s.asr.has_value());
    CHECK(*s.asr == Catch::Approx(60.0));
    CHECK(s.t_avg_s == Catch::Approx(0.5));
    CHECK_THROWS_AS(compute_metrics({}), agbs::validation_error);
}

TEST_CASE("zero clean accuracy leaves ASR undefined, rendered as a dash") {
    const MetricsSummary s = compute_metrics(synthetic_records(10, 0, 0));
    CHECK(s.a_clean == 0.0);
    CHECK_FALSE(s.asr.has_value());
    const std::string report = render_report({s}, ReportFormat::markdown);
    CHECK(report.find("—") != std::string::npos);
    // The ASR cell itself must be the dash, not a fabricated 0 or 100.
    const std::string csv = render_report({s}, ReportFormat::csv);
    std::stringstream ss(csv);
    std::string header, row;
    std::getline(ss, header);
    std::getline(ss, row);
    std::vector<std::string> fields;
    std::string field;
    std::stringstream row_ss(row);
    while (std::getline(row_ss, field, ',')) fields.push_back(field);
    REQUIRE(fields.size() >= 5);
    CHECK(fields[4].empty());
}

TEST_CASE("attack accuracy can never exceed clean accuracy") {
    std::mt19937 rng(7);
    for (int iter = 0; iter < 300; ++iter) {
        const std::size_t total = 1 + rng() % 50;
        const std::size_t clean = rng() % (total + 1);
        const std::size_t survive = clean == 0 ? 0 : rng() % (clean + 1);
        const MetricsSummary s = compute_metrics(synthetic_records(total, clean, survive));
        CHECK(s.a_attack <= s.a_clean);
        CHECK(s.a_clean <= 100.0);
        if (s.asr) {
            const double reconstructed = (1.0 - s.a_attack / s.a_clean) * 100.0;
            CHECK(*s.asr == Catch::Approx(reconstructed).margin(1e-9));
        }
    }
}

TEST_CASE("t_avg equals the arithmetic mean of attack latencies") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> dist(0.01, 3.0);
    for (int iter = 0; iter < 200; ++iter) {
        std::vector<EvalRecord> records;
        double sum = 0.0;
        std::size_t count = 0;
        const std::size_t n = 1 + rng() % 30;
        for (std::size_t i = 0; i < n; ++i) {
            EvalRecord r;
            r.qa_id = "q";
            r.clean_correct = rng() % 2 == 0;
            if (r.clean_correct && rng() % 3 != 0) {
                r.attack_correct = false;
                r.attack_latency_s = dist(rng);
                sum += *r.attack_latency_s;
                ++count;
            }
            records.push_back(r);
        }
        const MetricsSummary s = compute_metrics(records);
        const double expect = count ? sum / static_cast<double>(count) : 0.0;
        CHECK(s.t_avg_s == Catch::Approx(expect).margin(1e-12));
    }
}

TEST_CASE("published ASR tables fixture: identity matches every self-consistent row") {
    std::ifstream in(std::string(AGBS_TEST_DATA_DIR) + "/published_asr_tables.csv");
    REQUIRE(in.good());
    std::string line;
    REQUIRE(std::getline(in, line));  // header

    std::size_t rows = 0, consistent_rows = 0, flagged_rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string table, model, dataset, a_clean, a_attack, asr, consistent;
        std::getline(ss, table, ',');
        std::getline(ss, model, ',');
        std::getline(ss, dataset, ',');
        std::getline(ss, a_clean, ',');
        std::getline(ss, a_attack, ',');
        std::getline(ss, asr, ',');
        std::getline(ss, consistent, ',');
        ++rows;

        const auto computed = asr_from_accuracies(std::stod(a_clean), std::stod(a_attack));
        REQUIRE(computed.has_value());
        const double printed = std::stod(asr);
        INFO(model << "/" << dataset << ": computed " << *computed << " printed " << printed);
        if (consistent == "1") {
            ++consistent_rows;
            CHECK(std::abs(*computed - printed) < 0.01);
        } else {
            ++flagged_rows;
            CHECK(std::abs(*computed - printed) >= 0.01);
        }
    }
    CHECK(rows == 72);
    CHECK(consistent_rows == 68);
    CHECK(flagged_rows == 4);
}

TEST_CASE("sweep validates the axis and maps configs to rows") {
    AttackConfig base;
    auto run_one = [](const AttackConfig& cfg) {
        MetricsSummary s;
        s.model = "stub";
        s.a_clean = 50.0;
        s.a_attack = static_cast<double>(cfg.k % 100);
        s.asr = asr_from_accuracies(s.a_clean, s.a_attack);
        return s;
    };

    std::vector<AttackConfig> scopes;
    for (std::size_t k : {2000u, 6000u, 10000u, 13000u, 16000u}) {
        AttackConfig c = base;
        c.k = k;
        scopes.push_back(c);
    }
    const auto rows = sweep(scopes, SweepAxis::search_scope, run_one);
    REQUIRE(rows.size() == 5);
    CHECK(rows[0].axis == 2000.0);
    CHECK(rows[4].axis == 16000.0);

    std::vector<AttackConfig> sigmas;
    for (double sigma : {0.3, 0.8}) {
        AttackConfig c = base;
        c.sigma_th = sigma;
        sigmas.push_back(c);
    }
    CHECK(sweep(sigmas, SweepAxis::sigma, run_one).size() == 2);

    CHECK_THROWS_AS(sweep({base}, SweepAxis::sigma, run_one), agbs::validation_error);

    std::vector<AttackConfig> crooked = sigmas;
    crooked[1].step_s = 999;  // off-axis difference must be rejected
    CHECK_THROWS_AS(sweep(crooked, SweepAxis::sigma, run_one), agbs::validation_error);

    // Permuting configs permutes rows only.
    std::vector<AttackConfig> reversed(scopes.rbegin(), scopes.rend());
    const auto rows_rev = sweep(reversed, SweepAxis::search_scope, run_one);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].axis == rows_rev[rows.size() - 1 - i].axis);
        CHECK(rows[i].summary.a_attack == rows_rev[rows.size() - 1 - i].summary.a_attack);
    }
}

TEST_CASE("trend series aligns steps across results") {
    auto result_with_trace = [](std::size_t steps, std::size_t rank, double sigma) {
        AdversarialResult r;
        for (std::size_t i = 0; i < steps; ++i)
            r.state.trace.push_back(TraceEntry{0, 0, i, rank, sigma, "t"});
        return r;
    };

    std::vector<AdversarialResult> ten(10, result_with_trace(20, 100, 0.5));
    const auto series = trend_series(ten);
    REQUIRE(series.size() == 20);
    for (const TrendPoint& p : series) {
        CHECK(p.n == 10);
        CHECK(p.mean_rank == Catch::Approx(100.0));
        CHECK(p.mean_sigma_sim == Catch::Approx(0.5));
    }

    const auto single = trend_series({result_with_trace(7, 3, 0.9)});
    REQUIRE(single.size() == 7);
    CHECK(single[0].n == 1);

    // Ragged traces: later steps average only the survivors.
    const auto ragged =
        trend_series({result_with_trace(2, 10, 0.1), result_with_trace(4, 30, 0.3)});
    REQUIRE(ragged.size() == 4);
    CHECK(ragged[0].mean_rank == Catch::Approx(20.0));
    CHECK(ragged[3].mean_rank == Catch::Approx(30.0));
    CHECK(ragged[3].n == 1);

    CHECK_THROWS_AS(trend_series({}), agbs::validation_error);
}

TEST_CASE("report rendering is deterministic with fixed column order") {
    MetricsSummary row;
    row.model = "gpt-4o-latest";
    row.dataset = "SVAMP";
    row.a_clean = 88.00;
    row.a_attack = 33.33;
    row.asr = asr_from_accuracies(88.00, 33.33);
    row.t_avg_s = 0.55;

    const std::string md = render_report({row}, ReportFormat::markdown);
    CHECK(md.find("| model | dataset | A_clean | A_attack | ASR | AVG |") != std::string::npos);
    CHECK(md.find("| gpt-4o-latest | SVAMP | 88.00 | 33.33 | 62.13 | 0.55s |") !=
          std::string::npos);
    CHECK(md == render_report({row}, ReportFormat::markdown));

    // Parse-back: the CSV row round-trips to the same numbers.
    const std::string csv = render_report({row}, ReportFormat::csv);
    std::stringstream ss(csv);
    std::string header, data;
    std::getline(ss, header);
    std::getline(ss, data);
    CHECK(header == "model,dataset,a_clean,a_attack,asr,avg_s");
    std::stringstream row_ss(data);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(row_ss, field, ',')) fields.push_back(field);
    REQUIRE(fields.size() == 6);
    CHECK(std::stod(fields[2]) == Catch::Approx(88.00));
    CHECK(std::stod(fields[3]) == Catch::Approx(33.33));
    CHECK(std::stod(fields[4]) == Catch::Approx(62.13));
    CHECK(std::stod(fields[5]) == Catch::Approx(0.55));

    CHECK_THROWS_AS(render_report({}, ReportFormat::csv), agbs::validation_error);
}

TEST_CASE("fixed-point formatting rounds half away from zero") {
    CHECK(format_fixed(62.125) == "62.13");
    CHECK(format_fixed(90.9090909) == "90.91");
    CHECK(format_fixed(100.0) == "100.00");
    CHECK(format_fixed(1.105) == "1.11");
    CHECK(format_fixed(0.0) == "0.00");
    CHECK(format_fixed(13000.0, 0) == "13000");
}
