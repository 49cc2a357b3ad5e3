#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "tetrasim/cli.hpp"

using namespace tetrasim;
using namespace tetrasim::cli;
using Catch::Approx;

namespace {

nlohmann::json base_json() {
    return nlohmann::json{{"mode", "tmo"},   {"n_c", 0},           {"n_f", 2},
                          {"lambda_f", 0.2}, {"lambda_c", 0.0},    {"lambda_voice", 0.0},
                          {"feedback_rate", 0.0}, {"alpha_ch", 0.0},
                          {"horizon", 200.0}, {"warmup", 10.0},    {"seed", 5}};
}

} // namespace

TEST_CASE("config parsing applies keys and rejects unknown ones") {
    auto j = base_json();
    auto parsed = config::parse_config(j);
    CHECK(parsed.scenario.n_f == 2);
    CHECK(parsed.scenario.lambda_f == Approx(0.2));
    CHECK(!parsed.sweep);

    j["definitely_not_a_key"] = 1;
    try {
        config::parse_config(j);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("definitely_not_a_key") != std::string::npos);
    }
}

TEST_CASE("config type and domain errors carry the key path") {
    auto j = base_json();
    j["lambda_f"] = "fast";
    CHECK_THROWS_WITH(config::parse_config(j), Catch::Matchers::ContainsSubstring("lambda_f"));
    j = base_json();
    j["setting"] = 2;  // tmo mode
    CHECK_THROWS_WITH(config::parse_config(j), Catch::Matchers::ContainsSubstring("setting"));
    j = base_json();
    j["call_dur"] = nlohmann::json::array({40.0});
    CHECK_THROWS_WITH(config::parse_config(j), Catch::Matchers::ContainsSubstring("call_dur"));
    j = base_json();
    j["fr_discipline"] = "replace2";
    CHECK_THROWS_AS(config::parse_config(j), ConfigError);
}

TEST_CASE("feedback_rate accepts a number or auto") {
    auto j = base_json();
    j["feedback_rate"] = "auto";
    auto parsed = config::parse_config(j);
    CHECK(parsed.scenario.resolved_feedback_rate() == Approx(2.0 / 60.0));
    j["feedback_rate"] = 0.5;
    CHECK(config::parse_config(j).scenario.resolved_feedback_rate() == Approx(0.5));
    j["feedback_rate"] = "sometimes";
    CHECK_THROWS_AS(config::parse_config(j), ConfigError);
}

TEST_CASE("sweep block: values, range, and validation") {
    auto j = base_json();
    j["sweep"] = {{"parameter", "lambda_f"},
                  {"values", nlohmann::json::array({0.1, 0.2})},
                  {"replications", 2}};
    auto parsed = config::parse_config(j);
    REQUIRE(parsed.sweep);
    CHECK(parsed.sweep->values == std::vector<double>{0.1, 0.2});
    CHECK(parsed.sweep->replications == 2);

    j["sweep"] = {{"parameter", "lambda_f"},
                  {"range", {{"from", 0.1}, {"to", 0.3}, {"step", 0.1}}}};
    parsed = config::parse_config(j);
    REQUIRE(parsed.sweep);
    CHECK(parsed.sweep->values.size() == 3);

    j["sweep"] = {{"parameter", "lambda_f"}, {"values", nlohmann::json::array()}};
    CHECK_THROWS_WITH(config::parse_config(j), Catch::Matchers::ContainsSubstring("sweep.values"));

    j["sweep"] = {{"parameter", "bandwidth"}, {"values", nlohmann::json::array({1.0})}};
    CHECK_THROWS_AS(config::parse_config(j), ConfigError);

    // a sweep value that lands outside the valid domain is caught up front
    j["sweep"] = {{"parameter", "alpha_ch"}, {"values", nlohmann::json::array({0.1, 1.5})}};
    CHECK_THROWS_AS(config::parse_config(j), ConfigError);
}

TEST_CASE("validate command on a reduced grid passes and formats the table") {
    ValidateOptions opt;
    opt.deliveries = 60'000;
    opt.lambdas = {0.1, 0.5};
    opt.alphas = {0.1};
    std::ostringstream report, csv;
    int rc = cmd_validate(opt, report, &csv);
    CHECK(rc == kExitOk);
    auto text = report.str();
    CHECK(text.find("PASS") != std::string::npos);
    CHECK(text.find("prrt") != std::string::npos);
    auto lines = csv.str();
    CHECK(lines.rfind(kValidateCsvHeader, 0) == 0);
    // 2 lambdas x 1 alpha x 3 disciplines
    CHECK(std::count(lines.begin(), lines.end(), '\n') == 7);
}

TEST_CASE("under-sampled grid points warn instead of failing") {
    ValidateOptions opt;
    opt.deliveries = 100;  // warm-up swallows everything
    opt.lambdas = {0.5};
    opt.alphas = {0.1};
    std::ostringstream report;
    int rc = cmd_validate(opt, report, nullptr);
    CHECK(rc == kExitOk);
    CHECK(report.str().find("WIDE-CI") != std::string::npos);
}

TEST_CASE("sweep command emits one row per value and replication, sorted") {
    auto j = base_json();
    j["sweep"] = {{"parameter", "lambda_f"},
                  {"values", nlohmann::json::array({0.1, 0.3})},
                  {"replications", 2}};
    auto parsed = config::parse_config(j);
    std::ostringstream csv;
    int rc = cmd_sweep(parsed, csv);
    CHECK(rc == kExitOk);
    std::istringstream in(csv.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == kSweepCsvHeader);
    std::vector<std::string> rows;
    while (std::getline(in, line)) rows.push_back(line);
    REQUIRE(rows.size() == 4);
    // sweep_value column is the 8th field; replication the 9th
    auto field = [](const std::string& row, int idx) {
        std::size_t pos = 0;
        for (int i = 0; i < idx; ++i) pos = row.find(',', pos) + 1;
        return row.substr(pos, row.find(',', pos) - pos);
    };
    CHECK(field(rows[0], 7) == "0.1");
    CHECK(field(rows[0], 8) == "0");
    CHECK(field(rows[1], 7) == "0.1");
    CHECK(field(rows[1], 8) == "1");
    CHECK(field(rows[2], 7) == "0.3");
    CHECK(field(rows[3], 7) == "0.3");
}

TEST_CASE("sweep without a sweep block is a config error") {
    auto parsed = config::parse_config(base_json());
    std::ostringstream csv;
    CHECK_THROWS_AS(cmd_sweep(parsed, csv), ConfigError);
}

TEST_CASE("identical config and seed give byte-identical output") {
    auto j = base_json();
    j["sweep"] = {{"parameter", "lambda_f"}, {"values", nlohmann::json::array({0.2})}};
    auto parsed = config::parse_config(j);
    std::ostringstream a, b;
    cmd_sweep(parsed, a);
    cmd_sweep(parsed, b);
    CHECK(a.str() == b.str());

    std::ostringstream ra, rb;
    cmd_run(parsed.scenario, ra, nullptr, nullptr);
    cmd_run(parsed.scenario, rb, nullptr, nullptr);
    CHECK(ra.str() == rb.str());
    CHECK(ra.str().find("mean_paoi") == std::string::npos);  // summary uses paoi_s key
    CHECK(ra.str().find("paoi_s:") != std::string::npos);
}

TEST_CASE("run summary echoes the resolved disciplines") {
    auto j = base_json();
    j["mode"] = "dmo";
    j["setting"] = 3;
    j["n_c"] = 0;
    j["horizon"] = 100.0;
    auto parsed = config::parse_config(j);
    std::ostringstream summary, csv;
    int rc = cmd_run(parsed.scenario, summary, &csv, nullptr);
    CHECK(rc == kExitOk);
    CHECK(summary.str().find("setting=3") != std::string::npos);
    CHECK(summary.str().find("gw_discipline=replace2") != std::string::npos);
    CHECK(summary.str().find("fr_discipline=prrt") != std::string::npos);
    CHECK(csv.str().rfind(kSweepCsvHeader, 0) == 0);
}

TEST_CASE("trace stream captures events when requested") {
    auto parsed = config::parse_config(base_json());
    std::ostringstream summary, trace;
    cmd_run(parsed.scenario, summary, nullptr, &trace);
    CHECK(trace.str().find("ACCESS") != std::string::npos);
}

TEST_CASE("seed derivation is stable and spreads") {
    CHECK(derive_seed(1, 0, 0) == derive_seed(1, 0, 0));
    CHECK(derive_seed(1, 0, 0) != derive_seed(1, 0, 1));
    CHECK(derive_seed(1, 0, 0) != derive_seed(2, 0, 0));
    CHECK(derive_seed(1, 1, 0) != derive_seed(1, 0, 0));
}

TEST_CASE("floats render with nine significant digits") {
    CHECK(csv::g9(0.05767) == "0.05767");
    CHECK(csv::g9(1.0 / 3.0) == "0.333333333");
    CHECK(csv::g9(123456789.0) == "123456789");
}
