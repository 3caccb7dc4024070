#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "margin/errors.hpp"
#include "margin/report.hpp"

using namespace margin;

namespace {

std::string render(const Report& report, ReportFormat format) {
    std::ostringstream out;
    write_report(report, format, out);
    return out.str();
}

StockReport tiny_backtest(std::uint64_t seed) {
    SyntheticSpec spec;
    spec.length = 140;
    spec.steps = {{0.95, 0.5}, {1.05, 0.5}};
    spec.seed = seed;
    spec.ticker = "T" + std::to_string(seed);
    BacktestConfig config;
    config.depth = 100;
    config.group = 6;
    config.horizon = 8;
    config.loans_per_stock = 30;
    config.mode = LoanMode::TopUp;
    return run_out_of_sample(generate_synthetic(spec), config);
}

}  // namespace

TEST_CASE("canonical json") {
    Json j = {{"zeta", 1.0 / 3}, {"alpha", 2}, {"mid", {{"b", -0.0}, {"a", nullptr}}}, {"gone", nullptr},
              {"list", {1.5, 2, nullptr}}};
    CHECK(canonical_json(j) == R"({"alpha":2,"list":[1.500000,2],"mid":{"b":0.000000},"zeta":0.333333})");
    CHECK(format_decimal(-1e-9) == "0.000000");
    CHECK(format_decimal(2.5) == "2.500000");
}

TEST_CASE("same report twice is byte-identical") {
    auto a = make_report(tiny_backtest(3));
    auto b = make_report(tiny_backtest(3));
    CHECK(render(a, ReportFormat::Json) == render(b, ReportFormat::Json));
    CHECK(render(a, ReportFormat::Csv) == render(b, ReportFormat::Csv));
}

TEST_CASE("quantile tables as csv") {
    std::vector<double> samples{1, 2, 3, 4};
    auto table = to_csv("t", quantile_analysis(samples, summary_levels()));
    CHECK(table.header == std::vector<std::string>{"statistic", "value"});
    CHECK(table.rows.front() == std::vector<std::string>{"min", "1.000000"});

    std::vector<StockReport> stocks{tiny_backtest(1), tiny_backtest(2), tiny_backtest(3)};
    auto corpus = summarize_backtests(stocks, 0.05);
    auto csv = to_csv("initial", corpus.initial_margin_ratio);
    CHECK(csv.header == std::vector<std::string>{"statistic", "min", "max", "mean", "q70", "q80", "q90", "q95"});
    CHECK(csv.rows.front().front() == "minimum");
    CHECK(csv.rows.size() == 3 + per_stock_levels().size());

    auto text = render(make_report(corpus), ReportFormat::Csv);
    CHECK(text.find("statistic,min,max,mean,q70,q80,q90,q95\n") != std::string::npos);
}

TEST_CASE("empty sections are omitted, never null") {
    CpnrResult r;
    r.per_day_call_probs = {0.5};
    r.per_day_loss_and_call = {0.25};
    auto text = render(make_report(r), ReportFormat::Json);
    CHECK(text.find("null") == std::string::npos);

    auto report = tiny_backtest(5);
    report.config.mode = LoanMode::DefaultAndLiquidate;
    report.cost = QuantileTable{};
    for (auto& loan : report.loans) {
        loan.cost.reset();
        loan.num_calls.reset();
        loan.tau.reset();
        loan.tau_star.reset();
    }
    auto json_text = render(make_report(report), ReportFormat::Json);
    CHECK(json_text.find("null") == std::string::npos);
    CHECK(json_text.find("\"cost\"") == std::string::npos);
    CHECK(json_text.find("\"tau\"") == std::string::npos);
    CHECK(json_text.find("negative_return_frequency") != std::string::npos);
    CHECK(json_text.find("quantile_method") != std::string::npos);
}

TEST_CASE("comparison report carries both systems and relative differences") {
    SyntheticSpec spec;
    spec.length = 140;
    spec.steps = {{0.95, 0.5}, {1.05, 0.5}};
    BacktestConfig config;
    config.depth = 100;
    config.group = 6;
    config.horizon = 8;
    config.loans_per_stock = 30;
    auto cmp = compare_systems(generate_synthetic(spec), config);
    auto j = make_report(cmp).json;
    for (const char* side : {"required", "deduced"}) {
        CHECK(j[side].contains("num_margin_calls"));
        CHECK(j[side].contains("cost"));
    }
    CHECK(j.contains("cost_relative_difference"));
    auto corpus = make_report(summarize_comparisons({cmp})).json;
    for (const char* side : {"required", "deduced"}) {
        CHECK(corpus["margin_calls"][side].contains("mean"));
        CHECK(corpus["margin_calls"][side].contains("q99"));
        CHECK(corpus["cost"][side]["rows"].contains("mean"));
        CHECK(corpus["cost"][side]["columns"].size() == 7);
    }
    CHECK(corpus["cost"].contains("relative_difference_q95"));
}

TEST_CASE("emit to file and unwritable destinations") {
    auto report = make_report(MarkovTestResult{12.8, 1, 0.000347, 2});
    auto path = std::filesystem::temp_directory_path() / "margin_report_test.json";
    emit_report(report, ReportFormat::Json, path);
    std::ifstream in(path);
    std::string content((std::istreambuf_iterator<char>(in)), {});
    std::filesystem::remove(path);
    CHECK(content == render(report, ReportFormat::Json));
    CHECK_THROWS_AS(emit_report(report, ReportFormat::Json, std::filesystem::path("/nonexistent/dir/r.json")),
                    IoError);
    CHECK(parse_report_format("csv") == ReportFormat::Csv);
    CHECK_THROWS_AS(parse_report_format("xml"), ValidationError);
}
