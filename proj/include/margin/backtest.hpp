#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "margin/optimizer.hpp"
#include "margin/price_series.hpp"
#include "margin/quantiles.hpp"

namespace margin {

enum class LoanMode {
    DefaultAndLiquidate,  // investor defaults at the first call; collateral sold the next day
    TopUp,                // investor meets every call with exactly the shortfall
};

std::string to_string(LoanMode mode);
LoanMode parse_loan_mode(const std::string& text);

/// Where each loan's margin system comes from.
struct SystemSource {
    enum class Kind { Deduced, Required, Fixed };
    Kind kind = Kind::Deduced;
    double m = 0.5;
    double w = 1.3;

    static SystemSource deduced() { return {Kind::Deduced, 0.5, 1.3}; }
    static SystemSource required() { return {Kind::Required, kRequiredSystem.m, kRequiredSystem.w}; }
    static SystemSource fixed(double m, double w) { return {Kind::Fixed, m, w}; }

    /// Accepts "deduced", "required" or "fixed:<m>,<w>".
    static SystemSource parse(const std::string& text);
    std::string to_string() const;
};

struct LoanOutcome {
    std::size_t start_index = 0;
    Date start_date{};
    std::size_t horizon = 0;
    double p0 = 0.0;
    double q0 = 0.0;
    MarginSystem system;
    bool fallback = false;  // deduction failed; the required system was used instead
    LoanMode mode = LoanMode::DefaultAndLiquidate;

    std::optional<std::size_t> tau;       // first day with L_i <= 0
    std::optional<std::size_t> tau_star;  // liquidation day (default mode only)
    bool margin_called = false;
    double return_amount = 0.0;
    bool negative_return = false;
    std::optional<double> cost;            // top-up mode only
    std::optional<std::size_t> num_calls;  // top-up mode only
};

/// Default-and-liquidate loan over prices P_0..P_T. Throws PreconditionError when
/// the initial margin is inadequate for w.
LoanOutcome simulate_loan_default(std::span<const double> prices, double q0, double w, double r);

/// Loan whose every margin call is met by depositing exactly the shortfall.
LoanOutcome simulate_loan_topup(std::span<const double> prices, double q0, double w, double r);

LoanOutcome simulate_loan(std::span<const double> prices, double q0, double w, double r, LoanMode mode);

struct BacktestConfig {
    std::size_t depth = 800;
    std::size_t group = 25;
    std::size_t horizon = 30;
    std::size_t loans_per_stock = 200;
    double cpnr_target = 0.05;
    double r = 0.0;
    LoanMode mode = LoanMode::DefaultAndLiquidate;
    SystemSource system = SystemSource::deduced();

    OptimizerConfig optimizer() const { return OptimizerConfig::standard(cpnr_target, r, horizon); }
    /// Closes needed so that every start date has full history and a full horizon.
    std::size_t required_length() const { return depth + loans_per_stock - 1 + horizon; }
};

void validate(const BacktestConfig& config);

struct StockReport {
    std::string ticker;
    BacktestConfig config;
    std::vector<LoanOutcome> loans;

    std::size_t num_margin_calls = 0;  // loans that received at least one call
    std::size_t num_negative_returns = 0;
    std::size_t num_fallbacks = 0;
    double negative_return_frequency = 0.0;

    QuantileTable initial_margin_ratio;
    QuantileTable maintenance_margin_ratio;
    QuantileTable cost;  // top-up mode only
};

/// Runs `loans_per_stock` loans on consecutive trading days, starting at the first
/// date with `depth` closes of history.
StockReport run_out_of_sample(const PriceSeries& series, const BacktestConfig& config);

/// True iff the share of loans with a negative return is at most `target`.
bool pass_test(const StockReport& report, double target);

/// Aggregate outcome of one margin system over a stock's loans.
struct SystemSummary {
    std::string name;  // "required" or "deduced"
    std::size_t num_margin_calls = 0;
    std::size_t num_negative_returns = 0;
    double negative_return_frequency = 0.0;
    bool passed = false;
    QuantileTable cost;
    QuantileTable initial_margin_ratio;
    QuantileTable maintenance_margin_ratio;
};

struct ComparisonReport {
    std::string ticker;
    BacktestConfig config;
    std::size_t num_loans = 0;
    std::size_t num_fallbacks = 0;
    SystemSummary required;
    SystemSummary deduced;
    /// (deduced - required) / required for each cost statistic, keyed by label.
    std::vector<std::pair<std::string, double>> cost_relative_difference;
};

/// Required (0.5, 1.3) versus deduced systems over identical loan dates. Calls and
/// negative returns come from default-and-liquidate runs, costs from top-up runs.
ComparisonReport compare_systems(const PriceSeries& series, const BacktestConfig& config);

/// Cross-stock view of several backtests: the per-stock statistic tables summarised
/// across stocks.
struct CorpusBacktest {
    std::vector<StockReport> stocks;
    std::size_t stocks_passing = 0;
    SummaryTable initial_margin_ratio;
    SummaryTable maintenance_margin_ratio;
    SummaryTable cost;
};

CorpusBacktest summarize_backtests(std::vector<StockReport> stocks, double target);

/// Cross-stock comparison: margin-call counts per system and cost summaries with
/// relative differences taken on the 0.95 column.
struct CorpusComparison {
    std::vector<ComparisonReport> stocks;
    QuantileTable required_calls;
    QuantileTable deduced_calls;
    SummaryTable required_cost;
    SummaryTable deduced_cost;
    std::vector<std::pair<std::string, double>> cost_relative_difference;
    SummaryTable deduced_initial_margin_ratio;
    SummaryTable deduced_maintenance_margin_ratio;
};

CorpusComparison summarize_comparisons(std::vector<ComparisonReport> stocks);

}  // namespace margin
