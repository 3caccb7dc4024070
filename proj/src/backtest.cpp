#include "margin/backtest.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include "margin/cpnr.hpp"
#include "margin/errors.hpp"
#include "margin/markov.hpp"
#include "margin/parallel.hpp"

namespace margin {

std::string to_string(LoanMode mode) {
    return mode == LoanMode::TopUp ? "topup" : "default";
}

LoanMode parse_loan_mode(const std::string& text) {
    if (text == "default") return LoanMode::DefaultAndLiquidate;
    if (text == "topup" || text == "top-up") return LoanMode::TopUp;
    throw ValidationError("unknown loan mode '" + text + "' (expected default or topup)");
}

SystemSource SystemSource::parse(const std::string& text) {
    if (text == "deduced") return deduced();
    if (text == "required") return required();
    const std::string prefix = "fixed:";
    if (text.rfind(prefix, 0) == 0) {
        const std::string body = text.substr(prefix.size());
        const auto comma = body.find(',');
        double m = 0.0, w = 0.0;
        if (comma != std::string::npos) {
            const char* b = body.data();
            auto r1 = std::from_chars(b, b + comma, m);
            auto r2 = std::from_chars(b + comma + 1, b + body.size(), w);
            if (r1.ec == std::errc{} && r1.ptr == b + comma && r2.ec == std::errc{} && r2.ptr == b + body.size())
                return fixed(m, w);
        }
    }
    throw ValidationError("unknown margin system '" + text + "' (expected deduced, required or fixed:m,w)");
}

std::string SystemSource::to_string() const {
    switch (kind) {
        case Kind::Deduced: return "deduced";
        case Kind::Required: return "required";
        case Kind::Fixed: break;
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "fixed:%g,%g", m, w);
    return buf;
}

namespace {

void check_loan_inputs(std::span<const double> prices, double q0, double w) {
    if (prices.size() < 2) throw ValidationError("loan needs P_0 and at least one future price");
    for (double p : prices)
        if (!(p > 0.0)) throw ValidationError("loan prices must be positive");
    if (!(q0 >= 0.0)) throw ValidationError("initial margin must be non-negative");
    if (!initial_margin_adequate(q0 / prices[0], w))
        throw PreconditionError("initial margin inadequate: Q0/P0 + 1 < w violates the adequacy condition m0 + 1 >= w");
}

double grow(double amount, double r, std::size_t days) {
    return amount * std::pow(1.0 + r, static_cast<double>(days));
}

}  // namespace

LoanOutcome simulate_loan_default(std::span<const double> prices, double q0, double w, double r) {
    check_loan_inputs(prices, q0, w);
    const std::size_t horizon = prices.size() - 1;
    const double p0 = prices[0];
    const auto schedule = margin_schedule(prices, q0, w, r, r);

    LoanOutcome out;
    out.mode = LoanMode::DefaultAndLiquidate;
    out.horizon = horizon;
    out.p0 = p0;
    out.q0 = q0;
    out.system = {q0 / p0, w, 0.0};

    std::size_t settle = horizon;
    for (std::size_t i = 1; i <= horizon; ++i) {
        if (schedule.remaining[i] <= 0.0) {
            out.tau = i;
            out.tau_star = std::min(i + 1, horizon);
            out.margin_called = true;
            settle = *out.tau_star;
            break;
        }
    }
    out.return_amount = prices[settle] + grow(q0, r, settle) - grow(p0, r, settle);
    out.negative_return = out.margin_called && out.return_amount < 0.0;
    return out;
}

LoanOutcome simulate_loan_topup(std::span<const double> prices, double q0, double w, double r) {
    check_loan_inputs(prices, q0, w);
    const std::size_t horizon = prices.size() - 1;
    const double p0 = prices[0];

    LoanOutcome out;
    out.mode = LoanMode::TopUp;
    out.horizon = horizon;
    out.p0 = p0;
    out.q0 = q0;
    out.system = {q0 / p0, w, 0.0};

    double account = q0;
    std::size_t calls = 0;
    for (std::size_t i = 1; i <= horizon; ++i) {
        account *= 1.0 + r;
        const double requirement = grow(w * p0, r, i) - prices[i];
        if (account <= requirement) {
            if (!out.tau) out.tau = i;
            out.margin_called = true;
            const double deposit = requirement - account;
            if (deposit > 0.0) {
                ++calls;
                account += deposit;
            }
        }
    }
    out.cost = account;
    out.num_calls = calls;
    out.return_amount = prices[horizon] + account - grow(p0, r, horizon);
    out.negative_return = false;
    return out;
}

LoanOutcome simulate_loan(std::span<const double> prices, double q0, double w, double r, LoanMode mode) {
    return mode == LoanMode::TopUp ? simulate_loan_topup(prices, q0, w, r) : simulate_loan_default(prices, q0, w, r);
}

void validate(const BacktestConfig& c) {
    if (c.depth < 2) throw ValidationError("depth must be at least 2");
    if (c.group < 1) throw ValidationError("group size must be at least 1");
    if (c.horizon < 1) throw ValidationError("horizon must be at least 1");
    if (c.loans_per_stock < 1) throw ValidationError("at least one loan per stock is required");
    if (!(c.cpnr_target > 0.0 && c.cpnr_target < 1.0)) throw ValidationError("CPNR target must lie in (0,1)");
    if (!(c.r > -1.0)) throw ValidationError("daily rate must exceed -1");
    if (c.system.kind != SystemSource::Kind::Deduced) {
        if (!(c.system.m > 0.0) || !(c.system.w > 0.0)) throw ValidationError("margin ratios must be positive");
        if (!initial_margin_adequate(c.system.m, c.system.w))
            throw PreconditionError("fixed margin system violates the adequacy condition m + 1 >= w");
    }
}

namespace {

void require_length(const PriceSeries& series, const BacktestConfig& config) {
    if (series.size() < config.required_length())
        throw InsufficientHistory(config.required_length(), series.size(),
                                  "out-of-sample test of " + std::to_string(config.loans_per_stock) +
                                      " loans with depth " + std::to_string(config.depth) + " and horizon " +
                                      std::to_string(config.horizon) + " on " + series.ticker());
}

struct LoanPlan {
    std::size_t index = 0;
    double p0 = 0.0;
    MarginSystem deduced;
    MarginSystem required;
    bool fallback = false;
};

// Fits the chain on the window ending at `index`, deduces the margin system and
// evaluates the CPNR of the required system on the same chain.
LoanPlan plan_loan(const PriceSeries& series, std::size_t index, const BacktestConfig& config,
                   const OptimizerConfig& optimizer, const MarginSystem& fixed, bool want_deduced) {
    LoanPlan plan;
    plan.index = index;
    auto win = window(series, index, config.depth);
    plan.p0 = win.transaction_price();
    auto chain = fit_chain(win.prices, config.group);
    chain.model.precompute(config.horizon);
    CpnrEvaluator evaluator(chain.model, chain.space, state_of(chain.space, plan.p0), config.horizon);

    LoanQuery query{plan.p0, fixed.m * plan.p0, fixed.w, config.r, config.horizon, evaluator.start_state()};
    plan.required = {fixed.m, fixed.w, evaluator.evaluate(query).cpnr};

    if (want_deduced) {
        std::vector<MarginSystem> set;
        for (double m : optimizer.m_grid)
            if (auto choice = individualized_maintenance(evaluator, plan.p0, m * plan.p0, m, optimizer))
                set.push_back({m, choice->w, choice->cpnr});
        if (auto best = deduce_margin_system(set)) {
            plan.deduced = *best;
        } else {
            plan.deduced = plan.required;
            plan.fallback = true;
        }
    }
    return plan;
}

LoanOutcome run_loan(const PriceSeries& series, const LoanPlan& plan, const MarginSystem& system, bool fallback,
                     const BacktestConfig& config, LoanMode mode) {
    auto prices = series.closes().subspan(plan.index, config.horizon + 1);
    auto out = simulate_loan(prices, system.m * plan.p0, system.w, config.r, mode);
    out.start_index = plan.index;
    out.start_date = series.date(plan.index);
    out.system = system;
    out.fallback = fallback;
    return out;
}

QuantileTable ratio_table(const std::vector<LoanOutcome>& loans, bool maintenance) {
    std::vector<double> values;
    for (const auto& l : loans) values.push_back(maintenance ? l.system.w : l.system.m);
    return quantile_analysis(values, per_stock_levels());
}

QuantileTable cost_table(const std::vector<LoanOutcome>& loans) {
    std::vector<double> values;
    for (const auto& l : loans)
        if (l.cost) values.push_back(*l.cost);
    return quantile_analysis(values, per_stock_levels());
}

}  // namespace

StockReport run_out_of_sample(const PriceSeries& series, const BacktestConfig& config) {
    validate(config);
    require_length(series, config);

    const bool deduced = config.system.kind == SystemSource::Kind::Deduced;
    const MarginSystem fixed = deduced ? kRequiredSystem : MarginSystem{config.system.m, config.system.w, 0.0};
    const auto optimizer = config.optimizer();

    StockReport report;
    report.ticker = series.ticker();
    report.config = config;
    report.loans.resize(config.loans_per_stock);

    parallel_for(config.loans_per_stock, [&](std::size_t i) {
        const auto plan = plan_loan(series, config.depth - 1 + i, config, optimizer, fixed, deduced);
        const auto& system = deduced ? plan.deduced : plan.required;
        report.loans[i] = run_loan(series, plan, system, plan.fallback, config, config.mode);
    });

    for (const auto& l : report.loans) {
        report.num_margin_calls += l.margin_called ? 1 : 0;
        report.num_negative_returns += l.negative_return ? 1 : 0;
        report.num_fallbacks += l.fallback ? 1 : 0;
    }
    report.negative_return_frequency =
        static_cast<double>(report.num_negative_returns) / static_cast<double>(report.loans.size());
    report.initial_margin_ratio = ratio_table(report.loans, false);
    report.maintenance_margin_ratio = ratio_table(report.loans, true);
    if (config.mode == LoanMode::TopUp) report.cost = cost_table(report.loans);
    return report;
}

bool pass_test(const StockReport& report, double target) {
    if (report.loans.empty()) throw ValidationError("pass test needs at least one loan");
    return static_cast<double>(report.num_negative_returns) <= target * static_cast<double>(report.loans.size());
}

ComparisonReport compare_systems(const PriceSeries& series, const BacktestConfig& config) {
    validate(config);
    require_length(series, config);
    const auto optimizer = config.optimizer();
    const std::size_t count = config.loans_per_stock;

    std::vector<LoanOutcome> req_default(count), req_topup(count), ded_default(count), ded_topup(count);
    parallel_for(count, [&](std::size_t i) {
        const auto plan = plan_loan(series, config.depth - 1 + i, config, optimizer, kRequiredSystem, true);
        req_default[i] = run_loan(series, plan, plan.required, false, config, LoanMode::DefaultAndLiquidate);
        req_topup[i] = run_loan(series, plan, plan.required, false, config, LoanMode::TopUp);
        ded_default[i] = run_loan(series, plan, plan.deduced, plan.fallback, config, LoanMode::DefaultAndLiquidate);
        ded_topup[i] = run_loan(series, plan, plan.deduced, plan.fallback, config, LoanMode::TopUp);
    });

    auto summarize_side = [&](std::string name, const std::vector<LoanOutcome>& def,
                              const std::vector<LoanOutcome>& top) {
        SystemSummary s;
        s.name = std::move(name);
        for (const auto& l : def) {
            s.num_margin_calls += l.margin_called ? 1 : 0;
            s.num_negative_returns += l.negative_return ? 1 : 0;
        }
        s.negative_return_frequency = static_cast<double>(s.num_negative_returns) / static_cast<double>(count);
        s.passed = static_cast<double>(s.num_negative_returns) <= config.cpnr_target * static_cast<double>(count);
        s.cost = cost_table(top);
        s.initial_margin_ratio = ratio_table(def, false);
        s.maintenance_margin_ratio = ratio_table(def, true);
        return s;
    };

    ComparisonReport report;
    report.ticker = series.ticker();
    report.config = config;
    report.num_loans = count;
    for (const auto& l : ded_default) report.num_fallbacks += l.fallback ? 1 : 0;
    report.required = summarize_side("required", req_default, req_topup);
    report.deduced = summarize_side("deduced", ded_default, ded_topup);
    for (const auto& [label, required_value] : report.required.cost.entries()) {
        if (required_value == 0.0) continue;
        report.cost_relative_difference.emplace_back(
            label, (report.deduced.cost.at(label) - required_value) / required_value);
    }
    return report;
}

CorpusBacktest summarize_backtests(std::vector<StockReport> stocks, double target) {
    CorpusBacktest corpus;
    std::vector<QuantileTable> initial, maintenance, cost;
    for (const auto& s : stocks) {
        corpus.stocks_passing += pass_test(s, target) ? 1 : 0;
        initial.push_back(s.initial_margin_ratio);
        maintenance.push_back(s.maintenance_margin_ratio);
        if (!s.cost.empty()) cost.push_back(s.cost);
    }
    corpus.initial_margin_ratio = summarize(initial, summary_levels());
    corpus.maintenance_margin_ratio = summarize(maintenance, summary_levels());
    if (cost.size() == stocks.size()) corpus.cost = summarize(cost, summary_levels());
    corpus.stocks = std::move(stocks);
    return corpus;
}

CorpusComparison summarize_comparisons(std::vector<ComparisonReport> stocks) {
    CorpusComparison corpus;
    if (stocks.empty()) return corpus;
    std::vector<double> req_calls, ded_calls;
    std::vector<QuantileTable> req_cost, ded_cost, ded_initial, ded_maintenance;
    for (const auto& s : stocks) {
        req_calls.push_back(static_cast<double>(s.required.num_margin_calls));
        ded_calls.push_back(static_cast<double>(s.deduced.num_margin_calls));
        req_cost.push_back(s.required.cost);
        ded_cost.push_back(s.deduced.cost);
        ded_initial.push_back(s.deduced.initial_margin_ratio);
        ded_maintenance.push_back(s.deduced.maintenance_margin_ratio);
    }
    corpus.required_calls = quantile_analysis(req_calls, call_count_levels());
    corpus.deduced_calls = quantile_analysis(ded_calls, call_count_levels());
    corpus.required_cost = summarize(req_cost, summary_levels());
    corpus.deduced_cost = summarize(ded_cost, summary_levels());
    corpus.deduced_initial_margin_ratio = summarize(ded_initial, summary_levels());
    corpus.deduced_maintenance_margin_ratio = summarize(ded_maintenance, summary_levels());

    const std::string column = quantile_label(0.95);
    for (std::size_t r = 0; r < corpus.required_cost.rows.size(); ++r) {
        const auto& [name, req_row] = corpus.required_cost.rows[r];
        const double base = req_row.at(column);
        if (base == 0.0) continue;
        corpus.cost_relative_difference.emplace_back(name, (corpus.deduced_cost.rows[r].second.at(column) - base) / base);
    }
    corpus.stocks = std::move(stocks);
    return corpus;
}

}  // namespace margin
