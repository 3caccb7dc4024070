// Acceptance suite: one line per criterion, non-zero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "margin/backtest.hpp"
#include "margin/cpnr.hpp"
#include "margin/markov.hpp"
#include "margin/optimizer.hpp"
#include "margin/report.hpp"
#include "oracles.hpp"

using namespace margin;
using Clock = std::chrono::steady_clock;

namespace {

constexpr double kRecursionTolerance = 1e-12;
constexpr double kTelescopeTolerance = 1e-12;
constexpr double kHandChainTolerance = 1e-12;
constexpr double kScheduleTolerance = 1e-9;
constexpr double kEnumerationMassTolerance = 1e-12;
constexpr double kPValueTolerance = 1e-3;
constexpr double kOracleCdfTolerance = 1e-8;
constexpr double kLoanTolerance = 1e-12;
constexpr double kRecursionSeconds = 10.0;
constexpr double kNegativeFrequencyCeiling = 0.08;
constexpr double kPipelineSeconds = 300.0;

constexpr std::size_t kRandomChains = 1000;
constexpr std::size_t kScheduleCases = 10000;
constexpr std::size_t kEnumerationChains = 500;
constexpr std::size_t kOptimizerChains = 100;
constexpr std::size_t kCorpusStocks = 5;

struct Verdict {
    bool pass;
    std::string detail;
};

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct RandomChain {
    oracle::Dense p1;
    std::vector<double> reps;
    LoanQuery query;
};

RandomChain random_chain(std::mt19937_64& rng, std::size_t max_n, std::size_t max_t) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, max_n)(rng);
    RandomChain c;
    c.p1 = oracle::random_stochastic(n, rng, 0.2);
    double price = 5.0 + 10.0 * unit(rng);
    for (std::size_t i = 0; i < n; ++i) {
        c.reps.push_back(price);
        price *= 1.0 + 0.01 + 0.15 * unit(rng);
    }
    auto& q = c.query;
    q.horizon = std::uniform_int_distribution<std::size_t>(1, max_t)(rng);
    q.state = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    q.p0 = c.reps[q.state];
    q.w = 1.0 + 0.5 * unit(rng);
    q.q0 = q.p0 * unit(rng);
    q.r = 0.001 * unit(rng);
    return c;
}

// Criteria 1 and 2 share the same random cases.
struct RecursionSweep {
    double max_gap = 0.0;
    double max_telescope = 0.0;
    std::size_t ab_violations = 0;
    double seconds = 0.0;
};

RecursionSweep recursion_sweep() {
    std::mt19937_64 rng(1001);
    RecursionSweep s;
    const auto start = Clock::now();
    for (std::size_t trial = 0; trial < kRandomChains; ++trial) {
        auto c = random_chain(rng, 6, 5);
        auto space = oracle::space_from(c.reps);
        TransitionModel model(oracle::to_matrix(c.p1));
        auto got = cpnr(model, space, c.query);
        auto want = oracle::dense_cpnr(c.p1, c.reps, c.query.p0, c.query.q0, c.query.w, c.query.r, c.query.horizon,
                                       c.query.state + 1);
        s.max_gap = std::max({s.max_gap, std::abs(got.prob_B - want.prob_B), std::abs(got.prob_AB - want.prob_AB),
                              std::abs(got.cpnr - want.cpnr)});
        s.max_telescope = std::max(s.max_telescope, std::abs(got.prob_B + got.survival_product - 1.0));
        if (got.prob_AB > got.prob_B + kTelescopeTolerance) ++s.ab_violations;
    }
    s.seconds = seconds_since(start);
    return s;
}

Verdict recursion_fidelity(const RecursionSweep& s) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%zu chains, max |recursion - dense| = %.3g, %.2f s", kRandomChains, s.max_gap,
                  s.seconds);
    return {s.max_gap <= kRecursionTolerance && s.seconds < kRecursionSeconds, buf};
}

Verdict telescoping(const RecursionSweep& s) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "max |prob_B + survival - 1| = %.3g, prob_AB > prob_B in %zu cases",
                  s.max_telescope, s.ab_violations);
    return {s.max_telescope <= kTelescopeTolerance && s.ab_violations == 0, buf};
}

Verdict hand_chain() {
    auto space = oracle::space_from({10.05, 10.25, 10.5});
    TransitionModel uniform(Matrix(3, 1.0 / 3.0));
    auto r = cpnr(uniform, space, LoanQuery{10.5, 0.3, 1.0, 0.0, 2, 2});
    const bool ok = std::abs(r.prob_B - 5.0 / 9) <= kHandChainTolerance &&
                    std::abs(r.prob_AB - 1.0 / 3) <= kHandChainTolerance &&
                    std::abs(r.cpnr - 3.0 / 5) <= kHandChainTolerance;
    char buf[160];
    std::snprintf(buf, sizeof buf, "prob_B = %.15f, prob_AB = %.15f, cpnr = %.15f", r.prob_B, r.prob_AB, r.cpnr);
    return {ok, buf};
}

Verdict zero_denominator() {
    std::mt19937_64 rng(4);
    std::size_t cases = 0, nonzero = 0;
    for (int trial = 0; trial < 500; ++trial) {
        auto c = random_chain(rng, 8, 30);
        // Q0 above w P0 (1+r)^T pushes every call threshold below zero.
        c.query.q0 = c.query.w * c.query.p0 * std::pow(1.0 + c.query.r, double(c.query.horizon)) + 1.0;
        auto space = oracle::space_from(c.reps);
        bool all_zero = true;
        for (std::size_t t = 1; t <= c.query.horizon; ++t)
            all_zero = all_zero && call_threshold_index(space, c.query, t) == 0;
        if (!all_zero) continue;
        ++cases;
        auto r = cpnr(TransitionModel(oracle::to_matrix(c.p1)), space, c.query);
        if (r.cpnr != 0.0 || r.prob_B != 0.0) ++nonzero;
    }
    return {cases > 0 && nonzero == 0, std::to_string(cases) + " queries with k_m = 0 for all m, " +
                                           std::to_string(nonzero) + " with nonzero CPNR"};
}

Verdict schedule_identity() {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    for (std::size_t trial = 0; trial < kScheduleCases; ++trial) {
        std::vector<double> prices(1 + trial % 60);
        for (auto& p : prices) p = 0.5 + 200.0 * unit(rng);
        const double q0 = prices[0] * unit(rng), w = 1.0 + unit(rng), r = 0.002 * unit(rng);
        auto s = margin_schedule(prices, q0, w, r, r);
        for (std::size_t i = 0; i < prices.size(); ++i)
            worst = std::max(worst, std::abs(s.required[i] + s.remaining[i] - q0 * std::pow(1.0 + r, double(i))));
    }
    char buf[120];
    std::snprintf(buf, sizeof buf, "%zu parameterizations, max deviation %.3g", kScheduleCases, worst);
    return {worst <= kScheduleTolerance, buf};
}

Verdict enumeration_diagnostic() {
    std::mt19937_64 rng(6);
    double max_gap_b = 0.0, max_gap_ab = 0.0, mean_gap_b = 0.0, worst_mass = 0.0;
    for (std::size_t trial = 0; trial < kEnumerationChains; ++trial) {
        auto c = random_chain(rng, 5, 5);
        auto space = oracle::space_from(c.reps);
        TransitionModel model(oracle::to_matrix(c.p1));
        auto exact = cpnr_exact_enumeration(model, space, c.query);
        auto rec = cpnr(model, space, c.query);
        double mass = 0.0;
        for (double b : exact.per_day_first_call) mass += b;
        worst_mass = std::max(worst_mass, mass - 1.0);
        max_gap_b = std::max(max_gap_b, std::abs(exact.prob_B - rec.prob_B));
        max_gap_ab = std::max(max_gap_ab, std::abs(exact.prob_AB - rec.prob_AB));
        mean_gap_b += std::abs(exact.prob_B - rec.prob_B) / kEnumerationChains;
    }
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "%zu chains, |exact - recursion| prob_B max %.3g mean %.3g, prob_AB max %.3g; "
                  "max excess of exact mass over 1 = %.3g",
                  kEnumerationChains, max_gap_b, mean_gap_b, max_gap_ab, std::max(worst_mass, 0.0));
    return {worst_mass <= kEnumerationMassTolerance, buf};
}

Verdict chi_square() {
    auto independent =
        markov_chi_square_test(CountMatrix::from_counts({{6, 3, 9}, {4, 2, 6}, {2, 1, 3}}));
    std::vector<std::vector<std::uint64_t>> f(17, std::vector<std::uint64_t>(17, 1));
    for (std::size_t i = 0; i < 17; ++i) f[i][i] = 9;
    auto seventeen = markov_chi_square_test(CountMatrix::from_counts(f));
    const double p = chi_square_upper_tail(3.841, 1);
    const double reference = oracle::chi_square_upper_tail(3.841, 1);
    const bool ok = independent.chi_square == 0.0 && independent.p_value == 1.0 &&
                    seventeen.degrees_of_freedom == 256 && std::abs(p - 0.05) <= kPValueTolerance &&
                    std::abs(p - reference) <= kOracleCdfTolerance;
    char buf[200];
    std::snprintf(buf, sizeof buf, "independent chi2 = %g p = %g; df(17 states) = %zu; p(1, 3.841) = %.6f vs numerical %.6f",
                  independent.chi_square, independent.p_value, static_cast<std::size_t>(seventeen.degrees_of_freedom), p,
                  reference);
    return {ok, buf};
}

Verdict optimizer_minimality() {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::size_t violations = 0, feasible = 0, borderline = 0;
    for (std::size_t trial = 0; trial < kOptimizerChains; ++trial) {
        auto c = random_chain(rng, 6, 8);
        auto space = oracle::space_from(c.reps);
        TransitionModel model(oracle::to_matrix(c.p1));
        auto config = OptimizerConfig::standard(0.02 + 0.4 * unit(rng), c.query.r, c.query.horizon);
        const int m_pct = std::uniform_int_distribution<int>(1, 100)(rng);
        const double p0 = c.query.p0, q0 = p0 * (m_pct / 100.0);
        auto choice = individualized_maintenance(model, space, p0, q0, config);

        // Exhaustive scan with integer-exact adequacy and the dense oracle.
        int first = 0;
        bool near = false;
        for (int w_pct = 101; w_pct <= 150 && first == 0; ++w_pct) {
            if (m_pct + 100 < w_pct) break;
            const double v =
                oracle::dense_cpnr(c.p1, c.reps, p0, q0, w_pct / 100.0, c.query.r, c.query.horizon, c.query.state + 1)
                    .cpnr;
            near = near || std::abs(v - config.cpnr_target) < 1e-12;
            if (v <= config.cpnr_target) first = w_pct;
        }
        if (near) {
            ++borderline;
            continue;
        }
        if (first != 0) ++feasible;
        const bool agree = first == 0 ? !choice : (choice && std::lround(choice->w * 100) == first);
        if (!agree) ++violations;
    }
    return {violations == 0, std::to_string(kOptimizerChains) + " chains, " + std::to_string(feasible) +
                                 " feasible, " + std::to_string(borderline) + " skipped at the target boundary, " +
                                 std::to_string(violations) + " disagreements with exhaustive scan"};
}

Verdict backtest_hand_cases() {
    std::vector<double> a{10, 9, 7.5, 8}, b{10, 9, 6, 8}, flat{10, 10, 10}, top{10, 8, 10, 10};
    auto la = simulate_loan_default(a, 3.0, 1.3, 0.0);
    auto lb = simulate_loan_default(b, 3.0, 1.3, 0.0);
    auto lf = simulate_loan_default(flat, 4.0, 1.3, 0.0);
    auto lt = simulate_loan_topup(top, 4.0, 1.3, 0.0);
    const bool ok = la.tau == 1u && la.tau_star == 2u && std::abs(la.return_amount - 0.5) <= kLoanTolerance &&
                    !la.negative_return && lb.tau == 1u && lb.tau_star == 2u &&
                    std::abs(lb.return_amount + 1.0) <= kLoanTolerance && lb.negative_return && !lf.tau &&
                    lf.return_amount == 4.0 && lt.num_calls == 1u && std::abs(*lt.cost - 5.0) <= kLoanTolerance;
    char buf[200];
    std::snprintf(buf, sizeof buf, "returns %.3f / %.3f / %.3f, top-up cost %.3f with %zu call(s)", la.return_amount,
                  lb.return_amount, lf.return_amount, *lt.cost, *lt.num_calls);
    return {ok, buf};
}

std::vector<PriceSeries> corpus() {
    std::vector<PriceSeries> stocks;
    for (std::size_t k = 0; k < kCorpusStocks; ++k) {
        SyntheticSpec spec;
        spec.length = 1030;
        spec.start_price = 10.0;
        spec.steps = {{0.99, 0.5}, {1.01, 0.5}};
        spec.seed = 1000 + k;
        spec.ticker = "SYN" + std::to_string(k + 1);
        stocks.push_back(generate_synthetic(spec));
    }
    return stocks;
}

Verdict pipeline(const std::vector<PriceSeries>& stocks) {
    BacktestConfig config;
    config.r = 0.0001;
    const auto start = Clock::now();
    double worst = 0.0;
    std::size_t loans = 0, fallbacks = 0, calls = 0;
    for (const auto& s : stocks) {
        auto report = run_out_of_sample(s, config);
        worst = std::max(worst, report.negative_return_frequency);
        loans += report.loans.size();
        fallbacks += report.num_fallbacks;
        calls += report.num_margin_calls;
    }
    const double elapsed = seconds_since(start);
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "%zu stocks x 200 loans, worst negative-return frequency %.3f, %zu calls, %zu fallbacks, %.1f s",
                  stocks.size(), worst, calls, fallbacks, elapsed);
    return {loans == stocks.size() * 200 && worst <= kNegativeFrequencyCeiling && elapsed <= kPipelineSeconds, buf};
}

bool has_keys(const Json& j, const std::vector<std::string>& keys) {
    if (!j.is_object() || j.size() != keys.size()) return false;
    return std::all_of(keys.begin(), keys.end(), [&](const std::string& k) { return j.contains(k); });
}

Verdict comparison_schema(const std::vector<PriceSeries>& stocks) {
    BacktestConfig config;
    config.r = 0.0001;
    std::vector<ComparisonReport> reports;
    for (const auto& s : stocks) reports.push_back(compare_systems(s, config));
    auto summary = summarize_comparisons(reports);
    auto j = make_report(summary).json;

    const std::vector<std::string> call_columns{"min", "max", "mean", "q30", "q50", "q80", "q90", "q95", "q99"};
    const std::vector<std::string> cost_columns{"min", "max", "mean", "q70", "q80", "q90", "q95"};
    const std::vector<std::string> cost_rows{"minimum", "maximum", "mean", "q20", "q30", "q40",
                                             "q50",     "q60",     "q70",  "q80", "q90", "q95"};
    bool ok = has_keys(j["margin_calls"]["required"], call_columns) &&
              has_keys(j["margin_calls"]["deduced"], call_columns);
    for (const char* side : {"required", "deduced"}) {
        const auto& t = j["cost"][side];
        ok = ok && t["columns"] == Json(cost_columns) && has_keys(t["rows"], cost_rows);
    }
    ok = ok && has_keys(j["cost"]["relative_difference_q95"], cost_rows);
    for (const auto& r : reports) ok = ok && r.cost_relative_difference.size() == cost_rows.size();

    char buf[240];
    std::snprintf(buf, sizeof buf,
                  "mean calls required %.2f vs deduced %.2f; RD(mean, q95 column) = %.4f; %zu RD fields",
                  summary.required_calls.at("mean"), summary.deduced_calls.at("mean"),
                  summary.cost_relative_difference.empty() ? 0.0 : summary.cost_relative_difference[2].second,
                  summary.cost_relative_difference.size());
    return {ok, buf};
}

}  // namespace

int main() {
    const auto sweep = recursion_sweep();
    const auto stocks = corpus();
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"recursion fidelity", [&] { return recursion_fidelity(sweep); }},
        {"telescoping identity", [&] { return telescoping(sweep); }},
        {"hand-worked chain", hand_chain},
        {"zero-denominator rule", zero_denominator},
        {"margin split identity", schedule_identity},
        {"enumeration diagnostic", enumeration_diagnostic},
        {"chi-square test", chi_square},
        {"optimizer minimality", optimizer_minimality},
        {"backtest hand cases", backtest_hand_cases},
        {"end-to-end synthetic pipeline", [&] { return pipeline(stocks); }},
        {"comparison report", [&] { return comparison_schema(stocks); }},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v{false, ""};
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        failures += v.pass ? 0 : 1;
        std::printf("%s %2zu %s: %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), v.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
