#include "margin/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "margin/errors.hpp"
#include "margin/parallel.hpp"

namespace margin {

bool initial_margin_adequate(double initial_ratio, double maintenance_ratio) {
    return initial_ratio + 1.0 >= maintenance_ratio - kAdequacyTolerance;
}

MarginSchedule margin_schedule(std::span<const double> prices, double q0, double w, double r, double loan_rate) {
    if (prices.empty()) throw ValidationError("margin schedule needs at least P0");
    if (!(q0 >= 0.0)) throw ValidationError("initial margin must be non-negative");
    for (double p : prices)
        if (!(p > 0.0)) throw ValidationError("prices must be positive");

    MarginSchedule s;
    const double p0 = prices[0];
    for (std::size_t i = 0; i < prices.size(); ++i) {
        const double loan = w * p0 * std::pow(1.0 + loan_rate, static_cast<double>(i));
        s.required.push_back(loan - prices[i]);
        s.remaining.push_back(q0 * std::pow(1.0 + r, static_cast<double>(i)) - loan + prices[i]);
    }
    return s;
}

OptimizerConfig OptimizerConfig::standard(double cpnr_target, double r, std::size_t horizon) {
    OptimizerConfig c;
    c.cpnr_target = cpnr_target;
    c.r = r;
    c.horizon = horizon;
    for (int i = 1; i <= 100; ++i) c.m_grid.push_back(i / 100.0);
    for (int i = 101; i <= 150; ++i) c.w_grid.push_back(i / 100.0);
    return c;
}

void validate(const OptimizerConfig& c) {
    if (!(c.cpnr_target > 0.0 && c.cpnr_target < 1.0)) throw ValidationError("CPNR target must lie in (0,1)");
    if (c.m_grid.empty() || c.w_grid.empty()) throw ValidationError("margin grids must be nonempty");
    if (!std::is_sorted(c.m_grid.begin(), c.m_grid.end()) || !std::is_sorted(c.w_grid.begin(), c.w_grid.end()))
        throw ValidationError("margin grids must be ascending");
    if (c.horizon < 1) throw ValidationError("loan horizon must be at least one day");
}

std::optional<MaintenanceChoice> individualized_maintenance(const CpnrEvaluator& evaluator, double p0,
                                                            double q0, double initial_ratio,
                                                            const OptimizerConfig& config) {
    for (double w : config.w_grid) {
        // w grid is ascending, so once adequacy fails it fails for the rest.
        if (!initial_margin_adequate(initial_ratio, w)) break;
        LoanQuery query{p0, q0, w, config.r, config.horizon, evaluator.start_state()};
        const double value = evaluator.evaluate(query).cpnr;
        if (value <= config.cpnr_target) return MaintenanceChoice{w, value};
    }
    return std::nullopt;
}

std::optional<MaintenanceChoice> individualized_maintenance(const TransitionModel& model, const StateSpace& space,
                                                            double p0, double q0, const OptimizerConfig& config) {
    validate(config);
    if (!(p0 > 0.0)) throw ValidationError("P0 must be positive");
    if (!(q0 >= 0.0)) throw ValidationError("initial margin must be non-negative");
    CpnrEvaluator evaluator(model, space, state_of(space, p0), config.horizon);
    return individualized_maintenance(evaluator, p0, q0, q0 / p0, config);
}

std::vector<MarginSystem> indifference_set(const TransitionModel& model, const StateSpace& space, double p0,
                                           const OptimizerConfig& config) {
    validate(config);
    if (!(p0 > 0.0)) throw ValidationError("P0 must be positive");
    CpnrEvaluator evaluator(model, space, state_of(space, p0), config.horizon);
    std::vector<MarginSystem> set;
    for (double m : config.m_grid) {
        if (auto choice = individualized_maintenance(evaluator, p0, m * p0, m, config))
            set.push_back({m, choice->w, choice->cpnr});
    }
    return set;
}

std::optional<MarginSystem> deduce_margin_system(std::span<const MarginSystem> set) {
    if (set.empty()) return std::nullopt;

    std::vector<MarginSystem> sorted(set.begin(), set.end());
    std::sort(sorted.begin(), sorted.end(), [](const MarginSystem& a, const MarginSystem& b) {
        return std::tie(a.m, a.w, a.cpnr_at_construction) < std::tie(b.m, b.w, b.cpnr_at_construction);
    });

    double m_bar = 0.0, w_bar = 0.0;
    for (const auto& s : sorted) {
        m_bar += s.m;
        w_bar += s.w;
    }
    m_bar /= static_cast<double>(sorted.size());
    w_bar /= static_cast<double>(sorted.size());

    const MarginSystem* best = nullptr;
    double best_distance = 0.0;
    for (const auto& s : sorted) {
        const double d = (s.m - m_bar) * (s.m - m_bar) + (s.w - w_bar) * (s.w - w_bar);
        // Strict improvement only: earlier entries already have smaller (m, w).
        if (best == nullptr || d < best_distance) {
            best = &s;
            best_distance = d;
        }
    }
    return *best;
}

std::optional<MarginSystem> deduced_system_at(const PriceSeries& series, std::size_t index, std::size_t depth,
                                              std::size_t group, const OptimizerConfig& config) {
    auto win = window(series, index, depth);
    auto chain = fit_chain(win.prices, group);
    chain.model.precompute(config.horizon);
    auto set = indifference_set(chain.model, chain.space, win.transaction_price(), config);
    return deduce_margin_system(set);
}

std::vector<DynamicsPoint> margin_dynamics(const PriceSeries& series, std::size_t start, std::size_t count,
                                           const DynamicsConfig& config) {
    validate(config.optimizer);
    if (count == 0) return {};
    if (start + 1 < config.depth)
        throw InsufficientHistory(config.depth, start + 1, "margin dynamics from index " + std::to_string(start));
    if (start + count > series.size())
        throw InsufficientHistory(start + count, series.size(),
                                  "margin dynamics over " + std::to_string(count) + " dates");

    std::vector<DynamicsPoint> points(count);
    parallel_for(count, [&](std::size_t i) {
        const std::size_t index = start + i;
        points[i] = DynamicsPoint{series.date(index), index, series.close(index),
                                  deduced_system_at(series, index, config.depth, config.group, config.optimizer)};
    });
    return points;
}

}  // namespace margin
