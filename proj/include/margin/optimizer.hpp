#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "margin/cpnr.hpp"
#include "margin/markov.hpp"
#include "margin/price_series.hpp"

namespace margin {

/// Slack in the m + 1 >= w comparison.
inline constexpr double kAdequacyTolerance = 1e-12;

/// True iff the initial margin ratio covers the maintenance requirement on day 0.
bool initial_margin_adequate(double initial_ratio, double maintenance_ratio);

struct MarginSchedule {
    std::vector<double> required;   // Sigma_i, i = 0..T
    std::vector<double> remaining;  // L_i
};

/// Required and remaining margin on each day of `prices` (P_0..P_T) before any call.
MarginSchedule margin_schedule(std::span<const double> prices, double q0, double w, double r,
                               double loan_rate);

struct MarginSystem {
    double m = 0.5;
    double w = 1.3;
    double cpnr_at_construction = 0.0;

    friend bool operator==(const MarginSystem&, const MarginSystem&) = default;
};

inline constexpr MarginSystem kRequiredSystem{0.5, 1.3, 0.0};

struct OptimizerConfig {
    double cpnr_target = 0.05;
    std::vector<double> m_grid;
    std::vector<double> w_grid;
    double r = 0.0;
    std::size_t horizon = 30;

    /// m in 0.01..1.00 and w in 1.01..1.50, both in steps of 0.01.
    static OptimizerConfig standard(double cpnr_target = 0.05, double r = 0.0, std::size_t horizon = 30);
};

void validate(const OptimizerConfig& config);

struct MaintenanceChoice {
    double w;
    double cpnr;
};

/// Smallest grid w meeting both the CPNR target and initial-margin adequacy for
/// the given initial margin amount. Scans upward and stops at the first success.
std::optional<MaintenanceChoice> individualized_maintenance(const TransitionModel& model, const StateSpace& space,
                                                            double p0, double q0, const OptimizerConfig& config);

/// Same scan with a prebuilt evaluator. `initial_ratio` is Q0/P0 as used by the
/// adequacy check.
std::optional<MaintenanceChoice> individualized_maintenance(const CpnrEvaluator& evaluator, double p0,
                                                            double q0, double initial_ratio,
                                                            const OptimizerConfig& config);

/// Every (m, w*(m P0)) pair on the m grid for which an individualized w exists, by m.
std::vector<MarginSystem> indifference_set(const TransitionModel& model, const StateSpace& space, double p0,
                                           const OptimizerConfig& config);

/// Member nearest (least squares) to the set centroid; ties go to smaller m, then
/// smaller w. Independent of input order.
std::optional<MarginSystem> deduce_margin_system(std::span<const MarginSystem> set);

struct DynamicsPoint {
    Date date;
    std::size_t index;
    double p0;
    std::optional<MarginSystem> system;  // empty on dates with no feasible system
};

struct DynamicsConfig {
    std::size_t depth = 800;
    std::size_t group = 25;
    OptimizerConfig optimizer = OptimizerConfig::standard();
};

/// Deduced margin system on `count` consecutive trading days from `start`, refitting
/// the chain on a rolling window for each date.
std::vector<DynamicsPoint> margin_dynamics(const PriceSeries& series, std::size_t start, std::size_t count,
                                           const DynamicsConfig& config);

/// Fits the chain on the window ending at `index` and returns the deduced system.
std::optional<MarginSystem> deduced_system_at(const PriceSeries& series, std::size_t index, std::size_t depth,
                                              std::size_t group, const OptimizerConfig& config);

}  // namespace margin
