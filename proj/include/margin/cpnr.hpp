#pragma once

#include <cstddef>
#include <vector>

#include "margin/markov.hpp"

namespace margin {

/// One margin loan as seen by the probability engine. The loan rate equals the
/// riskless rate `r`. `state` is the 0-based state of P0.
struct LoanQuery {
    double p0 = 0.0;
    double q0 = 0.0;
    double w = 1.3;
    double r = 0.0;
    std::size_t horizon = 30;
    std::size_t state = 0;
};

/// Builds a query with `state` looked up from P0.
LoanQuery make_query(const StateSpace& space, double p0, double q0, double w, double r, std::size_t horizon);

struct CpnrResult {
    double prob_B = 0.0;
    double prob_AB = 0.0;
    double cpnr = 0.0;
    std::vector<double> per_day_call_probs;      // Prob(B_t), t = 1..T
    std::vector<double> per_day_loss_and_call;   // Prob(AB_t), t = 1..T
    double survival_product = 1.0;
};

struct FirstCallResult {
    double prob_B = 0.0;
    std::vector<double> per_day_call_probs;
    double survival_product = 1.0;
};

/// k_m: number of states with q_k < (w P0 - Q0)(1+r)^m. Zero means no state qualifies.
std::size_t call_threshold_index(const StateSpace& space, const LoanQuery& query, std::size_t day);

/// a_t: number of states with q_k < (P0 - Q0)(1+r)^t.
std::size_t loss_threshold_index(const StateSpace& space, const LoanQuery& query, std::size_t day);

/// Recursive evaluator for one (model, start state, horizon). Caches the start
/// row of every power P(1..T) and the cumulative rows of P(1); each query is O(T n).
class CpnrEvaluator {
public:
    CpnrEvaluator(const TransitionModel& model, const StateSpace& space, std::size_t start_state,
                  std::size_t horizon);

    std::size_t horizon() const noexcept { return horizon_; }
    std::size_t start_state() const noexcept { return start_; }

    /// query.state and query.horizon must match the evaluator.
    FirstCallResult first_call(const LoanQuery& query) const;
    CpnrResult evaluate(const LoanQuery& query) const;

private:
    void thresholds(const LoanQuery& query, std::vector<std::size_t>& call,
                    std::vector<std::size_t>& loss) const;
    void check(const LoanQuery& query) const;
    double start_row_prefix(std::size_t day, std::size_t count) const;
    double one_step_prefix(std::size_t row, std::size_t count) const;

    const StateSpace* space_;
    std::size_t n_;
    std::size_t start_;
    std::size_t horizon_;
    // start_rows_[t * n + i] = P(t)_{h,i} for t = 1..T (row 0 unused).
    std::vector<double> start_rows_;
    // prefix sums of the start rows: start_prefix_[t * (n+1) + k] = sum_{i<k} P(t)_{h,i}
    std::vector<double> start_prefix_;
    // one_step_prefix_[i * (n+1) + k] = sum_{j<k} P(1)_{ij}
    std::vector<double> one_step_prefix_;
};

FirstCallResult prob_first_call(const TransitionModel& model, const StateSpace& space, const LoanQuery& query);
double prob_loss_and_call(const TransitionModel& model, const StateSpace& space, const LoanQuery& query);
CpnrResult cpnr(const TransitionModel& model, const StateSpace& space, const LoanQuery& query);

struct ExactEnumeration {
    double prob_B = 0.0;
    double prob_AB = 0.0;
    double cpnr = 0.0;
    std::vector<double> per_day_first_call;  // exact first-passage probability on day t
};

/// Exact path-level probabilities by enumerating all n^T state paths from the
/// start state. Classifies each path by its true first-call day and its state on
/// the liquidation day. Restricted to n <= 8 and T <= 8.
ExactEnumeration cpnr_exact_enumeration(const TransitionModel& model, const StateSpace& space,
                                        const LoanQuery& query);

}  // namespace margin
