#include "margin/cpnr.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "margin/errors.hpp"

namespace margin {

namespace {

double call_threshold(const LoanQuery& q, std::size_t day) {
    return (q.w * q.p0 - q.q0) * std::pow(1.0 + q.r, static_cast<double>(day));
}

double loss_threshold(const LoanQuery& q, std::size_t day) {
    return (q.p0 - q.q0) * std::pow(1.0 + q.r, static_cast<double>(day));
}

void validate_query(const LoanQuery& q, std::size_t states) {
    if (!(q.p0 > 0.0)) throw ValidationError("loan query requires P0 > 0");
    if (!(q.q0 >= 0.0)) throw ValidationError("loan query requires Q0 >= 0");
    if (!(q.w > 0.0)) throw ValidationError("loan query requires w > 0");
    if (!(q.r > -1.0)) throw ValidationError("loan query requires r > -1");
    if (q.horizon < 1) throw ValidationError("loan horizon must be at least one day");
    if (q.state >= states) throw ValidationError("start state outside the state space");
}

}  // namespace

LoanQuery make_query(const StateSpace& space, double p0, double q0, double w, double r, std::size_t horizon) {
    return LoanQuery{p0, q0, w, r, horizon, state_of(space, p0)};
}

std::size_t call_threshold_index(const StateSpace& space, const LoanQuery& query, std::size_t day) {
    if (day < 1 || day > query.horizon) throw ValidationError("day outside loan horizon");
    return space.count_below(call_threshold(query, day));
}

std::size_t loss_threshold_index(const StateSpace& space, const LoanQuery& query, std::size_t day) {
    if (day < 1 || day > query.horizon) throw ValidationError("day outside loan horizon");
    return space.count_below(loss_threshold(query, day));
}

CpnrEvaluator::CpnrEvaluator(const TransitionModel& model, const StateSpace& space, std::size_t start_state,
                             std::size_t horizon)
    : space_(&space), n_(model.size()), start_(start_state), horizon_(horizon) {
    if (model.size() != space.size()) throw ValidationError("model and state space sizes differ");
    if (start_state >= n_) throw ValidationError("start state outside the state space");
    if (horizon < 1) throw ValidationError("loan horizon must be at least one day");

    start_rows_.assign((horizon_ + 1) * n_, 0.0);
    start_prefix_.assign((horizon_ + 1) * (n_ + 1), 0.0);
    for (std::size_t t = 1; t <= horizon_; ++t) {
        auto row = model.n_step(t).row(start_);
        double acc = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            start_rows_[t * n_ + i] = row[i];
            acc += row[i];
            start_prefix_[t * (n_ + 1) + i + 1] = acc;
        }
    }

    const Matrix& p1 = model.one_step();
    one_step_prefix_.assign(n_ * (n_ + 1), 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n_; ++j) one_step_prefix_[i * (n_ + 1) + j + 1] = (acc += p1(i, j));
    }
}

double CpnrEvaluator::start_row_prefix(std::size_t day, std::size_t count) const {
    return start_prefix_[day * (n_ + 1) + count];
}

double CpnrEvaluator::one_step_prefix(std::size_t row, std::size_t count) const {
    return one_step_prefix_[row * (n_ + 1) + count];
}

void CpnrEvaluator::check(const LoanQuery& query) const {
    validate_query(query, n_);
    if (query.state != start_) throw ValidationError("query start state differs from evaluator");
    if (query.horizon != horizon_) throw ValidationError("query horizon differs from evaluator");
}

void CpnrEvaluator::thresholds(const LoanQuery& query, std::vector<std::size_t>& call,
                               std::vector<std::size_t>& loss) const {
    call.assign(horizon_ + 1, 0);
    loss.assign(horizon_ + 1, 0);
    for (std::size_t t = 1; t <= horizon_; ++t) {
        call[t] = space_->count_below(call_threshold(query, t));
        loss[t] = space_->count_below(loss_threshold(query, t));
    }
}

FirstCallResult CpnrEvaluator::first_call(const LoanQuery& query) const {
    check(query);
    std::vector<std::size_t> k, a;
    thresholds(query, k, a);

    FirstCallResult out;
    out.per_day_call_probs.assign(horizon_, 0.0);
    double survival = 1.0;
    for (std::size_t t = 1; t <= horizon_; ++t) {
        if (survival == 0.0) break;
        double conditional = 0.0;
        if (t == 1) {
            conditional = start_row_prefix(1, k[1]);
        } else {
            // Prob(D_t | not D_{t-1}) from the unconditional (t-1)-step distribution.
            const double* prev = &start_rows_[(t - 1) * n_];
            double numerator = 0.0, denominator = 0.0;
            for (std::size_t i = k[t - 1]; i < n_; ++i) {
                denominator += prev[i];
                numerator += prev[i] * one_step_prefix(i, k[t]);
            }
            if (denominator <= 0.0) {
                survival = 0.0;
                break;
            }
            conditional = numerator / denominator;
        }
        conditional = std::clamp(conditional, 0.0, 1.0);
        out.per_day_call_probs[t - 1] = survival * conditional;
        out.prob_B += survival * conditional;
        survival *= 1.0 - conditional;
    }
    out.survival_product = survival;
    return out;
}

CpnrResult CpnrEvaluator::evaluate(const LoanQuery& query) const {
    auto first = first_call(query);
    std::vector<std::size_t> k, a;
    thresholds(query, k, a);

    CpnrResult out;
    out.prob_B = first.prob_B;
    out.survival_product = first.survival_product;
    out.per_day_call_probs = std::move(first.per_day_call_probs);
    out.per_day_loss_and_call.assign(horizon_, 0.0);

    for (std::size_t t = 1; t <= horizon_; ++t) {
        const double call_prob = out.per_day_call_probs[t - 1];
        if (call_prob == 0.0) continue;
        const double denominator = start_row_prefix(t, k[t]);
        if (denominator <= 0.0) continue;
        double numerator = 0.0;
        if (t < horizon_) {
            // Liquidated the next day: one more step from each called state.
            const double* row = &start_rows_[t * n_];
            for (std::size_t j = 0; j < k[t]; ++j) numerator += row[j] * one_step_prefix(j, a[t]);
        } else {
            numerator = start_row_prefix(t, a[t]);
        }
        const double loss_given_call = numerator / denominator;
        out.per_day_loss_and_call[t - 1] = call_prob * loss_given_call;
        out.prob_AB += call_prob * loss_given_call;
    }
    out.cpnr = out.prob_B > 0.0 ? out.prob_AB / out.prob_B : 0.0;
    return out;
}

FirstCallResult prob_first_call(const TransitionModel& model, const StateSpace& space, const LoanQuery& query) {
    validate_query(query, model.size());
    return CpnrEvaluator(model, space, query.state, query.horizon).first_call(query);
}

double prob_loss_and_call(const TransitionModel& model, const StateSpace& space, const LoanQuery& query) {
    return cpnr(model, space, query).prob_AB;
}

CpnrResult cpnr(const TransitionModel& model, const StateSpace& space, const LoanQuery& query) {
    validate_query(query, model.size());
    return CpnrEvaluator(model, space, query.state, query.horizon).evaluate(query);
}

namespace {

struct PathWalker {
    const Matrix& p;
    std::size_t n;
    std::size_t horizon;
    const std::vector<std::size_t>& call;
    const std::vector<std::size_t>& loss;
    std::vector<std::size_t> path;  // path[t] = state on day t
    ExactEnumeration& out;

    void walk(std::size_t day, double prob) {
        if (day > horizon) {
            classify(prob);
            return;
        }
        const std::size_t from = path[day - 1];
        for (std::size_t s = 0; s < n; ++s) {
            path[day] = s;
            walk(day + 1, prob * p(from, s));
        }
    }

    void classify(double prob) {
        for (std::size_t t = 1; t <= horizon; ++t) {
            if (path[t] < call[t]) {
                const std::size_t liquidation = std::min(t + 1, horizon);
                out.per_day_first_call[t - 1] += prob;
                out.prob_B += prob;
                if (path[liquidation] < loss[liquidation]) out.prob_AB += prob;
                return;
            }
        }
    }
};

}  // namespace

ExactEnumeration cpnr_exact_enumeration(const TransitionModel& model, const StateSpace& space,
                                        const LoanQuery& query) {
    validate_query(query, model.size());
    if (model.size() > 8 || query.horizon > 8)
        throw SizeError("exact enumeration limited to n <= 8 and T <= 8 (got n=" +
                        std::to_string(model.size()) + ", T=" + std::to_string(query.horizon) + ")");

    std::vector<std::size_t> call(query.horizon + 1, 0), loss(query.horizon + 1, 0);
    for (std::size_t t = 1; t <= query.horizon; ++t) {
        call[t] = call_threshold_index(space, query, t);
        loss[t] = loss_threshold_index(space, query, t);
    }

    ExactEnumeration out;
    out.per_day_first_call.assign(query.horizon, 0.0);
    PathWalker walker{model.one_step(), model.size(), query.horizon, call, loss,
                      std::vector<std::size_t>(query.horizon + 1, 0), out};
    walker.path[0] = query.state;
    walker.walk(1, 1.0);
    out.cpnr = out.prob_B > 0.0 ? out.prob_AB / out.prob_B : 0.0;
    return out;
}

}  // namespace margin
