#include "margin/markov.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/special_functions/gamma.hpp>

#include "margin/errors.hpp"

namespace margin {

StateSpace::StateSpace(std::vector<Block> blocks, std::vector<double> representatives,
                       std::size_t group_size)
    : blocks_(std::move(blocks)), representatives_(std::move(representatives)), group_size_(group_size) {
    if (blocks_.size() != representatives_.size())
        throw ValidationError("state space blocks and representatives differ in length");
    if (representatives_.empty()) throw ValidationError("state space must have at least one state");
    for (std::size_t k = 1; k < representatives_.size(); ++k)
        if (!(representatives_[k - 1] < representatives_[k]))
            throw ValidationError("state representatives must be strictly increasing");
}

std::size_t StateSpace::count_below(double threshold) const {
    return static_cast<std::size_t>(
        std::lower_bound(representatives_.begin(), representatives_.end(), threshold) -
        representatives_.begin());
}

StateSpace build_state_space(std::span<const double> prices, std::size_t group_size) {
    if (group_size == 0) throw ValidationError("group size must be at least 1");
    if (prices.empty()) throw ValidationError("cannot build a state space from an empty window");

    std::vector<double> distinct(prices.begin(), prices.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    std::vector<StateSpace::Block> blocks;
    std::vector<double> reps;
    for (std::size_t start = 0; start < distinct.size(); start += group_size) {
        std::size_t end = std::min(start + group_size, distinct.size());
        double sum = 0.0;
        for (std::size_t i = start; i < end; ++i) sum += distinct[i];
        blocks.push_back({distinct[start], distinct[end - 1], end - start});
        reps.push_back(sum / static_cast<double>(end - start));
    }
    return StateSpace(std::move(blocks), std::move(reps), group_size);
}

std::size_t state_of(const StateSpace& space, double price) {
    auto blocks = space.blocks();
    auto it = std::lower_bound(blocks.begin(), blocks.end(), price,
                               [](const StateSpace::Block& b, double p) { return b.high < p; });
    if (it == blocks.end()) return blocks.size() - 1;
    auto k = static_cast<std::size_t>(it - blocks.begin());
    if (it->low <= price || k == 0) return k;
    // Strictly between blocks k-1 and k.
    double below = std::abs(price - space.representative(k - 1));
    double above = std::abs(price - space.representative(k));
    return above < below ? k : k - 1;
}

CountMatrix CountMatrix::from_counts(std::vector<std::vector<std::uint64_t>> counts) {
    CountMatrix cm;
    const std::size_t n = counts.size();
    cm.row_totals.assign(n, 0);
    cm.col_totals.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (counts[i].size() != n) throw ValidationError("count matrix must be square");
        for (std::size_t j = 0; j < n; ++j) {
            cm.row_totals[i] += counts[i][j];
            cm.col_totals[j] += counts[i][j];
            cm.total += counts[i][j];
        }
    }
    cm.counts = std::move(counts);
    return cm;
}

CountMatrix count_transitions(std::span<const double> prices, const StateSpace& space) {
    if (prices.size() < 2) throw ValidationError("counting transitions needs at least two prices");
    const std::size_t n = space.size();
    std::vector<std::vector<std::uint64_t>> f(n, std::vector<std::uint64_t>(n, 0));
    std::size_t prev = state_of(space, prices[0]);
    for (std::size_t t = 1; t < prices.size(); ++t) {
        std::size_t cur = state_of(space, prices[t]);
        ++f[prev][cur];
        prev = cur;
    }
    return CountMatrix::from_counts(std::move(f));
}

TransitionModel::TransitionModel(Matrix one_step)
    : one_step_(std::move(one_step)), cache_(std::make_shared<PowerCache>()) {
    const std::size_t n = one_step_.size();
    if (n == 0) throw ValidationError("transition matrix is empty");
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (double p : one_step_.row(i)) {
            if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("transition probability outside [0,1]");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-12) throw ValidationError("transition row does not sum to 1");
    }
    cache_->powers.push_back(one_step_);
}

const Matrix& TransitionModel::n_step(std::size_t steps) const {
    if (steps == 0) throw ValidationError("n_step requires at least one step");
    if (steps == 1) return one_step_;
    std::lock_guard lock(cache_->mutex);
    auto& powers = cache_->powers;
    while (powers.size() < steps) powers.push_back(powers.back() * one_step_);
    return powers[steps - 1];
}

void TransitionModel::precompute(std::size_t max_steps) const {
    if (max_steps > 1) n_step(max_steps);
}

TransitionModel estimate_one_step(const CountMatrix& counts) {
    const std::size_t n = counts.size();
    Matrix p(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto total = counts.row_totals[i];
        if (total == 0) {
            p(i, i) = 1.0;
            continue;
        }
        for (std::size_t j = 0; j < n; ++j)
            p(i, j) = static_cast<double>(counts.counts[i][j]) / static_cast<double>(total);
    }
    return TransitionModel(std::move(p));
}

double chi_square_upper_tail(double statistic, double degrees_of_freedom) {
    if (!(degrees_of_freedom > 0.0)) throw ValidationError("chi-square degrees of freedom must be positive");
    if (statistic <= 0.0) return 1.0;
    return boost::math::gamma_q(degrees_of_freedom / 2.0, statistic / 2.0);
}

MarkovTestResult markov_chi_square_test(const CountMatrix& counts) {
    const std::size_t n = counts.size();
    if (counts.total == 0) throw ValidationError("chi-square test needs at least one transition");

    int effective = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (counts.row_totals[i] > 0 || counts.col_totals[i] > 0) ++effective;
    if (effective < 2) throw ValidationError("chi-square test undefined with fewer than two visited states");

    const double total = static_cast<double>(counts.total);
    double chi = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (counts.row_totals[i] == 0) continue;
        for (std::size_t j = 0; j < n; ++j) {
            if (counts.col_totals[j] == 0) continue;
            double expected = static_cast<double>(counts.row_totals[i]) *
                              static_cast<double>(counts.col_totals[j]) / total;
            double diff = static_cast<double>(counts.counts[i][j]) - expected;
            chi += diff * diff / expected;
        }
    }

    MarkovTestResult result;
    result.chi_square = chi;
    result.effective_states = effective;
    result.degrees_of_freedom = (effective - 1) * (effective - 1);
    result.p_value = chi_square_upper_tail(chi, result.degrees_of_freedom);
    return result;
}

FittedChain fit_chain(std::span<const double> prices, std::size_t group_size) {
    auto space = build_state_space(prices, group_size);
    auto counts = count_transitions(prices, space);
    auto model = estimate_one_step(counts);
    return {std::move(space), std::move(counts), std::move(model)};
}

}  // namespace margin
