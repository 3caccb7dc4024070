#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "margin/matrix.hpp"
#include "margin/price_series.hpp"

namespace margin {

/// Grouped-price state space. Distinct window prices are sorted and chunked into
/// blocks of `group_size`; each block is one state, represented by the mean of
/// its member prices. States are indexed 0..n-1 in increasing price order.
class StateSpace {
public:
    struct Block {
        double low;
        double high;
        std::size_t members;
    };

    StateSpace(std::vector<Block> blocks, std::vector<double> representatives, std::size_t group_size);

    std::size_t size() const noexcept { return representatives_.size(); }
    std::size_t group_size() const noexcept { return group_size_; }
    std::span<const Block> blocks() const noexcept { return blocks_; }
    std::span<const double> representatives() const noexcept { return representatives_; }
    double representative(std::size_t k) const { return representatives_.at(k); }

    /// Number of states whose representative lies strictly below `threshold`.
    /// Equals the largest qualifying 1-based state index, or 0 when none qualifies.
    std::size_t count_below(double threshold) const;

private:
    std::vector<Block> blocks_;
    std::vector<double> representatives_;
    std::size_t group_size_;
};

StateSpace build_state_space(std::span<const double> prices, std::size_t group_size);
inline StateSpace build_state_space(const PriceWindow& w, std::size_t group_size) {
    return build_state_space(w.prices, group_size);
}

/// State containing `price`. Prices strictly between two blocks go to the nearer
/// representative (ties to the lower state); out-of-range prices clamp to the ends.
std::size_t state_of(const StateSpace& space, double price);

struct CountMatrix {
    std::vector<std::vector<std::uint64_t>> counts;
    std::vector<std::uint64_t> row_totals;
    std::vector<std::uint64_t> col_totals;
    std::uint64_t total = 0;

    std::size_t size() const noexcept { return counts.size(); }
    static CountMatrix from_counts(std::vector<std::vector<std::uint64_t>> counts);
};

CountMatrix count_transitions(std::span<const double> prices, const StateSpace& space);
inline CountMatrix count_transitions(const PriceWindow& w, const StateSpace& space) {
    return count_transitions(w.prices, space);
}

/// One-step transition matrix with a lazily filled, thread-safe cache of its powers.
/// Copies share the cache, which is safe since P(1) never changes.
class TransitionModel {
public:
    explicit TransitionModel(Matrix one_step);

    std::size_t size() const noexcept { return one_step_.size(); }
    const Matrix& one_step() const noexcept { return one_step_; }

    /// P(1)^steps. References stay valid for the lifetime of any copy of the model.
    const Matrix& n_step(std::size_t steps) const;

    /// Fills the cache through `max_steps`.
    void precompute(std::size_t max_steps) const;

private:
    struct PowerCache {
        std::mutex mutex;
        std::deque<Matrix> powers;  // powers[k] = P(1)^(k+1)
    };

    Matrix one_step_;
    std::shared_ptr<PowerCache> cache_;
};

/// p_ij = f_ij / f_i. ; unvisited rows become self-loops.
TransitionModel estimate_one_step(const CountMatrix& counts);

struct MarkovTestResult {
    double chi_square = 0.0;
    int degrees_of_freedom = 0;
    double p_value = 1.0;
    int effective_states = 0;
};

/// Chi-square test of independence (i.i.d.) within the first-order Markov hypothesis.
MarkovTestResult markov_chi_square_test(const CountMatrix& counts);

/// Upper-tail probability of the chi-square distribution.
double chi_square_upper_tail(double statistic, double degrees_of_freedom);

/// State space, counts and model fitted on one window.
struct FittedChain {
    StateSpace space;
    CountMatrix counts;
    TransitionModel model;
};

FittedChain fit_chain(std::span<const double> prices, std::size_t group_size);

}  // namespace margin
