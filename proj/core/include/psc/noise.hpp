#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "psc/aggregation.hpp"
#include "psc/ranking.hpp"
#include "psc/rng.hpp"

namespace psc {

enum class NoiseKind { ConcordantSubset, PositionalWindow };

/**
 * Generative description of a corrupted ranker.
 *
 * ConcordantSubset: every draw starts from a uniform random permutation,
 * then a random nonempty subset of items is reordered in place to agree
 * with the truth, so each draw is guaranteed a concordant subset while the
 * remainder stays uniformly random. Subset sizes default to the
 * distribution induced by a uniform choice among all nonempty subsets;
 * explicit per-size weights can override that.
 *
 * PositionalWindow: the truth with output positions [lo, hi] (1-based,
 * inclusive) uniformly scrambled - a "lost in the middle" corruption.
 */
struct NoiseModel {
    NoiseKind kind = NoiseKind::ConcordantSubset;

    /// Weights over subset sizes 1..n (index 0 = size 1). Empty = uniform
    /// over nonempty subsets.
    std::vector<double> subset_size_weights;

    std::int32_t window_lo = 0;
    std::int32_t window_hi = 0;

    static NoiseModel concordant_subset();
    static NoiseModel concordant_subset_with_sizes(std::vector<double> weights);
    static NoiseModel positional_window(std::int32_t lo, std::int32_t hi);

    /// Throws ValidationError if the model cannot generate for n items.
    void validate(std::int32_t n) const;
};

/// One draw plus the subset that is concordant with the truth by
/// construction (empty for window noise), kept for post-hoc verification.
struct NoisyDraw {
    Ranking ranking;
    std::vector<std::int32_t> concordant_items;
};

NoisyDraw sample_noisy_draw(const Ranking& truth, const NoiseModel& model, Rng& rng);
Ranking sample_noisy_ranking(const Ranking& truth, const NoiseModel& model, Rng& rng);

/// Monte-Carlo estimate of how aggregation recovers the truth as the sample
/// count grows.
struct ConvergenceReport {
    std::vector<std::int64_t> m_grid;
    std::int64_t trials = 0;
    std::vector<double> recovery_rate;  // fraction of trials with aggregate == truth
    std::vector<double> mean_tau;       // mean kendall_tau(aggregate, truth)
};

void write_csv(std::ostream& out, const ConvergenceReport& report);

/**
 * For each m in the grid, run `trials` independent replicates: draw m noisy
 * rankings of the truth, aggregate them, and record exact recovery and tau.
 * Replicates are keyed by (grid index, trial) from the root seed, so the
 * report is identical however the work is scheduled.
 */
ConvergenceReport convergence_experiment(const Ranking& truth, const NoiseModel& model,
                                         const std::vector<std::int64_t>& m_grid,
                                         std::int64_t trials, const Aggregator& aggregate,
                                         std::uint64_t seed);

} // namespace psc
