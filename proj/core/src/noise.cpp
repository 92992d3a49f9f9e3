#include "psc/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "psc/errors.hpp"

namespace psc {

namespace {

// Uniform nonempty subset of {0..n-1}: independent fair coins, redrawn on
// the (probability 2^-n) empty outcome.
std::vector<std::int32_t> uniform_nonempty_subset(std::int32_t n, Rng& rng) {
    std::vector<std::int32_t> subset;
    while (subset.empty()) {
        std::uint64_t bits = 0;
        int have = 0;
        for (std::int32_t i = 0; i < n; ++i) {
            if (have == 0) {
                bits = rng.next_u64();
                have = 64;
            }
            if (bits & 1u) {
                subset.push_back(i);
            }
            bits >>= 1;
            --have;
        }
    }
    return subset;
}

std::vector<std::int32_t> weighted_size_subset(std::int32_t n, const std::vector<double>& weights,
                                               Rng& rng) {
    double total = 0.0;
    for (double w : weights) {
        total += w;
    }
    const double u = rng.unit() * total;
    double acc = 0.0;
    std::int32_t size = n;
    for (std::int32_t k = 0; k < n; ++k) {
        acc += weights[k];
        if (u < acc) {
            size = k + 1;
            break;
        }
    }
    // Uniform subset of the chosen size: partial Fisher-Yates prefix.
    std::vector<std::int32_t> items(static_cast<std::size_t>(n));
    std::iota(items.begin(), items.end(), 0);
    for (std::int32_t i = 0; i < size; ++i) {
        const auto j = i + static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(n - i)));
        std::swap(items[i], items[j]);
    }
    items.resize(static_cast<std::size_t>(size));
    std::sort(items.begin(), items.end());
    return items;
}

} // namespace

NoiseModel NoiseModel::concordant_subset() {
    return NoiseModel{NoiseKind::ConcordantSubset, {}, 0, 0};
}

NoiseModel NoiseModel::concordant_subset_with_sizes(std::vector<double> weights) {
    return NoiseModel{NoiseKind::ConcordantSubset, std::move(weights), 0, 0};
}

NoiseModel NoiseModel::positional_window(std::int32_t lo, std::int32_t hi) {
    return NoiseModel{NoiseKind::PositionalWindow, {}, lo, hi};
}

void NoiseModel::validate(std::int32_t n) const {
    if (n < 1) {
        throw DimensionError("noise model needs n >= 1");
    }
    switch (kind) {
        case NoiseKind::ConcordantSubset: {
            if (subset_size_weights.empty()) {
                return;
            }
            if (static_cast<std::int32_t>(subset_size_weights.size()) != n) {
                throw ValidationError("subset size weights must cover sizes 1..n");
            }
            double total = 0.0;
            for (double w : subset_size_weights) {
                if (w < 0.0 || !std::isfinite(w)) {
                    throw ValidationError("subset size weights must be finite and non-negative");
                }
                total += w;
            }
            if (total <= 0.0) {
                throw ValidationError("subset size weights must not all be zero");
            }
            return;
        }
        case NoiseKind::PositionalWindow: {
            if (window_lo < 1 || window_hi > n || window_lo > window_hi) {
                throw ValidationError("scramble window [" + std::to_string(window_lo) + ", " +
                                      std::to_string(window_hi) + "] is empty or outside 1.." +
                                      std::to_string(n));
            }
            return;
        }
    }
    throw ValidationError("unknown noise kind");
}

NoisyDraw sample_noisy_draw(const Ranking& truth, const NoiseModel& model, Rng& rng) {
    const std::int32_t n = truth.size();
    model.validate(n);

    if (model.kind == NoiseKind::PositionalWindow) {
        std::vector<std::int32_t> out = truth.order();
        // Scramble output positions [lo, hi]; the rest of the truth stands.
        const std::int32_t lo = model.window_lo - 1;
        const std::int32_t hi = model.window_hi - 1;
        for (std::int32_t i = hi; i > lo; --i) {
            const auto j = lo + static_cast<std::int32_t>(
                                    rng.below(static_cast<std::uint64_t>(i - lo + 1)));
            std::swap(out[i], out[j]);
        }
        return NoisyDraw{Ranking(std::move(out)), {}};
    }

    // Concordant subset: a uniform base permutation, then the subset's items
    // are reordered within the positions they landed on so their relative
    // order matches the truth. Everything else keeps the base's randomness.
    Ranking base = random_ranking(n, rng);
    std::vector<std::int32_t> subset = model.subset_size_weights.empty()
                                           ? uniform_nonempty_subset(n, rng)
                                           : weighted_size_subset(n, model.subset_size_weights, rng);

    std::vector<bool> in_subset(static_cast<std::size_t>(n), false);
    for (std::int32_t item : subset) {
        in_subset[item] = true;
    }

    std::vector<std::int32_t> positions;  // slots the subset occupies, ascending
    positions.reserve(subset.size());
    for (std::int32_t p = 0; p < n; ++p) {
        if (in_subset[base[p]]) {
            positions.push_back(p);
        }
    }

    const Ranking truth_pos = truth.inverse();
    std::vector<std::int32_t> ordered(subset);
    std::sort(ordered.begin(), ordered.end(), [&](std::int32_t a, std::int32_t b) {
        return truth_pos[a] < truth_pos[b];
    });

    std::vector<std::int32_t> out = base.order();
    for (std::size_t k = 0; k < positions.size(); ++k) {
        out[positions[k]] = ordered[k];
    }
    return NoisyDraw{Ranking(std::move(out)), std::move(subset)};
}

Ranking sample_noisy_ranking(const Ranking& truth, const NoiseModel& model, Rng& rng) {
    return sample_noisy_draw(truth, model, rng).ranking;
}

void write_csv(std::ostream& out, const ConvergenceReport& report) {
    out << "m,trials,recovery_rate,mean_tau\n";
    char buf[128];
    for (std::size_t i = 0; i < report.m_grid.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%lld,%lld,%.6f,%.6f\n",
                      static_cast<long long>(report.m_grid[i]),
                      static_cast<long long>(report.trials), report.recovery_rate[i],
                      report.mean_tau[i]);
        out << buf;
    }
}

ConvergenceReport convergence_experiment(const Ranking& truth, const NoiseModel& model,
                                         const std::vector<std::int64_t>& m_grid,
                                         std::int64_t trials, const Aggregator& aggregate,
                                         std::uint64_t seed) {
    if (m_grid.empty()) {
        throw ValidationError("empty m grid");
    }
    for (std::size_t i = 0; i < m_grid.size(); ++i) {
        if (m_grid[i] < 1 || (i > 0 && m_grid[i] <= m_grid[i - 1])) {
            throw ValidationError("m grid must be strictly increasing and >= 1");
        }
    }
    if (trials < 1) {
        throw ValidationError("trials must be >= 1");
    }
    if (truth.size() < 2) {
        throw DimensionError("convergence experiment needs n >= 2");
    }
    model.validate(truth.size());

    ConvergenceReport report;
    report.m_grid = m_grid;
    report.trials = trials;
    report.recovery_rate.reserve(m_grid.size());
    report.mean_tau.reserve(m_grid.size());

    for (std::size_t gi = 0; gi < m_grid.size(); ++gi) {
        const std::int64_t m = m_grid[gi];
        std::int64_t recovered = 0;
        double tau_sum = 0.0;
        for (std::int64_t trial = 0; trial < trials; ++trial) {
            Rng rng(derive_seed(seed, 0x636f6e76u /* conv */, gi, static_cast<std::uint64_t>(trial)));
            std::vector<Ranking> samples;
            samples.reserve(static_cast<std::size_t>(m));
            for (std::int64_t k = 0; k < m; ++k) {
                samples.push_back(sample_noisy_ranking(truth, model, rng));
            }
            const AggregationResult agg = aggregate(samples);
            if (agg.ranking == truth) {
                ++recovered;
            }
            tau_sum += kendall_tau(agg.ranking, truth);
        }
        report.recovery_rate.push_back(static_cast<double>(recovered) /
                                       static_cast<double>(trials));
        report.mean_tau.push_back(tau_sum / static_cast<double>(trials));
    }
    return report;
}

} // namespace psc
