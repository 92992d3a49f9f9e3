#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "psc/ranking.hpp"

namespace psc {

/**
 * Pairwise vote counts of a ranking sample: wins(i, j) is the number of
 * sampled rankings that place item i strictly before item j. For every
 * i != j, wins(i, j) + wins(j, i) == samples(); the diagonal is zero.
 *
 * The Kemeny objective decomposes over these counts: a candidate that puts
 * i before j pays wins(j, i) for that pair.
 */
class PreferenceMatrix {
public:
    PreferenceMatrix(std::int32_t n, std::int64_t samples);

    std::int32_t size() const { return n_; }
    std::int64_t samples() const { return m_; }

    std::int64_t wins(std::int32_t i, std::int32_t j) const { return w_[idx(i, j)]; }
    void add_win(std::int32_t i, std::int32_t j, std::int64_t count = 1) { w_[idx(i, j)] += count; }

    /// Checks the diagonal and the wins(i,j) + wins(j,i) == samples() identity.
    void validate() const;

private:
    std::size_t idx(std::int32_t i, std::int32_t j) const {
        return static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) +
               static_cast<std::size_t>(j);
    }

    std::int32_t n_;
    std::int64_t m_;
    std::vector<std::int64_t> w_;
};

enum class AggregationMethod { KemenyExact, KemenyBudgeted, Borda, Rrf };

std::string to_string(AggregationMethod method);
AggregationMethod aggregation_method_from_string(const std::string& name);

struct AggregationResult {
    Ranking ranking;
    std::int64_t objective = 0;  // sum of Kendall distances to the samples
    bool exact = false;          // optimality certificate
    AggregationMethod method = AggregationMethod::KemenyExact;
};

struct SolveBudget {
    std::uint64_t max_nodes = 50'000'000;
    std::chrono::milliseconds time_limit{10'000};
};

inline constexpr std::int32_t kDefaultExactLimit = 12;
inline constexpr double kDefaultRrfK = 60.0;

PreferenceMatrix build_preference_matrix(const std::vector<Ranking>& samples);

std::int64_t objective(const Ranking& candidate, const std::vector<Ranking>& samples);
std::int64_t objective(const Ranking& candidate, const PreferenceMatrix& matrix);

/**
 * Globally optimal Kemeny ranking by dynamic programming over item subsets,
 * O(2^n * n^2). Ties among co-optimal rankings break to the lexicographically
 * smallest. Refuses n > exact_limit; use kemeny_solve for larger instances.
 */
AggregationResult kemeny_exact(const std::vector<Ranking>& samples,
                               std::int32_t exact_limit = kDefaultExactLimit);
AggregationResult kemeny_exact(const PreferenceMatrix& matrix,
                               std::int32_t exact_limit = kDefaultExactLimit);

/**
 * Budgeted branch-and-bound over prefix extensions. The lower bound adds
 * min(wins(i,j), wins(j,i)) for every undecided pair; the Borda ranking
 * (refined by adjacent-transposition local search) seeds the incumbent.
 * If the search completes within budget the result carries an optimality
 * certificate and the same lexicographic tie-break as kemeny_exact;
 * otherwise the best incumbent is refined to a local optimum and returned
 * with exact == false. Always returns a ranking.
 */
AggregationResult kemeny_solve(const PreferenceMatrix& matrix, const SolveBudget& budget = {});
AggregationResult kemeny_solve(const std::vector<Ranking>& samples, const SolveBudget& budget = {});

/// Exact DP when n <= exact_limit, otherwise budgeted branch-and-bound.
AggregationResult kemeny(const std::vector<Ranking>& samples,
                         std::int32_t exact_limit = kDefaultExactLimit,
                         const SolveBudget& budget = {});

/// Items sorted ascending by summed 1-based rank; ties break by item index.
AggregationResult borda(const std::vector<Ranking>& samples);

/// Reciprocal rank fusion: items sorted descending by sum of 1/(k + rank).
AggregationResult rrf(const std::vector<Ranking>& samples, double k = kDefaultRrfK);

using Aggregator = std::function<AggregationResult(const std::vector<Ranking>&)>;

} // namespace psc
