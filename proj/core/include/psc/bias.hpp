#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "psc/pipeline.hpp"

namespace psc {

/**
 * Pairwise reversion tallies by input position: for presented positions
 * i < j (1-based), counts(i, j) is how often the ranker flipped that pair
 * and opportunities(i, j) how often the pair was observed. Rows index the
 * earlier input position, columns the later one; the lower triangle and
 * diagonal are unused.
 */
class ReversionMatrix {
public:
    explicit ReversionMatrix(std::int32_t n);

    std::int32_t size() const { return n_; }

    std::int64_t count(std::int32_t i, std::int32_t j) const { return counts_[idx(i, j)]; }
    std::int64_t opportunities(std::int32_t i, std::int32_t j) const { return opps_[idx(i, j)]; }

    /// counts/opportunities; empty for cells never observed.
    std::optional<double> rate(std::int32_t i, std::int32_t j) const;

    /// Mean-centered rate, present once normalize_matrix has run.
    std::optional<double> normalized(std::int32_t i, std::int32_t j) const;

    void record(std::int32_t i, std::int32_t j, bool reversed);
    void set_normalized(std::int32_t i, std::int32_t j, double value);
    bool has_normalized() const { return !normalized_.empty(); }

    /// Elementwise addition of counts and opportunities (same n).
    void merge(const ReversionMatrix& other);

    std::int64_t total_count() const;
    std::int64_t total_opportunities() const;

private:
    std::size_t idx(std::int32_t i, std::int32_t j) const;

    std::int32_t n_;
    std::vector<std::int64_t> counts_;
    std::vector<std::int64_t> opps_;
    std::vector<double> normalized_;  // NaN = missing; empty until normalized
};

/// Tally reversions across samples (all must share n): for input positions
/// p < q, the pair is reversed when the output places q's item before p's.
ReversionMatrix count_reversions(const std::vector<RankingSample>& samples);

/// Fill normalized rates: per-cell rate minus the mean rate over observed
/// cells, so values split around the dataset average. Zero-opportunity cells
/// stay missing; throws ValidationError if every cell is missing.
ReversionMatrix normalize_matrix(ReversionMatrix matrix);

struct UniformityReport {
    double statistic = 0.0;
    double p_value = 1.0;
    std::int64_t dof = 0;
    std::int64_t pooled_cells = 0;  // low-expectation cells merged into one
    double pooled_rate = 0.0;
};

/**
 * Pearson chi-square of the observed reversion counts against the pooled
 * mean rate, the null hypothesis being that reversions are positionally
 * uniform. Cells with expected count below min_expected are pooled into one;
 * degrees of freedom are (used cells - 1).
 */
UniformityReport uniformity_test(const ReversionMatrix& matrix, double min_expected = 5.0);

/// Long-form CSV: i, j, count, opportunities, rate, normalized.
void write_reversions_csv(std::ostream& out, const ReversionMatrix& matrix);

} // namespace psc
