#include "psc/bias.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include <boost/math/distributions/chi_squared.hpp>

#include "psc/errors.hpp"

namespace psc {

ReversionMatrix::ReversionMatrix(std::int32_t n) : n_(n) {
    if (n < 2) {
        throw DimensionError("reversion matrix needs n >= 2");
    }
    const auto cells = static_cast<std::size_t>(pair_count(n));
    counts_.assign(cells, 0);
    opps_.assign(cells, 0);
}

std::size_t ReversionMatrix::idx(std::int32_t i, std::int32_t j) const {
    if (i < 1 || j <= i || j > n_) {
        throw DimensionError("reversion cell (" + std::to_string(i) + ", " + std::to_string(j) +
                             ") is outside the upper triangle of n = " + std::to_string(n_));
    }
    // Row-major packing of the strict upper triangle, 1-based cells.
    const auto a = static_cast<std::size_t>(i - 1);
    const auto b = static_cast<std::size_t>(j - 1);
    const auto n = static_cast<std::size_t>(n_);
    return a * n - a * (a + 1) / 2 + (b - a - 1);
}

std::optional<double> ReversionMatrix::rate(std::int32_t i, std::int32_t j) const {
    const std::size_t k = idx(i, j);
    if (opps_[k] == 0) {
        return std::nullopt;
    }
    return static_cast<double>(counts_[k]) / static_cast<double>(opps_[k]);
}

std::optional<double> ReversionMatrix::normalized(std::int32_t i, std::int32_t j) const {
    if (normalized_.empty()) {
        return std::nullopt;
    }
    const double v = normalized_[idx(i, j)];
    if (std::isnan(v)) {
        return std::nullopt;
    }
    return v;
}

void ReversionMatrix::record(std::int32_t i, std::int32_t j, bool reversed) {
    const std::size_t k = idx(i, j);
    ++opps_[k];
    if (reversed) {
        ++counts_[k];
    }
}

void ReversionMatrix::set_normalized(std::int32_t i, std::int32_t j, double value) {
    if (normalized_.empty()) {
        normalized_.assign(counts_.size(), std::numeric_limits<double>::quiet_NaN());
    }
    normalized_[idx(i, j)] = value;
}

void ReversionMatrix::merge(const ReversionMatrix& other) {
    if (other.n_ != n_) {
        throw DimensionError("cannot merge reversion matrices of different sizes");
    }
    for (std::size_t k = 0; k < counts_.size(); ++k) {
        counts_[k] += other.counts_[k];
        opps_[k] += other.opps_[k];
    }
    normalized_.clear();
}

std::int64_t ReversionMatrix::total_count() const {
    std::int64_t total = 0;
    for (std::int64_t c : counts_) {
        total += c;
    }
    return total;
}

std::int64_t ReversionMatrix::total_opportunities() const {
    std::int64_t total = 0;
    for (std::int64_t o : opps_) {
        total += o;
    }
    return total;
}

ReversionMatrix count_reversions(const std::vector<RankingSample>& samples) {
    if (samples.empty()) {
        throw ValidationError("no samples to analyze");
    }
    const std::int32_t n = samples.front().raw_output.size();
    ReversionMatrix matrix(n);
    for (const RankingSample& sample : samples) {
        if (sample.raw_output.size() != n) {
            throw DimensionError("mixed sample sizes in reversion analysis");
        }
        // Output position of each presented position; the pair (p, q) with
        // p < q is reversed when q's item comes out before p's.
        const Ranking out_pos = sample.raw_output.inverse();
        for (std::int32_t p = 0; p < n; ++p) {
            for (std::int32_t q = p + 1; q < n; ++q) {
                matrix.record(p + 1, q + 1, out_pos[p] > out_pos[q]);
            }
        }
    }
    return matrix;
}

ReversionMatrix normalize_matrix(ReversionMatrix matrix) {
    const std::int32_t n = matrix.size();
    double sum = 0.0;
    std::int64_t used = 0;
    for (std::int32_t i = 1; i <= n; ++i) {
        for (std::int32_t j = i + 1; j <= n; ++j) {
            if (const auto r = matrix.rate(i, j)) {
                sum += *r;
                ++used;
            }
        }
    }
    if (used == 0) {
        throw ValidationError("every reversion cell is missing");
    }
    const double mean = sum / static_cast<double>(used);
    for (std::int32_t i = 1; i <= n; ++i) {
        for (std::int32_t j = i + 1; j <= n; ++j) {
            if (const auto r = matrix.rate(i, j)) {
                matrix.set_normalized(i, j, *r - mean);
            }
        }
    }
    return matrix;
}

UniformityReport uniformity_test(const ReversionMatrix& matrix, double min_expected) {
    const std::int32_t n = matrix.size();
    std::vector<std::pair<std::int64_t, std::int64_t>> cells;  // (count, opportunities)
    std::int64_t total_count = 0;
    std::int64_t total_opps = 0;
    for (std::int32_t i = 1; i <= n; ++i) {
        for (std::int32_t j = i + 1; j <= n; ++j) {
            const std::int64_t o = matrix.opportunities(i, j);
            if (o > 0) {
                cells.emplace_back(matrix.count(i, j), o);
                total_count += matrix.count(i, j);
                total_opps += o;
            }
        }
    }
    if (total_opps == 0) {
        throw ValidationError("no observations for the uniformity test");
    }

    UniformityReport report;
    report.pooled_rate = static_cast<double>(total_count) / static_cast<double>(total_opps);
    if (report.pooled_rate == 0.0) {
        // Nothing was ever reversed: a perfectly uniform (empty) distribution.
        report.dof = static_cast<std::int64_t>(cells.size()) - 1;
        return report;
    }

    // Cells whose expected count falls below the threshold pool into one.
    double statistic = 0.0;
    std::int64_t kept = 0;
    std::int64_t pooled_count = 0;
    std::int64_t pooled_opps = 0;
    std::int64_t pooled_cells = 0;
    for (const auto& [count, opps] : cells) {
        const double expected = static_cast<double>(opps) * report.pooled_rate;
        if (expected < min_expected) {
            pooled_count += count;
            pooled_opps += opps;
            ++pooled_cells;
            continue;
        }
        const double diff = static_cast<double>(count) - expected;
        statistic += diff * diff / expected;
        ++kept;
    }
    if (pooled_opps > 0) {
        const double expected = static_cast<double>(pooled_opps) * report.pooled_rate;
        if (expected >= min_expected) {
            const double diff = static_cast<double>(pooled_count) - expected;
            statistic += diff * diff / expected;
            ++kept;
        }
    }
    if (kept < 2) {
        throw ValidationError("too few observations after pooling for the uniformity test");
    }

    report.statistic = statistic;
    report.dof = kept - 1;
    report.pooled_cells = pooled_cells;
    const boost::math::chi_squared dist(static_cast<double>(report.dof));
    report.p_value = boost::math::cdf(boost::math::complement(dist, statistic));
    return report;
}

void write_reversions_csv(std::ostream& out, const ReversionMatrix& matrix) {
    out << "i,j,count,opportunities,rate,normalized\n";
    char buf[64];
    for (std::int32_t i = 1; i <= matrix.size(); ++i) {
        for (std::int32_t j = i + 1; j <= matrix.size(); ++j) {
            out << i << ',' << j << ',' << matrix.count(i, j) << ',' << matrix.opportunities(i, j);
            if (const auto r = matrix.rate(i, j)) {
                std::snprintf(buf, sizeof(buf), ",%.6f", *r);
                out << buf;
            } else {
                out << ',';
            }
            if (const auto v = matrix.normalized(i, j)) {
                std::snprintf(buf, sizeof(buf), ",%.6f", *v);
                out << buf;
            } else {
                out << ',';
            }
            out << '\n';
        }
    }
}

} // namespace psc
