#include "psc/aggregation.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <numeric>

#include "psc/errors.hpp"

namespace psc {

namespace {

void check_samples(const std::vector<Ranking>& samples) {
    if (samples.empty()) {
        throw ValidationError("empty sample set");
    }
    const std::int32_t n = samples.front().size();
    for (const Ranking& s : samples) {
        if (s.size() != n) {
            throw DimensionError("mixed ranking sizes in sample set");
        }
    }
}

// Items of `order` sorted by a per-item key with index tie-break.
template <typename Key>
Ranking order_items_by(std::int32_t n, Key&& key) {
    std::vector<std::int32_t> items(static_cast<std::size_t>(n));
    std::iota(items.begin(), items.end(), 0);
    std::sort(items.begin(), items.end(), [&](std::int32_t a, std::int32_t b) {
        if (key(a) != key(b)) {
            return key(a) < key(b);
        }
        return a < b;
    });
    return Ranking(std::move(items));
}

// Adjacent-transposition descent to a local optimum. Objective deltas come
// straight from the matrix: swapping neighbouring items a,b changes the
// objective by wins(a,b) - wins(b,a).
std::int64_t local_search(std::vector<std::int32_t>& order, std::int64_t obj,
                          const PreferenceMatrix& w) {
    const std::size_t n = order.size();
    bool improved = true;
    while (improved) {
        improved = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            const std::int32_t a = order[p];
            const std::int32_t b = order[p + 1];
            const std::int64_t delta = w.wins(a, b) - w.wins(b, a);
            if (delta < 0) {
                std::swap(order[p], order[p + 1]);
                obj += delta;
                improved = true;
            }
        }
    }
    return obj;
}

Ranking borda_from_matrix(const PreferenceMatrix& w) {
    // Summed 1-based rank of item j over the samples equals
    // m + sum_i wins(i, j); the ordering only needs the column sums.
    const std::int32_t n = w.size();
    std::vector<std::int64_t> col(static_cast<std::size_t>(n), 0);
    for (std::int32_t i = 0; i < n; ++i) {
        for (std::int32_t j = 0; j < n; ++j) {
            col[j] += w.wins(i, j);
        }
    }
    return order_items_by(n, [&](std::int32_t j) { return col[j]; });
}

struct BranchAndBound {
    const PreferenceMatrix& w;
    std::int32_t n;
    const SolveBudget& budget;
    std::chrono::steady_clock::time_point deadline;

    std::uint64_t nodes = 0;
    bool budget_hit = false;

    std::vector<std::int32_t> prefix;
    std::vector<bool> placed;
    std::vector<std::int64_t> cost_vs_prefix;  // c[j] = sum over placed a of wins(j, a)

    std::int64_t cost = 0;          // decided pairs inside the prefix
    std::int64_t decided_rest = 0;  // (placed, unplaced) pairs, fixed when the item is appended
    std::int64_t undecided_lb = 0;  // sum of min(wins(i,j), wins(j,i)) over unplaced pairs

    std::int64_t best_obj;
    std::vector<std::int32_t> best;

    BranchAndBound(const PreferenceMatrix& matrix, const SolveBudget& b,
                   std::vector<std::int32_t> incumbent, std::int64_t incumbent_obj)
        : w(matrix),
          n(matrix.size()),
          budget(b),
          deadline(std::chrono::steady_clock::now() + b.time_limit),
          placed(static_cast<std::size_t>(matrix.size()), false),
          cost_vs_prefix(static_cast<std::size_t>(matrix.size()), 0),
          best_obj(incumbent_obj),
          best(std::move(incumbent)) {
        prefix.reserve(static_cast<std::size_t>(n));
        for (std::int32_t i = 0; i < n; ++i) {
            for (std::int32_t j = i + 1; j < n; ++j) {
                undecided_lb += std::min(w.wins(i, j), w.wins(j, i));
            }
        }
    }

    bool out_of_budget() {
        if (budget_hit) {
            return true;
        }
        ++nodes;
        if (nodes > budget.max_nodes ||
            ((nodes & 1023u) == 0 && std::chrono::steady_clock::now() > deadline)) {
            budget_hit = true;
        }
        return budget_hit;
    }

    void search() {
        if (out_of_budget()) {
            return;
        }
        if (static_cast<std::int32_t>(prefix.size()) == n) {
            if (cost < best_obj || (cost == best_obj && prefix < best)) {
                best_obj = cost;
                best = prefix;
            }
            return;
        }
        for (std::int32_t j = 0; j < n; ++j) {
            if (placed[j]) {
                continue;
            }
            const std::int64_t append_cost = cost_vs_prefix[j];

            std::int64_t rest_gain = 0;      // new (j, unplaced) decided terms
            std::int64_t undecided_gain = 0; // (j, unplaced) pairs leaving the bound
            for (std::int32_t b = 0; b < n; ++b) {
                if (placed[b] || b == j) {
                    continue;
                }
                rest_gain += w.wins(b, j);
                undecided_gain += std::min(w.wins(j, b), w.wins(b, j));
            }

            const std::int64_t bound = (cost + append_cost) + (decided_rest - append_cost + rest_gain) +
                                       (undecided_lb - undecided_gain);
            // Prune only strictly worse branches: equal-bound branches may
            // still hold a lexicographically smaller co-optimal ranking.
            if (bound > best_obj) {
                continue;
            }

            placed[j] = true;
            prefix.push_back(j);
            cost += append_cost;
            decided_rest += rest_gain - append_cost;
            undecided_lb -= undecided_gain;
            for (std::int32_t b = 0; b < n; ++b) {
                if (!placed[b]) {
                    cost_vs_prefix[b] += w.wins(b, j);
                }
            }

            search();

            for (std::int32_t b = 0; b < n; ++b) {
                if (!placed[b]) {
                    cost_vs_prefix[b] -= w.wins(b, j);
                }
            }
            undecided_lb += undecided_gain;
            decided_rest -= rest_gain - append_cost;
            cost -= append_cost;
            prefix.pop_back();
            placed[j] = false;

            if (budget_hit) {
                return;
            }
        }
    }
};

} // namespace

PreferenceMatrix::PreferenceMatrix(std::int32_t n, std::int64_t samples)
    : n_(n), m_(samples), w_(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0) {
    if (n < 1) {
        throw DimensionError("preference matrix needs n >= 1");
    }
    if (samples < 0) {
        throw ValidationError("negative sample count");
    }
}

void PreferenceMatrix::validate() const {
    for (std::int32_t i = 0; i < n_; ++i) {
        if (wins(i, i) != 0) {
            throw ValidationError("preference matrix has a nonzero diagonal");
        }
        for (std::int32_t j = i + 1; j < n_; ++j) {
            if (wins(i, j) < 0 || wins(j, i) < 0 || wins(i, j) + wins(j, i) != m_) {
                throw ValidationError("preference matrix votes do not sum to the sample count");
            }
        }
    }
}

std::string to_string(AggregationMethod method) {
    switch (method) {
        case AggregationMethod::KemenyExact: return "kemeny-exact";
        case AggregationMethod::KemenyBudgeted: return "kemeny-budgeted";
        case AggregationMethod::Borda: return "borda";
        case AggregationMethod::Rrf: return "rrf";
    }
    throw ValidationError("unknown aggregation method");
}

AggregationMethod aggregation_method_from_string(const std::string& name) {
    if (name == "kemeny-exact") return AggregationMethod::KemenyExact;
    if (name == "kemeny-budgeted") return AggregationMethod::KemenyBudgeted;
    if (name == "borda") return AggregationMethod::Borda;
    if (name == "rrf") return AggregationMethod::Rrf;
    throw ValidationError("unknown aggregation method: " + name);
}

PreferenceMatrix build_preference_matrix(const std::vector<Ranking>& samples) {
    check_samples(samples);
    const std::int32_t n = samples.front().size();
    PreferenceMatrix w(n, static_cast<std::int64_t>(samples.size()));
    for (const Ranking& s : samples) {
        for (std::int32_t p = 0; p < n; ++p) {
            for (std::int32_t q = p + 1; q < n; ++q) {
                w.add_win(s[p], s[q]);
            }
        }
    }
    return w;
}

std::int64_t objective(const Ranking& candidate, const std::vector<Ranking>& samples) {
    check_samples(samples);
    std::int64_t total = 0;
    for (const Ranking& s : samples) {
        total += kendall_distance(s, candidate);
    }
    return total;
}

std::int64_t objective(const Ranking& candidate, const PreferenceMatrix& matrix) {
    if (candidate.size() != matrix.size()) {
        throw DimensionError("objective: candidate size does not match the matrix");
    }
    std::int64_t total = 0;
    for (std::int32_t p = 0; p < candidate.size(); ++p) {
        for (std::int32_t q = p + 1; q < candidate.size(); ++q) {
            total += matrix.wins(candidate[q], candidate[p]);
        }
    }
    return total;
}

AggregationResult kemeny_exact(const std::vector<Ranking>& samples, std::int32_t exact_limit) {
    return kemeny_exact(build_preference_matrix(samples), exact_limit);
}

AggregationResult kemeny_exact(const PreferenceMatrix& w, std::int32_t exact_limit) {
    const std::int32_t n = w.size();
    if (exact_limit < 1 || exact_limit > 24) {
        throw ValidationError("exact_limit must be in [1, 24]");
    }
    if (n > exact_limit) {
        throw ValidationError("kemeny_exact refuses n = " + std::to_string(n) + " > exact limit " +
                              std::to_string(exact_limit) + "; use kemeny_solve instead");
    }

    const std::uint32_t full = (n == 32) ? ~0u : ((1u << n) - 1u);
    // suffix_cost[S] = optimal cost of arranging the items outside S, given
    // that the items inside S are already placed before them.
    std::vector<std::int64_t> suffix_cost(static_cast<std::size_t>(full) + 1, 0);

    const auto append_cost = [&](std::uint32_t placed, std::int32_t j) {
        std::int64_t c = 0;
        for (std::int32_t a = 0; a < n; ++a) {
            if (placed & (1u << a)) {
                c += w.wins(j, a);
            }
        }
        return c;
    };

    for (std::uint32_t s = full; s-- > 0;) {
        std::int64_t best = std::numeric_limits<std::int64_t>::max();
        for (std::int32_t j = 0; j < n; ++j) {
            if (s & (1u << j)) {
                continue;
            }
            const std::int64_t v = append_cost(s, j) + suffix_cost[s | (1u << j)];
            best = std::min(best, v);
        }
        suffix_cost[s] = best;
    }

    // Lexicographically smallest optimum: at every step take the smallest
    // item that still reaches the optimal suffix cost.
    std::vector<std::int32_t> order;
    order.reserve(static_cast<std::size_t>(n));
    std::uint32_t placed = 0;
    while (placed != full) {
        for (std::int32_t j = 0; j < n; ++j) {
            if (placed & (1u << j)) {
                continue;
            }
            if (append_cost(placed, j) + suffix_cost[placed | (1u << j)] == suffix_cost[placed]) {
                order.push_back(j);
                placed |= 1u << j;
                break;
            }
        }
    }

    return AggregationResult{Ranking(std::move(order)), suffix_cost[0], true,
                             AggregationMethod::KemenyExact};
}

AggregationResult kemeny_solve(const PreferenceMatrix& matrix, const SolveBudget& budget) {
    std::vector<std::int32_t> incumbent = borda_from_matrix(matrix).order();
    std::int64_t incumbent_obj = objective(Ranking(incumbent), matrix);
    incumbent_obj = local_search(incumbent, incumbent_obj, matrix);

    BranchAndBound bnb(matrix, budget, std::move(incumbent), incumbent_obj);
    bnb.search();

    std::vector<std::int32_t> order = std::move(bnb.best);
    std::int64_t obj = bnb.best_obj;
    const bool exact = !bnb.budget_hit;
    if (!exact) {
        obj = local_search(order, obj, matrix);
    }
    return AggregationResult{Ranking(std::move(order)), obj, exact,
                             exact ? AggregationMethod::KemenyExact : AggregationMethod::KemenyBudgeted};
}

AggregationResult kemeny_solve(const std::vector<Ranking>& samples, const SolveBudget& budget) {
    const PreferenceMatrix w = build_preference_matrix(samples);
    AggregationResult result = kemeny_solve(w, budget);
    if (!result.exact) {
        // Budget ran out: make sure no baseline aggregate beats the incumbent.
        for (const AggregationResult& alt : {borda(samples), rrf(samples)}) {
            std::vector<std::int32_t> order = alt.ranking.order();
            const std::int64_t obj = local_search(order, alt.objective, w);
            if (obj < result.objective) {
                result.ranking = Ranking(std::move(order));
                result.objective = obj;
            }
        }
    }
    return result;
}

AggregationResult kemeny(const std::vector<Ranking>& samples, std::int32_t exact_limit,
                         const SolveBudget& budget) {
    check_samples(samples);
    if (samples.front().size() <= exact_limit) {
        return kemeny_exact(samples, exact_limit);
    }
    return kemeny_solve(samples, budget);
}

AggregationResult borda(const std::vector<Ranking>& samples) {
    check_samples(samples);
    const std::int32_t n = samples.front().size();
    std::vector<std::int64_t> rank_sum(static_cast<std::size_t>(n), 0);
    for (const Ranking& s : samples) {
        const Ranking pos = s.inverse();
        for (std::int32_t item = 0; item < n; ++item) {
            rank_sum[item] += pos[item] + 1;
        }
    }
    Ranking ranking = order_items_by(n, [&](std::int32_t j) { return rank_sum[j]; });
    const std::int64_t obj = objective(ranking, samples);
    return AggregationResult{std::move(ranking), obj, false, AggregationMethod::Borda};
}

AggregationResult rrf(const std::vector<Ranking>& samples, double k) {
    check_samples(samples);
    if (!(k > 0.0)) {
        throw ValidationError("rrf requires k > 0");
    }
    const std::int32_t n = samples.front().size();
    std::vector<double> score(static_cast<std::size_t>(n), 0.0);
    for (const Ranking& s : samples) {
        const Ranking pos = s.inverse();
        for (std::int32_t item = 0; item < n; ++item) {
            score[item] += 1.0 / (k + static_cast<double>(pos[item] + 1));
        }
    }
    // Descending score; negate so the shared ascending sort applies.
    Ranking ranking = order_items_by(n, [&](std::int32_t j) { return -score[j]; });
    const std::int64_t obj = objective(ranking, samples);
    return AggregationResult{std::move(ranking), obj, false, AggregationMethod::Rrf};
}

} // namespace psc
