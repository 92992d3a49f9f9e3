#include "psc/ranking.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

namespace psc {

namespace {

void check_same_size(const Ranking& a, const Ranking& b, const char* what) {
    if (a.size() != b.size()) {
        throw DimensionError(std::string(what) + ": rankings have sizes " +
                             std::to_string(a.size()) + " and " + std::to_string(b.size()));
    }
}

} // namespace

Ranking::Ranking(std::vector<std::int32_t> position_to_item) : map_(std::move(position_to_item)) {
    const auto n = static_cast<std::int32_t>(map_.size());
    if (n < 1) {
        throw DimensionError("a ranking needs at least one item");
    }
    std::vector<bool> seen(map_.size(), false);
    for (std::int32_t v : map_) {
        if (v < 0 || v >= n || seen[v]) {
            throw ValidationError("ranking values must be a permutation of 0.." +
                                  std::to_string(n - 1));
        }
        seen[v] = true;
    }
}

Ranking Ranking::identity(std::int32_t n) {
    if (n < 1) {
        throw DimensionError("a ranking needs at least one item");
    }
    std::vector<std::int32_t> v(static_cast<std::size_t>(n));
    std::iota(v.begin(), v.end(), 0);
    return Ranking(std::move(v));
}

Ranking Ranking::from_one_based(const std::vector<std::int64_t>& values) {
    std::vector<std::int32_t> v;
    v.reserve(values.size());
    for (std::int64_t x : values) {
        if (x < 1 || x > static_cast<std::int64_t>(values.size())) {
            throw ValidationError("1-based ranking entry out of range: " + std::to_string(x));
        }
        v.push_back(static_cast<std::int32_t>(x - 1));
    }
    return Ranking(std::move(v));
}

std::int32_t Ranking::at(std::int32_t position) const {
    if (position < 0 || position >= size()) {
        throw DimensionError("ranking position out of range: " + std::to_string(position));
    }
    return map_[position];
}

std::int32_t Ranking::position_of(std::int32_t item) const {
    for (std::int32_t p = 0; p < size(); ++p) {
        if (map_[p] == item) {
            return p;
        }
    }
    throw ValidationError("item not in ranking: " + std::to_string(item));
}

std::vector<std::int64_t> Ranking::to_one_based() const {
    std::vector<std::int64_t> v;
    v.reserve(map_.size());
    for (std::int32_t x : map_) {
        v.push_back(static_cast<std::int64_t>(x) + 1);
    }
    return v;
}

Ranking Ranking::inverse() const {
    std::vector<std::int32_t> inv(map_.size());
    for (std::int32_t p = 0; p < size(); ++p) {
        inv[map_[p]] = p;
    }
    return Ranking(std::move(inv));
}

ItemList::ItemList(std::vector<Item> items) : items_(std::move(items)) {
    std::unordered_set<std::string> ids;
    for (const Item& item : items_) {
        if (!ids.insert(item.id).second) {
            throw ValidationError("duplicate item id: " + item.id);
        }
    }
}

ItemList apply(const ItemList& items, const Ranking& sigma) {
    if (items.size() != sigma.size()) {
        throw DimensionError("apply: " + std::to_string(items.size()) + " items vs ranking of " +
                             std::to_string(sigma.size()));
    }
    std::vector<Item> out;
    out.reserve(items.size());
    for (std::int32_t p = 0; p < sigma.size(); ++p) {
        out.push_back(items[sigma[p]]);
    }
    return ItemList(std::move(out));
}

Ranking compose(const Ranking& f, const Ranking& g) {
    check_same_size(f, g, "compose");
    std::vector<std::int32_t> out(static_cast<std::size_t>(f.size()));
    for (std::int32_t p = 0; p < f.size(); ++p) {
        out[p] = f[g[p]];
    }
    return Ranking(std::move(out));
}

std::vector<std::int32_t> inversion_vector(const Ranking& sigma) {
    const std::int32_t n = sigma.size();
    std::vector<std::int32_t> inv(static_cast<std::size_t>(n), 0);
    for (std::int32_t i = 0; i < n; ++i) {
        for (std::int32_t j = 0; j < i; ++j) {
            if (sigma[j] > sigma[i]) {
                ++inv[i];
            }
        }
    }
    return inv;
}

std::int64_t kendall_distance(const Ranking& a, const Ranking& b) {
    check_same_size(a, b, "kendall_distance");
    const Ranking relative = compose(a.inverse(), b);
    std::int64_t d = 0;
    for (std::int32_t x : inversion_vector(relative)) {
        d += x;
    }
    return d;
}

double kendall_tau(const Ranking& a, const Ranking& b) {
    if (a.size() < 2) {
        throw DimensionError("kendall_tau is undefined for n < 2");
    }
    const std::int64_t d = kendall_distance(a, b);
    return 1.0 - 2.0 * static_cast<double>(d) / static_cast<double>(pair_count(a.size()));
}

Ranking random_ranking(std::int32_t n, Rng& rng) {
    if (n < 1) {
        throw DimensionError("random_ranking requires n >= 1");
    }
    std::vector<std::int32_t> v(static_cast<std::size_t>(n));
    std::iota(v.begin(), v.end(), 0);
    rng.shuffle(v);
    return Ranking(std::move(v));
}

std::int64_t pair_count(std::int32_t n) {
    return static_cast<std::int64_t>(n) * (n - 1) / 2;
}

} // namespace psc
