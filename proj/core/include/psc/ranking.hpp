#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "psc/errors.hpp"
#include "psc/rng.hpp"

namespace psc {

/**
 * A total ordering of n items: a permutation stored as the position->item
 * map, i.e. entry p (0-based) holds the index of the item placed at output
 * position p. Applying a Ranking s to a sequence X yields X[s] with
 * X[s]_p = X_{s(p)}.
 *
 * Internally 0-based; the wire format is the same array 1-based, e.g.
 * [3,1,2]. Instances are immutable after construction.
 */
class Ranking {
public:
    /// Size-0 placeholder; every constructor taking values requires n >= 1.
    Ranking() = default;

    /// Values must be a permutation of 0..n-1, n >= 1.
    explicit Ranking(std::vector<std::int32_t> position_to_item);

    static Ranking identity(std::int32_t n);
    static Ranking from_one_based(const std::vector<std::int64_t>& values);

    std::int32_t size() const { return static_cast<std::int32_t>(map_.size()); }

    /// Item index at output position p.
    std::int32_t operator[](std::int32_t position) const { return map_[position]; }
    std::int32_t at(std::int32_t position) const;

    /// Output position of an item (linear scan; use inverse() in bulk).
    std::int32_t position_of(std::int32_t item) const;

    const std::vector<std::int32_t>& order() const { return map_; }
    std::vector<std::int64_t> to_one_based() const;

    /// inverse()(s(p)) == p for every position p.
    Ranking inverse() const;

    bool operator==(const Ranking&) const = default;
    auto operator<=>(const Ranking&) const = default;

private:
    std::vector<std::int32_t> map_;
};

struct Item {
    std::string id;
    std::string text;

    bool operator==(const Item&) const = default;
};

/// The ordered payload being ranked. Item ids must be unique within a list.
class ItemList {
public:
    ItemList() = default;
    explicit ItemList(std::vector<Item> items);

    std::int32_t size() const { return static_cast<std::int32_t>(items_.size()); }
    bool empty() const { return items_.empty(); }
    const Item& operator[](std::int32_t i) const { return items_[i]; }
    const std::vector<Item>& items() const { return items_; }

    auto begin() const { return items_.begin(); }
    auto end() const { return items_.end(); }

    bool operator==(const ItemList&) const = default;

private:
    std::vector<Item> items_;
};

/// X[s]: result_p = items_{s(p)}.
ItemList apply(const ItemList& items, const Ranking& sigma);

/// (f o g)(p) = f(g(p)).
Ranking compose(const Ranking& f, const Ranking& g);

/// inv(s)_i = #{ j < i : s(j) > s(i) }; entry i lies in [0, i].
std::vector<std::int32_t> inversion_vector(const Ranking& sigma);

/// Number of discordant item pairs: sum of inversion_vector(a^-1 o b).
std::int64_t kendall_distance(const Ranking& a, const Ranking& b);

/// 1 - 2*d / C(n,2); requires n >= 2. 1 iff equal, -1 iff reversed.
double kendall_tau(const Ranking& a, const Ranking& b);

/// Uniform over all n! permutations; deterministic given the generator state.
Ranking random_ranking(std::int32_t n, Rng& rng);

std::int64_t pair_count(std::int32_t n);

} // namespace psc
