#pragma once

#include <string>
#include <vector>

#include "psc/ranking.hpp"

namespace psc::test {

inline Ranking R(const std::vector<std::int64_t>& one_based) {
    return Ranking::from_one_based(one_based);
}

inline ItemList items_named(const std::vector<std::string>& texts) {
    std::vector<Item> items;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        items.push_back(Item{"i" + std::to_string(i + 1), texts[i]});
    }
    return ItemList(std::move(items));
}

inline std::vector<std::string> texts_of(const ItemList& items) {
    std::vector<std::string> out;
    for (const Item& item : items) {
        out.push_back(item.text);
    }
    return out;
}

} // namespace psc::test
