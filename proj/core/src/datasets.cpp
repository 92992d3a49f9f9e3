#include "psc/datasets.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "psc/errors.hpp"
#include "psc/rng.hpp"

namespace psc {

using nlohmann::json;

namespace {

constexpr std::int32_t kItemsPerTask = 10;
constexpr std::int32_t kConsecutiveWords = 5;

// Exact rational value of a generated expression; denominators stay tiny
// (digits are 1..9) so cross-multiplied comparison cannot overflow.
struct Fraction {
    std::int64_t num = 0;
    std::int64_t den = 1;

    static Fraction reduced(std::int64_t n, std::int64_t d) {
        const std::int64_t g = std::gcd(n < 0 ? -n : n, d);
        return Fraction{n / g, d / g};
    }

    bool operator==(const Fraction&) const = default;
    bool operator<(const Fraction& o) const { return num * o.den < o.num * den; }
};

struct Expression {
    std::string text;
    Fraction value;
};

Expression random_expression(Rng& rng) {
    static const char ops[] = {'+', '-', '*', '/'};
    const auto a = static_cast<std::int64_t>(rng.below(9)) + 1;
    const char op = ops[rng.below(4)];
    const auto b = static_cast<std::int64_t>(rng.below(9)) + 1;
    Fraction value;
    switch (op) {
        case '+': value = Fraction{a + b, 1}; break;
        case '-': value = Fraction{a - b, 1}; break;
        case '*': value = Fraction{a * b, 1}; break;
        default: value = Fraction::reduced(a, b); break;
    }
    return Expression{std::to_string(a) + " " + op + " " + std::to_string(b), value};
}

std::string slot_id(std::int32_t index, std::int32_t n) {
    std::string digits = std::to_string(index + 1);
    const std::size_t width = std::max<std::size_t>(2, std::to_string(n).size());
    return "s" + std::string(width - digits.size(), '0') + digits;
}

ItemList slot_items(const std::vector<std::string>& payloads) {
    std::vector<Item> items;
    items.reserve(payloads.size());
    const auto n = static_cast<std::int32_t>(payloads.size());
    for (std::int32_t i = 0; i < n; ++i) {
        items.push_back(Item{slot_id(i, n), payloads[i]});
    }
    return ItemList(std::move(items));
}

// Gold = presented indices sorted ascending by a key.
template <typename Less>
Ranking gold_by(std::int32_t n, Less&& less) {
    std::vector<std::int32_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), less);
    return Ranking(std::move(order));
}

std::string multiset_signature(std::vector<std::string> payloads) {
    std::sort(payloads.begin(), payloads.end());
    std::string sig;
    for (const std::string& p : payloads) {
        sig += p;
        sig += '\x1f';
    }
    return sig;
}

} // namespace

std::string to_string(SortKind kind) {
    switch (kind) {
        case SortKind::Math: return "math";
        case SortKind::Word: return "word";
        case SortKind::Sentence: return "sentence";
    }
    throw ValidationError("unknown sort kind");
}

SortKind sort_kind_from_string(const std::string& name) {
    if (name == "math") return SortKind::Math;
    if (name == "word") return SortKind::Word;
    if (name == "sentence") return SortKind::Sentence;
    throw ValidationError("unknown sort kind: " + name);
}

std::vector<SortTask> gen_mathsort(std::int32_t count, std::uint64_t seed) {
    if (count < 1) {
        throw ValidationError("dataset size must be >= 1");
    }
    std::vector<SortTask> tasks;
    tasks.reserve(static_cast<std::size_t>(count));
    std::set<std::string> signatures;
    for (std::int32_t t = 0; t < count; ++t) {
        Rng rng(derive_seed(seed, 0x6d617468u /* math */, static_cast<std::uint64_t>(t)));
        std::vector<Expression> exprs;
        std::vector<std::string> payloads;
        while (true) {
            exprs.clear();
            payloads.clear();
            std::vector<Fraction> values;
            while (static_cast<std::int32_t>(exprs.size()) < kItemsPerTask) {
                Expression e = random_expression(rng);
                if (std::find(values.begin(), values.end(), e.value) != values.end()) {
                    continue;  // values must be unique within a task
                }
                values.push_back(e.value);
                payloads.push_back(e.text);
                exprs.push_back(std::move(e));
            }
            if (signatures.insert(multiset_signature(payloads)).second) {
                break;  // and item lists unique across the dataset
            }
        }
        SortTask task;
        task.kind = SortKind::Math;
        task.items = slot_items(payloads);
        task.gold = gold_by(kItemsPerTask, [&](std::int32_t a, std::int32_t b) {
            return exprs[a].value < exprs[b].value;
        });
        tasks.push_back(std::move(task));
    }
    return tasks;
}

std::vector<SortTask> gen_wordsort(const std::vector<std::string>& lexicon, std::int32_t count,
                                   std::uint64_t seed) {
    if (count < 1) {
        throw ValidationError("dataset size must be >= 1");
    }
    if (static_cast<std::int32_t>(lexicon.size()) < kItemsPerTask) {
        throw ValidationError("lexicon too small: need at least " +
                              std::to_string(kItemsPerTask) + " words, have " +
                              std::to_string(lexicon.size()));
    }
    for (std::size_t i = 1; i < lexicon.size(); ++i) {
        if (!(lexicon[i - 1] < lexicon[i])) {
            throw ValidationError("lexicon must be strictly ascending (entry " +
                                  std::to_string(i) + ")");
        }
    }

    const auto lex_size = static_cast<std::int64_t>(lexicon.size());
    std::vector<SortTask> tasks;
    tasks.reserve(static_cast<std::size_t>(count));
    std::set<std::string> signatures;
    for (std::int32_t t = 0; t < count; ++t) {
        Rng rng(derive_seed(seed, 0x776f7264u /* word */, static_cast<std::uint64_t>(t)));
        std::vector<std::string> payloads;
        while (true) {
            payloads.clear();
            const auto start = static_cast<std::int64_t>(
                rng.below(static_cast<std::uint64_t>(lex_size - kConsecutiveWords + 1)));
            std::set<std::int64_t> chosen;
            for (std::int64_t i = start; i < start + kConsecutiveWords; ++i) {
                chosen.insert(i);
            }
            while (static_cast<std::int32_t>(chosen.size()) < kItemsPerTask) {
                chosen.insert(static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(lex_size))));
            }
            for (std::int64_t i : chosen) {
                payloads.push_back(lexicon[static_cast<std::size_t>(i)]);
            }
            rng.shuffle(payloads);
            if (signatures.insert(multiset_signature(payloads)).second) {
                break;
            }
        }
        SortTask task;
        task.kind = SortKind::Word;
        task.items = slot_items(payloads);
        task.gold = gold_by(kItemsPerTask, [&](std::int32_t a, std::int32_t b) {
            return payloads[a] < payloads[b];
        });
        tasks.push_back(std::move(task));
    }
    return tasks;
}

std::vector<SortTask> load_sentence_sort(std::istream& in, std::uint64_t seed) {
    std::vector<SortTask> tasks;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        json record;
        try {
            record = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad sentence record: ") + e.what(), line_no);
        }
        if (!record.is_array()) {
            throw ParseError("sentence record must be a JSON array of strings", line_no);
        }
        std::vector<std::string> sentences;
        for (const json& s : record) {
            if (!s.is_string()) {
                throw ParseError("sentence record must contain only strings", line_no);
            }
            sentences.push_back(s.get<std::string>());
        }
        const auto n = static_cast<std::int32_t>(sentences.size());
        if (n < 2) {
            throw ParseError("sentence record needs at least 2 sentences", line_no);
        }

        Rng rng(derive_seed(seed, 0x73656e74u /* sent */, line_no));
        const Ranking shuffle = random_ranking(n, rng);  // presented position -> source index

        std::vector<std::string> presented;
        presented.reserve(static_cast<std::size_t>(n));
        for (std::int32_t p = 0; p < n; ++p) {
            presented.push_back(sentences[shuffle[p]]);
        }

        SortTask task;
        task.kind = SortKind::Sentence;
        task.items = slot_items(presented);
        task.gold = shuffle.inverse();  // applying gold to the presented order restores the source
        tasks.push_back(std::move(task));
    }
    return tasks;
}

double score_sort(const Ranking& prediction, const SortTask& task) {
    if (prediction.size() != task.gold.size()) {
        throw DimensionError("prediction size does not match the task");
    }
    return kendall_tau(prediction, task.gold);
}

void write_dataset(std::ostream& out, const std::vector<SortTask>& tasks) {
    for (const SortTask& task : tasks) {
        json items = json::array();
        for (const Item& item : task.items) {
            items.push_back({{"id", item.id}, {"text", item.text}});
        }
        json line = {{"kind", to_string(task.kind)},
                     {"items", std::move(items)},
                     {"gold", task.gold.to_one_based()}};
        out << line.dump() << '\n';
    }
}

std::vector<SortTask> read_dataset(std::istream& in) {
    std::vector<SortTask> tasks;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        json record;
        try {
            record = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad dataset record: ") + e.what(), line_no);
        }
        try {
            SortTask task;
            task.kind = sort_kind_from_string(record.at("kind").get<std::string>());
            std::vector<Item> items;
            for (const json& j : record.at("items")) {
                items.push_back(Item{j.at("id").get<std::string>(), j.at("text").get<std::string>()});
            }
            task.items = ItemList(std::move(items));
            task.gold = Ranking::from_one_based(record.at("gold").get<std::vector<std::int64_t>>());
            if (task.gold.size() != task.items.size()) {
                throw ValidationError("gold ranking does not match the item count");
            }
            tasks.push_back(std::move(task));
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad dataset record: ") + e.what(), line_no);
        } catch (const Error& e) {
            throw ParseError(std::string("bad dataset record: ") + e.what(), line_no);
        }
    }
    return tasks;
}

} // namespace psc
