#include "psc/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <sstream>

#include "psc/errors.hpp"

namespace psc {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) {
        ++a;
    }
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) {
        --b;
    }
    return s.substr(a, b - a);
}

std::string join_payloads(const ItemList& items, const char* sep) {
    std::string out;
    for (std::int32_t i = 0; i < items.size(); ++i) {
        if (i > 0) {
            out += sep;
        }
        out += items[i].text;
    }
    return out;
}

std::string passage_block(const ItemList& items) {
    std::string out;
    for (std::int32_t i = 0; i < items.size(); ++i) {
        if (i > 0) {
            out += "\n\n";
        }
        out += "[" + std::to_string(i + 1) + "] " + items[i].text;
    }
    return out;
}

// Raw "[k]" identifiers in order of appearance, 1-based as written.
std::vector<std::int64_t> scan_identifiers(const std::string& text) {
    std::vector<std::int64_t> ids;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '[') {
            std::size_t j = i + 1;
            std::int64_t value = 0;
            bool any = false;
            while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) {
                value = value * 10 + (text[j] - '0');
                any = true;
                ++j;
            }
            if (any && j < text.size() && text[j] == ']') {
                ids.push_back(value);
                i = j + 1;
                continue;
            }
        }
        ++i;
    }
    return ids;
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::string current;
    for (char c : text) {
        if (c == sep) {
            parts.push_back(current);
            current.clear();
        } else {
            current += c;
        }
    }
    parts.push_back(current);
    return parts;
}

// Match extracted tokens against the presented payloads, first unused
// occurrence wins when a payload repeats.
std::vector<std::int64_t> match_payloads(const std::vector<std::string>& tokens,
                                         const ItemList& presented) {
    std::vector<bool> used(static_cast<std::size_t>(presented.size()), false);
    std::vector<std::int64_t> ids;
    for (const std::string& raw : tokens) {
        const std::string token = trim(raw);
        if (token.empty()) {
            continue;
        }
        for (std::int32_t i = 0; i < presented.size(); ++i) {
            if (!used[i] && presented[i].text == token) {
                used[i] = true;
                ids.push_back(i + 1);
                break;
            }
        }
    }
    return ids;
}

Ranking repair(const std::vector<std::int64_t>& raw_ids, std::int32_t n) {
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    std::vector<std::int32_t> order;
    order.reserve(static_cast<std::size_t>(n));
    bool any_valid = false;
    for (std::int64_t id : raw_ids) {
        if (id < 1 || id > n) {
            continue;  // out of range: drop
        }
        any_valid = true;
        const auto idx = static_cast<std::int32_t>(id - 1);
        if (!seen[idx]) {  // duplicate: keep first occurrence
            seen[idx] = true;
            order.push_back(idx);
        }
    }
    if (!any_valid) {
        throw UnparseableOutputError("no valid identifier in ranker output");
    }
    for (std::int32_t i = 0; i < n; ++i) {  // missing: append in presented order
        if (!seen[i]) {
            order.push_back(i);
        }
    }
    return Ranking(std::move(order));
}

} // namespace

std::string to_string(PromptStyle style) {
    switch (style) {
        case PromptStyle::RankGpt: return "rankgpt";
        case PromptStyle::RankVicuna: return "rankvicuna";
        case PromptStyle::MathSort: return "mathsort";
        case PromptStyle::WordSort: return "wordsort";
        case PromptStyle::SentenceSort: return "sentence-sort";
    }
    throw ValidationError("unknown prompt style");
}

PromptStyle prompt_style_from_string(const std::string& name) {
    if (name == "rankgpt") return PromptStyle::RankGpt;
    if (name == "rankvicuna") return PromptStyle::RankVicuna;
    if (name == "mathsort") return PromptStyle::MathSort;
    if (name == "wordsort") return PromptStyle::WordSort;
    if (name == "sentence-sort" || name == "sentencesort") return PromptStyle::SentenceSort;
    throw ValidationError("unknown prompt style: " + name);
}

RenderedPrompt render_prompt(PromptStyle style, const ItemList& items, const std::string& query) {
    if (items.empty()) {
        throw DimensionError("cannot render a prompt for an empty item list");
    }
    const std::string num = std::to_string(items.size());
    switch (style) {
        case PromptStyle::RankVicuna: {
            std::string user =
                "I will provide you with " + num +
                " passages, each indicated by a numerical identifier []. Rank the passages based "
                "on their relevance to the search query: " + query + ".\n\n" +
                passage_block(items) + "\n\nSearch Query: " + query + ".\n" +
                "Rank the " + num +
                " passages above based on their relevance to the search query. All the passages "
                "should be included and listed using identifiers, in descending order of "
                "relevance. The output format should be [] > [], e.g., [4] > [2]. Only respond "
                "with the ranking results, do not say any word or explain.";
            return RenderedPrompt{"", std::move(user)};
        }
        case PromptStyle::RankGpt: {
            std::string system =
                "You are RankGPT, an intelligent assistant that can rank passages based on their "
                "relevancy to the query.";
            std::string user =
                "I will provide you with " + num +
                " passages, each indicated by number identifier [].\n"
                "Rank the passages based on their relevance to query: " + query + ".\n\n" +
                passage_block(items) + "\n\nSearch Query: " + query + ".\n" +
                "Rank the " + num +
                " passages above based on their relevance to the search query. The passages "
                "should be listed in descending order using identifiers. The most relevant "
                "passages should be listed first. The output format should be [] > [], e.g., "
                "[1] > [2]. Only response the ranking results, do not say any word or explain.";
            return RenderedPrompt{std::move(system), std::move(user)};
        }
        case PromptStyle::MathSort: {
            std::string user =
                "Sort the following expressions from smallest to largest: " +
                join_payloads(items, ", ") +
                ". The output format should be a comma-separated list containing the exact "
                "expressions; do not reduce them. Only respond with the results; do not say any "
                "word or explain.";
            return RenderedPrompt{"", std::move(user)};
        }
        case PromptStyle::WordSort: {
            std::string user =
                "Order these words alphabetically: " + join_payloads(items, ", ") +
                ". The output format should be a comma-separated list containing the exact "
                "words. Only respond with the results; do not say any word or explain.";
            return RenderedPrompt{"", std::move(user)};
        }
        case PromptStyle::SentenceSort: {
            std::string user = "Order the scrambled sentences logically:";
            for (const Item& item : items) {
                user += "\n- " + item.text;
            }
            user +=
                "\nThe output format should have each sentence on a new line. Only respond with "
                "the results; do not say any word or explain.";
            return RenderedPrompt{"", std::move(user)};
        }
    }
    throw ValidationError("unknown prompt style");
}

std::string render_identifier_chain(const Ranking& ranking) {
    std::string out;
    for (std::int32_t p = 0; p < ranking.size(); ++p) {
        if (p > 0) {
            out += " > ";
        }
        out += "[" + std::to_string(ranking[p] + 1) + "]";
    }
    return out;
}

Ranking parse_ranking_output(const std::string& text, const ItemList& presented,
                             PromptStyle style) {
    const std::int32_t n = presented.size();
    if (n < 1) {
        throw DimensionError("cannot parse against an empty item list");
    }
    switch (style) {
        case PromptStyle::RankGpt:
        case PromptStyle::RankVicuna:
            return repair(scan_identifiers(text), n);
        case PromptStyle::MathSort:
        case PromptStyle::WordSort:
            return repair(match_payloads(split(text, ','), presented), n);
        case PromptStyle::SentenceSort: {
            std::vector<std::string> lines = split(text, '\n');
            for (std::string& line : lines) {
                std::string t = trim(line);
                if (t.rfind("- ", 0) == 0) {
                    t = t.substr(2);
                } else if (!t.empty() && t[0] == '-') {
                    t = t.substr(1);
                }
                line = trim(t);
            }
            return repair(match_payloads(lines, presented), n);
        }
    }
    throw ValidationError("unknown prompt style");
}

Ranking parse_ranking_output(const std::string& text, std::int32_t n, PromptStyle style) {
    if (style != PromptStyle::RankGpt && style != PromptStyle::RankVicuna) {
        throw ValidationError("parsing the " + to_string(style) +
                              " style needs the presented items");
    }
    if (n < 1) {
        throw DimensionError("cannot parse a ranking of size " + std::to_string(n));
    }
    return repair(scan_identifiers(text), n);
}

} // namespace psc
