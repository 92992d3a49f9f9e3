#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "psc/ranking.hpp"

namespace psc {

enum class SortKind { Math, Word, Sentence };

std::string to_string(SortKind kind);
SortKind sort_kind_from_string(const std::string& name);

/// A sorting example: scrambled items plus the true ascending order of the
/// presented positions.
struct SortTask {
    ItemList items;
    Ranking gold;  // position -> presented index
    SortKind kind = SortKind::Math;
};

/**
 * Ten arithmetic expressions per task, each "digit op digit" with digits 1-9
 * and op in {+, -, *, /}. Values are unique within a task (compared as exact
 * rationals), item lists are unique across the dataset, and gold sorts
 * ascending by value.
 */
std::vector<SortTask> gen_mathsort(std::int32_t count, std::uint64_t seed);

/**
 * Ten words per task: five consecutive entries of the lexicon mixed with
 * five random other entries, shuffled; gold is alphabetical order. The
 * lexicon must be strictly ascending and hold at least ten words.
 */
std::vector<SortTask> gen_wordsort(const std::vector<std::string>& lexicon, std::int32_t count,
                                   std::uint64_t seed);

/// Bundled fallback lexicon (sorted common English words).
const std::vector<std::string>& default_lexicon();

/**
 * Sentence-unscrambling tasks from user-supplied ordered records: JSONL, one
 * JSON array of >= 2 sentence strings per line. Sentences are shuffled per
 * record; gold recovers the source order.
 */
std::vector<SortTask> load_sentence_sort(std::istream& in, std::uint64_t seed);

/// kendall_tau between prediction and gold, both over presented positions.
double score_sort(const Ranking& prediction, const SortTask& task);

/// JSONL: {"kind": ..., "items": [{"id","text"},...], "gold": [1-based]}.
void write_dataset(std::ostream& out, const std::vector<SortTask>& tasks);
std::vector<SortTask> read_dataset(std::istream& in);

} // namespace psc
