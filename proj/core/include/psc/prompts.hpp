#pragma once

#include <cstdint>
#include <string>

#include "psc/ranking.hpp"

namespace psc {

/**
 * The instruction templates a listwise ranker is driven with. The passage
 * styles number items with bracketed identifiers [1]..[n] and ask for a
 * "[] > []" chain; the sorting styles list payloads verbatim and ask for
 * them back in order.
 */
enum class PromptStyle { RankGpt, RankVicuna, MathSort, WordSort, SentenceSort };

std::string to_string(PromptStyle style);
PromptStyle prompt_style_from_string(const std::string& name);

struct RenderedPrompt {
    std::string system;  // empty unless the style defines one
    std::string user;
};

/// Substitute the item payloads (and, for passage styles, the query) into
/// the style's template. Passage renderings contain exactly n bracketed
/// identifiers numbered 1..n.
RenderedPrompt render_prompt(PromptStyle style, const ItemList& items, const std::string& query = "");

/// "[2] > [1] > [3]" for a ranking over presented positions.
std::string render_identifier_chain(const Ranking& ranking);

/**
 * Extract a ranking over presented positions from raw model text.
 *
 * Passage styles read "[k]" identifiers in order of appearance; MathSort and
 * WordSort read comma-separated payloads matched verbatim against the
 * presented items; SentenceSort matches one payload per line (leading "-"
 * bullets stripped).
 *
 * Repair policy: out-of-range identifiers are dropped, duplicates keep their
 * first occurrence, and missing identifiers are appended in presented order,
 * so any text with at least one valid identifier yields a bijective
 * n-ranking. Zero extractable identifiers throw UnparseableOutputError.
 */
Ranking parse_ranking_output(const std::string& text, const ItemList& presented, PromptStyle style);

/// Identifier-style parse when only the list length is known.
Ranking parse_ranking_output(const std::string& text, std::int32_t n, PromptStyle style);

} // namespace psc
