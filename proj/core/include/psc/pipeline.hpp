#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "psc/aggregation.hpp"
#include "psc/ranker.hpp"
#include "psc/ranking.hpp"

namespace psc {

enum class AggregatorKind { Kemeny, Borda, Rrf };

std::string to_string(AggregatorKind kind);
AggregatorKind aggregator_kind_from_string(const std::string& name);

enum class UnparseablePolicy { ResampleOnce, DropSample, Fail };

std::string to_string(UnparseablePolicy policy);
UnparseablePolicy unparseable_policy_from_string(const std::string& name);

struct PscConfig {
    std::int32_t m = 20;                 // shuffled samples per input
    AggregatorKind aggregator = AggregatorKind::Kemeny;
    std::uint64_t seed = 0;
    UnparseablePolicy on_unparseable = UnparseablePolicy::DropSample;
    std::int32_t exact_limit = kDefaultExactLimit;
    SolveBudget budget{};
    double rrf_k = kDefaultRrfK;
    std::int32_t worker_cap = 0;         // 0 = use the ranker's in-flight cap
};

/**
 * One shuffled-prompt observation. `canonical` is the item-identity reading
 * of the raw output under the shuffle: canonical == compose(shuffle,
 * raw_output), i.e. the item placed first is items[shuffle[raw_output[0]]].
 */
struct RankingSample {
    std::int32_t index = 0;   // sample number, 0-based
    Ranking shuffle;          // presented position -> original item index
    Ranking raw_output;       // output position -> presented position
    Ranking canonical;        // output position -> original item index
};

struct PscResult {
    AggregationResult aggregate;         // ranking over original item indices
    std::vector<RankingSample> samples;  // usable samples, ordered by index
    std::int32_t requested = 0;          // configured m
    std::int32_t dropped = 0;            // samples lost to the unparseable policy
    std::int64_t ranker_calls = 0;
};

/**
 * The shuffle-aggregate decoding procedure: present m independent shuffles
 * of the items to the ranker, canonicalize every output to item-identity
 * space, and aggregate the canonical rankings into the central ranking.
 *
 * Shuffles and aggregation tie-breaks are keyed to item identity (ids), not
 * to the incoming list order, so re-presenting the same items in a different
 * initial order changes nothing but the labels of the result. Per-sample
 * randomness derives from (seed, sample index), which makes the full trace
 * reproducible and independent of call scheduling. The m ranker calls fan
 * out across threads up to the ranker's in-flight cap.
 */
PscResult psc_rank(const ItemList& items, ListwiseRanker& ranker, const PscConfig& config);

struct WindowTrace {
    std::int32_t begin = 0;  // window slice [begin, end) over the list order at processing time
    std::int32_t end = 0;
    std::vector<std::string> item_ids;  // slice contents when the window ran
    PscResult result;
};

struct WindowedResult {
    Ranking ranking;  // position -> original item index, full n
    std::vector<WindowTrace> windows;  // in processing order, back to front
    std::int64_t ranker_calls = 0;
};

/**
 * Strided sliding-window reranking for lists too long for one call: windows
 * run back to front, each window is PSC-ranked in place, and the overlap
 * (window - stride) carries promoted items toward the front. A window of at
 * least n degenerates to a single psc_rank. Shuffling happens strictly
 * within windows.
 */
WindowedResult windowed_rerank(const ItemList& items, ListwiseRanker& ranker,
                               const PscConfig& config, std::int32_t window = 20,
                               std::int32_t stride = 10);

} // namespace psc
