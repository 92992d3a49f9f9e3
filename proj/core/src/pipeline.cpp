#include "psc/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "psc/errors.hpp"

namespace psc {

namespace {

constexpr std::uint64_t kShuffleStream = 0x73687566;  // shuffle draws
constexpr std::uint64_t kRankStream = 0x72616e6b;     // simulated-ranker calls
constexpr std::uint64_t kWindowStream = 0x77696e64;   // per-window sub-seeds

// Items ordered by id: the canonical frame every shuffle and tie-break is
// keyed to, so the incoming list order cannot leak into the result.
Ranking id_order(const ItemList& items) {
    std::vector<std::int32_t> order(static_cast<std::size_t>(items.size()));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) {
        return items[a].id < items[b].id;
    });
    return Ranking(std::move(order));
}

struct Attempt {
    std::int32_t sample = 0;
    std::int32_t attempt = 0;
    Ranking shuffle;            // presented position -> original item index
    ItemList presented;
    std::uint64_t call_seed = 0;
    RankerOutput output;
    std::exception_ptr error;
};

// Fan the ranker over the attempts up to the in-flight cap; results land by
// index so scheduling cannot change the trace.
void run_attempts(std::vector<Attempt>& attempts, ListwiseRanker& ranker, std::int32_t cap) {
    const auto count = static_cast<std::int32_t>(attempts.size());
    const std::int32_t workers = std::max<std::int32_t>(1, std::min(cap, count));
    if (workers == 1) {
        for (Attempt& a : attempts) {
            a.output = ranker.rank(a.presented, a.call_seed);
        }
        return;
    }
    std::atomic<std::int32_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (std::int32_t w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                const std::int32_t i = next.fetch_add(1);
                if (i >= count) {
                    return;
                }
                try {
                    attempts[i].output = ranker.rank(attempts[i].presented, attempts[i].call_seed);
                } catch (...) {
                    attempts[i].error = std::current_exception();
                }
            }
        });
    }
    for (std::thread& t : pool) {
        t.join();
    }
    for (const Attempt& a : attempts) {
        if (a.error) {
            std::rethrow_exception(a.error);
        }
    }
}

Attempt make_attempt(const ItemList& items, const Ranking& by_id, const PscConfig& config,
                     std::int32_t sample, std::int32_t attempt) {
    Attempt a;
    a.sample = sample;
    a.attempt = attempt;
    Rng shuffle_rng(derive_seed(config.seed, kShuffleStream, static_cast<std::uint64_t>(sample),
                                static_cast<std::uint64_t>(attempt)));
    // Draw the shuffle in id space, then rebase onto the incoming positions.
    const Ranking tau = random_ranking(items.size(), shuffle_rng);
    a.shuffle = compose(by_id, tau);
    a.presented = apply(items, a.shuffle);
    a.call_seed = derive_seed(config.seed, kRankStream, static_cast<std::uint64_t>(sample),
                              static_cast<std::uint64_t>(attempt));
    return a;
}

AggregationResult aggregate_samples(const std::vector<Ranking>& canonical_ids,
                                    const PscConfig& config) {
    switch (config.aggregator) {
        case AggregatorKind::Kemeny:
            return kemeny(canonical_ids, config.exact_limit, config.budget);
        case AggregatorKind::Borda:
            return borda(canonical_ids);
        case AggregatorKind::Rrf:
            return rrf(canonical_ids, config.rrf_k);
    }
    throw ValidationError("unknown aggregator kind");
}

} // namespace

std::string to_string(AggregatorKind kind) {
    switch (kind) {
        case AggregatorKind::Kemeny: return "kemeny";
        case AggregatorKind::Borda: return "borda";
        case AggregatorKind::Rrf: return "rrf";
    }
    throw ValidationError("unknown aggregator kind");
}

AggregatorKind aggregator_kind_from_string(const std::string& name) {
    if (name == "kemeny") return AggregatorKind::Kemeny;
    if (name == "borda") return AggregatorKind::Borda;
    if (name == "rrf") return AggregatorKind::Rrf;
    throw ValidationError("unknown aggregator: " + name);
}

std::string to_string(UnparseablePolicy policy) {
    switch (policy) {
        case UnparseablePolicy::ResampleOnce: return "resample-once";
        case UnparseablePolicy::DropSample: return "drop-sample";
        case UnparseablePolicy::Fail: return "fail";
    }
    throw ValidationError("unknown unparseable policy");
}

UnparseablePolicy unparseable_policy_from_string(const std::string& name) {
    if (name == "resample-once" || name == "resample") return UnparseablePolicy::ResampleOnce;
    if (name == "drop-sample" || name == "drop") return UnparseablePolicy::DropSample;
    if (name == "fail") return UnparseablePolicy::Fail;
    throw ValidationError("unknown unparseable policy: " + name);
}

PscResult psc_rank(const ItemList& items, ListwiseRanker& ranker, const PscConfig& config) {
    if (items.empty()) {
        throw DimensionError("psc_rank needs a non-empty item list");
    }
    if (config.m < 1) {
        throw ValidationError("sample count m must be >= 1");
    }

    const Ranking by_id = id_order(items);
    const std::int32_t cap =
        config.worker_cap > 0 ? std::min(config.worker_cap, ranker.max_in_flight())
                              : ranker.max_in_flight();

    std::vector<Attempt> attempts;
    attempts.reserve(static_cast<std::size_t>(config.m));
    for (std::int32_t i = 0; i < config.m; ++i) {
        attempts.push_back(make_attempt(items, by_id, config, i, 0));
    }
    run_attempts(attempts, ranker, cap);

    PscResult result;
    result.requested = config.m;
    result.ranker_calls = config.m;

    // Second pass for samples the parser lost, when the policy allows one.
    if (config.on_unparseable == UnparseablePolicy::ResampleOnce) {
        std::vector<Attempt> retries;
        for (const Attempt& a : attempts) {
            if (!a.output.ranking.has_value()) {
                retries.push_back(make_attempt(items, by_id, config, a.sample, 1));
            }
        }
        if (!retries.empty()) {
            run_attempts(retries, ranker, cap);
            result.ranker_calls += static_cast<std::int64_t>(retries.size());
            for (Attempt& retry : retries) {
                attempts[static_cast<std::size_t>(retry.sample)] = std::move(retry);
            }
        }
    }

    std::vector<Ranking> canonical_ids;
    canonical_ids.reserve(attempts.size());
    const Ranking id_of_original = by_id.inverse();
    for (Attempt& a : attempts) {
        if (!a.output.ranking.has_value()) {
            if (config.on_unparseable == UnparseablePolicy::Fail) {
                throw PipelineError("sample " + std::to_string(a.sample) +
                                    " was unparseable and the policy is fail");
            }
            ++result.dropped;
            continue;
        }
        RankingSample sample;
        sample.index = a.sample;
        sample.shuffle = std::move(a.shuffle);
        sample.raw_output = std::move(*a.output.ranking);
        sample.canonical = compose(sample.shuffle, sample.raw_output);
        canonical_ids.push_back(compose(id_of_original, sample.canonical));
        result.samples.push_back(std::move(sample));
    }
    if (result.samples.empty()) {
        throw PipelineError("every sample was unparseable");
    }

    // Aggregate in id space so co-optimal ties break identically for any
    // presentation of the same items, then map back.
    AggregationResult agg = aggregate_samples(canonical_ids, config);
    agg.ranking = compose(by_id, agg.ranking);
    result.aggregate = std::move(agg);
    return result;
}

WindowedResult windowed_rerank(const ItemList& items, ListwiseRanker& ranker,
                               const PscConfig& config, std::int32_t window,
                               std::int32_t stride) {
    if (items.empty()) {
        throw DimensionError("windowed_rerank needs a non-empty item list");
    }
    if (stride < 1 || window < stride) {
        throw ValidationError("need 1 <= stride <= window");
    }
    const std::int32_t n = items.size();
    const std::int32_t w = std::min(window, n);

    std::vector<std::int32_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    WindowedResult result{Ranking::identity(n), {}, 0};
    std::int32_t window_index = 0;
    for (std::int32_t begin = n - w;; begin -= stride) {
        const std::int32_t b = std::max(begin, 0);

        std::vector<Item> slice;
        slice.reserve(static_cast<std::size_t>(w));
        for (std::int32_t p = b; p < b + w; ++p) {
            slice.push_back(items[order[p]]);
        }
        ItemList window_items(std::move(slice));

        PscConfig window_config = config;
        window_config.seed =
            derive_seed(config.seed, kWindowStream, static_cast<std::uint64_t>(window_index));
        PscResult psc = psc_rank(window_items, ranker, window_config);
        result.ranker_calls += psc.ranker_calls;

        const std::vector<std::int32_t> before(order.begin() + b, order.begin() + b + w);
        for (std::int32_t p = 0; p < w; ++p) {
            order[b + p] = before[psc.aggregate.ranking[p]];
        }

        WindowTrace trace;
        trace.begin = b;
        trace.end = b + w;
        trace.item_ids.reserve(static_cast<std::size_t>(w));
        for (const Item& item : window_items) {
            trace.item_ids.push_back(item.id);
        }
        trace.result = std::move(psc);
        result.windows.push_back(std::move(trace));

        ++window_index;
        if (b == 0) {
            break;
        }
    }
    result.ranking = Ranking(std::move(order));
    return result;
}

} // namespace psc
