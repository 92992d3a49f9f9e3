#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <numeric>
#include <sstream>
#include <thread>

#include "helpers.hpp"
#include "oracles.hpp"
#include "psc/pipeline.hpp"
#include "psc/serialize.hpp"

using namespace psc;
using test::R;

namespace {

// Deterministic ranker that garbles (or fails) selected sample indices, for
// exercising the unparseable policies. Identifies calls by call_seed order.
class FlakyRanker : public ListwiseRanker {
public:
    explicit FlakyRanker(std::vector<bool> parse_ok) : parse_ok_(std::move(parse_ok)) {}

    std::string name() const override { return "flaky"; }
    bool deterministic() const override { return true; }
    RankerOutput rank(const ItemList& presented, std::uint64_t) override {
        const std::size_t call = calls_++;
        RankerOutput output;
        output.raw_text = "call " + std::to_string(call);
        if (call < parse_ok_.size() && !parse_ok_[call]) {
            return output;  // unparseable
        }
        output.ranking = Ranking::identity(presented.size());
        return output;
    }
    std::size_t calls() const { return calls_; }

private:
    std::vector<bool> parse_ok_;
    std::size_t calls_ = 0;
};

ItemList sorted_items(std::int32_t n) {
    std::vector<Item> items;
    for (std::int32_t i = 0; i < n; ++i) {
        items.push_back(Item{"k" + std::to_string(100 + i), "payload " + std::to_string(i)});
    }
    return ItemList(std::move(items));
}

// gold = identity over the id-sorted construction above
SimulatedRanker perfect_for(const ItemList& items) {
    return SimulatedRanker::perfect(TruthOracle::from_gold(items, Ranking::identity(items.size())));
}

} // namespace

TEST_CASE("psc_rank with a perfect ranker is unanimous") {
    const ItemList items = sorted_items(6);
    SimulatedRanker ranker = perfect_for(items);
    PscConfig config;
    config.m = 7;
    config.seed = 3;

    const PscResult result = psc_rank(items, ranker, config);
    CHECK(result.aggregate.ranking == Ranking::identity(6));
    CHECK(result.aggregate.objective == 0);
    CHECK(result.aggregate.exact);
    CHECK(result.samples.size() == 7);
    CHECK(result.ranker_calls == 7);
    CHECK(result.dropped == 0);
    for (const RankingSample& s : result.samples) {
        CHECK(s.canonical == Ranking::identity(6));  // canonical samples all agree
    }
}

TEST_CASE("m=1 returns the single canonical sample") {
    const ItemList items = sorted_items(5);
    SimulatedRanker ranker = SimulatedRanker::noisy(
        TruthOracle::from_gold(items, Ranking::identity(5)), NoiseModel::positional_window(1, 5));
    PscConfig config;
    config.m = 1;
    config.seed = 11;
    const PscResult result = psc_rank(items, ranker, config);
    REQUIRE(result.samples.size() == 1);
    CHECK(result.aggregate.ranking == result.samples[0].canonical);
}

TEST_CASE("canonicalization invariant is recomputable from the trace") {
    const ItemList items = sorted_items(8);
    SimulatedRanker ranker = SimulatedRanker::noisy(
        TruthOracle::from_gold(items, Ranking::identity(8)), NoiseModel::positional_window(2, 6));
    PscConfig config;
    config.m = 12;
    config.seed = 17;
    const PscResult result = psc_rank(items, ranker, config);
    for (const RankingSample& s : result.samples) {
        CHECK(s.canonical == compose(s.shuffle, s.raw_output));
        // the item placed first by canonical is items[shuffle[raw_output[0]]]
        CHECK(items[s.canonical[0]].id == items[s.shuffle[s.raw_output[0]]].id);
    }
}

TEST_CASE("objective equals the summed distances of the trace") {
    const ItemList items = sorted_items(7);
    SimulatedRanker ranker = SimulatedRanker::noisy(
        TruthOracle::from_gold(items, Ranking::identity(7)), NoiseModel::positional_window(3, 7));
    PscConfig config;
    config.m = 15;
    config.seed = 23;
    const PscResult result = psc_rank(items, ranker, config);
    std::int64_t recomputed = 0;
    for (const RankingSample& s : result.samples) {
        recomputed += kendall_distance(s.canonical, result.aggregate.ranking);
    }
    CHECK(recomputed == result.aggregate.objective);
}

TEST_CASE("traces are byte-identical across reruns") {
    const ItemList items = sorted_items(6);
    PscConfig config;
    config.m = 9;
    config.seed = 31;

    const auto render = [&]() {
        SimulatedRanker ranker = SimulatedRanker::noisy(
            TruthOracle::from_gold(items, Ranking::identity(6)),
            NoiseModel::positional_window(2, 5));
        const PscResult result = psc_rank(items, ranker, config);
        std::ostringstream out;
        for (const RankingSample& s : result.samples) {
            out << to_json(s) << '\n';
        }
        out << to_json(result.aggregate) << '\n';
        return out.str();
    };
    CHECK(render() == render());
}

TEST_CASE("the initial presentation order cannot leak into the result") {
    const std::int32_t n = 7;
    const ItemList items = sorted_items(n);
    PscConfig config;
    config.m = 10;
    config.seed = 41;

    SimulatedRanker ranker = SimulatedRanker::noisy(
        TruthOracle::from_gold(items, Ranking::identity(n)), NoiseModel::positional_window(2, 6));
    const PscResult base = psc_rank(items, ranker, config);

    Rng rng(5);
    for (int trial = 0; trial < 6; ++trial) {
        const Ranking rho = random_ranking(n, rng);
        const ItemList permuted = apply(items, rho);
        SimulatedRanker ranker2 = SimulatedRanker::noisy(
            TruthOracle::from_gold(permuted, rho.inverse()), NoiseModel::positional_window(2, 6));
        const PscResult moved = psc_rank(permuted, ranker2, config);

        // identical samples modulo the relabeling, and the exact same result
        CHECK(compose(rho, moved.aggregate.ranking) == base.aggregate.ranking);
        CHECK(moved.aggregate.objective == base.aggregate.objective);
        REQUIRE(moved.samples.size() == base.samples.size());
        for (std::size_t i = 0; i < moved.samples.size(); ++i) {
            CHECK(compose(rho, moved.samples[i].canonical) == base.samples[i].canonical);
            CHECK(moved.samples[i].raw_output == base.samples[i].raw_output);
        }
    }
}

TEST_CASE("unparseable policies") {
    const ItemList items = sorted_items(4);
    PscConfig config;
    config.m = 3;
    config.seed = 1;

    SUBCASE("drop-sample keeps the run alive") {
        FlakyRanker ranker({true, false, true});
        config.on_unparseable = UnparseablePolicy::DropSample;
        const PscResult result = psc_rank(items, ranker, config);
        CHECK(result.dropped == 1);
        CHECK(result.samples.size() == 2);
        CHECK(result.samples[0].index == 0);
        CHECK(result.samples[1].index == 2);
        CHECK(result.ranker_calls == 3);
    }
    SUBCASE("fail raises immediately") {
        FlakyRanker ranker({true, false, true});
        config.on_unparseable = UnparseablePolicy::Fail;
        CHECK_THROWS_AS(psc_rank(items, ranker, config), PipelineError);
    }
    SUBCASE("resample-once retries with a fresh shuffle, then drops") {
        FlakyRanker ranker({true, false, true, true});  // 4th call = the retry
        config.on_unparseable = UnparseablePolicy::ResampleOnce;
        const PscResult result = psc_rank(items, ranker, config);
        CHECK(result.dropped == 0);
        CHECK(result.samples.size() == 3);
        CHECK(result.ranker_calls == 4);

        FlakyRanker stubborn({true, false, true, false});  // retry fails too
        const PscResult dropped = psc_rank(items, stubborn, config);
        CHECK(dropped.dropped == 1);
        CHECK(dropped.samples.size() == 2);
    }
    SUBCASE("every sample unparseable is a pipeline failure") {
        FlakyRanker ranker({false, false, false});
        config.on_unparseable = UnparseablePolicy::DropSample;
        CHECK_THROWS_AS(psc_rank(items, ranker, config), PipelineError);
    }
}

TEST_CASE("psc_rank validates inputs") {
    SimulatedRanker echo = SimulatedRanker::echo();
    PscConfig config;
    CHECK_THROWS_AS(psc_rank(ItemList(), echo, config), DimensionError);
    config.m = 0;
    CHECK_THROWS_AS(psc_rank(sorted_items(3), echo, config), ValidationError);
}

TEST_CASE("windowed rerank covering the whole list equals one psc_rank") {
    const ItemList items = sorted_items(6);
    PscConfig config;
    config.m = 5;
    config.seed = 13;
    SimulatedRanker a = perfect_for(items);
    SimulatedRanker b = perfect_for(items);
    const WindowedResult windowed = windowed_rerank(items, a, config, 10, 5);
    CHECK(windowed.windows.size() == 1);
    CHECK(windowed.ranking == Ranking::identity(6));
    const PscResult single = psc_rank(items, b, config);
    CHECK(compose(Ranking::identity(6), single.aggregate.ranking) == windowed.ranking);
}

TEST_CASE("windowed rerank with a perfect ranker matches strided sort promotion") {
    const std::int32_t n = 23;
    const std::int32_t window = 6;
    const std::int32_t stride = 3;
    // true order of item k#  is identity; presentation order scrambled
    const ItemList base = sorted_items(n);
    Rng rng(7);
    const Ranking scramble = random_ranking(n, rng);
    const ItemList items = apply(base, scramble);
    const Ranking gold = scramble.inverse();

    SimulatedRanker ranker = SimulatedRanker::perfect(TruthOracle::from_gold(items, gold));
    PscConfig config;
    config.m = 3;
    config.seed = 19;
    const WindowedResult result = windowed_rerank(items, ranker, config, window, stride);

    // Independent oracle: the strided in-window sort over gold positions.
    std::vector<std::int32_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    const Ranking gold_pos = gold.inverse();
    for (std::int32_t b = n - window;; b -= stride) {
        const std::int32_t begin = std::max(b, 0);
        std::sort(order.begin() + begin, order.begin() + begin + window,
                  [&](std::int32_t x, std::int32_t y) { return gold_pos[x] < gold_pos[y]; });
        if (begin == 0) {
            break;
        }
    }
    CHECK(result.ranking.order() == order);

    // the overlap promotes the best item from the back to the very front
    CHECK(result.ranking[0] == gold[0]);
}

TEST_CASE("disjoint windows sort blocks without merging them") {
    const std::int32_t n = 6;
    const ItemList base = sorted_items(n);
    const Ranking scramble = R({6, 5, 4, 3, 2, 1});
    const ItemList items = apply(base, scramble);  // fully reversed
    SimulatedRanker ranker =
        SimulatedRanker::perfect(TruthOracle::from_gold(items, scramble.inverse()));
    PscConfig config;
    config.m = 3;
    config.seed = 29;
    const WindowedResult result = windowed_rerank(items, ranker, config, 3, 3);
    CHECK(result.windows.size() == 2);
    // each 3-block is internally sorted; blocks do not merge
    std::vector<std::string> final_ids;
    for (std::int32_t p = 0; p < n; ++p) {
        final_ids.push_back(items[result.ranking[p]].id);
    }
    CHECK(final_ids == std::vector<std::string>{"k103", "k104", "k105", "k100", "k101", "k102"});
}

TEST_CASE("windowed rerank validates window parameters") {
    const ItemList items = sorted_items(5);
    SimulatedRanker ranker = perfect_for(items);
    PscConfig config;
    CHECK_THROWS_AS(windowed_rerank(items, ranker, config, 3, 0), ValidationError);
    CHECK_THROWS_AS(windowed_rerank(items, ranker, config, 2, 3), ValidationError);
}

TEST_CASE("windowed traces account for every ranker call") {
    const ItemList items = sorted_items(12);
    SimulatedRanker ranker = perfect_for(items);
    PscConfig config;
    config.m = 4;
    config.seed = 37;
    const WindowedResult result = windowed_rerank(items, ranker, config, 6, 3);
    CHECK(result.windows.size() == 3);  // starts 6, 3, 0
    CHECK(result.ranker_calls == 12);
    for (const WindowTrace& w : result.windows) {
        CHECK(w.end - w.begin == 6);
        CHECK(w.item_ids.size() == 6);
        CHECK(w.result.samples.size() == 4);
    }
    CHECK(result.windows.front().begin == 6);
    CHECK(result.windows.back().begin == 0);
}

TEST_CASE("aggregator kinds and policies round-trip from strings") {
    for (const auto kind : {AggregatorKind::Kemeny, AggregatorKind::Borda, AggregatorKind::Rrf}) {
        CHECK(aggregator_kind_from_string(to_string(kind)) == kind);
    }
    for (const auto policy : {UnparseablePolicy::ResampleOnce, UnparseablePolicy::DropSample,
                              UnparseablePolicy::Fail}) {
        CHECK(unparseable_policy_from_string(to_string(policy)) == policy);
    }
    CHECK_THROWS_AS(aggregator_kind_from_string("median"), ValidationError);
    CHECK_THROWS_AS(unparseable_policy_from_string("retry"), ValidationError);
}

TEST_CASE("trace JSON round-trips and validates canonical") {
    RankingSample sample;
    sample.index = 3;
    sample.shuffle = R({2, 1, 3});
    sample.raw_output = R({3, 1, 2});
    sample.canonical = compose(sample.shuffle, sample.raw_output);
    const std::string line = to_json(sample);
    const RankingSample parsed = ranking_sample_from_json(line);
    CHECK(parsed.index == 3);
    CHECK(parsed.shuffle == sample.shuffle);
    CHECK(parsed.raw_output == sample.raw_output);
    CHECK(parsed.canonical == sample.canonical);

    CHECK_THROWS_AS(ranking_sample_from_json("{\"shuffle\":[1,2]}", 5), ParseError);
    CHECK_THROWS_AS(ranking_sample_from_json(
                        "{\"shuffle\":[2,1],\"raw_output\":[1,2],\"canonical\":[1,2]}", 7),
                    ParseError);
    try {
        ranking_sample_from_json("{bad", 7);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 7") != std::string::npos);
    }
}

namespace {

// Thread-safe fake ranker with a wide in-flight cap and deliberately jittered
// completion order; output depends only on (presented, call_seed).
class ConcurrentFakeRanker : public ListwiseRanker {
public:
    std::string name() const override { return "concurrent-fake"; }
    bool deterministic() const override { return true; }
    int max_in_flight() const override { return 8; }
    RankerOutput rank(const ItemList& presented, std::uint64_t call_seed) override {
        Rng rng(call_seed);
        std::this_thread::sleep_for(std::chrono::microseconds(rng.below(500)));
        RankerOutput output;
        output.ranking = random_ranking(presented.size(), rng);
        output.raw_text = render_identifier_chain(*output.ranking);
        return output;
    }
};

} // namespace

TEST_CASE("concurrent fan-out cannot change the trace") {
    const ItemList items = sorted_items(7);
    PscConfig config;
    config.m = 24;
    config.seed = 77;

    ConcurrentFakeRanker wide;
    const PscResult parallel = psc_rank(items, wide, config);

    config.worker_cap = 1;  // force the sequential path
    ConcurrentFakeRanker narrow;
    const PscResult sequential = psc_rank(items, narrow, config);

    REQUIRE(parallel.samples.size() == sequential.samples.size());
    for (std::size_t i = 0; i < parallel.samples.size(); ++i) {
        CHECK(parallel.samples[i].index == sequential.samples[i].index);
        CHECK(parallel.samples[i].shuffle == sequential.samples[i].shuffle);
        CHECK(parallel.samples[i].raw_output == sequential.samples[i].raw_output);
        CHECK(parallel.samples[i].canonical == sequential.samples[i].canonical);
    }
    CHECK(parallel.aggregate.ranking == sequential.aggregate.ranking);
    CHECK(parallel.aggregate.objective == sequential.aggregate.objective);
}

TEST_CASE("aggregating m=21 samples beats single draws under window noise") {
    const std::int32_t n = 8;
    const ItemList items = sorted_items(n);
    const Ranking gold = Ranking::identity(n);

    double tau_single = 0.0;
    double tau_many = 0.0;
    const int trials = 200;
    for (int trial = 0; trial < trials; ++trial) {
        SimulatedRanker ranker = SimulatedRanker::noisy(
            TruthOracle::from_gold(items, gold), NoiseModel::positional_window(3, 6));
        PscConfig config;
        config.seed = derive_seed(4242, trial);

        config.m = 1;
        tau_single += kendall_tau(psc_rank(items, ranker, config).aggregate.ranking, gold);
        config.m = 21;
        tau_many += kendall_tau(psc_rank(items, ranker, config).aggregate.ranking, gold);
    }
    CHECK(tau_many / trials > tau_single / trials);
}
