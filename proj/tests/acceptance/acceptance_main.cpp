// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Everything runs offline against simulated rankers.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "helpers.hpp"
#include "oracles.hpp"
#include "psc/aggregation.hpp"
#include "psc/bias.hpp"
#include "psc/datasets.hpp"
#include "psc/noise.hpp"
#include "psc/pipeline.hpp"
#include "psc/prompts.hpp"
#include "psc/ranker.hpp"
#include "psc/trec.hpp"

using namespace psc;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSuiteTaskStream = 0x7461736b;

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

double median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double mean(const std::vector<double>& values) {
    return std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<double>(values.size());
}

// ---------------------------------------------------------------------------
// The simulated suite shared by criteria 4-7: 100 MathSort-style tasks ranked
// by a positional-window ranker with m=20 Kemeny PSC. Because per-sample
// randomness is keyed by (seed, sample index), the first m canonical samples
// of the m=20 trace are exactly what a run with that smaller m would produce,
// so smaller aggregate sizes re-aggregate the stored prefix.
// ---------------------------------------------------------------------------

struct SuiteTask {
    SortTask task;
    std::vector<Ranking> canonical;  // 20 canonical samples, item-identity space
    std::vector<double> sample_taus;
    AggregationResult kemeny20;
    double tau_kemeny20 = 0.0;
};

std::vector<SuiteTask> run_simulated_suite() {
    const auto tasks = gen_mathsort(100, 404);
    std::vector<SuiteTask> out;
    out.reserve(tasks.size());
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        SimulatedRanker ranker = SimulatedRanker::noisy(
            TruthOracle::from_gold(tasks[t].items, tasks[t].gold),
            NoiseModel::positional_window(4, 8));
        PscConfig config;
        config.m = 20;
        config.aggregator = AggregatorKind::Kemeny;
        config.seed = derive_seed(2024, kSuiteTaskStream, t);
        const PscResult result = psc_rank(tasks[t].items, ranker, config);

        SuiteTask st;
        st.task = tasks[t];
        for (const RankingSample& s : result.samples) {
            st.canonical.push_back(s.canonical);
            st.sample_taus.push_back(score_sort(s.canonical, tasks[t]));
        }
        st.kemeny20 = result.aggregate;
        st.tau_kemeny20 = score_sort(result.aggregate.ranking, tasks[t]);
        out.push_back(std::move(st));
    }
    return out;
}

const std::vector<SuiteTask>& simulated_suite() {
    static const std::vector<SuiteTask> suite = run_simulated_suite();
    return suite;
}

// ---------------------------------------------------------------------------

bool criterion1(std::string& detail) {
    Rng rng(101);
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(30);
    for (int instance = 0; instance < 200; ++instance) {
        const std::int32_t n = 2 + static_cast<std::int32_t>(rng.below(6));   // 2..7
        const std::int32_t m = 1 + static_cast<std::int32_t>(rng.below(10));  // 1..10
        std::vector<Ranking> samples;
        for (std::int32_t i = 0; i < m; ++i) {
            samples.push_back(random_ranking(n, rng));
        }
        const test::BruteKemeny oracle = test::brute_kemeny(samples);
        const AggregationResult exact = kemeny_exact(samples);
        const AggregationResult solved = kemeny_solve(samples);
        if (exact.objective != oracle.objective || !(exact.ranking == oracle.ranking)) {
            detail = "kemeny_exact diverged from brute force on instance " +
                     std::to_string(instance);
            return false;
        }
        if (!solved.exact || solved.objective != oracle.objective ||
            !(solved.ranking == oracle.ranking)) {
            detail = "kemeny_solve diverged from brute force on instance " +
                     std::to_string(instance);
            return false;
        }
        if (std::chrono::steady_clock::now() > deadline) {
            detail = "exceeded the 30 s budget at instance " + std::to_string(instance);
            return false;
        }
    }
    detail = "200 instances, objective and lexicographic optimum match brute force";
    return true;
}

bool criterion2(std::string& detail) {
    long long checked_pairs = 0;
    for (std::int32_t n = 2; n <= 6; ++n) {
        std::vector<std::int32_t> a(static_cast<std::size_t>(n));
        std::iota(a.begin(), a.end(), 0);
        std::vector<Ranking> all;
        do {
            all.emplace_back(std::vector<std::int32_t>(a));
        } while (std::next_permutation(a.begin(), a.end()));

        const Ranking id = Ranking::identity(n);
        const std::int64_t pairs = pair_count(n);
        const Ranking reversed = [&] {
            std::vector<std::int32_t> r(static_cast<std::size_t>(n));
            std::iota(r.rbegin(), r.rend(), 0);
            return Ranking(std::move(r));
        }();

        for (const Ranking& sigma : all) {
            std::int64_t inv_sum = 0;
            for (std::int32_t v : inversion_vector(sigma)) {
                inv_sum += v;
            }
            if (inv_sum != kendall_distance(id, sigma)) {
                detail = "inversion-vector sum mismatch at n=" + std::to_string(n);
                return false;
            }
        }
        for (const Ranking& s1 : all) {
            for (const Ranking& s2 : all) {
                const std::int64_t d = kendall_distance(s1, s2);
                if (d != test::brute_kendall(s1, s2)) {
                    detail = "distance disagrees with the discordant-pair count";
                    return false;
                }
                const double tau = kendall_tau(s1, s2);
                // exact affine relation: recover d back from tau in integers
                const long long recovered =
                    std::llround((1.0 - tau) / 2.0 * static_cast<double>(pairs));
                if (recovered != d) {
                    detail = "affine relation failed to reproduce the distance";
                    return false;
                }
                ++checked_pairs;
            }
            if (kendall_tau(s1, s1) != 1.0) {
                detail = "tau(s, s) is not exactly 1";
                return false;
            }
            if (kendall_tau(s1, compose(s1, reversed)) != -1.0) {
                detail = "tau(s, reverse of s) is not exactly -1";
                return false;
            }
        }
    }
    detail = "exhaustive n <= 6 (" + std::to_string(checked_pairs) + " pairs), exact";
    return true;
}

bool criterion3(std::string& detail) {
    const Ranking truth = Ranking::identity(8);
    const NoiseModel model = NoiseModel::concordant_subset();
    const Aggregator aggregate = [](const std::vector<Ranking>& s) { return kemeny(s); };
    const std::vector<std::int64_t> grid = {1, 5, 25, 101, 201};
    const ConvergenceReport report =
        convergence_experiment(truth, model, grid, 500, aggregate, 303);

    std::vector<double> grid_values(grid.begin(), grid.end());
    const double rho = test::spearman(grid_values, report.recovery_rate);
    const double final_recovery = report.recovery_rate.back();

    std::ostringstream rates;
    for (double r : report.recovery_rate) {
        rates << ' ' << fmt(r, 3);
    }
    detail = "recovery" + rates.str() + "; spearman " + fmt(rho, 3);
    // report.recovery_rate[1] is the m=5 point: the tail may never dip below it
    return final_recovery >= 0.95 && rho > 0.9 &&
           report.recovery_rate.back() >= report.recovery_rate[1];
}

bool criterion4(std::string& detail) {
    const auto& suite = simulated_suite();
    std::vector<double> psc_taus;
    std::vector<double> median_taus;
    for (const SuiteTask& st : suite) {
        psc_taus.push_back(st.tau_kemeny20);
        median_taus.push_back(median(st.sample_taus));
    }
    const double psc = mean(psc_taus);
    const double individual = mean(median_taus);
    detail = "mean tau: psc " + fmt(psc) + " vs median individual " + fmt(individual);
    return individual > 0.0 && psc >= 1.01 * individual;
}

bool criterion5(std::string& detail) {
    const auto& suite = simulated_suite();
    const std::vector<std::int64_t> grid = {1, 2, 3, 5, 10, 20};
    std::vector<double> scores;
    for (const std::int64_t m : grid) {
        double total = 0.0;
        for (const SuiteTask& st : suite) {
            const std::vector<Ranking> prefix(st.canonical.begin(),
                                              st.canonical.begin() + m);
            const AggregationResult agg = kemeny(prefix);
            total += score_sort(agg.ranking, st.task);
        }
        scores.push_back(total / static_cast<double>(suite.size()));
    }
    const double improvement = scores.back() - scores.front();
    const double at5 = scores[3] - scores.front();  // grid[3] == 5
    const double fraction = improvement > 0.0 ? at5 / improvement : 0.0;
    std::vector<double> grid_values(grid.begin(), grid.end());
    const double rho = test::spearman(grid_values, scores);
    detail = "m=5 recovers " + fmt(100.0 * fraction, 1) + "% of the m=1 to m=20 gain; spearman " +
             fmt(rho, 3);
    return improvement > 0.0 && fraction >= 0.5 && rho > 0.0;
}

bool criterion6(std::string& detail) {
    const auto& suite = simulated_suite();
    double kemeny_total = 0.0;
    double rrf_total = 0.0;
    double median_total = 0.0;
    int dominated = 0;
    for (const SuiteTask& st : suite) {
        const AggregationResult fused = rrf(st.canonical);
        if (st.kemeny20.objective <= fused.objective) {
            ++dominated;
        }
        kemeny_total += st.tau_kemeny20;
        rrf_total += score_sort(fused.ranking, st.task);
        median_total += median(st.sample_taus);
    }
    const auto count = static_cast<double>(suite.size());
    const double boost_kemeny = kemeny_total / count - median_total / count;
    const double boost_rrf = rrf_total / count - median_total / count;
    detail = "boost kemeny " + fmt(boost_kemeny) + " vs rrf " + fmt(boost_rrf) + "; dominance " +
             std::to_string(dominated) + "/" + std::to_string(suite.size());
    return boost_kemeny >= boost_rrf && dominated == static_cast<int>(suite.size());
}

bool criterion7(std::string& detail) {
    const auto& suite = simulated_suite();
    double kemeny_total = 0.0;
    double borda_total = 0.0;
    int dominated = 0;
    for (const SuiteTask& st : suite) {
        const AggregationResult counted = borda(st.canonical);
        if (st.kemeny20.objective <= counted.objective) {
            ++dominated;
        }
        kemeny_total += st.tau_kemeny20;
        borda_total += score_sort(counted.ranking, st.task);
    }
    const auto count = static_cast<double>(suite.size());
    detail = "mean tau kemeny " + fmt(kemeny_total / count) + " vs borda " +
             fmt(borda_total / count) + "; dominance " + std::to_string(dominated) + "/" +
             std::to_string(suite.size());
    return dominated == static_cast<int>(suite.size()) &&
           kemeny_total / count >= borda_total / count - 0.005;
}

bool criterion8(std::string& detail) {
    Qrels qrels;
    qrels.queries["q"] = {{"d1", 1}, {"d2", 0}};
    TrecRun run;
    run.queries["q"] = {{"d2", 2.0}, {"d1", 1.0}};
    const double scored = ndcg_at_k(run, qrels, 10).per_query.at("q");

    Qrels ideal_qrels;
    ideal_qrels.queries["q"] = {{"a", 3}, {"b", 2}, {"c", 1}, {"d", 0}};
    TrecRun ideal;
    ideal.queries["q"] = {{"a", 4.0}, {"b", 3.0}, {"c", 2.0}, {"d", 1.0}};
    const double ideal_score = ndcg_at_k(ideal, ideal_qrels, 10).per_query.at("q");

    detail = "two-doc example " + fmt(scored) + ", ideal order " + fmt(ideal_score, 6);
    return std::abs(scored - 0.6309) <= 0.0001 && ideal_score == 1.0;
}

std::vector<RankingSample> biased_trace(SimulatedRanker& ranker, std::int32_t n, int count,
                                        std::uint64_t seed) {
    std::vector<Item> items;
    for (std::int32_t i = 0; i < n; ++i) {
        items.push_back(Item{"d" + std::to_string(100 + i), "text"});
    }
    const ItemList base{std::move(items)};
    Rng rng(seed);
    std::vector<RankingSample> samples;
    samples.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        RankingSample s;
        s.index = i;
        s.shuffle = random_ranking(n, rng);
        s.raw_output = *ranker.rank(apply(base, s.shuffle), rng.next_u64()).ranking;
        s.canonical = compose(s.shuffle, s.raw_output);
        samples.push_back(std::move(s));
    }
    return samples;
}

bool criterion9(std::string& detail) {
    const std::int32_t n = 10;

    // conservation: reversions are exactly the discordant input/output pairs
    {
        SimulatedRanker ranker =
            SimulatedRanker::echo_with_noise(NoiseModel::positional_window(3, 8));
        const auto samples = biased_trace(ranker, n, 150, 901);
        const ReversionMatrix matrix = count_reversions(samples);
        std::int64_t distance_sum = 0;
        for (const RankingSample& s : samples) {
            distance_sum += kendall_distance(Ranking::identity(n), s.raw_output);
        }
        if (matrix.total_count() != distance_sum) {
            detail = "conservation mismatch: counts " + std::to_string(matrix.total_count()) +
                     " vs distances " + std::to_string(distance_sum);
            return false;
        }
    }

    // null calibration: an unbiased ranker passes the test in >= 98/100 runs
    int passed = 0;
    for (int rep = 0; rep < 100; ++rep) {
        SimulatedRanker unbiased =
            SimulatedRanker::echo_with_noise(NoiseModel::positional_window(1, n));
        const auto samples = biased_trace(unbiased, n, 200, derive_seed(902, rep));
        if (uniformity_test(count_reversions(samples)).p_value > 0.01) {
            ++passed;
        }
    }

    // alternative: middle-window corruption must be flagged
    SimulatedRanker middle = SimulatedRanker::echo_with_noise(NoiseModel::positional_window(4, 6));
    const auto samples = biased_trace(middle, n, 200, 903);
    const ReversionMatrix matrix = normalize_matrix(count_reversions(samples));
    const UniformityReport report = uniformity_test(matrix);
    const bool centered = *matrix.normalized(4, 5) > 0.0 && *matrix.normalized(4, 6) > 0.0 &&
                          *matrix.normalized(5, 6) > 0.0;

    detail = "conservation exact; null " + std::to_string(passed) + "/100; middle-window p " +
             fmt(report.p_value, 6);
    return passed >= 98 && report.p_value < 0.001 && centered;
}

bool criterion10(std::string& detail) {
    Rng rng(1001);
    int fuzzed = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::int32_t n = 1 + static_cast<std::int32_t>(rng.below(20));
        std::string text;
        bool has_valid = false;
        const int tokens = 1 + static_cast<int>(rng.below(3 * n));
        for (int t = 0; t < tokens; ++t) {
            switch (rng.below(5)) {
                case 0: text += " garbage"; break;
                case 1: text += " >"; break;
                default: {
                    const auto id = 1 + static_cast<std::int64_t>(rng.below(n + 4));
                    text += " [" + std::to_string(id) + "]";
                    has_valid = has_valid || id <= n;
                }
            }
        }
        if (!has_valid) {
            const auto id = 1 + static_cast<std::int64_t>(rng.below(n));
            text += " [" + std::to_string(id) + "]";
        }
        try {
            const Ranking repaired = parse_ranking_output(text, n, PromptStyle::RankVicuna);
            if (repaired.size() != n) {
                detail = "repair produced the wrong size at trial " + std::to_string(trial);
                return false;
            }
        } catch (const std::exception& e) {
            detail = std::string("repair failed: ") + e.what();
            return false;
        }
        ++fuzzed;
    }

    for (std::int32_t n = 1; n <= 20; ++n) {
        for (int trial = 0; trial < 25; ++trial) {
            const Ranking sigma = random_ranking(n, rng);
            if (!(parse_ranking_output(render_identifier_chain(sigma), n,
                                       PromptStyle::RankVicuna) == sigma)) {
                detail = "render/parse round-trip failed at n=" + std::to_string(n);
                return false;
            }
        }
    }
    detail = std::to_string(fuzzed) + " fuzzed outputs repaired; round-trips exact for n <= 20";
    return true;
}

bool criterion11(std::string& detail) {
    const fs::path root = fs::temp_directory_path() / "psc_acceptance_c11";
    fs::remove_all(root);
    fs::create_directories(root);

    const auto shell = [&](const std::string& args) {
        const std::string command = std::string(PSCKIT_BIN) + " " + args + " > " +
                                    (root / "log.txt").string() + " 2>&1";
        const int status = std::system(command.c_str());
        return WEXITSTATUS(status);
    };
    const auto slurp = [](const fs::path& path) {
        std::ifstream in(path, std::ios::binary);
        std::ostringstream out;
        out << in.rdbuf();
        return out.str();
    };

    const std::string data = (root / "data").string();
    if (shell("gen math --count 6 --seed 11 --out " + data) != 0) {
        detail = "dataset generation failed";
        return false;
    }
    const std::string rank_args = "rank --dataset " + data +
                                  "/dataset.jsonl --ranker sim:window:3-7 --m 8 --seed 17 --out ";
    if (shell(rank_args + (root / "r1").string()) != 0 ||
        shell(rank_args + (root / "r2").string()) != 0) {
        detail = "rank run failed";
        return false;
    }
    for (const char* name : {"predictions.jsonl", "traces.jsonl", "manifest.json"}) {
        if (slurp(root / "r1" / name) != slurp(root / "r2" / name) ||
            slurp(root / "r1" / name).empty()) {
            detail = std::string(name) + " differs between identical runs";
            return false;
        }
    }
    fs::remove_all(root);
    detail = "predictions, traces, and manifests byte-identical across reruns";
    return true;
}

} // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        std::function<bool(std::string&)> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "Kemeny oracle equivalence", criterion1},
        {2, "ranking machinery, exhaustive and exact", criterion2},
        {3, "concordant-noise convergence", criterion3},
        {4, "PSC beats the median individual run", criterion4},
        {5, "aggregate-size trend", criterion5},
        {6, "Kemeny vs RRF", criterion6},
        {7, "Kemeny vs Borda", criterion7},
        {8, "nDCG hand check", criterion8},
        {9, "reversion conservation and calibration", criterion9},
        {10, "parser robustness", criterion10},
        {11, "end-to-end reproducibility", criterion11},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = false;
        try {
            ok = c.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - start)
                            .count();
        std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << c.id << " (" << c.name
                  << "): " << detail << " [" << ms << " ms]\n";
        if (!ok) {
            ++failures;
        }
    }
    if (failures == 0) {
        std::cout << "all " << criteria.size() << " acceptance criteria passed\n";
    } else {
        std::cout << failures << " acceptance criteria FAILED\n";
    }
    return failures;
}
