// psckit: shuffle-aggregate listwise reranking toolkit.
//
// Subcommands: gen, rank, simulate, bias, eval, sweep, aggregate. Every
// artifact-producing command writes its outputs plus a manifest.json that
// pins the resolved configuration, seed, and input digests; with a fixed
// seed and a simulated ranker a run is byte-reproducible.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "psc/aggregation.hpp"
#include "psc/bias.hpp"
#include "psc/datasets.hpp"
#include "psc/errors.hpp"
#include "psc/noise.hpp"
#include "psc/pipeline.hpp"
#include "psc/prompts.hpp"
#include "psc/ranker.hpp"
#include "psc/ranking.hpp"
#include "psc/rng.hpp"
#include "psc/serialize.hpp"
#include "psc/trec.hpp"
#include "psc/version.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

constexpr std::uint64_t kTaskStream = 0x7461736b;  // per-task seed derivation

// Flag combinations the parser cannot catch; exits with kExitConfig.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fnv1a_hex(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw psc::Error("cannot read input file: " + path.string());
    }
    std::uint64_t h = 14695981039346656037ULL;
    char chunk[4096];
    while (in.read(chunk, sizeof(chunk)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(chunk[i]);
            h *= 1099511628211ULL;
        }
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fnv1a:%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%S", &tm);
    return buf;
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw psc::Error("cannot write output file: " + path.string());
    }
    return out;
}

// Accumulates the manifest while a command runs, then writes manifest.json
// (deterministic) and run.log (wall time, not part of the manifest).
class Run {
public:
    Run(const std::string& command, const std::string& out_flag, std::uint64_t seed)
        : start_(std::chrono::steady_clock::now()) {
        dir_ = out_flag.empty() ? fs::path("runs") / (timestamp_utc() + "-" + std::to_string(seed))
                                : fs::path(out_flag);
        fs::create_directories(dir_);
        manifest_["command"] = command;
        manifest_["version"] = std::string(psc::kVersion);
        manifest_["seed"] = seed;
        manifest_["config"] = json::object();
        manifest_["inputs"] = json::object();
        manifest_["outputs"] = json::array();
    }

    const fs::path& dir() const { return dir_; }

    void config(const std::string& key, json value) { manifest_["config"][key] = std::move(value); }
    void input(const std::string& name, const fs::path& path) {
        manifest_["inputs"][name] = {{"path", path.string()}, {"digest", fnv1a_hex(path)}};
    }
    void note(const std::string& key, json value) { manifest_[key] = std::move(value); }

    std::ofstream output(const std::string& name) {
        manifest_["outputs"].push_back(name);
        return open_output(dir_ / name);
    }

    void finish() {
        {
            auto out = open_output(dir_ / "manifest.json");
            out << manifest_.dump(2) << '\n';
        }
        const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - start_);
        auto log = open_output(dir_ / "run.log");
        log << "wall_time_ms=" << elapsed.count() << '\n';
        std::cout << "run directory: " << dir_.string() << '\n';
    }

private:
    fs::path dir_;
    json manifest_;
    std::chrono::steady_clock::time_point start_;
};

// ---------------------------------------------------------------------------
// Ranker specs: sim:perfect, sim:echo, sim:concordant, sim:window:LO-HI,
// sim:echo-window:LO-HI, remote
// ---------------------------------------------------------------------------

struct RankerSpec {
    bool remote = false;
    psc::SimulatedBase base = psc::SimulatedBase::Oracle;
    std::optional<psc::NoiseModel> noise;
    std::string text;
};

std::pair<std::int32_t, std::int32_t> parse_window(const std::string& text) {
    const auto dash = text.find('-');
    if (dash == std::string::npos) {
        throw ConfigError("window must look like LO-HI, got: " + text);
    }
    try {
        const int lo = std::stoi(text.substr(0, dash));
        const int hi = std::stoi(text.substr(dash + 1));
        return {lo, hi};
    } catch (const std::exception&) {
        throw ConfigError("window must look like LO-HI, got: " + text);
    }
}

RankerSpec parse_ranker_spec(const std::string& text) {
    RankerSpec spec;
    spec.text = text;
    if (text == "remote") {
        spec.remote = true;
        return spec;
    }
    if (text == "sim:perfect") {
        return spec;
    }
    if (text == "sim:echo") {
        spec.base = psc::SimulatedBase::Echo;
        return spec;
    }
    if (text == "sim:concordant") {
        spec.noise = psc::NoiseModel::concordant_subset();
        return spec;
    }
    if (text.rfind("sim:window:", 0) == 0) {
        const auto [lo, hi] = parse_window(text.substr(11));
        spec.noise = psc::NoiseModel::positional_window(lo, hi);
        return spec;
    }
    if (text.rfind("sim:echo-window:", 0) == 0) {
        spec.base = psc::SimulatedBase::Echo;
        const auto [lo, hi] = parse_window(text.substr(16));
        spec.noise = psc::NoiseModel::positional_window(lo, hi);
        return spec;
    }
    throw ConfigError("unknown ranker spec: " + text +
                      " (expected sim:perfect, sim:echo, sim:concordant, sim:window:LO-HI, "
                      "sim:echo-window:LO-HI, or remote)");
}

psc::PromptStyle style_for_kind(psc::SortKind kind) {
    switch (kind) {
        case psc::SortKind::Math: return psc::PromptStyle::MathSort;
        case psc::SortKind::Word: return psc::PromptStyle::WordSort;
        case psc::SortKind::Sentence: return psc::PromptStyle::SentenceSort;
    }
    throw psc::ValidationError("unknown sort kind");
}

psc::Aggregator make_aggregator(psc::AggregatorKind kind, std::int32_t exact_limit,
                                psc::SolveBudget budget, double rrf_k) {
    switch (kind) {
        case psc::AggregatorKind::Kemeny:
            return [=](const std::vector<psc::Ranking>& s) {
                return psc::kemeny(s, exact_limit, budget);
            };
        case psc::AggregatorKind::Borda:
            return [](const std::vector<psc::Ranking>& s) { return psc::borda(s); };
        case psc::AggregatorKind::Rrf:
            return [=](const std::vector<psc::Ranking>& s) { return psc::rrf(s, rrf_k); };
    }
    throw psc::ValidationError("unknown aggregator kind");
}

std::string fmt6(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Shared rank pass over a sorting dataset (used by `rank` and `sweep`)
// ---------------------------------------------------------------------------

struct RemoteFlags {
    std::string endpoint;
    std::string path = "/v1/chat/completions";
    std::string model;
    double temperature = 0.0;
    int timeout_ms = 60'000;
    int max_attempts = 3;
    int max_in_flight = 20;
    std::string api_key_env = "PSC_API_KEY";
    std::string style = "rankgpt";
};

struct TaskOutcome {
    bool ok = false;
    double tau = 0.0;
    json prediction;
    std::vector<json> traces;
    std::string error;
};

std::unique_ptr<psc::ListwiseRanker> make_task_ranker(const RankerSpec& spec,
                                                      const RemoteFlags& remote,
                                                      const psc::SortTask& task,
                                                      std::ostream* audit = nullptr) {
    if (spec.remote) {
        psc::EndpointConfig cfg;
        cfg.base_url = remote.endpoint;
        cfg.path = remote.path;
        cfg.model = remote.model;
        cfg.temperature = remote.temperature;
        cfg.timeout = std::chrono::milliseconds(remote.timeout_ms);
        cfg.max_attempts = remote.max_attempts;
        cfg.max_in_flight = remote.max_in_flight;
        cfg.api_key_env = remote.api_key_env;
        cfg.style = style_for_kind(task.kind);
        auto ranker = std::make_unique<psc::RemoteRanker>(std::move(cfg), "");
        ranker->set_audit_stream(audit);
        return ranker;
    }
    if (spec.base == psc::SimulatedBase::Echo) {
        return std::make_unique<psc::SimulatedRanker>(psc::SimulatedBase::Echo, std::nullopt,
                                                      spec.noise);
    }
    return std::make_unique<psc::SimulatedRanker>(
        psc::SimulatedBase::Oracle, psc::TruthOracle::from_gold(task.items, task.gold),
        spec.noise);
}

json prediction_ids(const psc::SortTask& task, const psc::Ranking& prediction) {
    json ids = json::array();
    for (std::int32_t p = 0; p < prediction.size(); ++p) {
        ids.push_back(task.items[prediction[p]].id);
    }
    return ids;
}

TaskOutcome run_task(const psc::SortTask& task, std::int32_t index, const RankerSpec& spec,
                     const RemoteFlags& remote, psc::PscConfig config, std::uint64_t root_seed,
                     std::int32_t window, std::int32_t stride, std::ostream* audit = nullptr) {
    TaskOutcome outcome;
    config.seed = psc::derive_seed(root_seed, kTaskStream, static_cast<std::uint64_t>(index));
    try {
        const auto ranker = make_task_ranker(spec, remote, task, audit);
        if (window > 0) {
            psc::WindowedResult result = psc::windowed_rerank(task.items, *ranker, config, window,
                                                              stride);
            outcome.tau = psc::score_sort(result.ranking, task);
            outcome.prediction = {{"task", index},
                                  {"kind", psc::to_string(task.kind)},
                                  {"ids", prediction_ids(task, result.ranking)},
                                  {"ranking", result.ranking.to_one_based()},
                                  {"tau", outcome.tau},
                                  {"windows", result.windows.size()},
                                  {"calls", result.ranker_calls}};
            for (std::size_t wi = 0; wi < result.windows.size(); ++wi) {
                for (const psc::RankingSample& s : result.windows[wi].result.samples) {
                    json line = json::parse(psc::to_json(s));
                    line["task"] = index;
                    line["window"] = wi;
                    outcome.traces.push_back(std::move(line));
                }
            }
        } else {
            psc::PscResult result = psc::psc_rank(task.items, *ranker, config);
            outcome.tau = psc::score_sort(result.aggregate.ranking, task);
            outcome.prediction = {{"task", index},
                                  {"kind", psc::to_string(task.kind)},
                                  {"ids", prediction_ids(task, result.aggregate.ranking)},
                                  {"ranking", result.aggregate.ranking.to_one_based()},
                                  {"objective", result.aggregate.objective},
                                  {"exact", result.aggregate.exact},
                                  {"method", psc::to_string(result.aggregate.method)},
                                  {"tau", outcome.tau},
                                  {"calls", result.ranker_calls},
                                  {"dropped", result.dropped}};
            for (const psc::RankingSample& s : result.samples) {
                json line = json::parse(psc::to_json(s));
                line["task"] = index;
                outcome.traces.push_back(std::move(line));
            }
        }
        outcome.ok = true;
    } catch (const psc::Error& e) {
        outcome.error = e.what();
    }
    return outcome;
}

std::vector<psc::SortTask> read_dataset_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw psc::Error("cannot read dataset: " + path.string());
    }
    return psc::read_dataset(in);
}

// ---------------------------------------------------------------------------
// Subcommand implementations
// ---------------------------------------------------------------------------

struct GenArgs {
    std::string kind;
    std::int32_t count = 100;
    std::uint64_t seed = 0;
    std::string out;
    std::string lexicon;
    std::string input;
};

int cmd_gen(const GenArgs& args) {
    const psc::SortKind kind = [&] {
        try {
            return psc::sort_kind_from_string(args.kind);
        } catch (const psc::Error& e) {
            throw ConfigError(e.what());
        }
    }();
    if (kind == psc::SortKind::Sentence && args.input.empty()) {
        throw ConfigError("gen sentence needs --input with ordered sentence records");
    }

    Run run("gen", args.out, args.seed);
    run.config("kind", args.kind);
    run.config("count", args.count);

    std::vector<psc::SortTask> tasks;
    switch (kind) {
        case psc::SortKind::Math:
            tasks = psc::gen_mathsort(args.count, args.seed);
            break;
        case psc::SortKind::Word: {
            std::vector<std::string> lexicon;
            if (args.lexicon.empty()) {
                lexicon = psc::default_lexicon();
                run.config("lexicon", "builtin");
            } else {
                std::ifstream in(args.lexicon);
                if (!in) {
                    throw psc::Error("cannot read lexicon: " + args.lexicon);
                }
                std::string word;
                while (std::getline(in, word)) {
                    if (!word.empty()) {
                        lexicon.push_back(word);
                    }
                }
                run.input("lexicon", args.lexicon);
            }
            tasks = psc::gen_wordsort(lexicon, args.count, args.seed);
            break;
        }
        case psc::SortKind::Sentence: {
            std::ifstream in(args.input);
            if (!in) {
                throw psc::Error("cannot read input: " + args.input);
            }
            run.input("input", args.input);
            tasks = psc::load_sentence_sort(in, args.seed);
            if (args.count > 0 && static_cast<std::int32_t>(tasks.size()) > args.count) {
                tasks.resize(static_cast<std::size_t>(args.count));
            }
            break;
        }
    }

    auto out = run.output("dataset.jsonl");
    psc::write_dataset(out, tasks);
    run.note("tasks", tasks.size());
    run.finish();
    std::cout << "wrote " << tasks.size() << " " << args.kind << " tasks\n";
    return 0;
}

struct RankArgs {
    std::string dataset;
    std::string ranker = "sim:perfect";
    std::int32_t m = 20;
    std::string aggregator = "kemeny";
    std::uint64_t seed = 0;
    std::string out;
    std::string on_unparseable = "drop-sample";
    std::int32_t exact_limit = psc::kDefaultExactLimit;
    double rrf_k = psc::kDefaultRrfK;
    std::int32_t window = 0;
    std::int32_t stride = 10;
    std::int32_t workers = 0;
    bool audit = false;
    RemoteFlags remote;
    // TREC reranking mode
    std::string trec_run;
    std::string queries;
    std::string corpus;
    std::string qrels;
    std::int32_t topk = 100;
};

psc::PscConfig base_psc_config(const RankArgs& args) {
    psc::PscConfig config;
    config.m = args.m;
    config.aggregator = psc::aggregator_kind_from_string(args.aggregator);
    config.on_unparseable = psc::unparseable_policy_from_string(args.on_unparseable);
    config.exact_limit = args.exact_limit;
    config.rrf_k = args.rrf_k;
    config.worker_cap = args.workers;
    return config;
}

void record_rank_config(Run& run, const RankArgs& args) {
    run.config("ranker", args.ranker);
    run.config("m", args.m);
    run.config("aggregator", args.aggregator);
    run.config("on_unparseable", args.on_unparseable);
    run.config("exact_limit", args.exact_limit);
    run.config("rrf_k", args.rrf_k);
    run.config("window", args.window);
    run.config("stride", args.stride);
    run.config("workers", args.workers);
    if (args.ranker == "remote") {
        run.config("endpoint", args.remote.endpoint);
        run.config("model", args.remote.model);
        run.config("temperature", args.remote.temperature);
        run.config("style", args.remote.style);
        run.config("api_key_env", args.remote.api_key_env);
    }
}

int rank_dataset(const RankArgs& args) {
    const RankerSpec spec = parse_ranker_spec(args.ranker);
    const std::vector<psc::SortTask> tasks = read_dataset_file(args.dataset);
    if (tasks.empty()) {
        throw psc::Error("dataset is empty: " + args.dataset);
    }

    Run run("rank", args.out, args.seed);
    run.input("dataset", args.dataset);
    record_rank_config(run, args);

    auto predictions = run.output("predictions.jsonl");
    auto traces = run.output("traces.jsonl");
    std::ofstream audit;
    if (spec.remote && args.audit) {
        audit = run.output("audit.jsonl");
    }

    const psc::PscConfig config = base_psc_config(args);
    json failures = json::array();
    double tau_sum = 0.0;
    std::int64_t scored = 0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        TaskOutcome outcome = run_task(tasks[i], static_cast<std::int32_t>(i), spec, args.remote,
                                       config, args.seed, args.window, args.stride,
                                       audit.is_open() ? &audit : nullptr);
        if (!outcome.ok) {
            std::cerr << "task " << i << " failed: " << outcome.error << '\n';
            failures.push_back({{"task", i}, {"error", outcome.error}});
            continue;
        }
        predictions << outcome.prediction.dump() << '\n';
        for (const json& line : outcome.traces) {
            traces << line.dump() << '\n';
        }
        tau_sum += outcome.tau;
        ++scored;
    }
    run.note("failures", failures);
    run.note("tasks", tasks.size());
    const double mean_tau = scored > 0 ? tau_sum / static_cast<double>(scored) : 0.0;
    run.note("mean_tau", mean_tau);
    run.finish();
    std::cout << "ranked " << scored << "/" << tasks.size() << " tasks, mean tau "
              << fmt6(mean_tau) << ", failures " << failures.size() << '\n';
    return 0;
}

int rank_trec(const RankArgs& args) {
    const RankerSpec spec = parse_ranker_spec(args.ranker);
    if (!spec.remote && args.qrels.empty()) {
        throw ConfigError("simulated TREC reranking needs --qrels as the truth oracle");
    }
    if (spec.remote && (args.queries.empty() || args.corpus.empty())) {
        throw ConfigError("remote TREC reranking needs --queries and --corpus");
    }

    std::ifstream run_in(args.trec_run);
    if (!run_in) {
        throw psc::Error("cannot read run: " + args.trec_run);
    }
    const psc::TrecRun first_stage = psc::read_trec_run(run_in);

    std::map<std::string, std::string> query_text;
    if (!args.queries.empty()) {
        std::ifstream in(args.queries);
        if (!in) {
            throw psc::Error("cannot read queries: " + args.queries);
        }
        std::string line;
        while (std::getline(in, line)) {
            const auto tab = line.find('\t');
            if (tab != std::string::npos) {
                query_text[line.substr(0, tab)] = line.substr(tab + 1);
            }
        }
    }
    std::map<std::string, std::string> corpus;
    if (!args.corpus.empty()) {
        std::ifstream in(args.corpus);
        if (!in) {
            throw psc::Error("cannot read corpus: " + args.corpus);
        }
        std::string line;
        while (std::getline(in, line)) {
            const auto tab = line.find('\t');
            if (tab != std::string::npos) {
                corpus[line.substr(0, tab)] = line.substr(tab + 1);
            }
        }
    }
    psc::Qrels qrels;
    if (!args.qrels.empty()) {
        std::ifstream in(args.qrels);
        if (!in) {
            throw psc::Error("cannot read qrels: " + args.qrels);
        }
        qrels = psc::read_qrels(in);
    }

    Run run("rank", args.out, args.seed);
    run.input("trec_run", args.trec_run);
    if (!args.queries.empty()) run.input("queries", args.queries);
    if (!args.corpus.empty()) run.input("corpus", args.corpus);
    if (!args.qrels.empty()) run.input("qrels", args.qrels);
    record_rank_config(run, args);
    run.config("topk", args.topk);

    auto traces = run.output("traces.jsonl");
    std::ofstream audit;
    if (spec.remote && args.audit) {
        audit = run.output("audit.jsonl");
    }
    psc::TrecRun reranked;
    reranked.tag = "psc";

    const psc::PscConfig base_config = base_psc_config(args);
    const std::int32_t window = args.window > 0 ? args.window : 20;
    json failures = json::array();
    std::int32_t query_index = 0;
    for (const auto& [qid, entries] : first_stage.queries) {
        const auto take = std::min<std::size_t>(entries.size(),
                                                static_cast<std::size_t>(args.topk));
        std::vector<psc::Item> items;
        items.reserve(take);
        for (std::size_t i = 0; i < take; ++i) {
            const auto it = corpus.find(entries[i].doc_id);
            items.push_back(psc::Item{entries[i].doc_id,
                                      it == corpus.end() ? entries[i].doc_id : it->second});
        }
        try {
            psc::ItemList list(std::move(items));
            std::unique_ptr<psc::ListwiseRanker> ranker;
            if (spec.remote) {
                const auto qt = query_text.find(qid);
                if (qt == query_text.end()) {
                    throw psc::ValidationError("query text missing for qid " + qid);
                }
                psc::EndpointConfig cfg;
                cfg.base_url = args.remote.endpoint;
                cfg.path = args.remote.path;
                cfg.model = args.remote.model;
                cfg.temperature = args.remote.temperature;
                cfg.timeout = std::chrono::milliseconds(args.remote.timeout_ms);
                cfg.max_attempts = args.remote.max_attempts;
                cfg.max_in_flight = args.remote.max_in_flight;
                cfg.api_key_env = args.remote.api_key_env;
                cfg.style = psc::prompt_style_from_string(args.remote.style);
                auto remote_ranker = std::make_unique<psc::RemoteRanker>(std::move(cfg),
                                                                         qt->second);
                remote_ranker->set_audit_stream(audit.is_open() ? &audit : nullptr);
                ranker = std::move(remote_ranker);
            } else {
                // Truth from qrels: relevance descending, first-stage order
                // breaking ties.
                const auto judged = qrels.queries.find(qid);
                std::unordered_map<std::string, std::int32_t> first_stage_pos;
                for (std::size_t i = 0; i < take; ++i) {
                    first_stage_pos[entries[i].doc_id] = static_cast<std::int32_t>(i);
                }
                const auto rel_of = [&](const std::string& doc) {
                    if (judged == qrels.queries.end()) {
                        return 0;
                    }
                    const auto it = judged->second.find(doc);
                    return it == judged->second.end() ? 0 : it->second;
                };
                std::vector<std::string> docs;
                for (std::size_t i = 0; i < take; ++i) {
                    docs.push_back(entries[i].doc_id);
                }
                std::sort(docs.begin(), docs.end(),
                          [&](const std::string& a, const std::string& b) {
                              const int ra = rel_of(a);
                              const int rb = rel_of(b);
                              if (ra != rb) {
                                  return ra > rb;
                              }
                              return first_stage_pos[a] < first_stage_pos[b];
                          });
                std::unordered_map<std::string, std::int32_t> rank_by_id;
                for (std::size_t i = 0; i < docs.size(); ++i) {
                    rank_by_id[docs[i]] = static_cast<std::int32_t>(i);
                }
                ranker = std::make_unique<psc::SimulatedRanker>(
                    psc::SimulatedBase::Oracle, psc::TruthOracle(std::move(rank_by_id)),
                    spec.noise);
            }

            psc::PscConfig config = base_config;
            config.seed = psc::derive_seed(args.seed, kTaskStream,
                                           static_cast<std::uint64_t>(query_index));
            psc::WindowedResult result =
                psc::windowed_rerank(list, *ranker, config, window, args.stride);

            auto& out_entries = reranked.queries[qid];
            const std::int32_t n = result.ranking.size();
            for (std::int32_t p = 0; p < n; ++p) {
                out_entries.push_back(psc::TrecRunEntry{list[result.ranking[p]].id,
                                                        static_cast<double>(n - p)});
            }
            for (std::size_t wi = 0; wi < result.windows.size(); ++wi) {
                for (const psc::RankingSample& s : result.windows[wi].result.samples) {
                    json line = json::parse(psc::to_json(s));
                    line["query"] = qid;
                    line["window"] = wi;
                    traces << line.dump() << '\n';
                }
            }
        } catch (const psc::Error& e) {
            std::cerr << "query " << qid << " failed: " << e.what() << '\n';
            failures.push_back({{"query", qid}, {"error", e.what()}});
            auto& out_entries = reranked.queries[qid];
            for (std::size_t i = 0; i < take; ++i) {  // keep the first-stage order
                out_entries.push_back(psc::TrecRunEntry{entries[i].doc_id,
                                                        static_cast<double>(take - i)});
            }
        }
        ++query_index;
    }

    auto out = run.output("rerank.txt");
    psc::write_trec_run(out, reranked);
    run.note("failures", failures);
    run.note("queries", reranked.queries.size());
    run.finish();
    std::cout << "reranked " << reranked.queries.size() << " queries, failures "
              << failures.size() << '\n';
    return 0;
}

int cmd_rank(const RankArgs& args) {
    if (!args.dataset.empty() && !args.trec_run.empty()) {
        throw ConfigError("pass either --dataset or --trec-run, not both");
    }
    if (args.dataset.empty() && args.trec_run.empty()) {
        throw ConfigError("rank needs --dataset or --trec-run");
    }
    if (args.m < 1) {
        throw ConfigError("--m must be >= 1");
    }
    const RankerSpec spec = parse_ranker_spec(args.ranker);
    if (spec.remote && args.remote.endpoint.empty()) {
        throw ConfigError("remote ranker needs --endpoint");
    }
    if (args.window > 0 && (args.stride < 1 || args.stride > args.window)) {
        throw ConfigError("need 1 <= stride <= window");
    }
    return args.dataset.empty() ? rank_trec(args) : rank_dataset(args);
}

struct SimulateArgs {
    std::int32_t n = 8;
    std::string noise = "concordant";
    std::vector<std::int64_t> m_grid = {1, 5, 25, 101, 201};
    std::int64_t trials = 500;
    std::string aggregator = "kemeny";
    std::uint64_t seed = 0;
    std::string out;
    std::int32_t exact_limit = psc::kDefaultExactLimit;
    double rrf_k = psc::kDefaultRrfK;
};

int cmd_simulate(const SimulateArgs& args) {
    if (args.n < 2) {
        throw ConfigError("--n must be >= 2");
    }
    if (args.m_grid.empty()) {
        throw ConfigError("--m-grid must not be empty");
    }
    for (std::size_t i = 0; i < args.m_grid.size(); ++i) {
        if (args.m_grid[i] < 1 || (i > 0 && args.m_grid[i] <= args.m_grid[i - 1])) {
            throw ConfigError("--m-grid must be strictly increasing and >= 1");
        }
    }
    if (args.trials < 1) {
        throw ConfigError("--trials must be >= 1");
    }
    psc::NoiseModel model;
    if (args.noise == "concordant") {
        model = psc::NoiseModel::concordant_subset();
    } else if (args.noise.rfind("window:", 0) == 0) {
        const auto [lo, hi] = parse_window(args.noise.substr(7));
        model = psc::NoiseModel::positional_window(lo, hi);
    } else {
        throw ConfigError("unknown noise spec: " + args.noise +
                          " (expected concordant or window:LO-HI)");
    }
    const psc::Aggregator aggregate =
        make_aggregator(psc::aggregator_kind_from_string(args.aggregator), args.exact_limit, {},
                        args.rrf_k);

    Run run("simulate", args.out, args.seed);
    run.config("n", args.n);
    run.config("noise", args.noise);
    run.config("m_grid", args.m_grid);
    run.config("trials", args.trials);
    run.config("aggregator", args.aggregator);

    const psc::Ranking truth = psc::Ranking::identity(args.n);
    const psc::ConvergenceReport report =
        psc::convergence_experiment(truth, model, args.m_grid, args.trials, aggregate, args.seed);

    {
        auto csv = run.output("convergence.csv");
        psc::write_csv(csv, report);
    }
    {
        auto js = run.output("convergence.json");
        js << psc::to_json(report) << '\n';
    }
    run.finish();
    for (std::size_t i = 0; i < report.m_grid.size(); ++i) {
        std::cout << "m=" << report.m_grid[i] << " recovery=" << fmt6(report.recovery_rate[i])
                  << " mean_tau=" << fmt6(report.mean_tau[i]) << '\n';
    }
    return 0;
}

struct BiasArgs {
    std::string traces;
    std::string out;
    std::uint64_t seed = 0;
};

int cmd_bias(const BiasArgs& args) {
    std::ifstream in(args.traces);
    if (!in) {
        throw psc::Error("cannot read traces: " + args.traces);
    }
    const std::vector<psc::RankingSample> samples = psc::read_trace_jsonl(in);
    if (samples.empty()) {
        throw psc::Error("trace file has no samples: " + args.traces);
    }

    Run run("bias", args.out, args.seed);
    run.input("traces", args.traces);

    psc::ReversionMatrix matrix = psc::normalize_matrix(psc::count_reversions(samples));
    const psc::UniformityReport uniformity = psc::uniformity_test(matrix);

    {
        auto csv = run.output("reversions.csv");
        psc::write_reversions_csv(csv, matrix);
    }
    {
        auto js = run.output("bias.json");
        js << psc::to_json(matrix, &uniformity) << '\n';
    }
    run.note("samples", samples.size());
    run.finish();
    std::cout << "chi2=" << fmt6(uniformity.statistic) << " dof=" << uniformity.dof
              << " p=" << fmt6(uniformity.p_value) << '\n';
    return 0;
}

struct EvalArgs {
    std::string predictions;
    std::string dataset;
    std::string run_file;
    std::string qrels;
    int k = 10;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_eval(const EvalArgs& args) {
    const bool tau_mode = !args.predictions.empty() || !args.dataset.empty();
    const bool ndcg_mode = !args.run_file.empty() || !args.qrels.empty();
    if (tau_mode == ndcg_mode) {
        throw ConfigError("eval needs either --predictions + --dataset or --run + --qrels");
    }

    Run run("eval", args.out, args.seed);

    if (ndcg_mode) {
        if (args.run_file.empty() || args.qrels.empty()) {
            throw ConfigError("nDCG evaluation needs both --run and --qrels");
        }
        std::ifstream run_in(args.run_file);
        if (!run_in) {
            throw psc::Error("cannot read run: " + args.run_file);
        }
        std::ifstream qrels_in(args.qrels);
        if (!qrels_in) {
            throw psc::Error("cannot read qrels: " + args.qrels);
        }
        run.input("run", args.run_file);
        run.input("qrels", args.qrels);
        run.config("metric", "ndcg@" + std::to_string(args.k));

        const psc::NdcgReport report =
            psc::ndcg_at_k(psc::read_trec_run(run_in), psc::read_qrels(qrels_in), args.k);
        auto csv = run.output("scores.csv");
        csv << "query,ndcg@" << args.k << "\n";
        for (const auto& [qid, score] : report.per_query) {
            csv << qid << ',' << fmt6(score) << '\n';
        }
        run.note("mean", report.mean);
        run.note("flagged", report.flagged);
        run.finish();
        std::cout << "mean ndcg@" << args.k << " = " << fmt6(report.mean) << " over "
                  << report.per_query.size() << " queries";
        if (!report.flagged.empty()) {
            std::cout << " (" << report.flagged.size() << " flagged)";
        }
        std::cout << '\n';
        return 0;
    }

    if (args.predictions.empty() || args.dataset.empty()) {
        throw ConfigError("Kendall tau evaluation needs both --predictions and --dataset");
    }
    const std::vector<psc::SortTask> tasks = read_dataset_file(args.dataset);
    std::ifstream pred_in(args.predictions);
    if (!pred_in) {
        throw psc::Error("cannot read predictions: " + args.predictions);
    }
    run.input("predictions", args.predictions);
    run.input("dataset", args.dataset);
    run.config("metric", "kendall-tau");

    std::map<std::int64_t, std::vector<std::string>> predicted_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(pred_in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        try {
            const json parsed = json::parse(line);
            predicted_ids[parsed.at("task").get<std::int64_t>()] =
                parsed.at("ids").get<std::vector<std::string>>();
        } catch (const json::exception& e) {
            throw psc::ParseError(std::string("bad prediction line: ") + e.what(), line_no);
        }
    }

    auto csv = run.output("scores.csv");
    csv << "task,kind,tau,flag\n";
    double tau_sum = 0.0;
    std::vector<std::int64_t> flagged;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        const auto it = predicted_ids.find(static_cast<std::int64_t>(t));
        if (it == predicted_ids.end()) {
            flagged.push_back(static_cast<std::int64_t>(t));
            csv << t << ',' << psc::to_string(tasks[t].kind) << ",0.000000,missing\n";
            continue;
        }
        const psc::ItemList& items = tasks[t].items;
        if (static_cast<std::int32_t>(it->second.size()) != items.size()) {
            throw psc::ValidationError("prediction for task " + std::to_string(t) + " has " +
                                       std::to_string(it->second.size()) + " ids, dataset has " +
                                       std::to_string(items.size()));
        }
        std::map<std::string, std::int32_t> index_of;
        for (std::int32_t i = 0; i < items.size(); ++i) {
            index_of[items[i].id] = i;
        }
        std::vector<std::int32_t> order;
        order.reserve(it->second.size());
        for (const std::string& id : it->second) {
            const auto pos = index_of.find(id);
            if (pos == index_of.end()) {
                throw psc::ValidationError("prediction for task " + std::to_string(t) +
                                           " names unknown item id: " + id);
            }
            order.push_back(pos->second);
        }
        const double tau = psc::score_sort(psc::Ranking(std::move(order)), tasks[t]);
        tau_sum += tau;
        csv << t << ',' << psc::to_string(tasks[t].kind) << ',' << fmt6(tau) << ",\n";
    }
    const double mean = tasks.empty() ? 0.0 : tau_sum / static_cast<double>(tasks.size());
    run.note("mean", mean);
    run.note("flagged", flagged);
    run.finish();
    std::cout << "mean tau = " << fmt6(mean) << " over " << tasks.size() << " tasks";
    if (!flagged.empty()) {
        std::cout << " (" << flagged.size() << " missing, scored 0)";
    }
    std::cout << '\n';
    return 0;
}

struct SweepArgs {
    RankArgs rank;
    std::vector<std::int64_t> m_grid;
    std::vector<double> temperature_grid;
};

int cmd_sweep(const SweepArgs& args) {
    const bool m_mode = !args.m_grid.empty();
    const bool t_mode = !args.temperature_grid.empty();
    if (m_mode == t_mode) {
        throw ConfigError("sweep needs exactly one of --m-grid or --temperature-grid");
    }
    if (args.rank.dataset.empty()) {
        throw ConfigError("sweep needs --dataset");
    }
    const RankerSpec spec = parse_ranker_spec(args.rank.ranker);
    if (spec.remote && args.rank.remote.endpoint.empty()) {
        throw ConfigError("remote ranker needs --endpoint");
    }
    const std::vector<psc::SortTask> tasks = read_dataset_file(args.rank.dataset);
    if (tasks.empty()) {
        throw psc::Error("dataset is empty: " + args.rank.dataset);
    }

    Run run("sweep", args.rank.out, args.rank.seed);
    run.input("dataset", args.rank.dataset);
    record_rank_config(run, args.rank);
    run.config(m_mode ? "m_grid" : "temperature_grid",
               m_mode ? json(args.m_grid) : json(args.temperature_grid));

    if (t_mode && !spec.remote) {
        std::cerr << "note: simulated rankers ignore temperature; scores will be identical "
                     "across the grid\n";
        run.note("warning", "temperature sweep over a simulated ranker is a no-op");
    }

    auto sweep_csv = run.output("sweep.csv");
    auto summary_csv = run.output("summary.csv");
    const std::string param = m_mode ? "m" : "temperature";
    sweep_csv << "param,value,task,tau\n";
    summary_csv << "param,value,mean_tau\n";

    const std::size_t points = m_mode ? args.m_grid.size() : args.temperature_grid.size();
    for (std::size_t g = 0; g < points; ++g) {
        RankArgs point = args.rank;
        if (m_mode) {
            point.m = static_cast<std::int32_t>(args.m_grid[g]);
            if (point.m < 1) {
                throw ConfigError("--m-grid values must be >= 1");
            }
        } else {
            point.remote.temperature = args.temperature_grid[g];
        }
        const std::string value =
            m_mode ? std::to_string(args.m_grid[g]) : fmt6(args.temperature_grid[g]);

        const psc::PscConfig config = base_psc_config(point);
        double tau_sum = 0.0;
        std::int64_t scored = 0;
        for (std::size_t t = 0; t < tasks.size(); ++t) {
            // The root seed is shared across grid points, so sample i of a
            // task reuses the same shuffle at every point.
            TaskOutcome outcome =
                run_task(tasks[t], static_cast<std::int32_t>(t), spec, point.remote, config,
                         point.seed, point.window, point.stride);
            if (!outcome.ok) {
                std::cerr << "task " << t << " failed at " << param << "=" << value << ": "
                          << outcome.error << '\n';
                continue;
            }
            sweep_csv << param << ',' << value << ',' << t << ',' << fmt6(outcome.tau) << '\n';
            tau_sum += outcome.tau;
            ++scored;
        }
        const double mean = scored > 0 ? tau_sum / static_cast<double>(scored) : 0.0;
        summary_csv << param << ',' << value << ',' << fmt6(mean) << '\n';
        std::cout << param << "=" << value << " mean tau " << fmt6(mean) << '\n';
    }
    run.finish();
    return 0;
}

struct AggregateArgs {
    std::string samples;
    std::string method = "kemeny-exact";
    double rrf_k = psc::kDefaultRrfK;
    std::int32_t exact_limit = psc::kDefaultExactLimit;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_aggregate(const AggregateArgs& args) {
    std::ifstream in(args.samples);
    if (!in) {
        throw psc::Error("cannot read samples: " + args.samples);
    }
    const std::vector<psc::Ranking> samples = psc::read_rankings_jsonl(in);

    const psc::AggregationResult result = [&] {
        if (args.method == "kemeny-exact") {
            return psc::kemeny_exact(samples, args.exact_limit);
        }
        if (args.method == "kemeny-budgeted" || args.method == "kemeny") {
            return psc::kemeny_solve(samples);
        }
        if (args.method == "borda") {
            return psc::borda(samples);
        }
        if (args.method == "rrf") {
            return psc::rrf(samples, args.rrf_k);
        }
        throw ConfigError("unknown method: " + args.method);
    }();

    const std::string rendered = psc::to_json(result);
    std::cout << rendered << '\n';
    if (!args.out.empty()) {
        Run run("aggregate", args.out, args.seed);
        run.input("samples", args.samples);
        run.config("method", args.method);
        auto out = run.output("result.json");
        out << rendered << '\n';
        run.finish();
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"permutation self-consistency reranking toolkit"};
    app.set_version_flag("--version", std::string(psc::kVersion));
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from an INI file (flags win over the file)");

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen", "Generate a sorting dataset");
    gen_cmd->add_option("kind", gen.kind, "math, word, or sentence")->required();
    gen_cmd->add_option("--count", gen.count, "Tasks to generate")->capture_default_str();
    gen_cmd->add_option("--seed", gen.seed, "Root seed")->capture_default_str();
    gen_cmd->add_option("--out", gen.out, "Output directory (default runs/<timestamp>-<seed>)");
    gen_cmd->add_option("--lexicon", gen.lexicon, "Sorted word list for the word kind");
    gen_cmd->add_option("--input", gen.input,
                        "Ordered sentence records (JSONL) for the sentence kind");

    RankArgs rank;
    auto* rank_cmd = app.add_subcommand("rank", "PSC-rank a dataset or rerank a TREC run");
    rank_cmd->add_option("--dataset", rank.dataset, "Sorting dataset (JSONL)");
    rank_cmd->add_option("--ranker", rank.ranker,
                         "sim:perfect | sim:echo | sim:concordant | sim:window:LO-HI | "
                         "sim:echo-window:LO-HI | remote")
        ->capture_default_str();
    rank_cmd->add_option("--m", rank.m, "Samples per input")->capture_default_str();
    rank_cmd->add_option("--aggregator", rank.aggregator, "kemeny, borda, or rrf")
        ->capture_default_str();
    rank_cmd->add_option("--seed", rank.seed, "Root seed")->capture_default_str();
    rank_cmd->add_option("--out", rank.out, "Output directory");
    rank_cmd->add_option("--on-unparseable", rank.on_unparseable,
                         "resample-once, drop-sample, or fail")
        ->capture_default_str();
    rank_cmd->add_option("--exact-limit", rank.exact_limit, "Max n for the exact Kemeny solver")
        ->capture_default_str();
    rank_cmd->add_option("--rrf-k", rank.rrf_k, "RRF constant")->capture_default_str();
    rank_cmd->add_option("--window", rank.window, "Sliding window size (0 = single pass)")
        ->capture_default_str();
    rank_cmd->add_option("--stride", rank.stride, "Sliding window stride")->capture_default_str();
    rank_cmd->add_option("--workers", rank.workers,
                         "Cap on concurrent ranker calls (0 = ranker default)")
        ->capture_default_str();
    rank_cmd->add_option("--trec-run", rank.trec_run, "First-stage TREC run to rerank");
    rank_cmd->add_option("--queries", rank.queries, "TSV qid<TAB>text");
    rank_cmd->add_option("--corpus", rank.corpus, "TSV docid<TAB>text");
    rank_cmd->add_option("--qrels", rank.qrels, "Qrels (truth oracle for simulated TREC runs)");
    rank_cmd->add_option("--topk", rank.topk, "First-stage depth to rerank")->capture_default_str();
    rank_cmd->add_option("--endpoint", rank.remote.endpoint, "Remote base URL");
    rank_cmd->add_option("--path", rank.remote.path, "Remote completion path")
        ->capture_default_str();
    rank_cmd->add_option("--model", rank.remote.model, "Remote model name");
    rank_cmd->add_option("--temperature", rank.remote.temperature, "Sampling temperature")
        ->capture_default_str();
    rank_cmd->add_option("--timeout-ms", rank.remote.timeout_ms, "Remote timeout")
        ->capture_default_str();
    rank_cmd->add_option("--max-attempts", rank.remote.max_attempts, "Transport attempts per call")
        ->capture_default_str();
    rank_cmd->add_option("--max-in-flight", rank.remote.max_in_flight, "Concurrent remote calls")
        ->capture_default_str();
    rank_cmd->add_option("--api-key-env", rank.remote.api_key_env,
                         "Environment variable holding the credential")
        ->capture_default_str();
    rank_cmd->add_option("--style", rank.remote.style, "Prompt style for TREC mode")
        ->capture_default_str();
    rank_cmd->add_flag("--audit", rank.audit,
                       "Log raw remote request/response pairs to audit.jsonl");

    SimulateArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Convergence experiment for a noise model");
    sim_cmd->add_option("--n", sim.n, "Items per ranking")->capture_default_str();
    sim_cmd->add_option("--noise", sim.noise, "concordant or window:LO-HI")->capture_default_str();
    sim_cmd->add_option("--m-grid", sim.m_grid, "Sample counts")
        ->delimiter(',')
        ->capture_default_str();
    sim_cmd->add_option("--trials", sim.trials, "Replicates per grid point")->capture_default_str();
    sim_cmd->add_option("--aggregator", sim.aggregator, "kemeny, borda, or rrf")
        ->capture_default_str();
    sim_cmd->add_option("--seed", sim.seed, "Root seed")->capture_default_str();
    sim_cmd->add_option("--out", sim.out, "Output directory");
    sim_cmd->add_option("--exact-limit", sim.exact_limit, "Max n for the exact Kemeny solver")
        ->capture_default_str();
    sim_cmd->add_option("--rrf-k", sim.rrf_k, "RRF constant")->capture_default_str();

    BiasArgs bias;
    auto* bias_cmd = app.add_subcommand("bias", "Reversion analysis of a trace file");
    bias_cmd->add_option("--traces", bias.traces, "Trace JSONL from rank")->required();
    bias_cmd->add_option("--out", bias.out, "Output directory");
    bias_cmd->add_option("--seed", bias.seed, "Seed recorded in the manifest")
        ->capture_default_str();

    EvalArgs eval;
    auto* eval_cmd = app.add_subcommand("eval", "Score predictions against gold or qrels");
    eval_cmd->add_option("--predictions", eval.predictions, "Predictions JSONL from rank");
    eval_cmd->add_option("--dataset", eval.dataset, "Gold dataset (JSONL)");
    eval_cmd->add_option("--run", eval.run_file, "TREC run to score");
    eval_cmd->add_option("--qrels", eval.qrels, "Relevance judgments");
    eval_cmd->add_option("--k", eval.k, "nDCG cutoff")->capture_default_str();
    eval_cmd->add_option("--seed", eval.seed, "Seed recorded in the manifest")
        ->capture_default_str();
    eval_cmd->add_option("--out", eval.out, "Output directory");

    SweepArgs sweep;
    auto* sweep_cmd = app.add_subcommand("sweep", "Repeat rank over an m or temperature grid");
    sweep_cmd->add_option("--dataset", sweep.rank.dataset, "Sorting dataset (JSONL)");
    sweep_cmd->add_option("--ranker", sweep.rank.ranker, "Ranker spec")->capture_default_str();
    sweep_cmd->add_option("--m-grid", sweep.m_grid, "Aggregate sizes")->delimiter(',');
    sweep_cmd->add_option("--temperature-grid", sweep.temperature_grid, "Temperatures")
        ->delimiter(',');
    sweep_cmd->add_option("--aggregator", sweep.rank.aggregator, "kemeny, borda, or rrf")
        ->capture_default_str();
    sweep_cmd->add_option("--m", sweep.rank.m, "Samples per input (temperature mode)")
        ->capture_default_str();
    sweep_cmd->add_option("--seed", sweep.rank.seed, "Root seed")->capture_default_str();
    sweep_cmd->add_option("--out", sweep.rank.out, "Output directory");
    sweep_cmd->add_option("--window", sweep.rank.window, "Sliding window size (0 = single pass)")
        ->capture_default_str();
    sweep_cmd->add_option("--stride", sweep.rank.stride, "Sliding window stride")
        ->capture_default_str();
    sweep_cmd->add_option("--endpoint", sweep.rank.remote.endpoint, "Remote base URL");
    sweep_cmd->add_option("--model", sweep.rank.remote.model, "Remote model name");
    sweep_cmd->add_option("--api-key-env", sweep.rank.remote.api_key_env,
                          "Environment variable holding the credential")
        ->capture_default_str();

    AggregateArgs agg;
    auto* agg_cmd = app.add_subcommand("aggregate", "Aggregate a JSONL sample set directly");
    agg_cmd->add_option("--samples", agg.samples, "JSONL, one ranking array per line")->required();
    agg_cmd->add_option("--method", agg.method, "kemeny-exact, kemeny-budgeted, borda, or rrf")
        ->capture_default_str();
    agg_cmd->add_option("--rrf-k", agg.rrf_k, "RRF constant")->capture_default_str();
    agg_cmd->add_option("--exact-limit", agg.exact_limit, "Max n for the exact solver")
        ->capture_default_str();
    agg_cmd->add_option("--out", agg.out, "Optional output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (gen_cmd->parsed()) return cmd_gen(gen);
        if (rank_cmd->parsed()) return cmd_rank(rank);
        if (sim_cmd->parsed()) return cmd_simulate(sim);
        if (bias_cmd->parsed()) return cmd_bias(bias);
        if (eval_cmd->parsed()) return cmd_eval(eval);
        if (sweep_cmd->parsed()) return cmd_sweep(sweep);
        if (agg_cmd->parsed()) return cmd_aggregate(agg);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
