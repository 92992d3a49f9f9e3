#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "psc/noise.hpp"
#include "psc/prompts.hpp"
#include "psc/ranking.hpp"

namespace psc {

struct RankerOutput {
    std::string raw_text;             // verbatim model output
    std::optional<Ranking> ranking;   // parsed ranking over presented positions; empty if unparseable
    int attempts = 1;                 // transport attempts spent on this call
};

/**
 * The pluggable listwise-ranker boundary: given a presented item list,
 * produce an ordering of its positions. `call_seed` keys the randomness of
 * simulated rankers so one call is reproducible in isolation; remote rankers
 * ignore it. Implementations must be safe for concurrent rank() calls up to
 * max_in_flight().
 */
class ListwiseRanker {
public:
    virtual ~ListwiseRanker() = default;

    virtual std::string name() const = 0;
    virtual bool deterministic() const = 0;
    virtual double temperature() const { return 0.0; }
    virtual int max_in_flight() const { return 1; }

    virtual RankerOutput rank(const ItemList& presented, std::uint64_t call_seed) = 0;
};

/// Ground-truth order provider for simulated rankers: item id -> true rank.
class TruthOracle {
public:
    explicit TruthOracle(std::unordered_map<std::string, std::int32_t> rank_by_id);

    /// Build from a task's items and its gold ranking of them.
    static TruthOracle from_gold(const ItemList& items, const Ranking& gold);

    /// True ordering of the items exactly as presented. Throws
    /// ValidationError for an item the oracle does not know.
    Ranking true_ranking(const ItemList& presented) const;

private:
    std::unordered_map<std::string, std::int32_t> rank_by_id_;
};

enum class SimulatedBase {
    Oracle,  // true order of the presented items
    Echo     // the presented order itself
};

/**
 * Deterministic simulated ranker for desk-scale experiments. Starting from
 * its base ranking, an optional noise model corrupts the output:
 *
 *  - ConcordantSubset noise applies sample_noisy_draw with the base as truth.
 *  - PositionalWindow noise scrambles the items presented at input positions
 *    [lo, hi] within the output slots they would have occupied, so the
 *    corruption follows prompt position rather than true rank. A window
 *    reaching past a shorter presented list is clamped to it.
 */
class SimulatedRanker : public ListwiseRanker {
public:
    SimulatedRanker(SimulatedBase base, std::optional<TruthOracle> oracle,
                    std::optional<NoiseModel> noise);

    static SimulatedRanker perfect(TruthOracle oracle);
    static SimulatedRanker noisy(TruthOracle oracle, NoiseModel noise);
    static SimulatedRanker echo();
    static SimulatedRanker echo_with_noise(NoiseModel noise);

    std::string name() const override;
    bool deterministic() const override { return true; }
    RankerOutput rank(const ItemList& presented, std::uint64_t call_seed) override;

private:
    SimulatedBase base_;
    std::optional<TruthOracle> oracle_;
    std::optional<NoiseModel> noise_;
};

// ---------------------------------------------------------------------------
// Remote chat-completion client
// ---------------------------------------------------------------------------

struct HttpRequest {
    std::string url;
    std::vector<std::pair<std::string, std::string>> headers;
    std::string body;  // JSON
    std::chrono::milliseconds timeout{60'000};
};

struct HttpResponse {
    int status = 0;     // 0 = transport failure, see error
    std::string body;
    std::string error;  // transport-level diagnostic when status == 0
};

class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post(const HttpRequest& request) = 0;
};

/// Production transport backed by cpp-httplib (TLS included).
std::shared_ptr<HttpTransport> make_default_transport();

struct EndpointConfig {
    std::string base_url;                       // e.g. https://api.example.com
    std::string path = "/v1/chat/completions";
    std::string model;
    double temperature = 0.0;
    std::chrono::milliseconds timeout{60'000};
    int max_in_flight = 20;
    int max_attempts = 3;                        // transport attempts per call
    std::chrono::milliseconds backoff_base{250}; // doubles per retry
    std::string api_key_env = "PSC_API_KEY";     // credential env var; never a flag or file
    PromptStyle style = PromptStyle::RankGpt;
};

struct RemoteReply {
    std::string text;
    int attempts = 1;
};

/**
 * Chat-completion client with bounded exponential-backoff retries. Transport
 * failures and 429/5xx responses are retried; 401/403 raise AuthError with
 * zero retries; other non-2xx statuses raise HttpError immediately. When the
 * retry budget is exhausted, TransportError is raised.
 */
class RemoteRanker : public ListwiseRanker {
public:
    RemoteRanker(EndpointConfig config, std::string query,
                 std::shared_ptr<HttpTransport> transport = nullptr);

    std::string name() const override;
    bool deterministic() const override { return false; }
    double temperature() const override { return config_.temperature; }
    int max_in_flight() const override { return config_.max_in_flight; }

    /// Full call: fetch, then parse with the configured style's rules.
    RankerOutput rank(const ItemList& presented, std::uint64_t call_seed) override;

    /// One ranking request; returns the reply message text verbatim.
    RemoteReply fetch_raw(const ItemList& presented);

    /// Optional JSONL audit sink for raw request/response pairs. Writes are
    /// serialized internally, so concurrent rank() calls stay line-atomic.
    void set_audit_stream(std::ostream* audit) { audit_ = audit; }

private:
    EndpointConfig config_;
    std::string query_;
    std::shared_ptr<HttpTransport> transport_;
    std::ostream* audit_ = nullptr;
    std::mutex audit_mutex_;
};

/// Build the chat-completion request body for a rendered prompt.
std::string chat_request_body(const EndpointConfig& config, const RenderedPrompt& prompt);

/// Extract the first choice's message content from a chat-completion reply.
std::string chat_reply_text(const std::string& response_body);

} // namespace psc
