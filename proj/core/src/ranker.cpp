#include "psc/ranker.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "psc/errors.hpp"

namespace psc {

using nlohmann::json;

// ---------------------------------------------------------------------------
// TruthOracle
// ---------------------------------------------------------------------------

TruthOracle::TruthOracle(std::unordered_map<std::string, std::int32_t> rank_by_id)
    : rank_by_id_(std::move(rank_by_id)) {
    if (rank_by_id_.empty()) {
        throw ValidationError("truth oracle needs at least one item");
    }
}

TruthOracle TruthOracle::from_gold(const ItemList& items, const Ranking& gold) {
    if (items.size() != gold.size()) {
        throw DimensionError("gold ranking does not match the item list");
    }
    std::unordered_map<std::string, std::int32_t> ranks;
    for (std::int32_t r = 0; r < gold.size(); ++r) {
        ranks[items[gold[r]].id] = r;
    }
    return TruthOracle(std::move(ranks));
}

Ranking TruthOracle::true_ranking(const ItemList& presented) const {
    std::vector<std::int32_t> order(static_cast<std::size_t>(presented.size()));
    std::vector<std::int32_t> rank(static_cast<std::size_t>(presented.size()));
    for (std::int32_t p = 0; p < presented.size(); ++p) {
        const auto it = rank_by_id_.find(presented[p].id);
        if (it == rank_by_id_.end()) {
            throw ValidationError("truth oracle has no rank for item id: " + presented[p].id);
        }
        order[p] = p;
        rank[p] = it->second;
    }
    std::sort(order.begin(), order.end(),
              [&](std::int32_t a, std::int32_t b) { return rank[a] < rank[b]; });
    return Ranking(std::move(order));
}

// ---------------------------------------------------------------------------
// SimulatedRanker
// ---------------------------------------------------------------------------

SimulatedRanker::SimulatedRanker(SimulatedBase base, std::optional<TruthOracle> oracle,
                                 std::optional<NoiseModel> noise)
    : base_(base), oracle_(std::move(oracle)), noise_(std::move(noise)) {
    if (base_ == SimulatedBase::Oracle && !oracle_.has_value()) {
        throw ValidationError("oracle-based simulated ranker needs a truth oracle");
    }
}

SimulatedRanker SimulatedRanker::perfect(TruthOracle oracle) {
    return SimulatedRanker(SimulatedBase::Oracle, std::move(oracle), std::nullopt);
}

SimulatedRanker SimulatedRanker::noisy(TruthOracle oracle, NoiseModel noise) {
    return SimulatedRanker(SimulatedBase::Oracle, std::move(oracle), std::move(noise));
}

SimulatedRanker SimulatedRanker::echo() {
    return SimulatedRanker(SimulatedBase::Echo, std::nullopt, std::nullopt);
}

SimulatedRanker SimulatedRanker::echo_with_noise(NoiseModel noise) {
    return SimulatedRanker(SimulatedBase::Echo, std::nullopt, std::move(noise));
}

std::string SimulatedRanker::name() const {
    std::string n = base_ == SimulatedBase::Echo ? "sim:echo" : "sim:oracle";
    if (noise_) {
        if (noise_->kind == NoiseKind::ConcordantSubset) {
            n += "+concordant";
        } else {
            n += "+window:" + std::to_string(noise_->window_lo) + "-" +
                 std::to_string(noise_->window_hi);
        }
    }
    return n;
}

RankerOutput SimulatedRanker::rank(const ItemList& presented, std::uint64_t call_seed) {
    if (presented.empty()) {
        throw DimensionError("cannot rank an empty item list");
    }
    const std::int32_t n = presented.size();
    Ranking base = base_ == SimulatedBase::Echo ? Ranking::identity(n)
                                                : oracle_->true_ranking(presented);
    Ranking result = base;
    if (noise_) {
        Rng rng(call_seed);
        if (noise_->kind == NoiseKind::ConcordantSubset) {
            noise_->validate(n);
            result = sample_noisy_ranking(base, *noise_, rng);
        } else {
            // Input-position window: the items presented at positions
            // [lo, hi] are scrambled within the output slots the base would
            // have given them, so the corruption tracks prompt position.
            std::int32_t lo = std::min(noise_->window_lo, n + 1);
            std::int32_t hi = std::min(noise_->window_hi, n);
            if (noise_->window_lo < 1 || noise_->window_lo > noise_->window_hi) {
                throw ValidationError("scramble window is empty");
            }
            if (lo <= hi) {
                std::vector<std::int32_t> out = base.order();
                std::vector<std::int32_t> slots;
                for (std::int32_t p = 0; p < n; ++p) {
                    if (out[p] >= lo - 1 && out[p] <= hi - 1) {
                        slots.push_back(p);
                    }
                }
                std::vector<std::int32_t> vals;
                vals.reserve(slots.size());
                for (std::int32_t s : slots) {
                    vals.push_back(out[s]);
                }
                rng.shuffle(vals);
                for (std::size_t k = 0; k < slots.size(); ++k) {
                    out[slots[k]] = vals[k];
                }
                result = Ranking(std::move(out));
            }
        }
    }
    RankerOutput output;
    output.raw_text = render_identifier_chain(result);
    output.ranking = std::move(result);
    return output;
}

// ---------------------------------------------------------------------------
// Remote client
// ---------------------------------------------------------------------------

namespace {

class HttplibTransport : public HttpTransport {
public:
    HttpResponse post(const HttpRequest& request) override {
        const auto scheme_end = request.url.find("://");
        if (scheme_end == std::string::npos) {
            return HttpResponse{0, "", "url has no scheme: " + request.url};
        }
        const auto path_start = request.url.find('/', scheme_end + 3);
        const std::string origin =
            path_start == std::string::npos ? request.url : request.url.substr(0, path_start);
        const std::string path =
            path_start == std::string::npos ? "/" : request.url.substr(path_start);

        httplib::Client client(origin);
        client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(
            request.timeout));
        client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(request.timeout));
        httplib::Headers headers;
        for (const auto& [key, value] : request.headers) {
            headers.emplace(key, value);
        }
        auto result = client.Post(path, headers, request.body, "application/json");
        if (!result) {
            return HttpResponse{0, "", httplib::to_string(result.error())};
        }
        return HttpResponse{result->status, result->body, ""};
    }
};

} // namespace

std::shared_ptr<HttpTransport> make_default_transport() {
    return std::make_shared<HttplibTransport>();
}

std::string chat_request_body(const EndpointConfig& config, const RenderedPrompt& prompt) {
    json messages = json::array();
    if (!prompt.system.empty()) {
        messages.push_back({{"role", "system"}, {"content", prompt.system}});
    }
    messages.push_back({{"role", "user"}, {"content", prompt.user}});
    json body = {
        {"model", config.model},
        {"temperature", config.temperature},
        {"messages", std::move(messages)},
    };
    return body.dump();
}

std::string chat_reply_text(const std::string& response_body) {
    json reply;
    try {
        reply = json::parse(response_body);
    } catch (const json::exception& e) {
        throw HttpError(std::string("malformed chat-completion reply: ") + e.what(), 200);
    }
    if (!reply.contains("choices") || !reply["choices"].is_array() || reply["choices"].empty()) {
        throw HttpError("chat-completion reply has no choices", 200);
    }
    const json& message = reply["choices"][0].value("message", json::object());
    if (!message.contains("content") || !message["content"].is_string()) {
        throw HttpError("chat-completion reply has no message content", 200);
    }
    return message["content"].get<std::string>();
}

RemoteRanker::RemoteRanker(EndpointConfig config, std::string query,
                           std::shared_ptr<HttpTransport> transport)
    : config_(std::move(config)),
      query_(std::move(query)),
      transport_(transport ? std::move(transport) : make_default_transport()) {
    if (config_.base_url.empty()) {
        throw ValidationError("remote ranker needs a base URL");
    }
    if (config_.max_attempts < 1) {
        throw ValidationError("max_attempts must be >= 1");
    }
}

std::string RemoteRanker::name() const {
    return "remote:" + (config_.model.empty() ? config_.base_url : config_.model);
}

RemoteReply RemoteRanker::fetch_raw(const ItemList& presented) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
        throw AuthError("credential environment variable is not set: " + config_.api_key_env);
    }

    const RenderedPrompt prompt = render_prompt(config_.style, presented, query_);
    HttpRequest request;
    request.url = config_.base_url + config_.path;
    request.headers.emplace_back("Authorization", std::string("Bearer ") + key);
    request.body = chat_request_body(config_, prompt);
    request.timeout = config_.timeout;

    std::string last_error;
    for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
        if (attempt > 1 && config_.backoff_base.count() > 0) {
            std::this_thread::sleep_for(config_.backoff_base * (1 << (attempt - 2)));
        }
        const HttpResponse response = transport_->post(request);
        if (audit_ != nullptr) {
            json line = {{"request", request.body},
                         {"status", response.status},
                         {"response", response.body}};
            const std::lock_guard<std::mutex> guard(audit_mutex_);
            (*audit_) << line.dump() << '\n';
        }
        if (response.status == 401 || response.status == 403) {
            throw AuthError("endpoint rejected the credential (HTTP " +
                            std::to_string(response.status) + ")");
        }
        if (response.status >= 200 && response.status < 300) {
            return RemoteReply{chat_reply_text(response.body), attempt};
        }
        if (response.status == 0) {
            last_error = response.error.empty() ? "transport failure" : response.error;
            continue;  // transient: retry
        }
        if (response.status == 429 || response.status >= 500) {
            last_error = "HTTP " + std::to_string(response.status);
            continue;  // transient: retry
        }
        throw HttpError("non-retryable response from endpoint", response.status);
    }
    throw TransportError("retry budget exhausted after " + std::to_string(config_.max_attempts) +
                         " attempts: " + last_error);
}

RankerOutput RemoteRanker::rank(const ItemList& presented, std::uint64_t /*call_seed*/) {
    const RemoteReply reply = fetch_raw(presented);
    RankerOutput output;
    output.raw_text = reply.text;
    output.attempts = reply.attempts;
    try {
        output.ranking = parse_ranking_output(reply.text, presented, config_.style);
    } catch (const UnparseableOutputError&) {
        output.ranking = std::nullopt;
    }
    return output;
}

} // namespace psc
