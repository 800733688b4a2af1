#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dswarm/core.hpp"
#include "dswarm/models.hpp"

// JSON-over-HTTP client for remote generator / taker / judge endpoints.
//
//   POST {base}/generate  {"prompt", "n", "seed"}  -> {"instances": [{"query", "answer"|null}]}
//   POST {base}/score     {"query", "answer"}      -> {"score": 1..10}
//   GET  {base}/adapter                            -> {"dim", "values"}
//   PUT  {base}/adapter   {"dim", "values"}        -> {"ok": true}
//
// Requests carry "Authorization: Bearer $SWARM_API_TOKEN" when the variable is
// set and an "Idempotency-Key" derived from the request content. Connection
// failures, 429 and 5xx are retried with exponential backoff.

namespace dswarm {

struct EndpointConfig {
    std::string base_url;  // http://host:port[/prefix]
    std::chrono::milliseconds timeout{30000};
    unsigned max_retries = 3;
    std::chrono::milliseconds backoff_initial{200};
    std::chrono::milliseconds backoff_max{5000};
    std::optional<std::string> token;  // unset: read SWARM_API_TOKEN

    /// Injected so tests can observe backoff without sleeping.
    std::function<void(std::chrono::milliseconds)> sleep;
};

struct GeneratedRecord {
    std::string query;
    std::optional<std::string> answer;

    friend bool operator==(const GeneratedRecord&, const GeneratedRecord&) = default;
};

class RemoteClient {
public:
    explicit RemoteClient(EndpointConfig config);

    const EndpointConfig& config() const { return config_; }

    /// n == 0 returns an empty list without a network call. A malformed
    /// record throws BadResponse carrying the record index.
    std::vector<GeneratedRecord> generate(const std::string& prompt, std::size_t n, std::uint64_t seed) const;

    /// Raw 1..10 rating.
    double score(const std::string& query, const std::string& answer) const;

    ParamVector fetch_adapter(std::optional<Eigen::Index> expected_dim = std::nullopt) const;
    void push_adapter(const ParamVector& values, std::optional<Eigen::Index> expected_dim = std::nullopt) const;

    /// Backoff before retry `attempt` (1-based): initial * 2^(attempt-1), capped.
    std::chrono::milliseconds backoff(unsigned attempt) const;

private:
    std::string request(const std::string& method, const std::string& path, const std::string& body) const;

    EndpointConfig config_;
    std::string host_;  // scheme://host:port
    std::string prefix_;
};

std::vector<GeneratedRecord> remote_generate(const RemoteClient& endpoint, const std::string& prompt, std::size_t n,
                                             std::uint64_t seed);

enum class AdapterDirection { fetch, push };

/// fetch returns the endpoint's adapter; push installs `adapter` and returns it.
/// A wrong-dimension push fails before any request is made.
ParamVector remote_adapter_io(const RemoteClient& endpoint, AdapterDirection direction, const ParamVector& adapter,
                              std::optional<Eigen::Index> declared_dim);

/// Generator backed by an endpoint. Parameters are the endpoint's adapter;
/// sampling sends a k-shot inference prompt built from the generator's cluster.
class RemoteGenerator final : public GeneratorModel {
public:
    RemoteGenerator(std::string id, RemoteClient client, Dataset cluster, std::string domain, std::size_t shots,
                    Eigen::Index adapter_dim);

    const std::string& id() const override { return id_; }
    ParamVector params() const override;
    void set_params(const ParamVector& params) override;
    Dataset sample(std::size_t m, const RngStream& rng) const override;

private:
    std::string id_;
    RemoteClient client_;
    Dataset cluster_;
    std::string domain_;
    std::size_t shots_;
    Eigen::Index adapter_dim_;
};

/// Answers by a 1-sample /generate call on the query; takes the record's
/// answer field, or its query field when the answer is null.
class RemoteTaker final : public TestTakerModel {
public:
    RemoteTaker(std::string id, RemoteClient client, std::optional<Eigen::Index> adapter_dim);

    const std::string& id() const override { return id_; }
    std::optional<ParamVector> params() const override;
    void set_params(const ParamVector& params) override;
    std::string answer(const std::string& query) const override;

private:
    std::string id_;
    RemoteClient client_;
    std::optional<Eigen::Index> adapter_dim_;
};

/// LLM-as-a-judge over /score. `prompt_template` may reference {query},
/// {answer} and {reference}; the rendered text is sent as the query.
class RemoteJudge final : public Judge {
public:
    explicit RemoteJudge(RemoteClient client, std::string prompt_template = "{query}");

    double score(std::string_view query, std::string_view answer,
                 const std::optional<std::string>& reference) const override;

private:
    RemoteClient client_;
    std::string template_;
};

}  // namespace dswarm
