#include "dswarm/remote.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "dswarm/io.hpp"
#include "dswarm/seeding.hpp"

namespace dswarm {

using nlohmann::json;

namespace {

std::string hex64(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 0xF];
    return out;
}

bool transient(int status) { return status == 429 || status >= 500; }

json parse_body(const std::string& body, const std::string& what) {
    try {
        return json::parse(body);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::BadResponse, what + ": response is not JSON (" + e.what() + ")");
    }
}

}  // namespace

RemoteClient::RemoteClient(EndpointConfig config) : config_(std::move(config)) {
    const auto scheme_end = config_.base_url.find("://");
    if (scheme_end == std::string::npos)
        throw Error(ErrorCode::InvalidArgument, "endpoint url '" + config_.base_url + "' has no scheme");
    const auto path_start = config_.base_url.find('/', scheme_end + 3);
    host_ = config_.base_url.substr(0, path_start);
    prefix_ = path_start == std::string::npos ? "" : config_.base_url.substr(path_start);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    if (!config_.token) {
        if (const char* env = std::getenv("SWARM_API_TOKEN")) config_.token = env;
    }
    if (!config_.sleep) config_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::chrono::milliseconds RemoteClient::backoff(unsigned attempt) const {
    auto d = config_.backoff_initial;
    for (unsigned i = 1; i < attempt && d < config_.backoff_max; ++i) d *= 2;
    return std::min(d, config_.backoff_max);
}

std::string RemoteClient::request(const std::string& method, const std::string& path, const std::string& body) const {
    httplib::Client cli(host_);
    const auto secs = config_.timeout.count() / 1000;
    const auto usecs = (config_.timeout.count() % 1000) * 1000;
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);

    std::uint64_t key = 0xcbf29ce484222325ULL;
    for (unsigned char c : method + path + body) key = (key ^ c) * 0x100000001b3ULL;
    httplib::Headers headers{{"Idempotency-Key", hex64(key)}};
    if (config_.token) headers.emplace("Authorization", "Bearer " + *config_.token);

    const std::string url = prefix_ + path;
    std::string last_error;
    for (unsigned attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) config_.sleep(backoff(attempt));
        httplib::Result res = method == "GET"   ? cli.Get(url, headers)
                              : method == "PUT" ? cli.Put(url, headers, body, "application/json")
                                                : cli.Post(url, headers, body, "application/json");
        if (!res) {
            last_error = "connection failed: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 200 && res->status < 300) return res->body;
        last_error = "HTTP " + std::to_string(res->status);
        if (!transient(res->status))
            throw Error(ErrorCode::Transport, method + " " + url + " returned " + last_error);
    }
    if (config_.max_retries == 0) throw Error(ErrorCode::Transport, method + " " + url + ": " + last_error);
    throw Error(ErrorCode::Exhausted,
                method + " " + url + " failed after " + std::to_string(config_.max_retries) + " retries: " + last_error);
}

std::vector<GeneratedRecord> RemoteClient::generate(const std::string& prompt, std::size_t n, std::uint64_t seed) const {
    if (n == 0) return {};
    const json body = {{"prompt", prompt}, {"n", n}, {"seed", seed}};
    const json reply = parse_body(request("POST", "/generate", body.dump()), "/generate");
    if (!reply.is_object() || !reply.contains("instances") || !reply["instances"].is_array())
        throw Error(ErrorCode::BadResponse, "/generate: missing \"instances\" array");
    std::vector<GeneratedRecord> out;
    const auto& items = reply["instances"];
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& rec = items[i];
        if (!rec.is_object() || !rec.contains("query") || !rec["query"].is_string())
            throw Error(ErrorCode::BadResponse, "/generate: record " + std::to_string(i) + " has no string \"query\"", i);
        GeneratedRecord g{rec["query"].get<std::string>(), std::nullopt};
        if (rec.contains("answer") && !rec["answer"].is_null()) {
            if (!rec["answer"].is_string())
                throw Error(ErrorCode::BadResponse, "/generate: record " + std::to_string(i) + " has a non-string \"answer\"", i);
            g.answer = rec["answer"].get<std::string>();
        }
        out.push_back(std::move(g));
    }
    if (out.size() != n)
        throw Error(ErrorCode::BadResponse,
                    "/generate: asked for " + std::to_string(n) + " instances, got " + std::to_string(out.size()));
    return out;
}

double RemoteClient::score(const std::string& query, const std::string& answer) const {
    const json body = {{"query", query}, {"answer", answer}};
    const json reply = parse_body(request("POST", "/score", body.dump()), "/score");
    if (!reply.is_object() || !reply.contains("score") || !reply["score"].is_number())
        throw Error(ErrorCode::BadResponse, "/score: missing numeric \"score\"");
    return reply["score"].get<double>();
}

ParamVector RemoteClient::fetch_adapter(std::optional<Eigen::Index> expected_dim) const {
    const json reply = parse_body(request("GET", "/adapter", ""), "/adapter");
    if (!reply.is_object() || !reply.contains("dim") || !reply["dim"].is_number_integer() || !reply.contains("values") ||
        !reply["values"].is_array())
        throw Error(ErrorCode::BadResponse, "/adapter: expected {\"dim\", \"values\"}");
    const auto dim = reply["dim"].get<std::int64_t>();
    const auto& values = reply["values"];
    if (static_cast<std::int64_t>(values.size()) != dim)
        throw Error(ErrorCode::DimMismatch, "/adapter declares dim " + std::to_string(dim) + " but sent " +
                                                std::to_string(values.size()) + " values");
    if (expected_dim && *expected_dim != dim)
        throw Error(ErrorCode::DimMismatch,
                    "/adapter dim " + std::to_string(dim) + " differs from expected " + std::to_string(*expected_dim));
    ParamVector v(dim);
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!values[i].is_number()) throw Error(ErrorCode::BadResponse, "/adapter: value " + std::to_string(i) + " is not a number", i);
        v(static_cast<Eigen::Index>(i)) = values[i].get<double>();
    }
    return v;
}

void RemoteClient::push_adapter(const ParamVector& values, std::optional<Eigen::Index> expected_dim) const {
    if (expected_dim && values.size() != *expected_dim)
        throw Error(ErrorCode::DimMismatch, "adapter push of dim " + std::to_string(values.size()) +
                                                " to an endpoint declaring dim " + std::to_string(*expected_dim));
    validate(values);
    json body = {{"dim", values.size()}, {"values", std::vector<double>(values.data(), values.data() + values.size())}};
    const json reply = parse_body(request("PUT", "/adapter", body.dump()), "/adapter");
    if (!reply.is_object() || !reply.contains("ok") || reply["ok"] != true)
        throw Error(ErrorCode::BadResponse, "/adapter push was not acknowledged");
}

std::vector<GeneratedRecord> remote_generate(const RemoteClient& endpoint, const std::string& prompt, std::size_t n,
                                             std::uint64_t seed) {
    return endpoint.generate(prompt, n, seed);
}

ParamVector remote_adapter_io(const RemoteClient& endpoint, AdapterDirection direction, const ParamVector& adapter,
                              std::optional<Eigen::Index> declared_dim) {
    if (direction == AdapterDirection::fetch) return endpoint.fetch_adapter(declared_dim);
    endpoint.push_adapter(adapter, declared_dim);
    return adapter;
}

RemoteGenerator::RemoteGenerator(std::string id, RemoteClient client, Dataset cluster, std::string domain,
                                 std::size_t shots, Eigen::Index adapter_dim)
    : id_(std::move(id)),
      client_(std::move(client)),
      cluster_(std::move(cluster)),
      domain_(std::move(domain)),
      shots_(shots),
      adapter_dim_(adapter_dim) {}

ParamVector RemoteGenerator::params() const { return client_.fetch_adapter(adapter_dim_); }

void RemoteGenerator::set_params(const ParamVector& params) { client_.push_adapter(params, adapter_dim_); }

Dataset RemoteGenerator::sample(std::size_t m, const RngStream& rng) const {
    const std::string prompt = build_inference_prompt(cluster_, shots_, domain_, rng.child(0));
    Dataset out;
    const auto records = client_.generate(prompt, m, rng.bits(1));
    for (std::size_t j = 0; j < records.size(); ++j) {
        EvalInstance inst;
        inst.id = id_ + "-" + std::to_string(j);
        inst.query = records[j].query;
        inst.reference_answer = records[j].answer;
        out.instances.push_back(std::move(inst));
    }
    return out;
}

RemoteTaker::RemoteTaker(std::string id, RemoteClient client, std::optional<Eigen::Index> adapter_dim)
    : id_(std::move(id)), client_(std::move(client)), adapter_dim_(adapter_dim) {}

std::optional<ParamVector> RemoteTaker::params() const {
    if (!adapter_dim_) return std::nullopt;
    return client_.fetch_adapter(adapter_dim_);
}

void RemoteTaker::set_params(const ParamVector& params) {
    if (!adapter_dim_) TestTakerModel::set_params(params);
    client_.push_adapter(params, adapter_dim_);
}

std::string RemoteTaker::answer(const std::string& query) const {
    const auto records = client_.generate(query, 1, 0);
    return records.front().answer.value_or(records.front().query);
}

RemoteJudge::RemoteJudge(RemoteClient client, std::string prompt_template)
    : client_(std::move(client)), template_(std::move(prompt_template)) {}

double RemoteJudge::score(std::string_view query, std::string_view answer,
                          const std::optional<std::string>& reference) const {
    std::string text = template_;
    auto substitute = [&text](std::string_view key, std::string_view value) {
        for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size()))
            text.replace(pos, key.size(), value);
    };
    substitute("{query}", query);
    substitute("{answer}", answer);
    substitute("{reference}", reference.value_or(""));
    return judge_normalize(client_.score(text, std::string(answer)));
}

}  // namespace dswarm
