#include "dswarm/config.hpp"

#include <cstdlib>
#include <type_traits>

#include "dswarm/io.hpp"

namespace dswarm {

using nlohmann::json;

namespace {

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& path) {
    if (!j.contains(key)) return;
    const json& v = j.at(key);
    if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.get<std::int64_t>() < 0 && !v.is_number_unsigned()))
            throw Error(ErrorCode::Parse, "config key '" + path + key + "' must be a" +
                                              (std::is_unsigned_v<T> ? " non-negative" : "n") + " integer");
    }
    try {
        out = v.get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, "config key '" + path + key + "': " + e.what());
    }
}

void read_ms(const json& j, const char* key, std::chrono::milliseconds& out, const std::string& path) {
    std::int64_t ms = out.count();
    read(j, key, ms, path);
    out = std::chrono::milliseconds(ms);
}

void read_dim(const json& j, const char* key, std::optional<Eigen::Index>& out, const std::string& path) {
    if (!j.contains(key) || j.at(key).is_null()) return;
    std::int64_t d = 0;
    read(j, key, d, path);
    if (d <= 0) throw Error(ErrorCode::Parse, "config key '" + path + key + "' must be positive");
    out = d;
}

const json& section(const json& j, const char* key, const std::string& path) {
    static const json empty = json::object();
    if (!j.contains(key)) return empty;
    if (!j.at(key).is_object()) throw Error(ErrorCode::Parse, "config key '" + path + key + "' must be an object");
    return j.at(key);
}

PsoHyperparams pso_from_json(const json& j, PsoHyperparams h, const std::string& path) {
    read(j, "step_length", h.step_length, path);
    read(j, "inertia", h.inertia, path);
    read(j, "cognitive", h.cognitive, path);
    read(j, "social", h.social, path);
    read(j, "repel", h.repel, path);
    read(j, "patience", h.patience, path);
    read(j, "max_iteration", h.max_iteration, path);
    return h;
}

ObjectiveSpec objective_from_json(const json& j, ObjectiveSpec spec, const std::string& path) {
    if (j.contains("components")) {
        const auto& comps = j.at("components");
        if (!comps.is_object()) throw Error(ErrorCode::Parse, "config key '" + path + "components' must be an object");
        spec.components.clear();
        for (const auto& [name, w] : comps.items()) {
            if (!w.is_number()) throw Error(ErrorCode::Parse, "objective weight '" + name + "' must be a number");
            spec.components.push_back({parse_objective_kind(name), w.get<double>()});
        }
    }
    read(j, "resample_count", spec.resample_count, path);
    read(j, "topk", spec.topk, path);
    return spec;
}

}  // namespace

json to_json(const PsoHyperparams& h) {
    return {{"step_length", h.step_length}, {"inertia", h.inertia},     {"cognitive", h.cognitive},
            {"social", h.social},           {"repel", h.repel},         {"patience", h.patience},
            {"max_iteration", h.max_iteration}};
}

json to_json(const ObjectiveSpec& spec) {
    json comps = json::object();
    for (const auto& c : spec.components) comps[std::string(to_string(c.kind))] = c.weight;
    return {{"components", comps}, {"resample_count", spec.resample_count}, {"topk", spec.topk}};
}

json to_json(const RunConfig& cfg) {
    const auto& t = cfg.testbed;
    const auto& r = cfg.remote;
    const auto& a = cfg.adversarial;
    json dim_g = r.generator_adapter_dim ? json(*r.generator_adapter_dim) : json(nullptr);
    json dim_t = r.taker_adapter_dim ? json(*r.taker_adapter_dim) : json(nullptr);
    return {
        {"seed", cfg.seed},
        {"domain", cfg.domain},
        {"generators", cfg.generators},
        {"instances_per_iteration", cfg.instances_per_iteration},
        {"objective", to_json(cfg.objective)},
        {"pso", to_json(cfg.pso)},
        {"threads", cfg.threads},
        {"seeding", {{"embed_dim", cfg.embed_dim}, {"ngram", cfg.ngram}, {"kmeans_max_iters", cfg.kmeans_max_iters}}},
        {"grid", {{"points", cfg.grid}, {"budget", cfg.grid_budget}}},
        {"adversarial",
         {{"max_iteration", a.max_iteration},
          {"patience", a.patience},
          {"window", a.window},
          {"instances_per_generator", a.instances_per_generator},
          {"data_pso", to_json(a.data_pso)},
          {"model_pso", to_json(a.model_pso)}}},
        {"testbed",
         {{"feature_dim", t.feature_dim},
          {"sharpness", t.sharpness},
          {"noise", t.noise},
          {"taker_skills", t.taker_skills},
          {"transfer_skills", t.transfer_skills},
          {"seed_size", t.seed_size},
          {"held_out_size", t.held_out_size},
          {"seed_feature_low", t.seed_feature_low},
          {"seed_feature_high", t.seed_feature_high},
          {"user_size", t.user_size}}},
        {"remote",
         {{"seed_data", r.seed_data},
          {"generator_urls", r.generator_urls},
          {"taker_urls", r.taker_urls},
          {"transfer_taker_urls", r.transfer_taker_urls},
          {"judge_url", r.judge_url},
          {"judge_template", r.judge_template},
          {"generator_adapter_dim", dim_g},
          {"taker_adapter_dim", dim_t},
          {"shots", r.shots},
          {"timeout_ms", r.timeout.count()},
          {"max_retries", r.max_retries},
          {"backoff_initial_ms", r.backoff_initial.count()},
          {"backoff_max_ms", r.backoff_max.count()},
          {"exact_match", r.exact_match}}},
    };
}

RunConfig config_from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::Parse, "config must be a JSON object");
    RunConfig cfg;
    read(j, "seed", cfg.seed, "");
    read(j, "domain", cfg.domain, "");
    read(j, "generators", cfg.generators, "");
    read(j, "instances_per_iteration", cfg.instances_per_iteration, "");
    read(j, "threads", cfg.threads, "");
    cfg.objective = objective_from_json(section(j, "objective", ""), cfg.objective, "objective.");
    cfg.pso = pso_from_json(section(j, "pso", ""), cfg.pso, "pso.");

    const auto& s = section(j, "seeding", "");
    read(s, "embed_dim", cfg.embed_dim, "seeding.");
    read(s, "ngram", cfg.ngram, "seeding.");
    read(s, "kmeans_max_iters", cfg.kmeans_max_iters, "seeding.");

    const auto& g = section(j, "grid", "");
    read(g, "points", cfg.grid, "grid.");
    read(g, "budget", cfg.grid_budget, "grid.");

    const auto& a = section(j, "adversarial", "");
    read(a, "max_iteration", cfg.adversarial.max_iteration, "adversarial.");
    read(a, "patience", cfg.adversarial.patience, "adversarial.");
    read(a, "window", cfg.adversarial.window, "adversarial.");
    read(a, "instances_per_generator", cfg.adversarial.instances_per_generator, "adversarial.");
    cfg.adversarial.data_pso = pso_from_json(section(a, "data_pso", "adversarial."), cfg.adversarial.data_pso,
                                             "adversarial.data_pso.");
    cfg.adversarial.model_pso = pso_from_json(section(a, "model_pso", "adversarial."), cfg.adversarial.model_pso,
                                              "adversarial.model_pso.");

    auto& t = cfg.testbed;
    const auto& tj = section(j, "testbed", "");
    read(tj, "feature_dim", t.feature_dim, "testbed.");
    read(tj, "sharpness", t.sharpness, "testbed.");
    read(tj, "noise", t.noise, "testbed.");
    read(tj, "taker_skills", t.taker_skills, "testbed.");
    read(tj, "transfer_skills", t.transfer_skills, "testbed.");
    read(tj, "seed_size", t.seed_size, "testbed.");
    read(tj, "held_out_size", t.held_out_size, "testbed.");
    read(tj, "seed_feature_low", t.seed_feature_low, "testbed.");
    read(tj, "seed_feature_high", t.seed_feature_high, "testbed.");
    read(tj, "user_size", t.user_size, "testbed.");

    auto& r = cfg.remote;
    const auto& rj = section(j, "remote", "");
    read(rj, "seed_data", r.seed_data, "remote.");
    read(rj, "generator_urls", r.generator_urls, "remote.");
    read(rj, "taker_urls", r.taker_urls, "remote.");
    read(rj, "transfer_taker_urls", r.transfer_taker_urls, "remote.");
    read(rj, "judge_url", r.judge_url, "remote.");
    read(rj, "judge_template", r.judge_template, "remote.");
    read_dim(rj, "generator_adapter_dim", r.generator_adapter_dim, "remote.");
    read_dim(rj, "taker_adapter_dim", r.taker_adapter_dim, "remote.");
    read(rj, "shots", r.shots, "remote.");
    read_ms(rj, "timeout_ms", r.timeout, "remote.");
    read(rj, "max_retries", r.max_retries, "remote.");
    read_ms(rj, "backoff_initial_ms", r.backoff_initial, "remote.");
    read_ms(rj, "backoff_max_ms", r.backoff_max, "remote.");
    read(rj, "exact_match", r.exact_match, "remote.");

    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_text(path));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, "'" + path.string() + "': " + e.what());
    }
    return config_from_json(j);
}

std::string config_hash(const RunConfig& cfg) { return fnv1a_hex(to_json(cfg).dump()); }

void RunConfig::validate() const {
    if (generators == 0) throw Error(ErrorCode::InvalidArgument, "generators must be >= 1");
    if (instances_per_iteration == 0) throw Error(ErrorCode::InvalidArgument, "instances_per_iteration must be >= 1");
    objective.validate();
    pso.validate();
    adversarial.validate();
    if (grid_budget == 0) throw Error(ErrorCode::InvalidArgument, "grid budget must be >= 1");
    if (embed_dim == 0 || ngram == 0) throw Error(ErrorCode::InvalidArgument, "embedder dim and n must be positive");
    const auto& t = testbed;
    if (t.feature_dim == 0) throw Error(ErrorCode::DimZero, "testbed feature_dim must be >= 1");
    if (!(t.sharpness > 0.0)) throw Error(ErrorCode::InvalidArgument, "testbed sharpness must be positive");
    if (!(t.noise >= 0.0)) throw Error(ErrorCode::InvalidArgument, "testbed noise must be >= 0");
    if (t.taker_skills.empty()) throw Error(ErrorCode::InvalidArgument, "testbed needs at least one taker");
    if (!(t.seed_feature_low >= 0.0 && t.seed_feature_low < t.seed_feature_high && t.seed_feature_high <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "testbed seed feature range must satisfy 0 <= low < high <= 1");
    if (t.seed_size < generators) throw Error(ErrorCode::TooFewPoints, "testbed seed set smaller than generator count");
    if (t.held_out_size == 0) throw Error(ErrorCode::InvalidArgument, "testbed held_out_size must be >= 1");
}

DataSwarmConfig World::data_config(const RunConfig& cfg) const {
    DataSwarmConfig d;
    d.instances_per_iteration = cfg.instances_per_iteration;
    d.objective = cfg.objective;
    d.pso = cfg.pso;
    d.threads = cfg.threads;
    d.baseline = baseline;
    d.embedder = embedder;
    d.user_embeddings = user_embeddings;
    return d;
}

Dataset testbed_seed_data(const TestbedConfig& cfg, std::size_t count, const std::string& prefix,
                          const RngStream& rng) {
    Dataset out;
    out.instances.reserve(count);
    for (std::size_t j = 0; j < count; ++j) {
        RngStream r = rng.child(j);
        Eigen::VectorXd phi(static_cast<Eigen::Index>(cfg.feature_dim));
        for (auto& v : phi) v = cfg.seed_feature_low + (cfg.seed_feature_high - cfg.seed_feature_low) * r.next_uniform();
        auto [query, answer] = render_arithmetic(phi, rng.child(j).child(1));
        EvalInstance inst;
        inst.id = prefix + "/" + std::to_string(j);
        inst.query = std::move(query);
        inst.reference_answer = std::move(answer);
        inst.features = std::move(phi);
        out.instances.push_back(std::move(inst));
    }
    out.provenance = Provenance::seed();
    return out;
}

namespace {

Eigen::MatrixXd feature_rows(const Dataset& data) {
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(data.size()), data.instances.front().features->size());
    for (std::size_t i = 0; i < data.size(); ++i) rows.row(static_cast<Eigen::Index>(i)) = *data.instances[i].features;
    return rows;
}

EndpointConfig endpoint(const RemoteConfig& r, const std::string& url) {
    EndpointConfig e;
    e.base_url = url;
    e.timeout = r.timeout;
    e.max_retries = r.max_retries;
    e.backoff_initial = r.backoff_initial;
    e.backoff_max = r.backoff_max;
    return e;
}

void attach_references(World& w, const RunConfig& cfg) {
    w.baseline = std::make_shared<const Dataset>(w.seed);
    w.embedder = std::make_shared<const HashedNgramEmbedder>(cfg.embed_dim, cfg.ngram);
    Dataset users;
    const std::size_t n = std::min(cfg.testbed.user_size, w.seed.size());
    users.instances.assign(w.seed.instances.begin(), w.seed.instances.begin() + static_cast<std::ptrdiff_t>(n));
    w.user_embeddings = embed_queries(*w.embedder, users);
}

}  // namespace

World build_testbed_world(const RunConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const RngStream root(seed);
    const auto& t = cfg.testbed;
    World w;
    w.seed = testbed_seed_data(t, t.seed_size, "seed", root.child(stream::kSeedData));
    w.held_out = testbed_seed_data(t, t.held_out_size, "heldout", root.child(stream::kHeldOut));
    w.clusters = kmeans(feature_rows(w.seed), cfg.generators, root.child(stream::kCluster), cfg.kmeans_max_iters);
    w.cluster_sets = split_by_cluster(w.seed, w.clusters);
    for (std::size_t c = 0; c < w.cluster_sets.size(); ++c)
        w.generators.push_back(std::make_unique<TestbedGenerator>(
            TestbedGenerator::fit("gen" + std::to_string(c), w.cluster_sets[c], t.noise)));
    const auto dim = static_cast<Eigen::Index>(t.feature_dim);
    for (std::size_t i = 0; i < t.taker_skills.size(); ++i)
        w.takers.push_back(std::make_unique<TestbedTaker>("taker" + std::to_string(i),
                                                          Eigen::VectorXd::Constant(dim, t.taker_skills[i]), t.sharpness));
    for (std::size_t i = 0; i < t.transfer_skills.size(); ++i)
        w.transfer_takers.push_back(std::make_unique<TestbedTaker>(
            "transfer" + std::to_string(i), Eigen::VectorXd::Constant(dim, t.transfer_skills[i]), t.sharpness));
    w.judge = std::make_unique<ExactMatchJudge>();
    attach_references(w, cfg);
    return w;
}

World build_remote_world(const RunConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const auto& r = cfg.remote;
    if (r.seed_data.empty()) throw Error(ErrorCode::InvalidArgument, "remote runs need remote.seed_data");
    if (r.generator_urls.size() != cfg.generators)
        throw Error(ErrorCode::LengthMismatch, "remote.generator_urls must list one endpoint per generator");
    if (r.taker_urls.empty()) throw Error(ErrorCode::InvalidArgument, "remote.taker_urls is empty");
    if (!r.exact_match && r.judge_url.empty()) throw Error(ErrorCode::InvalidArgument, "remote.judge_url is empty");
    if (!r.generator_adapter_dim) throw Error(ErrorCode::InvalidArgument, "remote.generator_adapter_dim is required");

    const RngStream root(seed);
    World w;
    Dataset all = read_dataset(r.seed_data);
    const std::size_t held = std::min(cfg.testbed.held_out_size, all.size() / 2);
    const auto order = sample_without_replacement(all.size(), all.size(), root.child(stream::kHeldOut));
    for (std::size_t i = 0; i < order.size(); ++i)
        (i < held ? w.held_out : w.seed).instances.push_back(all.instances[order[i]]);

    attach_references(w, cfg);
    w.clusters = kmeans(embed_queries(*w.embedder, w.seed), cfg.generators, root.child(stream::kCluster),
                        cfg.kmeans_max_iters);
    w.cluster_sets = split_by_cluster(w.seed, w.clusters);
    for (std::size_t c = 0; c < w.cluster_sets.size(); ++c)
        w.generators.push_back(std::make_unique<RemoteGenerator>(
            "gen" + std::to_string(c), RemoteClient(endpoint(r, r.generator_urls[c])), w.cluster_sets[c], cfg.domain,
            r.shots, *r.generator_adapter_dim));
    for (std::size_t i = 0; i < r.taker_urls.size(); ++i)
        w.takers.push_back(std::make_unique<RemoteTaker>("taker" + std::to_string(i),
                                                         RemoteClient(endpoint(r, r.taker_urls[i])), r.taker_adapter_dim));
    for (std::size_t i = 0; i < r.transfer_taker_urls.size(); ++i)
        w.transfer_takers.push_back(std::make_unique<RemoteTaker>(
            "transfer" + std::to_string(i), RemoteClient(endpoint(r, r.transfer_taker_urls[i])), std::nullopt));
    if (r.exact_match)
        w.judge = std::make_unique<ExactMatchJudge>();
    else
        w.judge = std::make_unique<RemoteJudge>(RemoteClient(endpoint(r, r.judge_url)), r.judge_template);
    return w;
}

}  // namespace dswarm
