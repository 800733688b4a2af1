#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dswarm/adversarial.hpp"
#include "dswarm/dataswarms.hpp"
#include "dswarm/remote.hpp"
#include "dswarm/seeding.hpp"

namespace dswarm {

struct TestbedConfig {
    std::size_t feature_dim = 4;
    double sharpness = 8.0;
    double noise = 0.1;
    std::vector<double> taker_skills{0.4, 0.55, 0.7, 0.85};
    std::vector<double> transfer_skills{0.5, 0.9};
    std::size_t seed_size = 200;
    std::size_t held_out_size = 100;
    double seed_feature_low = 0.0;
    double seed_feature_high = 0.6;
    std::size_t user_size = 20;  // seed queries standing in for the user repository
};

struct RemoteConfig {
    std::string seed_data;  // JSONL path
    std::vector<std::string> generator_urls;  // one per generator
    std::vector<std::string> taker_urls;
    std::vector<std::string> transfer_taker_urls;
    std::string judge_url;
    std::string judge_template = "{query}";
    std::optional<Eigen::Index> generator_adapter_dim;
    std::optional<Eigen::Index> taker_adapter_dim;
    std::size_t shots = 5;
    std::chrono::milliseconds timeout{30000};
    unsigned max_retries = 3;
    std::chrono::milliseconds backoff_initial{200};
    std::chrono::milliseconds backoff_max{5000};
    bool exact_match = false;  // judge by reference answers instead of the remote judge
};

struct RunConfig {
    std::uint64_t seed = 7;
    std::string domain = "arithmetic";
    std::size_t generators = 4;
    std::size_t instances_per_iteration = 200;
    ObjectiveSpec objective;
    PsoHyperparams pso;
    unsigned threads = 4;

    std::size_t embed_dim = 256;
    std::size_t ngram = 3;
    std::size_t kmeans_max_iters = 100;

    HyperGrid grid = default_grid();
    std::size_t grid_budget = 20;

    AdversarialConfig adversarial;

    TestbedConfig testbed;
    RemoteConfig remote;

    void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);

/// Missing keys keep their defaults; wrong types throw Parse naming the key.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

/// FNV-1a of the canonical JSON dump.
std::string config_hash(const RunConfig& cfg);

nlohmann::json to_json(const PsoHyperparams& h);
nlohmann::json to_json(const ObjectiveSpec& spec);

/// Everything a workflow needs: seed data, clusters, models and references.
struct World {
    Dataset seed;
    Dataset held_out;
    ClusterAssignment clusters;
    std::vector<Dataset> cluster_sets;
    std::vector<std::unique_ptr<GeneratorModel>> generators;
    std::vector<std::unique_ptr<TestTakerModel>> takers;
    std::vector<std::unique_ptr<TestTakerModel>> transfer_takers;
    std::unique_ptr<Judge> judge;
    std::shared_ptr<const Dataset> baseline;
    std::shared_ptr<const EmbeddingModel> embedder;
    Eigen::MatrixXd user_embeddings;

    DataSwarmConfig data_config(const RunConfig& cfg) const;
};

/// Seed features are uniform on [low, high]^d; generators are fitted to
/// k-means clusters of those features; the held-out set is drawn from the same
/// distribution on an independent stream.
World build_testbed_world(const RunConfig& cfg, std::uint64_t seed);

/// Clusters the seed JSONL by query embedding and binds generators, takers
/// and the judge to their endpoints. The held-out set is a seeded split of the
/// seed data that never reaches a generator.
World build_remote_world(const RunConfig& cfg, std::uint64_t seed);

/// Seed-like instances rendered from features; ids are "{prefix}/{j}".
Dataset testbed_seed_data(const TestbedConfig& cfg, std::size_t count, const std::string& prefix,
                          const RngStream& rng);

}  // namespace dswarm
