#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dswarm/core.hpp"

namespace dswarm {

/// Text embedder. embed() must return a unit-norm vector and be deterministic.
class EmbeddingModel {
public:
    virtual ~EmbeddingModel() = default;
    virtual std::size_t dim() const = 0;
    virtual Eigen::VectorXd embed(std::string_view text) const = 0;
};

/// Bag of hashed character n-grams (ASCII case-folded), L2-normalized.
/// Texts shorter than n hash as a single gram; the empty text maps to e_0.
class HashedNgramEmbedder final : public EmbeddingModel {
public:
    explicit HashedNgramEmbedder(std::size_t dim = 256, std::size_t n = 3) : dim_(dim), n_(n) {}

    std::size_t dim() const override { return dim_; }
    Eigen::VectorXd embed(std::string_view text) const override;

private:
    std::size_t dim_;
    std::size_t n_;
};

/// One embedding per row, in instance order.
Eigen::MatrixXd embed_queries(const EmbeddingModel& embedder, const Dataset& data);

struct ClusterAssignment {
    std::vector<std::size_t> labels;
    Eigen::MatrixXd centroids;           // one centroid per row
    std::vector<double> objective_trace;  // within-cluster SSE after each Lloyd step
    std::size_t iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding. Points are rows. Nearest-centroid
/// ties go to the lowest index; an emptied cluster takes the point farthest
/// from its own centroid. Stops when labels stop changing or after max_iters.
ClusterAssignment kmeans(const Eigen::MatrixXd& points, std::size_t clusters, const RngStream& rng,
                         std::size_t max_iters = 100);

double within_cluster_sse(const Eigen::MatrixXd& points, const ClusterAssignment& assignment);

/// Partitions `data` by label; cluster c keeps the original instance order.
std::vector<Dataset> split_by_cluster(const Dataset& data, const ClusterAssignment& assignment);

/// {domain}, {k} and {examples} are substituted.
inline constexpr std::string_view kDefaultPromptTemplate =
    "You are an expert in generating synthetic evaluation data, specifically about {domain}. "
    "You are given a set of {k} examples. Please follow the pattern and generate {k} more examples. "
    "Examples:\n{examples}";

struct PromptPair {
    std::string prompt;
    std::string completion;
};

/// Each pair draws 2k distinct instances: the first k go into the prompt, the
/// remaining k (as JSONL records) form the completion.
std::vector<PromptPair> build_training_prompts(const Dataset& cluster, std::size_t k, std::size_t count,
                                               const std::string& domain, const RngStream& rng,
                                               std::string_view prompt_template = kDefaultPromptTemplate);

/// k sampled in-context examples and no completion.
std::string build_inference_prompt(const Dataset& cluster, std::size_t k, const std::string& domain,
                                   const RngStream& rng, std::string_view prompt_template = kDefaultPromptTemplate);

/// k distinct indices from [0, n), partial Fisher-Yates.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, RngStream rng);

}  // namespace dswarm
