#include "dswarm/seeding.hpp"

#include <cctype>
#include <limits>
#include <numeric>

#include "dswarm/io.hpp"

namespace dswarm {

Eigen::VectorXd HashedNgramEmbedder::embed(std::string_view text) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
    std::string folded(text);
    for (auto& c : folded) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    auto add_gram = [&](std::string_view gram) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : gram) h = (h ^ c) * 0x100000001b3ULL;
        v(static_cast<Eigen::Index>(h % dim_)) += 1.0;
    };
    if (folded.empty()) {
        v(0) = 1.0;
        return v;
    }
    if (folded.size() < n_) {
        add_gram(folded);
    } else {
        for (std::size_t i = 0; i + n_ <= folded.size(); ++i) add_gram(std::string_view(folded).substr(i, n_));
    }
    return v / v.norm();
}

Eigen::MatrixXd embed_queries(const EmbeddingModel& embedder, const Dataset& data) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(embedder.dim()));
    for (std::size_t i = 0; i < data.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = embedder.embed(data.instances[i].query);
    return out;
}

namespace {

std::size_t nearest(const Eigen::MatrixXd& centroids, const Eigen::RowVectorXd& x, double* dist2 = nullptr) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
        const double d = (centroids.row(c) - x).squaredNorm();
        if (d < best_d) {  // strict: ties keep the lower index
            best_d = d;
            best = static_cast<std::size_t>(c);
        }
    }
    if (dist2) *dist2 = best_d;
    return best;
}

Eigen::MatrixXd plus_plus_seeds(const Eigen::MatrixXd& points, std::size_t k, RngStream rng) {
    const auto n = static_cast<std::size_t>(points.rows());
    Eigen::MatrixXd centroids(static_cast<Eigen::Index>(k), points.cols());
    std::vector<bool> chosen(n, false);
    std::size_t first = rng.next_below(n);
    centroids.row(0) = points.row(static_cast<Eigen::Index>(first));
    chosen[first] = true;

    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = (points.row(static_cast<Eigen::Index>(i)) - centroids.row(0)).squaredNorm();

    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += chosen[i] ? 0.0 : d2[i];
        std::size_t pick = n;
        if (total > 0.0) {
            const double target = rng.next_uniform() * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (chosen[i] || d2[i] == 0.0) continue;
                acc += d2[i];
                pick = i;
                if (acc > target) break;
            }
        }
        if (pick == n) {
            // Every remaining point coincides with a centroid.
            std::vector<std::size_t> free;
            for (std::size_t i = 0; i < n; ++i)
                if (!chosen[i]) free.push_back(i);
            pick = free[rng.next_below(free.size())];
        }
        chosen[pick] = true;
        centroids.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(pick));
        for (std::size_t i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], (points.row(static_cast<Eigen::Index>(i)) - centroids.row(static_cast<Eigen::Index>(c))).squaredNorm());
    }
    return centroids;
}

}  // namespace

double within_cluster_sse(const Eigen::MatrixXd& points, const ClusterAssignment& assignment) {
    double sse = 0.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i)
        sse += (points.row(i) - assignment.centroids.row(static_cast<Eigen::Index>(assignment.labels[static_cast<std::size_t>(i)])))
                   .squaredNorm();
    return sse;
}

ClusterAssignment kmeans(const Eigen::MatrixXd& points, std::size_t clusters, const RngStream& rng, std::size_t max_iters) {
    const auto n = static_cast<std::size_t>(points.rows());
    if (clusters == 0) throw Error(ErrorCode::InvalidArgument, "cluster count must be positive");
    if (n < clusters)
        throw Error(ErrorCode::TooFewPoints,
                    std::to_string(n) + " points cannot form " + std::to_string(clusters) + " clusters");

    ClusterAssignment a;
    a.centroids = plus_plus_seeds(points, clusters, rng);
    a.labels.assign(n, std::numeric_limits<std::size_t>::max());

    for (std::size_t it = 0; it < max_iters; ++it) {
        bool changed = false;
        std::vector<double> dist(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = nearest(a.centroids, points.row(static_cast<Eigen::Index>(i)), &dist[i]);
            changed |= c != a.labels[i];
            a.labels[i] = c;
        }

        std::vector<std::size_t> counts(clusters, 0);
        for (auto l : a.labels) ++counts[l];
        for (std::size_t c = 0; c < clusters; ++c) {
            if (counts[c] != 0) continue;
            std::size_t far = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[a.labels[i]] <= 1) continue;
                if (far == n || dist[i] > dist[far]) far = i;
            }
            --counts[a.labels[far]];
            a.labels[far] = c;
            dist[far] = 0.0;
            counts[c] = 1;
            changed = true;
        }

        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(a.centroids.rows(), a.centroids.cols());
        for (std::size_t i = 0; i < n; ++i) sums.row(static_cast<Eigen::Index>(a.labels[i])) += points.row(static_cast<Eigen::Index>(i));
        for (std::size_t c = 0; c < clusters; ++c)
            a.centroids.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(counts[c]);

        a.iterations = it + 1;
        a.objective_trace.push_back(within_cluster_sse(points, a));
        if (!changed) break;
    }
    return a;
}

std::vector<Dataset> split_by_cluster(const Dataset& data, const ClusterAssignment& assignment) {
    if (assignment.labels.size() != data.size())
        throw Error(ErrorCode::LengthMismatch, "cluster labels do not match dataset size");
    std::vector<Dataset> out(static_cast<std::size_t>(assignment.centroids.rows()));
    for (auto& d : out) d.provenance = data.provenance;
    for (std::size_t i = 0; i < data.size(); ++i) out[assignment.labels[i]].instances.push_back(data.instances[i]);
    return out;
}

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, RngStream rng) {
    if (k > n) throw Error(ErrorCode::InvalidArgument, "cannot draw " + std::to_string(k) + " of " + std::to_string(n));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.next_below(n - i)]);
    idx.resize(k);
    return idx;
}

namespace {

std::string render_prompt(std::string_view prompt_template, const std::string& domain, std::size_t k,
                          const std::string& examples) {
    std::string out(prompt_template);
    auto substitute = [&out](std::string_view key, const std::string& value) {
        for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + value.size()))
            out.replace(pos, key.size(), value);
    };
    substitute("{domain}", domain);
    substitute("{k}", std::to_string(k));
    substitute("{examples}", examples);
    return out;
}

std::string join_records(const Dataset& cluster, const std::vector<std::size_t>& idx, std::size_t begin, std::size_t end) {
    std::string out;
    for (std::size_t i = begin; i < end; ++i) {
        out += to_json_line(cluster.instances[idx[i]]);
        out += '\n';
    }
    return out;
}

}  // namespace

std::vector<PromptPair> build_training_prompts(const Dataset& cluster, std::size_t k, std::size_t count,
                                               const std::string& domain, const RngStream& rng,
                                               std::string_view prompt_template) {
    if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be positive");
    if (cluster.size() < 2 * k)
        throw Error(ErrorCode::ClusterTooSmall,
                    "cluster of " + std::to_string(cluster.size()) + " needs " + std::to_string(2 * k) + " instances",
                    2 * k);
    std::vector<PromptPair> pairs;
    pairs.reserve(count);
    for (std::size_t p = 0; p < count; ++p) {
        const auto idx = sample_without_replacement(cluster.size(), 2 * k, rng.child(p));
        pairs.push_back({render_prompt(prompt_template, domain, k, join_records(cluster, idx, 0, k)),
                         join_records(cluster, idx, k, 2 * k)});
    }
    return pairs;
}

std::string build_inference_prompt(const Dataset& cluster, std::size_t k, const std::string& domain,
                                   const RngStream& rng, std::string_view prompt_template) {
    if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be positive");
    if (cluster.size() < k)
        throw Error(ErrorCode::ClusterTooSmall,
                    "cluster of " + std::to_string(cluster.size()) + " needs " + std::to_string(k) + " instances", k);
    const auto idx = sample_without_replacement(cluster.size(), k, rng);
    return render_prompt(prompt_template, domain, k, join_records(cluster, idx, 0, k));
}

}  // namespace dswarm
