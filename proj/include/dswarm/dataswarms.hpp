#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dswarm/core.hpp"
#include "dswarm/models.hpp"
#include "dswarm/objectives.hpp"
#include "dswarm/pso.hpp"
#include "dswarm/seeding.hpp"

namespace dswarm {

using Generators = std::span<const std::unique_ptr<GeneratorModel>>;
using Takers = std::span<const std::unique_ptr<TestTakerModel>>;

struct DataSwarmConfig {
    std::size_t instances_per_iteration = 200;
    ObjectiveSpec objective;
    PsoHyperparams pso;  // patience 5, max_iteration 30 by default
    unsigned threads = 1;

    std::shared_ptr<const Dataset> baseline;          // required by novel
    Eigen::MatrixXd user_embeddings;                  // rows; required by personalized
    std::shared_ptr<const EmbeddingModel> embedder;   // required by personalized

    /// Called with the swarm after every scoring pass (e.g. to checkpoint).
    std::function<void(const SwarmState&)> on_iteration;

    void validate() const;
};

/// Samples m instances; ids become "{generator}/{iteration}/{j}" and
/// provenance is generated(generator, iteration). Generator failures are
/// rethrown as GenerationFailed.
Dataset sample_eval_dataset(const GeneratorModel& generator, std::size_t m, const RngStream& rng,
                            std::uint32_t iteration = 0);

/// Entry (i, j) is taker i's mean score over dataset j.
PerformanceMatrix performance_matrix(Takers takers, std::span<const Dataset> datasets, const Judge& judge);

/// Mean score of one taker over one dataset.
double dataset_performance(const TestTakerModel& taker, const Dataset& dataset, const Judge& judge);

struct Evaluation {
    ObjectiveReport report;
    std::vector<Dataset> samples;
    PerformanceMatrix performance;
};

/// Computes objective reports for a fixed pool of takers. The baseline
/// performance vector needed by novel is computed once at construction.
class ObjectiveEvaluator {
public:
    ObjectiveEvaluator(const DataSwarmConfig& cfg, Takers takers, const Judge& judge);

    /// Draws k datasets (k = resample_count when consistent is requested,
    /// else 1) from stream children 0..k-1 and scores them.
    Evaluation evaluate(const GeneratorModel& generator, const RngStream& rng, std::uint32_t iteration) const;

    /// Scores already-sampled datasets.
    Evaluation evaluate_samples(std::vector<Dataset> samples) const;

    const std::optional<Eigen::VectorXd>& baseline_performance() const { return baseline_perf_; }

private:
    const DataSwarmConfig& cfg_;
    Takers takers_;
    const Judge& judge_;
    std::optional<Eigen::VectorXd> baseline_perf_;
};

Evaluation objective_value(const GeneratorModel& generator, const DataSwarmConfig& cfg, Takers takers,
                           const Judge& judge, const RngStream& rng, std::uint32_t iteration = 0);

struct DataSwarmIteration {
    std::uint32_t iteration = 0;
    std::vector<double> particle_composite;
    std::vector<std::map<ObjectiveKind, double>> particle_components;
    double global_best_score = 0;
    double global_worst_score = 0;
    std::uint32_t stagnation = 0;
    std::map<ObjectiveKind, double> best_components;
    double wall_seconds = 0;  // not part of any reproducible output
};

struct DataSwarmResult {
    ParamVector best_params;
    ObjectiveReport best_report;
    Dataset best_dataset;  // first sample drawn by the best generator
    std::vector<DataSwarmIteration> trace;
    SwarmState state;
};

/// Streams used by a run seeded with `master_seed`.
struct RunStreams {
    explicit RunStreams(std::uint64_t master_seed)
        : velocity(RngStream(master_seed).child(stream::kVelocity)),
          sampling(RngStream(master_seed).child(stream::kSampling)) {}

    RngStream velocity;
    RngStream sampling;  // .child(iteration).child(particle)
};

/// Particle i is generators[i]; the utility is the composite objective of
/// the generator placed at the particle's position. Passing `resume`
/// continues from a checkpointed swarm instead of the generators' params;
/// the best report is then re-evaluated at the stored global best.
DataSwarmResult run_data_swarms(const DataSwarmConfig& cfg, Generators generators, Takers takers, const Judge& judge,
                                std::uint64_t master_seed, std::optional<SwarmState> resume = std::nullopt);

// --- grid search ------------------------------------------------------------

/// Keys: step_length, inertia, cognitive, social, repel.
using HyperGrid = std::map<std::string, std::vector<double>>;

HyperGrid default_grid();
std::size_t grid_size(const HyperGrid& grid);
PsoHyperparams grid_point(const HyperGrid& grid, std::size_t index, PsoHyperparams base);

struct GridRun {
    std::size_t grid_index = 0;
    PsoHyperparams hyper;
    DataSwarmResult result;
};

struct GridSearchResult {
    std::vector<GridRun> runs;
    std::size_t best = 0;  // index into runs

    const GridRun& best_run() const { return runs.at(best); }
};

/// Runs up to `budget` distinct grid points drawn uniformly without
/// replacement; every run starts from the generators' current params and uses
/// the same master seed. The best run maximizes the final composite.
GridSearchResult grid_search(const DataSwarmConfig& cfg, Generators generators, Takers takers, const Judge& judge,
                             const HyperGrid& grid, std::size_t budget, std::uint64_t master_seed);

// --- transfer -----------------------------------------------------------------

/// difficult (and separate when at least two takers) of a fixed dataset on a
/// new pool of takers. `spec` selects the composite; it may use only those two.
ObjectiveReport transfer_eval(const Dataset& dataset, Takers takers, const Judge& judge,
                              const ObjectiveSpec& spec = ObjectiveSpec::single(ObjectiveKind::difficult));

}  // namespace dswarm
