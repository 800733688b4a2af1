#pragma once

#include <deque>
#include <set>
#include <utility>

#include "dswarm/dataswarms.hpp"

namespace dswarm {

/// Retains the datasets of the most recent `capacity` iterations; pushing past
/// capacity evicts the oldest entry.
class WindowBuffer {
public:
    explicit WindowBuffer(std::size_t capacity = 3);

    void push(std::uint32_t iteration, Dataset data);

    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::deque<std::pair<std::uint32_t, Dataset>>& entries() const { return entries_; }
    std::vector<std::uint32_t> iterations() const;

    /// True if any retained instance has one of `ids`.
    bool contains_any(const std::set<std::string>& ids) const;

private:
    std::size_t capacity_;
    std::deque<std::pair<std::uint32_t, Dataset>> entries_;
};

struct AdversarialConfig {
    std::uint32_t max_iteration = 20;
    std::uint32_t patience = 5;  // joint: neither global best improved
    PsoHyperparams data_pso;
    PsoHyperparams model_pso;
    std::size_t window = 3;
    std::size_t instances_per_generator = 200;
    unsigned threads = 1;

    void validate() const;
};

/// Streams of an adversarial run. The data-side streams coincide with
/// RunStreams so a data step with frozen takers matches run_data_swarms.
struct AdversarialStreams {
    explicit AdversarialStreams(std::uint64_t master_seed)
        : data(master_seed),
          model_velocity(RngStream(master_seed).child(stream::kModelVelocity)),
          joint(RngStream(master_seed).child(stream::kJoint)) {}

    RunStreams data;
    RngStream model_velocity;
    RngStream joint;  // .child(iteration).child(generator)
};

/// Generators are scored by f_difficult against the takers as they stand.
/// With an uninitialized swarm this is the initial scoring pass.
pso::IterationRecord<double> data_step(SwarmState& data_swarm, Generators generators, Takers takers,
                                       const Judge& judge, const AdversarialConfig& cfg,
                                       const AdversarialStreams& streams);

/// One sample of m instances per generator, concatenated in generator order.
Dataset joint_dataset(Generators generators, std::size_t m, const RngStream& rng, std::uint32_t iteration);

/// Taker i is moved to its particle's position; the utility is its mean
/// performance over the window's datasets.
pso::IterationRecord<double> model_step(SwarmState& model_swarm, const WindowBuffer& window, Takers takers,
                                        const Judge& judge, const AdversarialConfig& cfg,
                                        const AdversarialStreams& streams);

/// Mean of dataset_performance over the window; throws EmptyWindow.
double window_performance(const TestTakerModel& taker, const WindowBuffer& window, const Judge& judge);

struct AdversarialIteration {
    std::uint32_t iteration = 0;
    std::vector<double> data_scores;
    std::vector<double> model_scores;
    double data_best = 0;
    double model_best = 0;
    double window_performance = 0;     // g_model on the current window
    double held_out_performance = 0;   // g_model on the held-out set
    std::uint32_t stagnation = 0;
    std::vector<std::uint32_t> window_iterations;
    double wall_seconds = 0;
};

struct AdversarialResult {
    ParamVector data_best;
    double data_best_score = 0;
    ParamVector model_best;
    double model_best_score = 0;
    std::vector<AdversarialIteration> trace;
    SwarmState data_state;
    SwarmState model_state;
};

/// Alternates data and model steps until neither global best improved for
/// `patience` iterations or `max_iteration` is reached. Takers must expose
/// parameters. Throws Audit if a held-out instance id ever reaches the window.
AdversarialResult run_adversarial(const AdversarialConfig& cfg, Generators generators, Takers takers,
                                  const Judge& judge, const Dataset& held_out, std::uint64_t master_seed);

}  // namespace dswarm
