#pragma once

#include <type_traits>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "dswarm/core.hpp"
#include "dswarm/parallel.hpp"

// Synchronous particle swarm kernel with a repelling global worst. Velocity is
// a normalized combination of inertia, personal/global attraction and repulsion
// from the global worst; the step length is the only magnitude control.
//
// Randomness: the four factors of particle i at iteration t are draws
// 4a, 4a+1, 4a+2, 4a+3 of stream.child(t).child(i), where a counts redraws
// (needed only if the normalization term comes out zero).

namespace dswarm::pso {

template <typename Scalar>
struct VelocityTerms {
    Scalar r_v = 0, r_p = 0, r_g = 0, r_w = 0;
    Scalar normalization = 0;  // r_v*inertia + r_p*cognitive + r_g*social + r_w*repel
};

struct EvalContext {
    std::uint32_t iteration = 0;  // 0 is the initial scoring pass
    std::size_t particle = 0;
};

template <typename Scalar>
using Utility = std::function<Scalar(const VectorT<Scalar>&, const EvalContext&)>;

template <typename Scalar>
struct IterationRecord {
    std::uint32_t iteration = 0;
    std::vector<Scalar> scores;                 // per particle, this iteration
    std::vector<VelocityTerms<Scalar>> terms;   // empty for the initial pass
    Scalar global_best_score = 0;
    Scalar global_worst_score = 0;
    std::uint32_t stagnation = 0;
    std::optional<std::size_t> new_global_best;  // particle that raised the global best
};

struct ExecutionOptions {
    unsigned threads = 1;
};

template <typename Scalar>
struct RunResult {
    VectorT<Scalar> global_best;
    Scalar score = 0;
    std::vector<Scalar> trace;  // global best score after init and after each iteration
    std::vector<IterationRecord<Scalar>> records;
};

template <typename Scalar>
using IterationObserver = std::function<void(const BasicSwarmState<Scalar>&, const IterationRecord<Scalar>&)>;

/// New (normalized) velocity for one particle.
template <typename Scalar>
std::pair<VectorT<Scalar>, VelocityTerms<Scalar>> update_velocity(const BasicParticle<Scalar>& particle,
                                                                  const std::type_identity_t<VectorT<Scalar>>& global_best,
                                                                  const std::type_identity_t<VectorT<Scalar>>& global_worst,
                                                                  const PsoHyperparams& h, const RngStream& rng) {
    const auto dim = particle.position.size();
    if (particle.velocity.size() != dim || particle.personal_best.size() != dim || global_best.size() != dim ||
        global_worst.size() != dim)
        throw Error(ErrorCode::DimMismatch, "velocity update operands differ in dimension");
    h.validate();

    VelocityTerms<Scalar> t;
    for (std::uint64_t attempt = 0;; ++attempt) {
        t.r_v = static_cast<Scalar>(rng.uniform(4 * attempt + 0));
        t.r_p = static_cast<Scalar>(rng.uniform(4 * attempt + 1));
        t.r_g = static_cast<Scalar>(rng.uniform(4 * attempt + 2));
        t.r_w = static_cast<Scalar>(rng.uniform(4 * attempt + 3));
        t.normalization = t.r_v * Scalar(h.inertia) + t.r_p * Scalar(h.cognitive) + t.r_g * Scalar(h.social) +
                          t.r_w * Scalar(h.repel);
        if (t.normalization > Scalar(0)) break;
    }

    const auto& x = particle.position;
    VectorT<Scalar> v = (t.r_v * Scalar(h.inertia)) * particle.velocity +
                        (t.r_p * Scalar(h.cognitive)) * (particle.personal_best - x) +
                        (t.r_g * Scalar(h.social)) * (global_best - x) -
                        (t.r_w * Scalar(h.repel)) * (global_worst - x);
    v /= t.normalization;
    return {std::move(v), t};
}

/// position += step_length * velocity.
template <typename Scalar>
BasicParticle<Scalar> apply_step(BasicParticle<Scalar> particle, Scalar step_length) {
    validate(particle.velocity);
    particle.position += step_length * particle.velocity;
    for (Eigen::Index i = 0; i < particle.position.size(); ++i)
        if (!std::isfinite(static_cast<double>(particle.position(i))))
            throw Error(ErrorCode::NonFinite, "position overflowed at index " + std::to_string(i),
                        static_cast<std::size_t>(i));
    return particle;
}

/// Records the score of particle i at its current position. Strict
/// improvement is required to move any best; returns true when the global
/// best moved (which also resets stagnation).
template <typename Scalar>
bool record_score(BasicSwarmState<Scalar>& swarm, std::size_t i, Scalar score) {
    if (i >= swarm.particles.size())
        throw Error(ErrorCode::IndexOutOfRange, "particle " + std::to_string(i) + " out of range", i);
    if (!std::isfinite(static_cast<double>(score)))
        throw Error(ErrorCode::NonFinite, "score of particle " + std::to_string(i) + " is not finite", i);
    auto& p = swarm.particles[i];
    if (score > p.personal_best_score) {
        p.personal_best = p.position;
        p.personal_best_score = score;
    }
    if (score < swarm.global_worst_score) {
        swarm.global_worst = p.position;
        swarm.global_worst_score = score;
    }
    if (score > swarm.global_best_score) {
        swarm.global_best = p.position;
        swarm.global_best_score = score;
        swarm.stagnation = 0;
        return true;
    }
    return false;
}

/// Zero velocities, personal bests at the starting positions, bests unset.
template <typename Scalar>
BasicSwarmState<Scalar> make_swarm(const std::vector<VectorT<Scalar>>& positions) {
    if (positions.empty()) throw Error(ErrorCode::EmptyInput, "swarm needs at least one particle");
    BasicSwarmState<Scalar> swarm;
    const auto dim = positions.front().size();
    for (std::size_t i = 0; i < positions.size(); ++i) {
        if (positions[i].size() != dim)
            throw Error(ErrorCode::DimMismatch, "particle " + std::to_string(i) + " has a different dimension", i);
        validate(positions[i]);
        BasicParticle<Scalar> p;
        p.position = positions[i];
        p.velocity = VectorT<Scalar>::Zero(dim);
        p.personal_best = positions[i];
        swarm.particles.push_back(std::move(p));
    }
    return swarm;
}

namespace detail {

template <typename Scalar>
std::vector<Scalar> evaluate_all(const BasicSwarmState<Scalar>& swarm, const Utility<Scalar>& utility,
                                 std::uint32_t iteration, const ExecutionOptions& exec) {
    std::vector<Scalar> scores(swarm.particles.size());
    parallel_for(swarm.particles.size(), exec.threads, [&](std::size_t i) {
        Scalar s;
        try {
            s = utility(swarm.particles[i].position, EvalContext{iteration, i});
        } catch (const std::exception& e) {
            throw Error(ErrorCode::UtilityFailed,
                        "particle " + std::to_string(i) + " at iteration " + std::to_string(iteration) + ": " + e.what(),
                        i);
        }
        if (!std::isfinite(static_cast<double>(s)))
            throw Error(ErrorCode::UtilityFailed,
                        "particle " + std::to_string(i) + " returned a non-finite utility", i);
        scores[i] = s;
    });
    return scores;
}

template <typename Scalar>
IterationRecord<Scalar> record_all(BasicSwarmState<Scalar>& swarm, std::vector<Scalar> scores) {
    IterationRecord<Scalar> rec;
    rec.iteration = swarm.iteration;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (record_score(swarm, i, scores[i])) rec.new_global_best = i;
    rec.scores = std::move(scores);
    rec.global_best_score = swarm.global_best_score;
    rec.global_worst_score = swarm.global_worst_score;
    return rec;
}

}  // namespace detail

/// Scores every particle at its starting position (iteration 0).
template <typename Scalar>
IterationRecord<Scalar> initialize(BasicSwarmState<Scalar>& swarm, const Utility<Scalar>& utility,
                                   const ExecutionOptions& exec = {}) {
    auto scores = detail::evaluate_all(swarm, utility, swarm.iteration, exec);
    auto rec = detail::record_all(swarm, std::move(scores));
    rec.stagnation = swarm.stagnation;
    return rec;
}

/// One synchronous step: every particle moves using the bests as they stood at
/// the start of the step, all new positions are scored (possibly in parallel),
/// then bests are recorded in particle order.
template <typename Scalar>
IterationRecord<Scalar> iteration(BasicSwarmState<Scalar>& swarm, const Utility<Scalar>& utility,
                                  const PsoHyperparams& h, const RngStream& velocity_stream,
                                  const ExecutionOptions& exec = {}) {
    if (!swarm.initialized()) throw Error(ErrorCode::InvalidArgument, "swarm must be initialized before iterating");
    h.validate();
    const std::uint32_t next = swarm.iteration + 1;
    const RngStream step_stream = velocity_stream.child(next);

    std::vector<VelocityTerms<Scalar>> terms(swarm.particles.size());
    for (std::size_t i = 0; i < swarm.particles.size(); ++i) {
        auto& p = swarm.particles[i];
        auto [v, t] = update_velocity(p, swarm.global_best, swarm.global_worst, h, step_stream.child(i));
        p.velocity = std::move(v);
        p = apply_step(std::move(p), static_cast<Scalar>(h.step_length));
        terms[i] = t;
    }
    swarm.iteration = next;

    const Scalar before = swarm.global_best_score;
    auto scores = detail::evaluate_all(swarm, utility, next, exec);
    auto rec = detail::record_all(swarm, std::move(scores));
    if (!(swarm.global_best_score > before)) ++swarm.stagnation;
    rec.stagnation = swarm.stagnation;
    rec.terms = std::move(terms);
    return rec;
}

template <typename Scalar>
bool should_stop(const BasicSwarmState<Scalar>& swarm, const PsoHyperparams& h) {
    return swarm.iteration >= h.max_iteration || swarm.stagnation >= h.patience;
}

/// Initializes the swarm if needed, then iterates until the global best has
/// not strictly improved for `patience` iterations or `max_iteration` is hit.
template <typename Scalar>
RunResult<Scalar> run(BasicSwarmState<Scalar>& swarm, const std::type_identity_t<Utility<Scalar>>& utility, const PsoHyperparams& h,
                      const RngStream& velocity_stream, const ExecutionOptions& exec = {},
                      const std::type_identity_t<IterationObserver<Scalar>>& observer = {}) {
    h.validate();
    RunResult<Scalar> result;
    auto push = [&](IterationRecord<Scalar> rec) {
        result.trace.push_back(swarm.global_best_score);
        if (observer) observer(swarm, rec);
        result.records.push_back(std::move(rec));
    };
    if (!swarm.initialized()) push(initialize(swarm, utility, exec));
    while (!should_stop(swarm, h)) push(iteration(swarm, utility, h, velocity_stream, exec));
    if (result.trace.empty()) result.trace.push_back(swarm.global_best_score);
    result.global_best = swarm.global_best;
    result.score = swarm.global_best_score;
    return result;
}

/// Adapts a plain objective of position only.
template <typename Scalar, typename F>
Utility<Scalar> plain(F f) {
    return [f = std::move(f)](const VectorT<Scalar>& x, const EvalContext&) -> Scalar { return f(x); };
}

}  // namespace dswarm::pso
