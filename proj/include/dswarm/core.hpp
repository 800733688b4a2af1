#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dswarm/error.hpp"
#include "dswarm/rng.hpp"

namespace dswarm {

template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Flat position of a generator or test taker in weight space.
using ParamVector = VectorT<double>;

/// Throws NonFinite(index) or DimZero.
template <typename Derived>
void validate(const Eigen::MatrixBase<Derived>& v) {
    if (v.size() == 0) throw Error(ErrorCode::DimZero, "parameter vector has dimension 0");
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (!std::isfinite(static_cast<double>(v(i))))
            throw Error(ErrorCode::NonFinite, "non-finite entry at index " + std::to_string(i),
                        static_cast<std::size_t>(i));
    }
}

template <typename Derived>
bool bit_equal(const Eigen::MatrixBase<Derived>& a, const Eigen::MatrixBase<Derived>& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const auto x = a.derived().data()[i];
        const auto y = b.derived().data()[i];
        if (std::memcmp(&x, &y, sizeof(x)) != 0) return false;
    }
    return true;
}

template <typename Scalar>
struct BasicParticle {
    VectorT<Scalar> position;
    VectorT<Scalar> velocity;
    VectorT<Scalar> personal_best;
    Scalar personal_best_score = -std::numeric_limits<Scalar>::infinity();
};

/// Unset global best/worst have empty vectors and scores of -inf / +inf.
template <typename Scalar>
struct BasicSwarmState {
    std::vector<BasicParticle<Scalar>> particles;
    VectorT<Scalar> global_best;
    Scalar global_best_score = -std::numeric_limits<Scalar>::infinity();
    VectorT<Scalar> global_worst;
    Scalar global_worst_score = std::numeric_limits<Scalar>::infinity();
    std::uint32_t iteration = 0;
    std::uint32_t stagnation = 0;

    Eigen::Index dim() const { return particles.empty() ? 0 : particles.front().position.size(); }
    bool initialized() const { return global_best.size() != 0; }
};

using Particle = BasicParticle<double>;
using SwarmState = BasicSwarmState<double>;

/// Throws on shape violations: shared dim across members, finite entries.
void validate(const SwarmState& swarm);
bool bit_equal(const SwarmState& a, const SwarmState& b);

struct PsoHyperparams {
    double step_length = 0.75;
    double inertia = 0.2;
    double cognitive = 0.3;
    double social = 0.4;
    double repel = 0.05;
    std::uint32_t patience = 5;
    std::uint32_t max_iteration = 30;

    void validate() const;
    friend bool operator==(const PsoHyperparams&, const PsoHyperparams&) = default;
};

struct EvalInstance {
    std::string id;
    std::string query;
    std::optional<std::string> reference_answer;
    std::optional<Eigen::VectorXd> features;
    std::map<std::string, std::string> meta;

    friend bool operator==(const EvalInstance& a, const EvalInstance& b);
};

struct Provenance {
    enum class Kind { seed, generated, window };
    Kind kind = Kind::seed;
    std::string generator_id;
    std::uint32_t iteration = 0;

    static Provenance seed() { return {}; }
    static Provenance generated(std::string generator, std::uint32_t it) {
        return {Kind::generated, std::move(generator), it};
    }
    static Provenance window(std::uint32_t it) { return {Kind::window, {}, it}; }

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct Dataset {
    std::vector<EvalInstance> instances;
    Provenance provenance;

    std::size_t size() const { return instances.size(); }
    bool empty() const { return instances.empty(); }

    /// Non-empty, unique ids, features in [0, 1].
    void validate() const;
};

/// Rows are test takers, columns are dataset samples.
struct PerformanceMatrix {
    Eigen::MatrixXd scores;
    std::vector<std::string> taker_ids;
    std::vector<std::string> sample_ids;

    void validate() const;
};

enum class ObjectiveKind { difficult, separate, novel, consistent, personalized };

std::string_view to_string(ObjectiveKind kind) noexcept;
ObjectiveKind parse_objective_kind(std::string_view name);

struct ObjectiveComponent {
    ObjectiveKind kind = ObjectiveKind::difficult;
    double weight = 1.0;

    friend bool operator==(const ObjectiveComponent&, const ObjectiveComponent&) = default;
};

struct ObjectiveSpec {
    std::vector<ObjectiveComponent> components{{ObjectiveKind::difficult, 1.0}};
    std::uint32_t resample_count = 3;
    std::uint32_t topk = 5;

    bool has(ObjectiveKind kind) const;
    void validate() const;

    static ObjectiveSpec single(ObjectiveKind kind) { return {{{kind, 1.0}}, 3, 5}; }

    friend bool operator==(const ObjectiveSpec&, const ObjectiveSpec&) = default;
};

}  // namespace dswarm
