#include "dswarm/core.hpp"

#include <cmath>
#include <cstring>
#include <set>

namespace dswarm {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::DimZero: return "DimZero";
        case ErrorCode::DimMismatch: return "DimMismatch";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::OutOfRange: return "OutOfRange";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::NeedTwoModels: return "NeedTwoModels";
        case ErrorCode::NeedTwoSamples: return "NeedTwoSamples";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::EmptyRepository: return "EmptyRepository";
        case ErrorCode::MissingComponent: return "MissingComponent";
        case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorCode::UtilityFailed: return "UtilityFailed";
        case ErrorCode::GenerationFailed: return "GenerationFailed";
        case ErrorCode::JudgeFailed: return "JudgeFailed";
        case ErrorCode::TakerFailed: return "TakerFailed";
        case ErrorCode::MissingFeatures: return "MissingFeatures";
        case ErrorCode::MissingReference: return "MissingReference";
        case ErrorCode::EmptyGrid: return "EmptyGrid";
        case ErrorCode::EmptyWindow: return "EmptyWindow";
        case ErrorCode::TooFewPoints: return "TooFewPoints";
        case ErrorCode::ClusterTooSmall: return "ClusterTooSmall";
        case ErrorCode::Transport: return "Transport";
        case ErrorCode::BadResponse: return "BadResponse";
        case ErrorCode::Exhausted: return "Exhausted";
        case ErrorCode::Parse: return "Parse";
        case ErrorCode::Io: return "Io";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::VersionUnsupported: return "VersionUnsupported";
        case ErrorCode::TruncatedFile: return "TruncatedFile";
        case ErrorCode::ConfigMismatch: return "ConfigMismatch";
        case ErrorCode::Locked: return "Locked";
        case ErrorCode::Audit: return "Audit";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message, std::optional<std::size_t> index)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), index_(index) {}

void validate(const SwarmState& swarm) {
    const Eigen::Index dim = swarm.dim();
    auto check = [dim](const ParamVector& v, const char* what) {
        if (v.size() != dim)
            throw Error(ErrorCode::DimMismatch, std::string(what) + " has dim " + std::to_string(v.size()) +
                                                    ", swarm dim " + std::to_string(dim));
        validate(v);
    };
    for (const auto& p : swarm.particles) {
        check(p.position, "position");
        check(p.velocity, "velocity");
        check(p.personal_best, "personal_best");
    }
    if (swarm.global_best.size() != 0) check(swarm.global_best, "global_best");
    if (swarm.global_worst.size() != 0) check(swarm.global_worst, "global_worst");
}

bool bit_equal(const SwarmState& a, const SwarmState& b) {
    auto same_scalar = [](double x, double y) { return std::memcmp(&x, &y, sizeof x) == 0; };
    if (a.particles.size() != b.particles.size()) return false;
    for (std::size_t i = 0; i < a.particles.size(); ++i) {
        const auto& p = a.particles[i];
        const auto& q = b.particles[i];
        if (!bit_equal(p.position, q.position) || !bit_equal(p.velocity, q.velocity) ||
            !bit_equal(p.personal_best, q.personal_best) || !same_scalar(p.personal_best_score, q.personal_best_score))
            return false;
    }
    return bit_equal(a.global_best, b.global_best) && same_scalar(a.global_best_score, b.global_best_score) &&
           bit_equal(a.global_worst, b.global_worst) && same_scalar(a.global_worst_score, b.global_worst_score) &&
           a.iteration == b.iteration && a.stagnation == b.stagnation;
}

void PsoHyperparams::validate() const {
    auto finite_nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
    if (!(std::isfinite(step_length) && step_length > 0.0))
        throw Error(ErrorCode::InvalidArgument, "step_length must be positive");
    if (!finite_nonneg(inertia) || !finite_nonneg(cognitive) || !finite_nonneg(social) || !finite_nonneg(repel))
        throw Error(ErrorCode::InvalidArgument, "coefficients must be finite and non-negative");
    if (inertia + cognitive + social + repel <= 0.0)
        throw Error(ErrorCode::InvalidArgument, "at least one coefficient must be positive");
    if (patience == 0) throw Error(ErrorCode::InvalidArgument, "patience must be positive");
}

bool operator==(const EvalInstance& a, const EvalInstance& b) {
    if (a.id != b.id || a.query != b.query || a.reference_answer != b.reference_answer || a.meta != b.meta)
        return false;
    if (a.features.has_value() != b.features.has_value()) return false;
    return !a.features || bit_equal(*a.features, *b.features);
}

void Dataset::validate() const {
    if (instances.empty()) throw Error(ErrorCode::EmptyDataset, "dataset has no instances");
    std::set<std::string_view> ids;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const auto& inst = instances[i];
        if (!ids.insert(inst.id).second)
            throw Error(ErrorCode::InvalidArgument, "duplicate instance id '" + inst.id + "'", i);
        if (inst.features) {
            for (Eigen::Index j = 0; j < inst.features->size(); ++j) {
                const double f = (*inst.features)(j);
                if (!(f >= 0.0 && f <= 1.0))
                    throw Error(ErrorCode::OutOfRange, "feature outside [0,1] in instance '" + inst.id + "'", i);
            }
        }
    }
}

void PerformanceMatrix::validate() const {
    if (static_cast<std::size_t>(scores.rows()) != taker_ids.size() ||
        static_cast<std::size_t>(scores.cols()) != sample_ids.size())
        throw Error(ErrorCode::DimMismatch, "performance matrix shape does not match its id lists");
    for (Eigen::Index i = 0; i < scores.size(); ++i) {
        const double s = scores.data()[i];
        if (!(s >= 0.0 && s <= 1.0))
            throw Error(ErrorCode::OutOfRange, "performance entry outside [0,1]", static_cast<std::size_t>(i));
    }
}

std::string_view to_string(ObjectiveKind kind) noexcept {
    switch (kind) {
        case ObjectiveKind::difficult: return "difficult";
        case ObjectiveKind::separate: return "separate";
        case ObjectiveKind::novel: return "novel";
        case ObjectiveKind::consistent: return "consistent";
        case ObjectiveKind::personalized: return "personalized";
    }
    return "unknown";
}

ObjectiveKind parse_objective_kind(std::string_view name) {
    for (auto k : {ObjectiveKind::difficult, ObjectiveKind::separate, ObjectiveKind::novel, ObjectiveKind::consistent,
                   ObjectiveKind::personalized}) {
        if (to_string(k) == name) return k;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown objective '" + std::string(name) + "'");
}

bool ObjectiveSpec::has(ObjectiveKind kind) const {
    for (const auto& c : components)
        if (c.kind == kind) return true;
    return false;
}

void ObjectiveSpec::validate() const {
    if (components.empty()) throw Error(ErrorCode::InvalidArgument, "objective has no components");
    double total = 0.0;
    std::set<ObjectiveKind> seen;
    for (const auto& c : components) {
        if (!(std::isfinite(c.weight) && c.weight >= 0.0))
            throw Error(ErrorCode::InvalidArgument, "objective weights must be non-negative");
        if (!seen.insert(c.kind).second)
            throw Error(ErrorCode::InvalidArgument, "objective '" + std::string(to_string(c.kind)) + "' listed twice");
        total += c.weight;
    }
    if (components.size() > 1 && std::abs(total - 1.0) > 1e-9)
        throw Error(ErrorCode::InvalidArgument, "composite weights must sum to 1");
    if (resample_count == 0) throw Error(ErrorCode::InvalidArgument, "resample_count must be positive");
    if (has(ObjectiveKind::consistent) && resample_count < 2)
        throw Error(ErrorCode::NeedTwoSamples, "consistent needs at least two resamples");
    if (topk == 0) throw Error(ErrorCode::InvalidArgument, "topk must be positive");
}

}  // namespace dswarm
