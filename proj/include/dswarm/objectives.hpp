#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "dswarm/core.hpp"

namespace dswarm {

namespace detail {

template <typename Derived>
void require_unit_interval(const Eigen::DenseBase<Derived>& v, const char* what) {
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
        for (Eigen::Index r = 0; r < v.rows(); ++r) {
            const double x = static_cast<double>(v.derived().coeff(r, c));
            if (!(x >= 0.0 && x <= 1.0))
                throw Error(ErrorCode::OutOfRange, std::string(what) + " entry outside [0,1]",
                            static_cast<std::size_t>(c * v.rows() + r));
        }
    }
}

}  // namespace detail

/// 1 - max over the pool.
template <typename Derived>
typename Derived::Scalar difficult(const Eigen::MatrixBase<Derived>& perf) {
    if (perf.size() == 0) throw Error(ErrorCode::EmptyInput, "difficult needs at least one test taker");
    detail::require_unit_interval(perf, "performance");
    return typename Derived::Scalar(1) - perf.maxCoeff();
}

/// Mean gap between consecutive sorted performances.
template <typename Derived>
typename Derived::Scalar separate(const Eigen::MatrixBase<Derived>& perf) {
    using Scalar = typename Derived::Scalar;
    if (perf.size() < 2) throw Error(ErrorCode::NeedTwoModels, "separate needs at least two test takers");
    detail::require_unit_interval(perf, "performance");
    std::vector<Scalar> sorted;
    sorted.reserve(static_cast<std::size_t>(perf.size()));
    for (Eigen::Index i = 0; i < perf.size(); ++i) sorted.push_back(perf.reshaped()(i));
    std::sort(sorted.begin(), sorted.end());
    // Telescoping sum collapses to (max - min) / (n - 1).
    return (sorted.back() - sorted.front()) / static_cast<Scalar>(sorted.size() - 1);
}

/// Rows are takers, columns are resampled datasets. 1 - mean population std.
template <typename Derived>
typename Derived::Scalar consistent(const Eigen::MatrixBase<Derived>& samples) {
    using Scalar = typename Derived::Scalar;
    if (samples.cols() < 2) throw Error(ErrorCode::NeedTwoSamples, "consistent needs at least two resamples");
    if (samples.rows() == 0) throw Error(ErrorCode::EmptyInput, "consistent needs at least one test taker");
    detail::require_unit_interval(samples, "performance");
    const auto k = static_cast<Scalar>(samples.cols());
    Scalar total_std = 0;
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
        const auto row = samples.row(i);
        const Scalar mean = row.sum() / k;
        const Scalar var = (row.array() - mean).square().sum() / k;
        total_std += std::sqrt(var);
    }
    return Scalar(1) - total_std / static_cast<Scalar>(samples.rows());
}

inline constexpr double kKlSmoothing = 1e-6;

/// Smooths each array by kKlSmoothing, normalizes to distributions P (generated)
/// and Q (baseline), returns KL(P || Q).
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar novel(const Eigen::MatrixBase<DerivedA>& perf_gen, const Eigen::MatrixBase<DerivedB>& perf_base) {
    using Scalar = typename DerivedA::Scalar;
    if (perf_gen.size() != perf_base.size())
        throw Error(ErrorCode::LengthMismatch, "novel needs performance arrays of equal length");
    if (perf_gen.size() == 0) throw Error(ErrorCode::EmptyInput, "novel needs at least one test taker");
    detail::require_unit_interval(perf_gen, "generated performance");
    detail::require_unit_interval(perf_base, "baseline performance");
    const VectorT<Scalar> p_raw = perf_gen.reshaped().array() + Scalar(kKlSmoothing);
    const VectorT<Scalar> q_raw = perf_base.reshaped().array() + Scalar(kKlSmoothing);
    const VectorT<Scalar> p = p_raw / p_raw.sum();
    const VectorT<Scalar> q = q_raw / q_raw.sum();
    const Scalar kl = (p.array() * (p.array() / q.array()).log()).sum();
    // Rounding can leave a tiny negative value for equal distributions.
    return std::max(kl, Scalar(0));
}

/// Rows of both matrices are embeddings. For each generated row, averages the
/// top-min(topk, |user|) cosine similarities to user rows, then averages over
/// generated rows.
template <typename DerivedG, typename DerivedU>
typename DerivedG::Scalar personalized(const Eigen::MatrixBase<DerivedG>& gen_embeddings,
                                       const Eigen::MatrixBase<DerivedU>& user_embeddings, std::size_t topk) {
    using Scalar = typename DerivedG::Scalar;
    if (gen_embeddings.rows() == 0 || user_embeddings.rows() == 0)
        throw Error(ErrorCode::EmptyRepository, "personalized needs generated and user embeddings");
    if (gen_embeddings.cols() != user_embeddings.cols())
        throw Error(ErrorCode::DimMismatch, "embedding dimensions differ");
    if (topk == 0) throw Error(ErrorCode::InvalidArgument, "topk must be positive");

    const MatrixT<Scalar> g = gen_embeddings.rowwise().normalized();
    const MatrixT<Scalar> u = user_embeddings.rowwise().normalized();
    const MatrixT<Scalar> sim = g * u.transpose();
    const auto take = std::min<std::size_t>(topk, static_cast<std::size_t>(u.rows()));

    Scalar total = 0;
    std::vector<Scalar> row(static_cast<std::size_t>(sim.cols()));
    for (Eigen::Index i = 0; i < sim.rows(); ++i) {
        for (Eigen::Index j = 0; j < sim.cols(); ++j) row[static_cast<std::size_t>(j)] = sim(i, j);
        std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(take), row.end(), std::greater<>());
        Scalar top = 0;
        for (std::size_t j = 0; j < take; ++j) top += row[j];
        total += top / static_cast<Scalar>(take);
    }
    return total / static_cast<Scalar>(sim.rows());
}

struct ObjectiveReport {
    std::map<ObjectiveKind, double> per_component;
    double composite = 0.0;
};

/// Weighted sum of component values; throws MissingComponent(kind).
ObjectiveReport composite(const ObjectiveSpec& spec, const std::map<ObjectiveKind, double>& component_values);

}  // namespace dswarm
