#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dswarm/core.hpp"

namespace dswarm {

/// A data generator: a parameter vector that defines a distribution over
/// evaluation instances. sample() must be deterministic given (params, rng).
class GeneratorModel {
public:
    virtual ~GeneratorModel() = default;

    virtual const std::string& id() const = 0;
    virtual ParamVector params() const = 0;
    virtual void set_params(const ParamVector& params) = 0;
    virtual Dataset sample(std::size_t m, const RngStream& rng) const = 0;
};

/// A model being evaluated. Frozen takers expose no parameters. Closed-form
/// takers (the testbed) bypass answer/judge entirely.
class TestTakerModel {
public:
    virtual ~TestTakerModel() = default;

    virtual const std::string& id() const = 0;
    virtual std::optional<ParamVector> params() const { return std::nullopt; }
    virtual void set_params(const ParamVector& params);
    virtual std::optional<double> closed_form_score(const EvalInstance&) const { return std::nullopt; }
    virtual std::string answer(const std::string& query) const = 0;
};

class Judge {
public:
    virtual ~Judge() = default;

    /// Score in [0, 1].
    virtual double score(std::string_view query, std::string_view answer,
                         const std::optional<std::string>& reference) const = 0;
};

using GeneratorPool = std::vector<std::unique_ptr<GeneratorModel>>;
using TakerPool = std::vector<std::unique_ptr<TestTakerModel>>;

// --- judges -----------------------------------------------------------------

/// Maps a 1..10 judge rating onto [0, 1]; throws OutOfRange.
double judge_normalize(double raw);

/// Trim, ASCII case-fold, collapse internal whitespace runs to one space.
std::string normalize_answer(std::string_view text);

/// 1.0 iff normalized answer equals normalized reference; throws MissingReference.
double exact_match_judge(std::string_view query, std::string_view answer, const std::optional<std::string>& reference);

class ExactMatchJudge final : public Judge {
public:
    double score(std::string_view query, std::string_view answer,
                 const std::optional<std::string>& reference) const override {
        return exact_match_judge(query, answer, reference);
    }
};

// --- closed-form testbed ----------------------------------------------------
//
// Instances carry difficulty features phi in [0,1]^d. A generator with
// parameters theta emits phi = clip(sigmoid(theta) + noise). A taker with
// skills s scores logistic(sharpness * mean(s - phi)) on each instance.

struct TestbedSettings {
    std::size_t feature_dim = 4;
    double sharpness = 8.0;
    double noise = 0.1;
};

double logistic(double z);

class TestbedGenerator final : public GeneratorModel {
public:
    TestbedGenerator(std::string id, ParamVector theta, double noise = 0.1);

    const std::string& id() const override { return id_; }
    ParamVector params() const override { return theta_; }
    void set_params(const ParamVector& params) override;
    Dataset sample(std::size_t m, const RngStream& rng) const override;

    /// sigmoid(theta): the noise-free feature vector.
    Eigen::VectorXd mean_features() const;
    double noise() const { return noise_; }

    /// Analytic fit to a cluster: theta = logit(mean features), with the
    /// mean clipped into [1e-6, 1 - 1e-6].
    static TestbedGenerator fit(std::string id, const Dataset& cluster, double noise);

private:
    std::string id_;
    ParamVector theta_;
    double noise_;
};

/// Renders m instances from a feature-generating rule; used by the testbed
/// generator and for building seed and held-out sets.
Dataset testbed_generate(const TestbedGenerator& gen, std::size_t m, const RngStream& rng);

class TestbedTaker final : public TestTakerModel {
public:
    /// Skills are used clipped to [0, 1]; params() returns them unclipped.
    TestbedTaker(std::string id, Eigen::VectorXd skills, double sharpness = 8.0);

    const std::string& id() const override { return id_; }
    std::optional<ParamVector> params() const override { return skills_; }
    void set_params(const ParamVector& params) override;
    std::optional<double> closed_form_score(const EvalInstance& instance) const override;
    std::string answer(const std::string& query) const override;

    Eigen::VectorXd skills() const { return skills_.cwiseMax(0.0).cwiseMin(1.0); }
    double sharpness() const { return sharpness_; }

private:
    std::string id_;
    Eigen::VectorXd skills_;
    double sharpness_;
};

/// logistic(sharpness * mean(clip(s) - phi)); throws MissingFeatures / DimMismatch.
double testbed_score(const TestbedTaker& taker, const EvalInstance& instance);

/// Query text and integer reference answer rendered from a feature vector.
/// The text is cosmetic; features are what the closed-form score reads.
std::pair<std::string, std::string> render_arithmetic(const Eigen::VectorXd& features, RngStream rng);

}  // namespace dswarm
