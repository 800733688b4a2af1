#include "dswarm/models.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace dswarm {

void TestTakerModel::set_params(const ParamVector&) {
    throw Error(ErrorCode::InvalidArgument, "test taker '" + id() + "' is frozen");
}

double judge_normalize(double raw) {
    if (!(raw >= 1.0 && raw <= 10.0))
        throw Error(ErrorCode::OutOfRange, "judge rating " + std::to_string(raw) + " outside [1,10]");
    return (raw - 1.0) / 9.0;
}

std::string normalize_answer(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

double exact_match_judge(std::string_view, std::string_view answer, const std::optional<std::string>& reference) {
    if (!reference) throw Error(ErrorCode::MissingReference, "exact-match judging needs a reference answer");
    return normalize_answer(answer) == normalize_answer(*reference) ? 1.0 : 0.0;
}

double logistic(double z) {
    // Split form avoids exp overflow for large |z|.
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

TestbedGenerator::TestbedGenerator(std::string id, ParamVector theta, double noise)
    : id_(std::move(id)), theta_(std::move(theta)), noise_(noise) {
    validate(theta_);
    if (!(noise_ >= 0.0 && std::isfinite(noise_))) throw Error(ErrorCode::InvalidArgument, "noise must be >= 0");
}

void TestbedGenerator::set_params(const ParamVector& params) {
    if (params.size() != theta_.size())
        throw Error(ErrorCode::DimMismatch, "generator '" + id_ + "' expects dim " + std::to_string(theta_.size()));
    validate(params);
    theta_ = params;
}

Eigen::VectorXd TestbedGenerator::mean_features() const { return theta_.unaryExpr(&logistic); }

Dataset TestbedGenerator::sample(std::size_t m, const RngStream& rng) const { return testbed_generate(*this, m, rng); }

TestbedGenerator TestbedGenerator::fit(std::string id, const Dataset& cluster, double noise) {
    if (cluster.empty()) throw Error(ErrorCode::EmptyDataset, "cannot fit a generator to an empty cluster");
    Eigen::VectorXd mean;
    for (std::size_t i = 0; i < cluster.size(); ++i) {
        const auto& f = cluster.instances[i].features;
        if (!f) throw Error(ErrorCode::MissingFeatures, "instance '" + cluster.instances[i].id + "' has no features", i);
        if (mean.size() == 0) mean = Eigen::VectorXd::Zero(f->size());
        if (f->size() != mean.size()) throw Error(ErrorCode::DimMismatch, "feature dims differ within cluster", i);
        mean += *f;
    }
    mean /= static_cast<double>(cluster.size());
    mean = mean.cwiseMax(1e-6).cwiseMin(1.0 - 1e-6);
    ParamVector theta = (mean.array() / (1.0 - mean.array())).log().matrix();
    return TestbedGenerator(std::move(id), std::move(theta), noise);
}

std::pair<std::string, std::string> render_arithmetic(const Eigen::VectorXd& features, RngStream rng) {
    auto feature = [&](Eigen::Index j) { return j < features.size() ? features(j) : 0.5; };
    const int terms = 2 + static_cast<int>(std::floor(std::clamp(feature(0), 0.0, 1.0) * 3.999));
    const int digits = 1 + static_cast<int>(std::floor(std::clamp(feature(1), 0.0, 1.0) * 2.999));
    const double p_mul = std::clamp(feature(2), 0.0, 1.0);
    const double p_sub = std::clamp(feature(3), 0.0, 1.0) * 0.5;

    std::int64_t limit = 1;
    for (int d = 0; d < digits; ++d) limit *= 10;
    auto operand = [&] { return static_cast<std::int64_t>(rng.next_below(static_cast<std::uint64_t>(limit - 1))) + 1; };

    std::int64_t value = operand();
    std::string text = std::to_string(value);
    for (int t = 1; t < terms; ++t) {
        const std::int64_t rhs = operand();
        const double u = rng.next_uniform();
        char op = '+';
        if (u < p_mul) op = '*';
        else if (u < p_mul + (1.0 - p_mul) * p_sub) op = '-';
        value = op == '*' ? value * rhs : op == '-' ? value - rhs : value + rhs;
        text = (t > 1 ? "(" + text + ")" : text) + " " + op + " " + std::to_string(rhs);
    }
    return {"Compute " + text + ".", std::to_string(value)};
}

Dataset testbed_generate(const TestbedGenerator& gen, std::size_t m, const RngStream& rng) {
    if (m == 0) throw Error(ErrorCode::InvalidArgument, "sample size must be at least 1");
    const Eigen::VectorXd base = gen.mean_features();
    Dataset out;
    out.instances.reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
        RngStream r = rng.child(j);
        Eigen::VectorXd phi = base;
        if (gen.noise() > 0.0) {
            for (Eigen::Index d = 0; d < phi.size(); ++d) phi(d) += gen.noise() * r.next_normal();
            phi = phi.cwiseMax(0.0).cwiseMin(1.0);
        }
        auto [query, answer] = render_arithmetic(phi, rng.child(j).child(1));
        EvalInstance inst;
        inst.id = gen.id() + "-" + std::to_string(j);
        inst.query = std::move(query);
        inst.reference_answer = std::move(answer);
        inst.features = std::move(phi);
        out.instances.push_back(std::move(inst));
    }
    return out;
}

TestbedTaker::TestbedTaker(std::string id, Eigen::VectorXd skills, double sharpness)
    : id_(std::move(id)), skills_(std::move(skills)), sharpness_(sharpness) {
    validate(skills_);
    if (!(sharpness_ > 0.0 && std::isfinite(sharpness_)))
        throw Error(ErrorCode::InvalidArgument, "sharpness must be positive");
}

void TestbedTaker::set_params(const ParamVector& params) {
    if (params.size() != skills_.size())
        throw Error(ErrorCode::DimMismatch, "taker '" + id_ + "' expects dim " + std::to_string(skills_.size()));
    validate(params);
    skills_ = params;
}

std::optional<double> TestbedTaker::closed_form_score(const EvalInstance& instance) const {
    return testbed_score(*this, instance);
}

std::string TestbedTaker::answer(const std::string&) const { return {}; }

double testbed_score(const TestbedTaker& taker, const EvalInstance& instance) {
    if (!instance.features)
        throw Error(ErrorCode::MissingFeatures, "instance '" + instance.id + "' has no difficulty features");
    const auto& phi = *instance.features;
    const auto s = taker.skills();
    if (phi.size() != s.size())
        throw Error(ErrorCode::DimMismatch, "instance '" + instance.id + "' feature dim differs from taker skill dim");
    return logistic(taker.sharpness() * (s - phi).mean());
}

}  // namespace dswarm
