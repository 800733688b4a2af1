#include "dswarm/adversarial.hpp"

#include <chrono>

namespace dswarm {

WindowBuffer::WindowBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw Error(ErrorCode::InvalidArgument, "window capacity must be >= 1");
}

void WindowBuffer::push(std::uint32_t iteration, Dataset data) {
    if (!entries_.empty() && iteration <= entries_.back().first)
        throw Error(ErrorCode::InvalidArgument, "window entries must arrive in increasing iteration order");
    entries_.emplace_back(iteration, std::move(data));
    while (entries_.size() > capacity_) entries_.pop_front();
}

std::vector<std::uint32_t> WindowBuffer::iterations() const {
    std::vector<std::uint32_t> out;
    for (const auto& [it, d] : entries_) out.push_back(it);
    return out;
}

bool WindowBuffer::contains_any(const std::set<std::string>& ids) const {
    for (const auto& [it, d] : entries_)
        for (const auto& inst : d.instances)
            if (ids.contains(inst.id)) return true;
    return false;
}

void AdversarialConfig::validate() const {
    data_pso.validate();
    model_pso.validate();
    if (window == 0) throw Error(ErrorCode::InvalidArgument, "window must be >= 1");
    if (instances_per_generator == 0) throw Error(ErrorCode::InvalidArgument, "instances_per_generator must be >= 1");
}

namespace {

DataSwarmConfig data_config(const AdversarialConfig& cfg) {
    DataSwarmConfig d;
    d.instances_per_iteration = cfg.instances_per_generator;
    d.objective = ObjectiveSpec::single(ObjectiveKind::difficult);
    d.pso = cfg.data_pso;
    d.threads = cfg.threads;
    return d;
}

}  // namespace

pso::IterationRecord<double> data_step(SwarmState& data_swarm, Generators generators, Takers takers,
                                       const Judge& judge, const AdversarialConfig& cfg,
                                       const AdversarialStreams& streams) {
    const DataSwarmConfig dcfg = data_config(cfg);
    const ObjectiveEvaluator evaluator(dcfg, takers, judge);
    const pso::Utility<double> utility = [&](const ParamVector& x, const pso::EvalContext& ctx) {
        auto& gen = *generators[ctx.particle];
        gen.set_params(x);
        return evaluator.evaluate(gen, streams.data.sampling.child(ctx.iteration).child(ctx.particle), ctx.iteration)
            .report.composite;
    };
    if (!data_swarm.initialized()) return pso::initialize(data_swarm, utility, {cfg.threads});
    return pso::iteration(data_swarm, utility, cfg.data_pso, streams.data.velocity, {cfg.threads});
}

Dataset joint_dataset(Generators generators, std::size_t m, const RngStream& rng, std::uint32_t iteration) {
    if (generators.empty()) throw Error(ErrorCode::EmptyInput, "joint dataset needs at least one generator");
    Dataset joint;
    for (std::size_t g = 0; g < generators.size(); ++g) {
        auto part = sample_eval_dataset(*generators[g], m, rng.child(g), iteration);
        for (auto& inst : part.instances) joint.instances.push_back(std::move(inst));
    }
    joint.provenance = Provenance::window(iteration);
    return joint;
}

double window_performance(const TestTakerModel& taker, const WindowBuffer& window, const Judge& judge) {
    if (window.empty()) throw Error(ErrorCode::EmptyWindow, "model step needs a non-empty window");
    double total = 0.0;
    for (const auto& [it, d] : window.entries()) total += dataset_performance(taker, d, judge);
    return total / static_cast<double>(window.size());
}

pso::IterationRecord<double> model_step(SwarmState& model_swarm, const WindowBuffer& window, Takers takers,
                                        const Judge& judge, const AdversarialConfig& cfg,
                                        const AdversarialStreams& streams) {
    if (window.empty()) throw Error(ErrorCode::EmptyWindow, "model step needs a non-empty window");
    const pso::Utility<double> utility = [&](const ParamVector& x, const pso::EvalContext& ctx) {
        auto& taker = *takers[ctx.particle];
        taker.set_params(x);
        return window_performance(taker, window, judge);
    };
    if (!model_swarm.initialized()) return pso::initialize(model_swarm, utility, {cfg.threads});
    return pso::iteration(model_swarm, utility, cfg.model_pso, streams.model_velocity, {cfg.threads});
}

AdversarialResult run_adversarial(const AdversarialConfig& cfg, Generators generators, Takers takers,
                                  const Judge& judge, const Dataset& held_out, std::uint64_t master_seed) {
    cfg.validate();
    if (generators.empty() || takers.empty())
        throw Error(ErrorCode::EmptyInput, "adversarial run needs generators and takers");
    if (held_out.empty()) throw Error(ErrorCode::EmptyDataset, "held-out set is empty");

    const AdversarialStreams streams(master_seed);
    std::set<std::string> held_ids;
    for (const auto& inst : held_out.instances) held_ids.insert(inst.id);

    AdversarialResult result;
    std::vector<ParamVector> start_data, start_model;
    for (const auto& g : generators) start_data.push_back(g->params());
    for (std::size_t i = 0; i < takers.size(); ++i) {
        auto p = takers[i]->params();
        if (!p) throw Error(ErrorCode::InvalidArgument, "taker '" + takers[i]->id() + "' exposes no parameters", i);
        start_model.push_back(std::move(*p));
    }
    result.data_state = pso::make_swarm(start_data);
    result.model_state = pso::make_swarm(start_model);
    WindowBuffer window(cfg.window);

    auto audit = [&](const Dataset& d, std::uint32_t t) {
        for (const auto& inst : d.instances)
            if (held_ids.contains(inst.id))
                throw Error(ErrorCode::Audit, "held-out instance '" + inst.id + "' entered the window at iteration " +
                                                  std::to_string(t));
    };

    auto best_taker = [&] {
        // Evaluate g_model through taker 0, then restore it.
        auto& probe = *takers.front();
        const ParamVector saved = *probe.params();
        probe.set_params(result.model_state.global_best);
        const double w = window_performance(probe, window, judge);
        const double h = dataset_performance(probe, held_out, judge);
        probe.set_params(saved);
        return std::pair{w, h};
    };

    std::uint32_t stagnation = 0;
    for (std::uint32_t t = 0;; ++t) {
        const auto start = std::chrono::steady_clock::now();
        const double data_before = result.data_state.global_best_score;
        const double model_before = result.model_state.global_best_score;

        auto drec = data_step(result.data_state, generators, takers, judge, cfg, streams);
        auto joint = joint_dataset(generators, cfg.instances_per_generator, streams.joint.child(t), t);
        audit(joint, t);
        window.push(t, std::move(joint));
        if (window.contains_any(held_ids)) throw Error(ErrorCode::Audit, "held-out data present in the window");
        auto mrec = model_step(result.model_state, window, takers, judge, cfg, streams);

        if (t > 0) {
            const bool improved = result.data_state.global_best_score > data_before ||
                                  result.model_state.global_best_score > model_before;
            stagnation = improved ? 0 : stagnation + 1;
        }

        AdversarialIteration rec;
        rec.iteration = t;
        rec.data_scores = std::move(drec.scores);
        rec.model_scores = std::move(mrec.scores);
        rec.data_best = result.data_state.global_best_score;
        rec.model_best = result.model_state.global_best_score;
        std::tie(rec.window_performance, rec.held_out_performance) = best_taker();
        rec.stagnation = stagnation;
        rec.window_iterations = window.iterations();
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.trace.push_back(std::move(rec));

        if (t >= cfg.max_iteration || stagnation >= cfg.patience) break;
    }

    result.data_best = result.data_state.global_best;
    result.data_best_score = result.data_state.global_best_score;
    result.model_best = result.model_state.global_best;
    result.model_best_score = result.model_state.global_best_score;
    return result;
}

}  // namespace dswarm
