#include "dswarm/dataswarms.hpp"

#include <algorithm>
#include <chrono>

namespace dswarm {

void DataSwarmConfig::validate() const {
    if (instances_per_iteration == 0) throw Error(ErrorCode::InvalidArgument, "instances_per_iteration must be >= 1");
    objective.validate();
    pso.validate();
    if (objective.has(ObjectiveKind::novel) && (!baseline || baseline->empty()))
        throw Error(ErrorCode::InvalidArgument, "novel objective needs a non-empty baseline dataset");
    if (objective.has(ObjectiveKind::personalized) && (!embedder || user_embeddings.rows() == 0))
        throw Error(ErrorCode::EmptyRepository, "personalized objective needs an embedder and user embeddings");
}

Dataset sample_eval_dataset(const GeneratorModel& generator, std::size_t m, const RngStream& rng,
                            std::uint32_t iteration) {
    if (m == 0) throw Error(ErrorCode::InvalidArgument, "sample size must be at least 1");
    Dataset d;
    try {
        d = generator.sample(m, rng);
    } catch (const std::exception& e) {
        throw Error(ErrorCode::GenerationFailed, "generator '" + generator.id() + "': " + e.what());
    }
    if (d.size() != m)
        throw Error(ErrorCode::GenerationFailed, "generator '" + generator.id() + "' returned " +
                                                     std::to_string(d.size()) + " of " + std::to_string(m) + " instances");
    const std::string prefix = generator.id() + "/" + std::to_string(iteration) + "/";
    for (std::size_t j = 0; j < d.size(); ++j) {
        auto& inst = d.instances[j];
        inst.id = prefix + std::to_string(j);
        inst.meta["generator"] = generator.id();
        inst.meta["iteration"] = std::to_string(iteration);
    }
    d.provenance = Provenance::generated(generator.id(), iteration);
    return d;
}

double dataset_performance(const TestTakerModel& taker, const Dataset& dataset, const Judge& judge) {
    if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "cannot score a taker on an empty dataset");
    double total = 0.0;
    for (std::size_t j = 0; j < dataset.size(); ++j) {
        const auto& inst = dataset.instances[j];
        double s;
        if (auto closed = taker.closed_form_score(inst)) {
            s = *closed;
        } else {
            std::string answer;
            try {
                answer = taker.answer(inst.query);
            } catch (const std::exception& e) {
                throw Error(ErrorCode::TakerFailed, "taker '" + taker.id() + "' on '" + inst.id + "': " + e.what(), j);
            }
            try {
                s = judge.score(inst.query, answer, inst.reference_answer);
            } catch (const std::exception& e) {
                throw Error(ErrorCode::JudgeFailed, "judging '" + inst.id + "' for '" + taker.id() + "': " + e.what(), j);
            }
        }
        if (!(s >= 0.0 && s <= 1.0))
            throw Error(ErrorCode::JudgeFailed, "score " + std::to_string(s) + " for '" + inst.id + "' outside [0,1]", j);
        total += s;
    }
    return total / static_cast<double>(dataset.size());
}

PerformanceMatrix performance_matrix(Takers takers, std::span<const Dataset> datasets, const Judge& judge) {
    if (datasets.empty()) throw Error(ErrorCode::EmptyInput, "performance matrix needs at least one dataset");
    PerformanceMatrix pm;
    pm.scores.resize(static_cast<Eigen::Index>(takers.size()), static_cast<Eigen::Index>(datasets.size()));
    for (const auto& t : takers) pm.taker_ids.push_back(t->id());
    for (std::size_t j = 0; j < datasets.size(); ++j) {
        const auto& p = datasets[j].provenance;
        pm.sample_ids.push_back(p.kind == Provenance::Kind::generated
                                    ? p.generator_id + "/" + std::to_string(p.iteration) + "#" + std::to_string(j)
                                    : "sample#" + std::to_string(j));
    }
    for (std::size_t i = 0; i < takers.size(); ++i)
        for (std::size_t j = 0; j < datasets.size(); ++j)
            pm.scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                dataset_performance(*takers[i], datasets[j], judge);
    return pm;
}

ObjectiveEvaluator::ObjectiveEvaluator(const DataSwarmConfig& cfg, Takers takers, const Judge& judge)
    : cfg_(cfg), takers_(takers), judge_(judge) {
    cfg_.validate();
    if (takers_.empty()) throw Error(ErrorCode::EmptyInput, "objectives need at least one test taker");
    if (cfg_.objective.has(ObjectiveKind::novel)) {
        const Dataset& base = *cfg_.baseline;
        baseline_perf_ = performance_matrix(takers_, std::span(&base, 1), judge_).scores.col(0);
    }
}

Evaluation ObjectiveEvaluator::evaluate(const GeneratorModel& generator, const RngStream& rng,
                                        std::uint32_t iteration) const {
    const std::size_t k = cfg_.objective.has(ObjectiveKind::consistent) ? cfg_.objective.resample_count : 1;
    std::vector<Dataset> samples;
    samples.reserve(k);
    for (std::size_t r = 0; r < k; ++r)
        samples.push_back(sample_eval_dataset(generator, cfg_.instances_per_iteration, rng.child(r), iteration));
    return evaluate_samples(std::move(samples));
}

Evaluation ObjectiveEvaluator::evaluate_samples(std::vector<Dataset> samples) const {
    Evaluation ev;
    ev.performance = performance_matrix(takers_, samples, judge_);
    const Eigen::VectorXd per_taker = ev.performance.scores.rowwise().mean();

    std::map<ObjectiveKind, double> values;
    for (const auto& c : cfg_.objective.components) {
        switch (c.kind) {
            case ObjectiveKind::difficult: values[c.kind] = difficult(per_taker); break;
            case ObjectiveKind::separate: values[c.kind] = separate(per_taker); break;
            case ObjectiveKind::consistent: values[c.kind] = consistent(ev.performance.scores); break;
            case ObjectiveKind::novel: values[c.kind] = novel(per_taker, *baseline_perf_); break;
            case ObjectiveKind::personalized: {
                std::size_t rows = 0;
                for (const auto& s : samples) rows += s.size();
                Eigen::MatrixXd emb(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cfg_.embedder->dim()));
                Eigen::Index r = 0;
                for (const auto& s : samples)
                    for (const auto& inst : s.instances) emb.row(r++) = cfg_.embedder->embed(inst.query);
                values[c.kind] = personalized(emb, cfg_.user_embeddings, cfg_.objective.topk);
                break;
            }
        }
    }
    ev.report = composite(cfg_.objective, values);
    ev.samples = std::move(samples);
    return ev;
}

Evaluation objective_value(const GeneratorModel& generator, const DataSwarmConfig& cfg, Takers takers,
                           const Judge& judge, const RngStream& rng, std::uint32_t iteration) {
    return ObjectiveEvaluator(cfg, takers, judge).evaluate(generator, rng, iteration);
}

DataSwarmResult run_data_swarms(const DataSwarmConfig& cfg, Generators generators, Takers takers, const Judge& judge,
                                std::uint64_t master_seed, std::optional<SwarmState> resume) {
    if (generators.empty()) throw Error(ErrorCode::EmptyInput, "data swarm needs at least one generator");
    const ObjectiveEvaluator evaluator(cfg, takers, judge);
    const RunStreams streams(master_seed);

    DataSwarmResult result;
    if (resume) {
        if (resume->particles.size() != generators.size())
            throw Error(ErrorCode::DimMismatch, "checkpoint has " + std::to_string(resume->particles.size()) +
                                                    " particles for " + std::to_string(generators.size()) + " generators");
        validate(*resume);
        result.state = std::move(*resume);
    } else {
        std::vector<ParamVector> start;
        for (const auto& g : generators) start.push_back(g->params());
        result.state = pso::make_swarm(start);
    }

    std::vector<std::optional<Evaluation>> current(generators.size());
    std::optional<Evaluation> best;

    const pso::Utility<double> utility = [&](const ParamVector& x, const pso::EvalContext& ctx) {
        auto& gen = *generators[ctx.particle];
        gen.set_params(x);
        auto ev = evaluator.evaluate(gen, streams.sampling.child(ctx.iteration).child(ctx.particle), ctx.iteration);
        const double score = ev.report.composite;
        current[ctx.particle] = std::move(ev);
        return score;
    };

    auto tick = std::chrono::steady_clock::now();
    const pso::IterationObserver<double> observer = [&](const SwarmState& s, const pso::IterationRecord<double>& rec) {
        if (rec.new_global_best) best = current[*rec.new_global_best];
        DataSwarmIteration it;
        it.iteration = rec.iteration;
        it.particle_composite = rec.scores;
        for (auto& ev : current) it.particle_components.push_back(ev->report.per_component);
        it.global_best_score = s.global_best_score;
        it.global_worst_score = s.global_worst_score;
        it.stagnation = s.stagnation;
        if (best) it.best_components = best->report.per_component;
        const auto now = std::chrono::steady_clock::now();
        it.wall_seconds = std::chrono::duration<double>(now - tick).count();
        tick = now;
        result.trace.push_back(std::move(it));
        if (cfg.on_iteration) cfg.on_iteration(s);
    };

    auto run = pso::run<double>(result.state, utility, cfg.pso, streams.velocity, {cfg.threads}, observer);

    if (!best) {
        // Resumed without improvement: score the stored global best once.
        auto& gen = *generators.front();
        const ParamVector saved = gen.params();
        gen.set_params(run.global_best);
        best = evaluator.evaluate(gen, streams.sampling.child(result.state.iteration).child(generators.size()),
                                  result.state.iteration);
        gen.set_params(saved);
    }
    result.best_params = run.global_best;
    result.best_report = best->report;
    result.best_dataset = best->samples.front();
    return result;
}

HyperGrid default_grid() {
    return {
        {"inertia", {0.1, 0.2, 0.3}},
        {"cognitive", {0.1, 0.2, 0.3, 0.4, 0.5}},
        {"social", {0.2, 0.3, 0.4, 0.5, 0.6}},
        {"repel", {0.01, 0.05, 0.1}},
        {"step_length", {0.5, 0.6, 0.7, 0.8, 0.9, 1.0}},
    };
}

std::size_t grid_size(const HyperGrid& grid) {
    if (grid.empty()) return 0;
    std::size_t n = 1;
    for (const auto& [key, values] : grid) n *= values.size();
    return n;
}

PsoHyperparams grid_point(const HyperGrid& grid, std::size_t index, PsoHyperparams base) {
    // Mixed-radix decode in key order.
    for (const auto& [key, values] : grid) {
        const double v = values[index % values.size()];
        index /= values.size();
        if (key == "step_length") base.step_length = v;
        else if (key == "inertia") base.inertia = v;
        else if (key == "cognitive") base.cognitive = v;
        else if (key == "social") base.social = v;
        else if (key == "repel") base.repel = v;
        else throw Error(ErrorCode::InvalidArgument, "unknown grid hyperparameter '" + key + "'");
    }
    return base;
}

GridSearchResult grid_search(const DataSwarmConfig& cfg, Generators generators, Takers takers, const Judge& judge,
                             const HyperGrid& grid, std::size_t budget, std::uint64_t master_seed) {
    const std::size_t size = grid_size(grid);
    if (size == 0) throw Error(ErrorCode::EmptyGrid, "hyperparameter grid has no points");
    if (budget == 0) throw Error(ErrorCode::InvalidArgument, "grid budget must be at least 1");

    std::vector<ParamVector> initial;
    for (const auto& g : generators) initial.push_back(g->params());

    const auto picks =
        sample_without_replacement(size, std::min(budget, size), RngStream(master_seed).child(stream::kGrid));
    GridSearchResult out;
    for (const std::size_t index : picks) {
        for (std::size_t i = 0; i < generators.size(); ++i) generators[i]->set_params(initial[i]);
        DataSwarmConfig run_cfg = cfg;
        run_cfg.pso = grid_point(grid, index, cfg.pso);
        GridRun run{index, run_cfg.pso, run_data_swarms(run_cfg, generators, takers, judge, master_seed)};
        if (out.runs.empty() || run.result.best_report.composite > out.best_run().result.best_report.composite)
            out.best = out.runs.size();
        out.runs.push_back(std::move(run));
    }
    for (std::size_t i = 0; i < generators.size(); ++i) generators[i]->set_params(initial[i]);
    return out;
}

ObjectiveReport transfer_eval(const Dataset& dataset, Takers takers, const Judge& judge, const ObjectiveSpec& spec) {
    dataset.validate();
    if (takers.empty()) throw Error(ErrorCode::EmptyInput, "transfer evaluation needs at least one test taker");
    const auto pm = performance_matrix(takers, std::span(&dataset, 1), judge);
    const Eigen::VectorXd perf = pm.scores.col(0);
    std::map<ObjectiveKind, double> values{{ObjectiveKind::difficult, difficult(perf)}};
    if (perf.size() >= 2) values[ObjectiveKind::separate] = separate(perf);
    auto report = composite(spec, values);
    report.per_component = values;
    return report;
}

}  // namespace dswarm
