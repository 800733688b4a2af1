#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "dswarm/adversarial.hpp"
#include "dswarm/config.hpp"
#include "support.hpp"

using namespace dswarm;
using dswarm::test::code_of;

namespace {

Dataset tagged(const std::string& prefix, std::size_t n) {
    Dataset d;
    for (std::size_t j = 0; j < n; ++j)
        d.instances.push_back({prefix + std::to_string(j), "q", std::nullopt, Eigen::VectorXd::Constant(4, 0.5), {}});
    return d;
}

World world(std::uint64_t seed, double noise = 0.1) {
    RunConfig rc;
    rc.testbed.noise = noise;
    return build_testbed_world(rc, seed);
}

AdversarialConfig small_config() {
    AdversarialConfig cfg;
    cfg.instances_per_generator = 30;
    cfg.max_iteration = 6;
    return cfg;
}

PsoHyperparams frozen_pso() {
    PsoHyperparams h;
    h.inertia = 1.0;
    h.cognitive = h.social = h.repel = 0.0;
    return h;
}

}  // namespace

TEST_CASE("window retains the most recent iterations") {
    WindowBuffer w(3);
    CHECK(w.empty());
    for (std::uint32_t t = 0; t < 7; ++t) {
        w.push(t, tagged("i" + std::to_string(t) + "/", 2));
        CHECK(w.size() <= 3);
        if (t >= 2) {
            CHECK(w.iterations() == std::vector<std::uint32_t>{t - 2, t - 1, t});
        }
    }
    CHECK(w.contains_any({"i6/1"}));
    CHECK_FALSE(w.contains_any({"i3/0"}));
    CHECK(code_of([&] { w.push(6, Dataset{}); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { WindowBuffer zero(0); }) == ErrorCode::InvalidArgument);

    WindowBuffer one(1);
    one.push(0, tagged("a", 1));
    one.push(4, tagged("b", 1));
    CHECK(one.iterations() == std::vector<std::uint32_t>{4});
}

TEST_CASE("joint dataset") {
    GeneratorPool gens;
    for (int g = 0; g < 3; ++g)
        gens.push_back(std::make_unique<TestbedGenerator>("gen" + std::to_string(g), ParamVector::Zero(4), 0.0));
    const auto joint = joint_dataset(gens, 10, RngStream(2), 4);
    CHECK(joint.size() == 30);
    std::set<std::string> sources, ids, queries;
    for (const auto& inst : joint.instances) {
        sources.insert(inst.meta.at("generator"));
        ids.insert(inst.id);
        queries.insert(inst.query);
    }
    CHECK(sources.size() == 3);
    CHECK(ids.size() == 30);
    CHECK(joint.provenance == Provenance::window(4));

    // Identical generators on identical streams: every query appears three times.
    GeneratorPool same;
    for (int g = 0; g < 3; ++g)
        same.push_back(std::make_unique<TestbedGenerator>("s" + std::to_string(g), ParamVector::Zero(4), 0.0));
    const auto dup = joint_dataset(same, 5, RngStream(3), 0);
    CHECK(dup.size() == 15);

    GeneratorPool single;
    single.push_back(std::make_unique<TestbedGenerator>("only", ParamVector::Constant(4, 0.3), 0.1));
    const auto a = joint_dataset(single, 8, RngStream(5), 1);
    const auto b = sample_eval_dataset(*single[0], 8, RngStream(5).child(0), 1);
    CHECK(a.instances == b.instances);
}

TEST_CASE("duplicates are retained") {
    class Fixed final : public GeneratorModel {
    public:
        explicit Fixed(std::string id) : id_(std::move(id)) {}
        const std::string& id() const override { return id_; }
        ParamVector params() const override { return ParamVector::Zero(1); }
        void set_params(const ParamVector&) override {}
        Dataset sample(std::size_t m, const RngStream&) const override {
            Dataset d;
            for (std::size_t j = 0; j < m; ++j) d.instances.push_back({"x", "same query", std::string("1"), {}, {}});
            return d;
        }

    private:
        std::string id_;
    };
    GeneratorPool gens;
    gens.push_back(std::make_unique<Fixed>("a"));
    gens.push_back(std::make_unique<Fixed>("b"));
    const auto joint = joint_dataset(gens, 4, RngStream(1), 0);
    CHECK(joint.size() == 8);
    for (const auto& inst : joint.instances) CHECK(inst.query == "same query");
}

TEST_CASE("window performance") {
    TestbedTaker t("t", Eigen::VectorXd::Constant(4, 0.5));
    WindowBuffer w(2);
    CHECK(code_of([&] { window_performance(t, w, ExactMatchJudge{}); }) == ErrorCode::EmptyWindow);
    w.push(0, tagged("a", 3));
    CHECK(window_performance(t, w, ExactMatchJudge{}) == 0.5);

    World wd = world(1);
    SwarmState ms = pso::make_swarm(std::vector<ParamVector>{ParamVector::Zero(4)});
    const AdversarialStreams streams(1);
    CHECK(code_of([&] { model_step(ms, WindowBuffer(3), wd.takers, *wd.judge, small_config(), streams); }) ==
          ErrorCode::EmptyWindow);
}

TEST_CASE("saturated window gives a flat model utility") {
    TakerPool takers;
    for (int i = 0; i < 3; ++i)
        takers.push_back(std::make_unique<TestbedTaker>("t" + std::to_string(i), Eigen::VectorXd::Constant(4, 0.3 + 0.2 * i)));
    Dataset easy;
    for (int j = 0; j < 4; ++j)
        easy.instances.push_back({"e" + std::to_string(j), "q", std::nullopt, Eigen::VectorXd::Zero(4), {}});
    WindowBuffer w;
    w.push(0, easy);
    // A very blunt taker: sharpness high enough that every score rounds to 1.0.
    TakerPool sharp;
    for (int i = 0; i < 2; ++i)
        sharp.push_back(std::make_unique<TestbedTaker>("s" + std::to_string(i), Eigen::VectorXd::Ones(4), 200.0));
    SwarmState ms = pso::make_swarm(std::vector<ParamVector>{ParamVector::Ones(4), ParamVector::Ones(4)});
    const AdversarialStreams streams(3);
    const auto rec = model_step(ms, w, sharp, ExactMatchJudge{}, small_config(), streams);
    for (double s : rec.scores) CHECK(s == 1.0);
}

TEST_CASE("frozen single-taker model swarm") {
    World wd = world(2);
    TakerPool one;
    one.push_back(std::make_unique<TestbedTaker>("solo", Eigen::VectorXd::Constant(4, 0.6)));
    AdversarialConfig cfg = small_config();
    cfg.model_pso = frozen_pso();
    const AdversarialStreams streams(2);
    WindowBuffer w;
    w.push(0, joint_dataset(wd.generators, 20, streams.joint.child(0), 0));
    SwarmState ms = pso::make_swarm(std::vector<ParamVector>{ParamVector::Constant(4, 0.6)});
    const auto first = model_step(ms, w, one, *wd.judge, cfg, streams);
    for (int k = 0; k < 3; ++k) {
        const auto rec = model_step(ms, w, one, *wd.judge, cfg, streams);
        CHECK(rec.scores == first.scores);
    }
    CHECK(bit_equal(ms.particles[0].position, ParamVector(ParamVector::Constant(4, 0.6))));
}

TEST_CASE("saturated adversary: data utility is flat at 1 and stagnation grows") {
    World wd = world(4);
    TakerPool hopeless;
    hopeless.push_back(std::make_unique<TestbedTaker>("zero", Eigen::VectorXd::Zero(4), 1e4));
    AdversarialConfig cfg = small_config();
    const AdversarialStreams streams(4);
    SwarmState ds;
    std::vector<ParamVector> start;
    for (const auto& g : wd.generators) start.push_back(g->params());
    ds = pso::make_swarm(start);
    data_step(ds, wd.generators, hopeless, *wd.judge, cfg, streams);
    for (int k = 1; k <= 3; ++k) {
        const auto rec = data_step(ds, wd.generators, hopeless, *wd.judge, cfg, streams);
        for (double s : rec.scores) CHECK(s == 1.0);
        CHECK(ds.stagnation == static_cast<std::uint32_t>(k));
    }
}

TEST_CASE("data steps against frozen takers reproduce run_data_swarms") {
    World a = world(6);
    World b = world(6);
    AdversarialConfig cfg = small_config();
    cfg.threads = 2;

    DataSwarmConfig dcfg;
    dcfg.instances_per_iteration = cfg.instances_per_generator;
    dcfg.pso = cfg.data_pso;
    dcfg.pso.max_iteration = 4;
    dcfg.pso.patience = 100;
    const auto reference = run_data_swarms(dcfg, a.generators, a.takers, *a.judge, 6);

    const AdversarialStreams streams(6);
    std::vector<ParamVector> start;
    for (const auto& g : b.generators) start.push_back(g->params());
    SwarmState ds = pso::make_swarm(start);
    for (int k = 0; k <= 4; ++k) {
        const auto rec = data_step(ds, b.generators, b.takers, *b.judge, cfg, streams);
        REQUIRE(static_cast<std::size_t>(k) < reference.trace.size());
        CHECK(rec.scores == reference.trace[static_cast<std::size_t>(k)].particle_composite);
    }
    CHECK(bit_equal(ds, reference.state));
}

TEST_CASE("K = 1 runs one step of each swarm after initialization") {
    World wd = world(3);
    AdversarialConfig cfg = small_config();
    cfg.max_iteration = 1;
    const auto r = run_adversarial(cfg, wd.generators, wd.takers, *wd.judge, wd.held_out, 3);
    CHECK(r.trace.size() == 2);
    CHECK(r.data_state.iteration == 1);
    CHECK(r.model_state.iteration == 1);
}

TEST_CASE("adversarial traces, window contents and audit") {
    World wd = world(9);
    AdversarialConfig cfg = small_config();
    cfg.max_iteration = 10;
    cfg.patience = 100;
    const auto r = run_adversarial(cfg, wd.generators, wd.takers, *wd.judge, wd.held_out, 9);
    REQUIRE(r.trace.size() == 11);
    for (std::size_t t = 1; t < r.trace.size(); ++t) {
        CHECK(r.trace[t].data_best >= r.trace[t - 1].data_best);
        CHECK(r.trace[t].model_best >= r.trace[t - 1].model_best);
    }
    for (std::size_t t = 0; t < r.trace.size(); ++t) {
        const auto& its = r.trace[t].window_iterations;
        CHECK(its.size() == std::min<std::size_t>(t + 1, 3));
        CHECK(its.back() == t);
        for (std::size_t k = 1; k < its.size(); ++k) CHECK(its[k] == its[k - 1] + 1);
    }
    CHECK(r.model_best_score == r.trace.back().model_best);
    CHECK(r.trace.back().window_performance == doctest::Approx(r.model_best_score).epsilon(0.2));
}

TEST_CASE("adversarial runs are reproducible") {
    World a = world(12), b = world(12);
    AdversarialConfig cfg = small_config();
    const auto ra = run_adversarial(cfg, a.generators, a.takers, *a.judge, a.held_out, 12);
    cfg.threads = 4;
    const auto rb = run_adversarial(cfg, b.generators, b.takers, *b.judge, b.held_out, 12);
    CHECK(bit_equal(ra.data_state, rb.data_state));
    CHECK(bit_equal(ra.model_state, rb.model_state));
    REQUIRE(ra.trace.size() == rb.trace.size());
    for (std::size_t t = 0; t < ra.trace.size(); ++t)
        CHECK(ra.trace[t].held_out_performance == rb.trace[t].held_out_performance);
}

TEST_CASE("the audit rejects held-out ids reaching the window") {
    World wd = world(5);
    Dataset leaky = wd.held_out;
    leaky.instances[0].id = wd.generators[1]->id() + "/0/3";
    CHECK(code_of([&] { run_adversarial(small_config(), wd.generators, wd.takers, *wd.judge, leaky, 5); }) ==
          ErrorCode::Audit);
}

TEST_CASE("frozen generators: takers optimize a static target") {
    World wd = world(8, 0.0);
    std::vector<ParamVector> start;
    for (const auto& g : wd.generators) start.push_back(g->params());
    AdversarialConfig cfg = small_config();
    cfg.data_pso = frozen_pso();
    cfg.max_iteration = 8;
    const auto r = run_adversarial(cfg, wd.generators, wd.takers, *wd.judge, wd.held_out, 8);
    for (std::size_t i = 0; i < start.size(); ++i) CHECK(bit_equal(r.data_state.particles[i].position, start[i]));
    for (std::size_t t = 1; t < r.trace.size(); ++t) {
        CHECK(r.trace[t].model_best >= r.trace[t - 1].model_best);
        CHECK(r.trace[t].data_best == r.trace[0].data_best);
    }
}

TEST_CASE("seed 5: an early data step improves the difficult best") {
    World wd = world(5);
    AdversarialConfig cfg;
    cfg.max_iteration = 3;
    cfg.patience = 100;
    const auto r = run_adversarial(cfg, wd.generators, wd.takers, *wd.judge, wd.held_out, 5);
    bool improved = false;
    for (std::size_t t = 1; t < r.trace.size(); ++t) improved |= r.trace[t].data_best > r.trace[t - 1].data_best;
    CHECK(improved);
}

TEST_CASE("adversarial input validation") {
    World wd = world(1);
    TakerPool frozen;
    struct Frozen final : TestTakerModel {
        std::string name = "f";
        const std::string& id() const override { return name; }
        std::string answer(const std::string&) const override { return ""; }
    };
    frozen.push_back(std::make_unique<Frozen>());
    CHECK(code_of([&] { run_adversarial(small_config(), wd.generators, frozen, *wd.judge, wd.held_out, 1); }) ==
          ErrorCode::InvalidArgument);
    CHECK(code_of([&] { run_adversarial(small_config(), wd.generators, wd.takers, *wd.judge, Dataset{}, 1); }) ==
          ErrorCode::EmptyDataset);
    AdversarialConfig bad = small_config();
    bad.window = 0;
    CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidArgument);
}
