// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "dswarm/adversarial.hpp"
#include "dswarm/cli.hpp"
#include "dswarm/config.hpp"
#include "dswarm/dataswarms.hpp"
#include "dswarm/io.hpp"
#include "dswarm/objectives.hpp"
#include "dswarm/pso.hpp"
#include "dswarm/seeding.hpp"

using namespace dswarm;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
    void note(const std::string& what) {
        if (!detail.empty()) detail += "; ";
        detail += what;
    }
};

std::string fmt(double v, int prec = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double logistic_oracle(double z) { return 1.0 / (1.0 + std::exp(-z)); }

long double kl_oracle(const Eigen::VectorXd& gen, const Eigen::VectorXd& base) {
    long double sp = 0, sq = 0, kl = 0;
    for (Eigen::Index i = 0; i < gen.size(); ++i) {
        sp += gen(i) + 1e-6L;
        sq += base(i) + 1e-6L;
    }
    for (Eigen::Index i = 0; i < gen.size(); ++i) {
        const long double p = (gen(i) + 1e-6L) / sp, q = (base(i) + 1e-6L) / sq;
        kl += p * std::log(p / q);
    }
    return kl;
}

Eigen::VectorXd uniform_vector(RngStream& r, Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (auto& x : v) x = r.next_uniform();
    return v;
}

// 1 ---------------------------------------------------------------------------
Verdict objective_identities() {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    RngStream r(2024);
    double worst_sep = 0, worst_kl = 0, worst_self = 0;
    bool difficult_ok = true, kl_nonneg = true;
    for (int t = 0; t < 1000; ++t) {
        const auto n = static_cast<Eigen::Index>(2 + r.next_below(15));
        const Eigen::VectorXd perf = uniform_vector(r, n);
        double lo = perf(0), hi = perf(0);
        for (double x : perf) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        worst_sep = std::max(worst_sep, std::abs(separate(perf) - (hi - lo) / static_cast<double>(n - 1)));
        const double d = difficult(perf);
        difficult_ok &= d >= 0.0 && d <= 1.0;
    }
    for (int t = 0; t < 1000; ++t) {
        const auto n = static_cast<Eigen::Index>(1 + r.next_below(10));
        const Eigen::VectorXd a = uniform_vector(r, n), b = uniform_vector(r, n);
        const double kl = novel(a, b);
        kl_nonneg &= kl >= 0.0;
        worst_kl = std::max(worst_kl, static_cast<double>(std::abs(static_cast<long double>(kl) - kl_oracle(a, b))));
        worst_self = std::max(worst_self, novel(a, a));
    }

    RunConfig rc;
    rc.testbed.noise = 0.0;
    const World w = build_testbed_world(rc, 1);
    DataSwarmConfig dcfg = w.data_config(rc);
    dcfg.objective = ObjectiveSpec::single(ObjectiveKind::consistent);
    dcfg.objective.resample_count = 3;
    bool consistent_exact = true;
    for (const auto& g : w.generators)
        consistent_exact &= objective_value(*g, dcfg, w.takers, *w.judge, RngStream(5)).report.composite == 1.0;

    const double secs = seconds_since(t0);
    v.require(worst_sep <= 1e-12, "separate deviates by " + fmt(worst_sep));
    v.require(difficult_ok, "difficult left [0,1]");
    v.require(consistent_exact, "consistent of a deterministic generator != 1");
    v.require(worst_self <= 1e-9, "novel(x,x) reached " + fmt(worst_self));
    v.require(kl_nonneg, "novel went negative");
    v.require(worst_kl <= 1e-9, "novel deviates from the KL oracle by " + fmt(worst_kl));
    v.require(secs < 1.0, "took " + fmt(secs) + " s");
    v.note("max |separate err| " + fmt(worst_sep, 3) + ", max |KL err| " + fmt(worst_kl, 3));
    return v;
}

// 2 ---------------------------------------------------------------------------
Verdict composite_weighting() {
    Verdict v;
    ObjectiveSpec spec;
    spec.components = {{ObjectiveKind::difficult, 0.6}, {ObjectiveKind::separate, 0.2}, {ObjectiveKind::novel, 0.2}};
    const double c =
        composite(spec, {{ObjectiveKind::difficult, 0.5}, {ObjectiveKind::separate, 0.4}, {ObjectiveKind::novel, 0.0}})
            .composite;
    v.require(std::abs(c - 0.38) <= 1e-12, "composite = " + fmt(c, 17));
    v.note("composite " + fmt(c, 17));
    return v;
}

// 3 ---------------------------------------------------------------------------
Verdict sphere_convergence() {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t seed = 3;
    RngStream init = RngStream(seed).child(stream::kInit);
    std::vector<ParamVector> start;
    for (int i = 0; i < 8; ++i) {
        ParamVector x(5);
        for (auto& e : x) e = 2.0 * init.next_uniform() - 1.0;
        start.push_back(x);
    }
    const HyperGrid grid = default_grid();
    auto mid = [&](const char* key) {
        const auto& vals = grid.at(key);
        return vals.size() % 2 ? vals[vals.size() / 2] : 0.5 * (vals[vals.size() / 2 - 1] + vals[vals.size() / 2]);
    };
    PsoHyperparams h;
    h.inertia = mid("inertia");
    h.cognitive = mid("cognitive");
    h.social = mid("social");
    h.repel = mid("repel");
    h.step_length = mid("step_length");
    h.max_iteration = 200;
    h.patience = 50;
    auto swarm = pso::make_swarm(start);
    const auto r = pso::run(swarm, pso::plain<double>([](const ParamVector& x) { return -x.squaredNorm(); }), h,
                            RngStream(seed).child(stream::kVelocity));
    const double secs = seconds_since(t0);
    v.require(r.score >= -1e-2, "final best utility " + fmt(r.score));
    v.require(secs < 5.0, "took " + fmt(secs) + " s");
    v.note("final best " + fmt(r.score) + " after " + std::to_string(swarm.iteration) + " iterations");
    return v;
}

// 4 ---------------------------------------------------------------------------
Verdict monotone_and_normalized() {
    Verdict v;
    const PsoHyperparams base;
    bool best_ok = true, worst_ok = true;
    double worst_norm = 0;
    std::size_t terms_seen = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        RngStream r = RngStream(seed).child(stream::kInit);
        const auto dim = static_cast<Eigen::Index>(1 + r.next_below(6));
        std::vector<ParamVector> start;
        for (std::uint64_t i = 0, n = 2 + r.next_below(7); i < n; ++i) {
            ParamVector x(dim);
            for (auto& e : x) e = 4.0 * r.next_uniform() - 2.0;
            start.push_back(x);
        }
        PsoHyperparams h = base;
        h.inertia = 0.05 + 0.5 * r.next_uniform();
        h.cognitive = 0.5 * r.next_uniform();
        h.social = 0.5 * r.next_uniform();
        h.repel = 0.2 * r.next_uniform();
        h.max_iteration = 40;
        h.patience = 40;
        // A bumpy landscape so that bests and worsts both move.
        const auto utility = pso::plain<double>(
            [](const ParamVector& x) { return -x.squaredNorm() + 0.3 * std::cos(3.0 * x.sum()); });
        std::vector<double> best, worst;
        auto swarm = pso::make_swarm(start);
        pso::run(swarm, utility, h, RngStream(seed).child(stream::kVelocity), {},
                 [&](const SwarmState&, const pso::IterationRecord<double>& rec) {
                     best.push_back(rec.global_best_score);
                     worst.push_back(rec.global_worst_score);
                     for (const auto& t : rec.terms) {
                         const double sum =
                             t.r_v * h.inertia + t.r_p * h.cognitive + t.r_g * h.social + t.r_w * h.repel;
                         worst_norm = std::max(worst_norm, std::abs(sum / t.normalization - 1.0));
                         ++terms_seen;
                     }
                 });
        for (std::size_t i = 1; i < best.size(); ++i) {
            best_ok &= best[i] >= best[i - 1];
            worst_ok &= worst[i] <= worst[i - 1];
        }
    }
    v.require(best_ok, "global best decreased");
    v.require(worst_ok, "global worst increased");
    v.require(terms_seen > 0, "no velocity terms recorded");
    v.require(worst_norm <= 1e-12, "normalization off by " + fmt(worst_norm));
    v.note(std::to_string(terms_seen) + " velocity terms, max normalization error " + fmt(worst_norm, 3));
    return v;
}

// 5 ---------------------------------------------------------------------------
Verdict bit_reproducible() {
    Verdict v;
    const auto root = std::filesystem::temp_directory_path() /
                      ("dswarm_accept_" + std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    std::vector<std::vector<std::uint8_t>> reports;
    for (int k = 0; k < 2; ++k) {
        const auto dir = root / std::to_string(k);
        std::filesystem::create_directories(dir);
        std::ostringstream out, err;
        const int code = run_cli({"--testbed", "--seed", "7", "--out", dir.string(), "optimize"}, out, err);
        v.require(code == 0, "optimize exited " + std::to_string(code) + ": " + err.str());
        if (code == 0) reports.push_back(read_bytes(dir / "report.json"));
    }
    v.require(RunConfig{}.threads > 1, "default configuration does not evaluate particles in parallel");
    v.require(reports.size() == 2 && reports[0] == reports[1], "report bytes differ");
    if (!reports.empty()) v.note(std::to_string(reports[0].size()) + " identical bytes, threads " +
                                 std::to_string(RunConfig{}.threads));
    std::filesystem::remove_all(root);
    return v;
}

// 6 ---------------------------------------------------------------------------
Verdict data_swarms_testbed() {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig rc;
    rc.testbed.noise = 0.0;
    rc.testbed.feature_dim = 4;
    rc.testbed.sharpness = 8.0;
    rc.testbed.taker_skills = {0.4, 0.55, 0.7, 0.85};
    rc.generators = 4;
    rc.pso.max_iteration = 30;
    rc.pso.patience = 5;
    rc.objective = ObjectiveSpec::single(ObjectiveKind::difficult);

    // Best achievable difficulty: every feature at 1 against the strongest taker.
    const double bound = 1.0 - logistic_oracle(8.0 * (0.85 - 1.0));
    int near_bound = 0, improved = 0;
    std::string finals;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        World w = build_testbed_world(rc, seed);
        const auto res = run_data_swarms(w.data_config(rc), w.generators, w.takers, *w.judge, seed);
        const double initial = res.trace.front().global_best_score;
        const double final = res.best_report.per_component.at(ObjectiveKind::difficult);
        near_bound += std::abs(final - bound) <= 0.02;
        improved += final > initial;
        finals += (finals.empty() ? "" : ",") + fmt(final, 4);
    }
    const double secs = seconds_since(t0);
    v.require(near_bound == 5, std::to_string(near_bound) + "/5 seeds within 0.02 of bound " + fmt(bound));
    v.require(improved >= 4, std::to_string(improved) + "/5 seeds above the initial best");
    v.require(secs < 30.0, "took " + fmt(secs) + " s");
    v.note("bound " + fmt(bound) + ", finals [" + finals + "], improved " + std::to_string(improved) + "/5");
    return v;
}

// 7 ---------------------------------------------------------------------------
Verdict adversarial_testbed() {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig rc;
    rc.adversarial.max_iteration = 20;
    rc.adversarial.window = 3;
    int held = 0;
    bool audit_clean = true;
    std::string deltas;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        World w = build_testbed_world(rc, seed);
        std::set<std::string> held_ids;
        for (const auto& inst : w.held_out.instances) held_ids.insert(inst.id);
        try {
            const auto res = run_adversarial(rc.adversarial, w.generators, w.takers, *w.judge, w.held_out, seed);
            const double first = res.trace.front().held_out_performance;
            const double last = res.trace.back().held_out_performance;
            held += last >= first;
            deltas += (deltas.empty() ? "" : ",") + fmt(last - first, 3);
            for (const auto& rec : res.trace) audit_clean &= rec.window_iterations.size() <= rc.adversarial.window;
        } catch (const Error& e) {
            audit_clean = false;
            v.require(false, std::string("seed ") + std::to_string(seed) + ": " + e.what());
        }
        // seeded and generated ids never share a namespace with the held-out set
        for (const auto& inst : w.seed.instances) audit_clean &= !held_ids.contains(inst.id);
    }
    // The audit must be live: a colliding held-out id aborts the run.
    bool audit_fires = false;
    {
        World w = build_testbed_world(rc, 1);
        Dataset leaky = w.held_out;
        leaky.instances.front().id = w.generators.front()->id() + "/0/0";
        try {
            run_adversarial(rc.adversarial, w.generators, w.takers, *w.judge, leaky, 1);
        } catch (const Error& e) {
            audit_fires = e.code() == ErrorCode::Audit;
        }
    }
    const double secs = seconds_since(t0);
    v.require(held >= 4, std::to_string(held) + "/5 seeds kept or improved held-out performance");
    v.require(audit_clean, "held-out audit violated");
    v.require(audit_fires, "injected held-out id was not caught");
    v.require(secs < 60.0, "took " + fmt(secs) + " s");
    v.note("held-out final-initial [" + deltas + "], " + std::to_string(held) + "/5");
    return v;
}

// 8 ---------------------------------------------------------------------------
Verdict kmeans_blobs() {
    Verdict v;
    double worst_acc = 1.0;
    bool sse_ok = true;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        RngStream r = RngStream(seed).child(99);
        const double centers[4][2] = {{0, 0}, {5, 0}, {0, 5}, {5, 5}};
        Eigen::MatrixXd pts(200, 2);
        std::vector<int> truth(200);
        for (int c = 0; c < 4; ++c)
            for (int j = 0; j < 50; ++j) {
                pts(c * 50 + j, 0) = centers[c][0] + 0.05 * r.next_normal();
                pts(c * 50 + j, 1) = centers[c][1] + 0.05 * r.next_normal();
                truth[c * 50 + j] = c;
            }
        const auto a = kmeans(pts, 4, RngStream(seed).child(stream::kCluster));
        std::array<int, 4> perm{0, 1, 2, 3};
        int best = 0;
        do {
            int hits = 0;
            for (int i = 0; i < 200; ++i) hits += perm[a.labels[i]] == truth[i];
            best = std::max(best, hits);
        } while (std::next_permutation(perm.begin(), perm.end()));
        worst_acc = std::min(worst_acc, best / 200.0);
        for (std::size_t i = 1; i < a.objective_trace.size(); ++i)
            sse_ok &= a.objective_trace[i] <= a.objective_trace[i - 1];
    }
    v.require(worst_acc >= 0.95, "accuracy " + fmt(worst_acc));
    v.require(sse_ok, "within-cluster objective increased");
    v.note("worst best-permutation accuracy " + fmt(worst_acc));
    return v;
}

// 9 ---------------------------------------------------------------------------
SwarmState random_swarm(RngStream& r) {
    SwarmState s;
    const auto dim = static_cast<Eigen::Index>(1 + r.next_below(16));
    auto vec = [&] {
        ParamVector x(dim);
        for (auto& e : x) e = r.next_normal() * std::pow(10.0, static_cast<double>(r.next_below(12)) - 6);
        return x;
    };
    for (std::uint64_t i = 0, n = 1 + r.next_below(10); i < n; ++i)
        s.particles.push_back({vec(), vec(), vec(), r.next_below(6) ? r.next_normal() : -INFINITY});
    if (r.next_below(5)) {
        s.global_best = vec();
        s.global_best_score = r.next_normal();
        s.global_worst = vec();
        s.global_worst_score = r.next_normal();
    }
    s.iteration = static_cast<std::uint32_t>(r.next_below(100000));
    s.stagnation = static_cast<std::uint32_t>(r.next_below(100));
    return s;
}

Verdict persistence() {
    Verdict v;
    const auto dir = std::filesystem::temp_directory_path() /
                     ("dswarm_persist_" + std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    std::filesystem::create_directories(dir);
    RngStream r(909);
    int exact = 0;
    for (int t = 0; t < 100; ++t) {
        const SwarmState s = random_swarm(r);
        write_checkpoint(dir / "s.dswm", s, {"abc", 7, "optimize"});
        const auto bytes = read_bytes(dir / "s.dswm");
        const SwarmState back = read_checkpoint(dir / "s.dswm");
        exact += bit_equal(s, back) && encode_checkpoint(back) == bytes;
    }
    v.require(exact == 100, std::to_string(exact) + "/100 checkpoints round-tripped bit-exactly");

    int datasets_equal = 0;
    for (int t = 0; t < 20; ++t) {
        Dataset d;
        for (std::uint64_t j = 0, n = 1 + r.next_below(30); j < n; ++j) {
            EvalInstance inst{"i" + std::to_string(j), "q \"" + std::to_string(r.next_uniform()) + "\"\n\t\xc3\xa9",
                              std::nullopt, std::nullopt, {}};
            if (r.next_below(2)) inst.reference_answer = std::to_string(r.next_below(100));
            if (r.next_below(2)) inst.features = uniform_vector(r, 4);
            if (r.next_below(2)) inst.meta["generator"] = "g" + std::to_string(r.next_below(4));
            d.instances.push_back(std::move(inst));
        }
        write_dataset(dir / "d.jsonl", d);
        datasets_equal += read_dataset(dir / "d.jsonl").instances == d.instances;
    }
    v.require(datasets_equal == 20, std::to_string(datasets_equal) + "/20 datasets round-tripped");

    // Corruption reports where it happened.
    const SwarmState s = random_swarm(r);
    auto bytes = encode_checkpoint(s);
    bytes.resize(bytes.size() - 5);
    std::optional<std::size_t> offset;
    try {
        decode_checkpoint(bytes);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::TruncatedFile) offset = e.index();
    }
    v.require(offset && *offset <= bytes.size() && *offset + 8 > bytes.size(),
              "truncated checkpoint lacks a plausible byte offset");

    write_text(dir / "bad.jsonl", "{\"id\":\"a\",\"query\":\"q\"}\n{\"id\":\"b\",\"query\":\"q\"}\n{\"id\":3}\n");
    std::optional<std::size_t> line;
    try {
        read_dataset(dir / "bad.jsonl");
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Parse) line = e.index();
    }
    v.require(line == std::optional<std::size_t>(3), "bad JSONL line not reported as line 3");
    bool bad_magic = false;
    try {
        auto b = encode_checkpoint(s);
        std::copy_n("XXXX", 4, b.begin());
        decode_checkpoint(b);
    } catch (const Error& e) {
        bad_magic = e.code() == ErrorCode::BadMagic;
    }
    v.require(bad_magic, "bad magic not detected");
    if (offset) v.note("truncation at byte " + std::to_string(*offset) + ", parse error at line 3");
    std::filesystem::remove_all(dir);
    return v;
}

// 10 --------------------------------------------------------------------------
Verdict transfer_matches() {
    Verdict v;
    double worst = 0;
    for (const bool with_separate : {false, true}) {
        RunConfig rc;
        if (with_separate)
            rc.objective.components = {{ObjectiveKind::difficult, 0.6}, {ObjectiveKind::separate, 0.4}};
        World w = build_testbed_world(rc, 7);
        const auto res = run_data_swarms(w.data_config(rc), w.generators, w.takers, *w.judge, 7);
        const auto t = transfer_eval(res.best_dataset, w.takers, *w.judge, rc.objective);
        for (const auto& [kind, value] : res.best_report.per_component) {
            if (!t.per_component.contains(kind)) {
                v.require(false, std::string("transfer report lacks ") + std::string(to_string(kind)));
                continue;
            }
            worst = std::max(worst, std::abs(t.per_component.at(kind) - value));
        }
        worst = std::max(worst, std::abs(t.composite - res.best_report.composite));
    }
    v.require(worst <= 1e-12, "max deviation " + fmt(worst));
    v.note("max deviation " + fmt(worst, 3));
    return v;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
        {"objective identities", objective_identities},
        {"composite weighting", composite_weighting},
        {"sphere convergence", sphere_convergence},
        {"monotone traces and velocity normalization", monotone_and_normalized},
        {"bit-reproducible optimize", bit_reproducible},
        {"data swarms on the testbed", data_swarms_testbed},
        {"adversarial swarms on the testbed", adversarial_testbed},
        {"k-means on gaussian blobs", kmeans_blobs},
        {"persistence", persistence},
        {"transfer evaluation", transfer_matches},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v.require(false, std::string("threw: ") + e.what());
        }
        failed += !v.pass;
        std::printf("criterion %2zu %s: %s [%.3f s] %s\n", i + 1, v.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                    seconds_since(t0), v.detail.c_str());
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
    return failed ? 1 : 0;
}
