#include "dswarm/cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "dswarm/adversarial.hpp"
#include "dswarm/config.hpp"
#include "dswarm/dataswarms.hpp"
#include "dswarm/io.hpp"
#include "dswarm/report.hpp"
#include "dswarm/seeding.hpp"

namespace dswarm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    bool testbed = false;
};

std::string shortest(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

/// "difficult" or "difficult=0.6,separate=0.2,novel=0.2".
ObjectiveSpec parse_objective_arg(const std::string& text, ObjectiveSpec base) {
    base.components.clear();
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = std::min(text.find(',', start), text.size());
        const std::string item = text.substr(start, comma - start);
        const auto eq = item.find('=');
        ObjectiveComponent c{parse_objective_kind(item.substr(0, eq)), 1.0};
        if (eq != std::string::npos) {
            const std::string w = item.substr(eq + 1);
            auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), c.weight);
            if (ec != std::errc() || p != w.data() + w.size())
                throw Error(ErrorCode::InvalidArgument, "bad objective weight '" + w + "'");
        }
        base.components.push_back(c);
        start = comma + 1;
    }
    base.validate();
    return base;
}

Eigen::MatrixXd read_matrix(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_text(path));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, "'" + path.string() + "': " + e.what());
    }
    const json& rows = j.is_object() ? j.at("scores") : j;
    if (!rows.is_array() || rows.empty() || !rows.front().is_array() || rows.front().empty())
        throw Error(ErrorCode::Parse, "'" + path.string() + "': scores must be a non-empty array of rows");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (!rows[r].is_array() || rows[r].size() != rows.front().size())
            throw Error(ErrorCode::Parse, "'" + path.string() + "': row " + std::to_string(r) + " has the wrong length");
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            if (!rows[r][c].is_number())
                throw Error(ErrorCode::Parse, "'" + path.string() + "': entry (" + std::to_string(r) + "," +
                                                  std::to_string(c) + ") is not a number");
            const double v = rows[r][c].get<double>();
            if (!(v >= 0.0 && v <= 1.0))
                throw Error(ErrorCode::OutOfRange, "'" + path.string() + "': entry (" + std::to_string(r) + "," +
                                                       std::to_string(c) + ") is outside [0,1]");
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
        }
    }
    return m;
}

Eigen::VectorXd read_vector(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_text(path));
        const auto v = j.get<std::vector<double>>();
        return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, "'" + path.string() + "': " + e.what());
    }
}

void print_report(std::ostream& out, const ObjectiveReport& report) {
    if (report.per_component.size() == 1) {
        out << shortest(report.composite) << '\n';
        return;
    }
    for (const auto& [k, v] : report.per_component) out << to_string(k) << ' ' << shortest(v) << '\n';
    out << "composite " << shortest(report.composite) << '\n';
}

class Session {
public:
    Session(const Globals& g, std::ostream& out) : g_(g), out_(out) {
        if (!g.config.empty()) cfg_ = load_config(g.config);
        if (g.seed) cfg_.seed = *g.seed;
        cfg_.validate();
    }

    const RunConfig& cfg() const { return cfg_; }
    RunConfig& cfg() { return cfg_; }
    std::uint64_t seed() const { return cfg_.seed; }

    World world() const { return g_.testbed ? build_testbed_world(cfg_, seed()) : build_remote_world(cfg_, seed()); }

    fs::path out_dir() const {
        fs::create_directories(g_.out);
        return g_.out;
    }

    std::ostream& out() { return out_; }

private:
    const Globals& g_;
    std::ostream& out_;
    RunConfig cfg_;
};

Eigen::MatrixXd feature_matrix(const Dataset& data) {
    for (std::size_t i = 0; i < data.size(); ++i)
        if (!data.instances[i].features)
            throw Error(ErrorCode::MissingFeatures, "instance '" + data.instances[i].id + "' has no features", i);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(data.size()), data.instances.front().features->size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data.instances[i].features->size() != m.cols())
            throw Error(ErrorCode::DimMismatch, "feature dims differ", i);
        m.row(static_cast<Eigen::Index>(i)) = *data.instances[i].features;
    }
    return m;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Data generator swarms: optimize synthetic evaluation data with particle swarms", "dswarm"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "master seed (overrides the config)");
    app.add_option("--out", g.out, "output directory")->capture_default_str();
    app.add_flag("--testbed", g.testbed, "use the built-in closed-form testbed instead of remote endpoints");

    // cluster
    auto* cluster = app.add_subcommand("cluster", "k-means a seed JSONL into cluster files");
    std::string cluster_input;
    std::optional<std::size_t> cluster_count;
    std::string cluster_by = "embedding";
    cluster->add_option("--input", cluster_input, "seed JSONL (default: the testbed seed set)");
    cluster->add_option("--clusters", cluster_count, "number of clusters (default: generators in config)");
    cluster->add_option("--by", cluster_by, "embedding or features")->check(CLI::IsMember({"embedding", "features"}));

    // prompts
    auto* prompts = app.add_subcommand("prompts", "build self-instruct prompt pairs from a cluster file");
    std::string prompts_cluster;
    std::size_t prompts_k = 5, prompts_count = 10;
    std::optional<std::string> prompts_domain;
    prompts->add_option("--cluster", prompts_cluster, "cluster JSONL")->required()->check(CLI::ExistingFile);
    prompts->add_option("--k", prompts_k, "examples per side")->capture_default_str();
    prompts->add_option("--count", prompts_count, "prompt pairs to build")->capture_default_str();
    prompts->add_option("--domain", prompts_domain, "domain tag (default: config domain)");

    // optimize
    auto* optimize = app.add_subcommand("optimize", "run the data generator swarm");
    std::string resume;
    optimize->add_option("--resume", resume, "checkpoint to continue from")->check(CLI::ExistingFile);

    // adversarial
    auto* adversarial = app.add_subcommand("adversarial", "co-evolve generators and test takers");

    // objectives
    auto* objectives = app.add_subcommand("objectives", "objective report for a performance matrix or dataset");
    std::string obj_perf, obj_dataset, obj_baseline, obj_spec;
    auto* perf_opt = objectives->add_option("--perf", obj_perf, "performance matrix JSON (rows are takers)")
                         ->check(CLI::ExistingFile);
    auto* ds_opt = objectives->add_option("--dataset", obj_dataset, "dataset JSONL scored by the configured takers")
                       ->check(CLI::ExistingFile);
    perf_opt->excludes(ds_opt);
    objectives->add_option("--objective", obj_spec, "e.g. difficult or difficult=0.6,separate=0.2,novel=0.2");
    objectives->add_option("--baseline", obj_baseline, "baseline per-taker performance JSON array (novel with --perf)")
        ->check(CLI::ExistingFile);

    // transfer
    auto* transfer = app.add_subcommand("transfer", "difficult/separate of a dataset on the transfer takers");
    std::string transfer_dataset;
    transfer->add_option("--dataset", transfer_dataset, "dataset JSONL")->required()->check(CLI::ExistingFile);

    // grid
    auto* grid = app.add_subcommand("grid", "random search over the hyperparameter grid");
    std::optional<std::size_t> grid_budget;
    grid->add_option("--budget", grid_budget, "runs (default: config grid budget)");

    // report
    auto* report = app.add_subcommand("report", "validate a run report and render its table and curves");
    std::string report_path;
    report->add_option("report", report_path, "report.json")->required()->check(CLI::ExistingFile);

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    for (std::size_t i = 0; i < args.size(); ++i) {
        const auto& a = args[i];
        if (a.starts_with("-")) {
            if ((a == "--config" || a == "--seed" || a == "--out") && i + 1 < args.size()) ++i;
            continue;
        }
        const auto subs = app.get_subcommands({});
        if (std::none_of(subs.begin(), subs.end(), [&](const CLI::App* sub) { return sub->check_name(a); })) {
            err << "error: unknown subcommand '" << a << "'\n\n" << app.help();
            return 1;
        }
        break;
    }

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        Session s(g, out);
        std::optional<DirectoryLock> lock;
        auto locked_out = [&] {
            const auto dir = s.out_dir();
            if (!lock) lock.emplace(dir);
            return dir;
        };

        if (cluster->parsed()) {
            const std::size_t n = cluster_count.value_or(s.cfg().generators);
            Dataset seed_data;
            if (!cluster_input.empty()) seed_data = read_dataset(cluster_input);
            else if (g.testbed) seed_data = s.world().seed;
            else throw CLI::RequiredError("--input");
            const RngStream rng = RngStream(s.seed()).child(stream::kCluster);
            const Eigen::MatrixXd points =
                cluster_by == "features" ? feature_matrix(seed_data)
                                         : embed_queries(HashedNgramEmbedder(s.cfg().embed_dim, s.cfg().ngram), seed_data);
            const auto assignment = kmeans(points, n, rng, s.cfg().kmeans_max_iters);
            const auto parts = split_by_cluster(seed_data, assignment);
            const auto dir = locked_out();
            for (std::size_t c = 0; c < parts.size(); ++c) {
                write_dataset(dir / ("cluster_" + std::to_string(c) + ".jsonl"), parts[c]);
                out << "cluster " << c << ": " << parts[c].size() << " instances\n";
            }
            return 0;
        }

        if (prompts->parsed()) {
            const Dataset data = read_dataset(prompts_cluster);
            const auto pairs = build_training_prompts(data, prompts_k, prompts_count,
                                                      prompts_domain.value_or(s.cfg().domain),
                                                      RngStream(s.seed()).child(stream::kPrompts));
            std::string text;
            for (const auto& p : pairs) text += json{{"prompt", p.prompt}, {"completion", p.completion}}.dump() + "\n";
            const auto dir = locked_out();
            write_text(dir / "prompts.jsonl", text);
            out << pairs.size() << " prompt pairs\n";
            return 0;
        }

        if (optimize->parsed()) {
            World w = s.world();
            const auto dir = locked_out();
            const std::string hash = config_hash(s.cfg());
            const CheckpointMeta meta{hash, s.seed(), "optimize"};
            std::optional<SwarmState> state;
            if (!resume.empty()) {
                const auto stored = read_checkpoint_meta(resume);
                if (stored.config_hash != hash || stored.seed != s.seed() || stored.kind != meta.kind)
                    throw Error(ErrorCode::ConfigMismatch, "checkpoint '" + resume + "' was written by config " +
                                                               stored.config_hash + " seed " +
                                                               std::to_string(stored.seed) + "; loaded config is " +
                                                               hash + " seed " + std::to_string(s.seed()));
                state = read_checkpoint(resume);
            }
            DataSwarmConfig dcfg = w.data_config(s.cfg());
            const fs::path checkpoint = dir / "checkpoint.dswm";
            dcfg.on_iteration = [&](const SwarmState& st) { write_checkpoint(checkpoint, st, meta); };
            const auto result = run_data_swarms(dcfg, w.generators, w.takers, *w.judge, s.seed(), std::move(state));
            write_text(dir / "report.json", dump_report(optimize_report(s.cfg(), s.seed(), result)));
            write_text(dir / "report.timing.json", dump_report(timing_report(result)));
            write_dataset(dir / "best.jsonl", result.best_dataset);
            out << "best composite " << shortest(result.best_report.composite) << " after " << result.state.iteration
                << " iterations\n";
            return 0;
        }

        if (adversarial->parsed()) {
            World w = s.world();
            const auto dir = locked_out();
            AdversarialConfig acfg = s.cfg().adversarial;
            acfg.threads = s.cfg().threads;
            const auto result = run_adversarial(acfg, w.generators, w.takers, *w.judge, w.held_out, s.seed());
            const std::string hash = config_hash(s.cfg());
            write_checkpoint(dir / "data.dswm", result.data_state, {hash, s.seed(), "adversarial-data"});
            write_checkpoint(dir / "model.dswm", result.model_state, {hash, s.seed(), "adversarial-model"});
            write_text(dir / "report.json", dump_report(adversarial_report(s.cfg(), s.seed(), result)));
            write_text(dir / "report.timing.json", dump_report(timing_report(result)));
            out << "held-out " << shortest(result.trace.front().held_out_performance) << " -> "
                << shortest(result.trace.back().held_out_performance) << " over " << result.trace.size() - 1
                << " iterations\n";
            return 0;
        }

        if (objectives->parsed()) {
            const ObjectiveSpec spec = obj_spec.empty() ? s.cfg().objective : parse_objective_arg(obj_spec, s.cfg().objective);
            if (!obj_perf.empty()) {
                const Eigen::MatrixXd m = read_matrix(obj_perf);
                const Eigen::VectorXd per_taker = m.rowwise().mean();
                std::map<ObjectiveKind, double> values;
                for (const auto& c : spec.components) {
                    switch (c.kind) {
                        case ObjectiveKind::difficult: values[c.kind] = difficult(per_taker); break;
                        case ObjectiveKind::separate: values[c.kind] = separate(per_taker); break;
                        case ObjectiveKind::consistent: values[c.kind] = consistent(m); break;
                        case ObjectiveKind::novel:
                            if (obj_baseline.empty()) throw CLI::RequiredError("--baseline");
                            values[c.kind] = novel(per_taker, read_vector(obj_baseline));
                            break;
                        case ObjectiveKind::personalized:
                            throw Error(ErrorCode::InvalidArgument, "personalized needs --dataset, not --perf");
                    }
                }
                print_report(out, composite(spec, values));
                return 0;
            }
            if (obj_dataset.empty()) throw CLI::RequiredError("--perf or --dataset");
            World w = s.world();
            DataSwarmConfig dcfg = w.data_config(s.cfg());
            dcfg.objective = spec;
            const ObjectiveEvaluator evaluator(dcfg, w.takers, *w.judge);
            print_report(out, evaluator.evaluate_samples({read_dataset(obj_dataset)}).report);
            return 0;
        }

        if (transfer->parsed()) {
            World w = s.world();
            if (w.transfer_takers.empty()) throw Error(ErrorCode::EmptyInput, "no transfer takers configured");
            const auto r = transfer_eval(read_dataset(transfer_dataset), w.transfer_takers, *w.judge);
            for (const auto& [k, v] : r.per_component) out << to_string(k) << ' ' << shortest(v) << '\n';
            return 0;
        }

        if (grid->parsed()) {
            World w = s.world();
            const auto dir = locked_out();
            const auto result = grid_search(w.data_config(s.cfg()), w.generators, w.takers, *w.judge, s.cfg().grid,
                                            grid_budget.value_or(s.cfg().grid_budget), s.seed());
            write_text(dir / "grid.json", dump_report(grid_report(s.cfg(), s.seed(), result)));
            write_dataset(dir / "best.jsonl", result.best_run().result.best_dataset);
            out << result.runs.size() << " runs; best grid point " << result.best_run().grid_index << " composite "
                << shortest(result.best_run().result.best_report.composite) << '\n';
            return 0;
        }

        if (report->parsed()) {
            json j;
            try {
                j = json::parse(read_text(report_path));
            } catch (const json::exception& e) {
                throw Error(ErrorCode::Parse, "'" + report_path + "': " + e.what());
            }
            validate_report(j);
            out << render_table(j);
            if (app.get_option("--out")->count() > 0) {
                const auto dir = locked_out();
                write_text(dir / "curves.csv", render_curves_csv(j));
            }
            return 0;
        }
    } catch (const CLI::ParseError& e) {
        err << "error: missing " << e.what() << "\n\n" << app.help();
        return 1;
    } catch (const Error& e) {
        err << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    err << app.help();
    return 1;
}

}  // namespace dswarm
