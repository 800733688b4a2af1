#include "dswarm/report.hpp"

#include <cstdio>
#include <sstream>

namespace dswarm {

using nlohmann::json;

namespace {

json vec(const ParamVector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json components(const std::map<ObjectiveKind, double>& values) {
    json out = json::object();
    for (const auto& [k, v] : values) out[std::string(to_string(k))] = v;
    return out;
}

json header(const char* kind, const RunConfig& cfg, std::uint64_t seed) {
    return {{"kind", kind}, {"seed", seed}, {"config_hash", config_hash(cfg)}, {"config", to_json(cfg)}};
}

json data_iterations(const DataSwarmResult& result) {
    json its = json::array();
    for (const auto& it : result.trace) {
        json comps = json::array();
        for (const auto& c : it.particle_components) comps.push_back(components(c));
        its.push_back({{"iteration", it.iteration},
                       {"particle_composite", it.particle_composite},
                       {"particle_components", comps},
                       {"global_best_score", it.global_best_score},
                       {"global_worst_score", it.global_worst_score},
                       {"stagnation", it.stagnation},
                       {"best_components", components(it.best_components)}});
    }
    return its;
}

json data_result(const DataSwarmResult& result) {
    return {{"best_params", vec(result.best_params)},
            {"best_report", to_json(result.best_report)},
            {"best_dataset_size", result.best_dataset.size()},
            {"stopped_at", result.state.iteration}};
}

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

struct Columns {
    std::vector<std::string> names;
    std::vector<std::vector<double>> rows;
};

Columns columns(const json& report) {
    Columns c;
    const auto& its = report.at("iterations");
    if (its.empty()) return c;
    const auto& first = its.front();
    std::vector<std::string> scalar_keys;
    for (const auto& [k, v] : first.items())
        if (k != "iteration" && v.is_number()) scalar_keys.push_back(k);
    std::vector<std::string> best_keys;
    if (first.contains("best_components"))
        for (const auto& [k, v] : its.back().at("best_components").items()) best_keys.push_back(k);

    c.names.push_back("iteration");
    for (const auto& k : scalar_keys) c.names.push_back(k);
    for (const auto& k : best_keys) c.names.push_back("best_" + k);
    for (const auto& it : its) {
        std::vector<double> row{it.at("iteration").get<double>()};
        for (const auto& k : scalar_keys) row.push_back(it.at(k).get<double>());
        for (const auto& k : best_keys) {
            const auto& b = it.at("best_components");
            row.push_back(b.contains(k) ? b.at(k).get<double>() : std::nan(""));
        }
        c.rows.push_back(std::move(row));
    }
    return c;
}

bool is_integral_column(const std::string& name) { return name == "iteration" || name == "stagnation"; }

}  // namespace

json to_json(const ObjectiveReport& report) {
    return {{"components", components(report.per_component)}, {"composite", report.composite}};
}

json optimize_report(const RunConfig& cfg, std::uint64_t seed, const DataSwarmResult& result) {
    json r = header("optimize", cfg, seed);
    r["iterations"] = data_iterations(result);
    r["result"] = data_result(result);
    return r;
}

json adversarial_report(const RunConfig& cfg, std::uint64_t seed, const AdversarialResult& result) {
    json r = header("adversarial", cfg, seed);
    json its = json::array();
    for (const auto& it : result.trace)
        its.push_back({{"iteration", it.iteration},
                       {"data_scores", it.data_scores},
                       {"model_scores", it.model_scores},
                       {"global_best_score", it.data_best},
                       {"model_best_score", it.model_best},
                       {"window_performance", it.window_performance},
                       {"held_out_performance", it.held_out_performance},
                       {"stagnation", it.stagnation},
                       {"window_iterations", it.window_iterations}});
    r["iterations"] = its;
    r["result"] = {{"data_best", vec(result.data_best)},
                   {"data_best_score", result.data_best_score},
                   {"model_best", vec(result.model_best)},
                   {"model_best_score", result.model_best_score},
                   {"held_out_initial", result.trace.front().held_out_performance},
                   {"held_out_final", result.trace.back().held_out_performance}};
    return r;
}

json grid_report(const RunConfig& cfg, std::uint64_t seed, const GridSearchResult& result) {
    json r = header("grid", cfg, seed);
    json runs = json::array();
    for (const auto& run : result.runs)
        runs.push_back({{"grid_index", run.grid_index},
                        {"hyper", to_json(run.hyper)},
                        {"final_composite", run.result.best_report.composite},
                        {"stopped_at", run.result.state.iteration}});
    r["runs"] = runs;
    r["best"] = result.best;
    r["iterations"] = data_iterations(result.best_run().result);
    r["result"] = data_result(result.best_run().result);
    return r;
}

json timing_report(const DataSwarmResult& result) {
    json t = json::array();
    for (const auto& it : result.trace) t.push_back({{"iteration", it.iteration}, {"wall_seconds", it.wall_seconds}});
    return {{"iterations", t}};
}

json timing_report(const AdversarialResult& result) {
    json t = json::array();
    for (const auto& it : result.trace) t.push_back({{"iteration", it.iteration}, {"wall_seconds", it.wall_seconds}});
    return {{"iterations", t}};
}

std::string dump_report(const json& report) { return report.dump(2) + "\n"; }

void validate_report(const json& report) {
    auto fail = [](const std::string& what) { return Error(ErrorCode::Parse, "run report: " + what); };
    if (!report.is_object()) throw fail("not a JSON object");
    if (!report.contains("kind") || !report.at("kind").is_string()) throw fail("missing string field \"kind\"");
    if (!report.contains("iterations") || !report.at("iterations").is_array())
        throw fail("missing array field \"iterations\"");
    const auto& its = report.at("iterations");
    if (its.empty()) throw fail("no iterations recorded");

    std::optional<std::uint64_t> last_it;
    std::map<std::string, double> last_best;
    for (std::size_t i = 0; i < its.size(); ++i) {
        const auto& it = its[i];
        if (!it.is_object() || !it.contains("iteration") || !it.at("iteration").is_number_integer() ||
            it.at("iteration").get<std::int64_t>() < 0)
            throw fail("record " + std::to_string(i) + " lacks a non-negative integer \"iteration\"");
        const auto t = it.at("iteration").get<std::uint64_t>();
        if (last_it && t <= *last_it)
            throw Error(ErrorCode::Audit, "run report: iteration " + std::to_string(t) + " does not follow " +
                                              std::to_string(*last_it), i);
        last_it = t;
        for (const char* key : {"global_best_score", "model_best_score"}) {
            if (!it.contains(key)) {
                if (std::string(key) == "global_best_score") throw fail("record " + std::to_string(i) + " lacks \"" + key + "\"");
                continue;
            }
            if (!it.at(key).is_number()) throw fail(std::string("\"") + key + "\" is not a number");
            const double v = it.at(key).get<double>();
            if (last_best.contains(key) && v < last_best[key])
                throw Error(ErrorCode::Audit, std::string("run report: ") + key + " decreases at iteration " +
                                                  std::to_string(t),
                            i);
            last_best[key] = v;
        }
    }
}

std::string render_table(const json& report) {
    const auto c = columns(report);
    std::vector<std::size_t> width;
    for (const auto& n : c.names) width.push_back(std::max<std::size_t>(n.size(), 10));
    std::ostringstream os;
    for (std::size_t k = 0; k < c.names.size(); ++k) {
        if (k) os << "  ";
        os << std::string(width[k] - c.names[k].size(), ' ') << c.names[k];
    }
    os << '\n';
    for (const auto& row : c.rows) {
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (k) os << "  ";
            const std::string cell =
                is_integral_column(c.names[k]) ? std::to_string(static_cast<long long>(row[k])) : format_number(row[k]);
            os << std::string(width[k] > cell.size() ? width[k] - cell.size() : 0, ' ') << cell;
        }
        os << '\n';
    }
    return os.str();
}

std::string render_curves_csv(const json& report) {
    const auto c = columns(report);
    std::ostringstream os;
    for (std::size_t k = 0; k < c.names.size(); ++k) os << (k ? "," : "") << c.names[k];
    os << '\n';
    for (const auto& row : c.rows) {
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (k) os << ',';
            if (is_integral_column(c.names[k])) {
                os << static_cast<long long>(row[k]);
            } else {
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.17g", row[k]);
                os << buf;
            }
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace dswarm
