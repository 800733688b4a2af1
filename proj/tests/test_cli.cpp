#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include <json.hpp>

#include "dswarm/cli.hpp"
#include "dswarm/io.hpp"
#include "support.hpp"

using namespace dswarm;
using nlohmann::json;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string fixture(const std::string& name) { return std::string(DSWARM_FIXTURE_DIR) + "/" + name; }

// Small but complete testbed configuration.
std::filesystem::path write_small_config(const std::filesystem::path& dir, int max_iteration = 4) {
    const json cfg = {{"instances_per_iteration", 30},
                      {"pso", {{"max_iteration", max_iteration}, {"patience", 100}}},
                      {"adversarial", {{"instances_per_generator", 20}, {"max_iteration", 3}}},
                      {"grid_budget", 2}};
    const auto path = dir / "config.json";
    write_text(path, cfg.dump(2));
    return path;
}

}  // namespace

TEST_CASE("objectives on a performance matrix") {
    auto r = run({"objectives", "--perf", fixture("perf_matrix.json")});
    CHECK(r.code == 0);
    CHECK(r.out == "0.5\n");

    r = run({"objectives", "--perf", fixture("perf_matrix.json"), "--objective", "separate"});
    CHECK(r.code == 0);
    // per-taker means 0.2, 0.5, 0.3
    CHECK(std::stod(r.out) == doctest::Approx(0.15));

    r = run({"objectives", "--perf", fixture("perf_matrix.json"), "--objective", "difficult=0.5,consistent=0.5"});
    CHECK(r.code == 0);
    CHECK(r.out.find("difficult 0.5") != std::string::npos);
    CHECK(r.out.find("composite") != std::string::npos);
}

TEST_CASE("usage errors exit 1") {
    auto r = run({"frobnicate"});
    CHECK(r.code == 1);
    CHECK(r.err.find("frobnicate") != std::string::npos);
    CHECK(run({}).code == 1);
    CHECK(run({"objectives", "--objective", "difficult"}).code == 1);
    CHECK(run({"optimize", "--bogus-flag"}).code == 1);
    CHECK(run({"--seed", "notanumber", "optimize"}).code == 1);
}

TEST_CASE("runtime errors exit 2") {
    const auto dir = test::scratch_dir("cli");
    write_text(dir / "bad.json", "[[0.2, 1.7]]");
    auto r = run({"objectives", "--perf", (dir / "bad.json").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("OutOfRange") != std::string::npos);
    std::filesystem::remove_all(dir);
}

TEST_CASE("optimize is byte reproducible and resumable") {
    const auto dir = test::scratch_dir("cli");
    const auto cfg = write_small_config(dir);
    const auto a = dir / "a", b = dir / "b";
    std::filesystem::create_directories(a);
    std::filesystem::create_directories(b);
    REQUIRE(run({"--config", cfg.string(), "--testbed", "--seed", "7", "--out", a.string(), "optimize"}).code == 0);
    REQUIRE(run({"--config", cfg.string(), "--testbed", "--seed", "7", "--out", b.string(), "optimize"}).code == 0);
    for (const char* f : {"report.json", "best.jsonl", "checkpoint.dswm", "checkpoint.dswm.meta.json"})
        CHECK(read_bytes(a / f) == read_bytes(b / f));
    CHECK(std::filesystem::exists(a / "report.timing.json"));
    CHECK_FALSE(std::filesystem::exists(a / ".dswarm.lock"));

    const auto report = json::parse(read_text(a / "report.json"));
    CHECK(report.at("seed") == 7);
    CHECK(report.at("kind") == "optimize");
    CHECK_NOTHROW(read_dataset(a / "best.jsonl"));

    // Resuming with the same config continues; a different config is refused.
    const auto c = dir / "c";
    std::filesystem::create_directories(c);
    CHECK(run({"--config", cfg.string(), "--testbed", "--seed", "7", "--out", c.string(), "optimize", "--resume",
               (a / "checkpoint.dswm").string()})
              .code == 0);
    const auto other = write_small_config(dir / "c", 5);
    auto r = run({"--config", other.string(), "--testbed", "--seed", "7", "--out", c.string(), "optimize",
                  "--resume", (a / "checkpoint.dswm").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("ConfigMismatch") != std::string::npos);
    r = run({"--config", cfg.string(), "--testbed", "--seed", "8", "--out", c.string(), "optimize", "--resume",
             (a / "checkpoint.dswm").string()});
    CHECK(r.code == 2);

    // A held lock refuses the run.
    {
        DirectoryLock lock(c);
        CHECK(run({"--config", cfg.string(), "--testbed", "--out", c.string(), "optimize"}).code == 2);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("report subcommand") {
    const auto dir = test::scratch_dir("cli");
    const auto cfg = write_small_config(dir);
    REQUIRE(run({"--config", cfg.string(), "--testbed", "--out", dir.string(), "optimize"}).code == 0);
    const auto out = dir / "curves";
    std::filesystem::create_directories(out);
    auto r = run({"--out", out.string(), "report", (dir / "report.json").string()});
    CHECK(r.code == 0);
    CHECK(r.out.find("global_best_score") != std::string::npos);
    CHECK(std::filesystem::exists(out / "curves.csv"));

    auto j = json::parse(read_text(dir / "report.json"));
    j["iterations"][1]["global_best_score"] = -1.0;
    write_text(dir / "broken.json", j.dump());
    r = run({"report", (dir / "broken.json").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("Audit") != std::string::npos);
    std::filesystem::remove_all(dir);
}

TEST_CASE("cluster, prompts, transfer, objectives on a dataset, grid and adversarial") {
    const auto dir = test::scratch_dir("cli");
    const auto cfg = write_small_config(dir);
    const std::string c = cfg.string(), o = dir.string();

    REQUIRE(run({"--config", c, "--testbed", "--out", o, "cluster", "--by", "features"}).code == 0);
    for (int k = 0; k < 4; ++k) CHECK(std::filesystem::exists(dir / ("cluster_" + std::to_string(k) + ".jsonl")));

    REQUIRE(run({"--config", c, "--out", o, "prompts", "--cluster", (dir / "cluster_0.jsonl").string(), "--k", "2",
                 "--count", "7"})
                .code == 0);
    const auto lines = read_text(dir / "prompts.jsonl");
    CHECK(std::count(lines.begin(), lines.end(), '\n') == 7);
    const auto first = json::parse(lines.substr(0, lines.find('\n')));
    CHECK(first.contains("prompt"));
    CHECK(first.contains("completion"));
    CHECK(first.at("prompt").get<std::string>().find("arithmetic") != std::string::npos);

    auto r = run({"--config", c, "--testbed", "transfer", "--dataset", (dir / "cluster_1.jsonl").string()});
    CHECK(r.code == 0);
    CHECK(r.out.find("difficult") != std::string::npos);

    r = run({"--config", c, "--testbed", "objectives", "--dataset", (dir / "cluster_1.jsonl").string()});
    CHECK(r.code == 0);
    CHECK(std::stod(r.out) >= 0.0);

    REQUIRE(run({"--config", c, "--testbed", "--out", o, "grid", "--budget", "2"}).code == 0);
    const auto grid = json::parse(read_text(dir / "grid.json"));
    CHECK(grid.at("runs").size() == 2);

    REQUIRE(run({"--config", c, "--testbed", "--out", o, "--seed", "3", "adversarial"}).code == 0);
    for (const char* f : {"data.dswm", "model.dswm", "report.json", "report.timing.json"})
        CHECK(std::filesystem::exists(dir / f));
    const auto rep = json::parse(read_text(dir / "report.json"));
    CHECK(rep.at("kind") == "adversarial");
    CHECK(run({"report", (dir / "report.json").string()}).code == 0);
    std::filesystem::remove_all(dir);
}
