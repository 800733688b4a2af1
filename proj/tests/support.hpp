#pragma once

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <string>

#include "dswarm/core.hpp"
#include "dswarm/error.hpp"

namespace dswarm::test {

template <typename F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::Audit;
}

template <typename F>
Error error_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e;
    }
    FAIL("expected an Error");
    return Error(ErrorCode::Audit, "unreachable");
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
    std::random_device rd;
    auto dir = std::filesystem::temp_directory_path() / ("dswarm_" + tag + "_" + std::to_string(rd()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Random swarm; roughly one in four carries unset global vectors.
inline SwarmState random_swarm(RngStream& r) {
    SwarmState s;
    const auto dim = static_cast<Eigen::Index>(1 + r.next_below(12));
    const auto n = 1 + r.next_below(9);
    auto vec = [&] {
        ParamVector v(dim);
        for (auto& x : v) x = (r.next_uniform() - 0.5) * std::pow(10.0, static_cast<double>(r.next_below(10)) - 5);
        return v;
    };
    for (std::size_t i = 0; i < n; ++i) {
        Particle p{vec(), vec(), vec(), r.next_normal()};
        if (r.next_below(5) == 0) p.personal_best_score = -std::numeric_limits<double>::infinity();
        s.particles.push_back(std::move(p));
    }
    if (r.next_below(4) != 0) {
        s.global_best = vec();
        s.global_best_score = r.next_normal();
        s.global_worst = vec();
        s.global_worst_score = r.next_normal() - 3.0;
    }
    s.iteration = static_cast<std::uint32_t>(r.next_below(1000));
    s.stagnation = static_cast<std::uint32_t>(r.next_below(30));
    return s;
}

}  // namespace dswarm::test
