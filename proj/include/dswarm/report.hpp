#pragma once

#include <string>

#include <json.hpp>

#include "dswarm/adversarial.hpp"
#include "dswarm/config.hpp"
#include "dswarm/dataswarms.hpp"

// Run reports are deterministic JSON: wall-clock timings are written to a
// separate document so two runs with the same seed produce identical bytes.

namespace dswarm {

nlohmann::json to_json(const ObjectiveReport& report);

nlohmann::json optimize_report(const RunConfig& cfg, std::uint64_t seed, const DataSwarmResult& result);
nlohmann::json adversarial_report(const RunConfig& cfg, std::uint64_t seed, const AdversarialResult& result);
nlohmann::json grid_report(const RunConfig& cfg, std::uint64_t seed, const GridSearchResult& result);

nlohmann::json timing_report(const DataSwarmResult& result);
nlohmann::json timing_report(const AdversarialResult& result);

/// Canonical text of a report (2-space indent, trailing newline).
std::string dump_report(const nlohmann::json& report);

/// Throws Parse on schema violations and Audit when iterations are not
/// strictly increasing or a global best column decreases.
void validate_report(const nlohmann::json& report);

/// Fixed-width iteration table.
std::string render_table(const nlohmann::json& report);

/// One header line, then one row per iteration.
std::string render_curves_csv(const nlohmann::json& report);

}  // namespace dswarm
