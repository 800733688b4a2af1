#include "dswarm/objectives.hpp"

namespace dswarm {

ObjectiveReport composite(const ObjectiveSpec& spec, const std::map<ObjectiveKind, double>& component_values) {
    ObjectiveReport report;
    for (const auto& c : spec.components) {
        const auto it = component_values.find(c.kind);
        if (it == component_values.end())
            throw Error(ErrorCode::MissingComponent, "no value for objective '" + std::string(to_string(c.kind)) + "'");
        report.per_component[c.kind] = it->second;
        report.composite += c.weight * it->second;
    }
    return report;
}

}  // namespace dswarm
