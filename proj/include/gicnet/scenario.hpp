#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "gicnet/gic_engine.hpp"
#include "gicnet/grid_model.hpp"

namespace gicnet {

// One GMD scenario: a uniform E-field plus per-load demand scale factors.
// Scale vectors are aligned with NetworkModel::loads; empty means 1.0.
struct GmdScenario {
    int id = 0;
    std::uint64_t seed = 0;
    EField field;
    std::vector<double> load_scale_p;
    std::vector<double> load_scale_q;

    [[nodiscard]] double scale_p(std::size_t load) const {
        return load < load_scale_p.size() ? load_scale_p[load] : 1.0;
    }
    [[nodiscard]] double scale_q(std::size_t load) const {
        return load < load_scale_q.size() ? load_scale_q[load] : 1.0;
    }

    static GmdScenario nominal(const EField& field) {
        GmdScenario s;
        s.field = field;
        return s;
    }
};

[[nodiscard]] nlohmann::json scenario_to_json(const GmdScenario& s);
[[nodiscard]] GmdScenario scenario_from_json(const nlohmann::json& j);

}  // namespace gicnet
