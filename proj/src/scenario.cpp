#include "gicnet/scenario.hpp"

#include "gicnet/error.hpp"

namespace gicnet {

nlohmann::json scenario_to_json(const GmdScenario& s) {
    return {{"id", s.id},
            {"seed", s.seed},
            {"magnitude", s.field.magnitude},
            {"direction_deg", s.field.direction_deg},
            {"load_scale_p", s.load_scale_p},
            {"load_scale_q", s.load_scale_q}};
}

GmdScenario scenario_from_json(const nlohmann::json& j) {
    try {
        GmdScenario s;
        s.id = j.value("id", 0);
        s.seed = j.value("seed", std::uint64_t{0});
        s.field = EField(j.at("magnitude").get<double>(), j.value("direction_deg", 0.0));
        s.load_scale_p = j.value("load_scale_p", std::vector<double>{});
        s.load_scale_q = j.value("load_scale_q", std::vector<double>{});
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("scenario: ") + e.what());
    }
}

}  // namespace gicnet
