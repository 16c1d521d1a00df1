#pragma once

// Budget-constrained GIC blocker placement against the MLD evaluator.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gicnet/ac_mld.hpp"

namespace gicnet {

enum class PlacementMethod { greedy_local, exhaustive };

[[nodiscard]] std::string to_string(PlacementMethod m);

struct PlacementSolution {
    BlockerVector z;
    std::vector<int> blocked;  // sorted candidate ids with z = 1
    double cost = 0.0;         // sum of blocker costs
    double shed_cost = 0.0;
    int evaluations = 0;       // distinct evaluate_mld calls
    PlacementMethod method = PlacementMethod::greedy_local;
    std::vector<double> incumbent_trace;  // shed cost after each accepted move
};

struct PlacementOptions {
    MldOptions mld;
    std::size_t exhaustive_cap = 20;
    double min_improvement = 1e-9;
    // Consecutive greedy additions allowed without a shed-cost reduction,
    // taken in order of lowest total GIC reactive loss.
    int plateau_moves = 4;
};

// Total placement cost of the given candidate ids.
[[nodiscard]] double placement_cost(const NetworkModel& network, std::span<const int> blocked);

// Unit costs on every candidate and budget ceil(|candidates| / 2).
[[nodiscard]] BlockerEconomics default_economics(const NetworkModel& network);

// Enumerates every budget-feasible subset. Throws InvalidArgument above the
// cap or on a negative budget.
[[nodiscard]] PlacementSolution solve_exhaustive(const NetworkModel& network, const GmdScenario& scenario, double budget,
                                                 const PlacementOptions& options = {});

// Greedy add by shed-cost reduction per dollar (with up to plateau_moves
// non-improving additions), then first-improvement 1-swap
// local search. seed = 0 breaks equal-gain ties by id; other seeds by a fixed
// pseudo-random candidate ranking.
[[nodiscard]] PlacementSolution solve_heuristic(const NetworkModel& network, const GmdScenario& scenario, double budget,
                                                std::uint64_t seed = 0, const PlacementOptions& options = {});

struct ScenarioLabel {
    int scenario_id = 0;
    PlacementSolution solution;
    double seconds = 0.0;  // solver wall time
};

// Exhaustive when |candidates| <= exhaustive_threshold, heuristic otherwise.
[[nodiscard]] std::vector<ScenarioLabel> label_scenarios(const NetworkModel& network,
                                                         std::span<const GmdScenario> scenarios, double budget,
                                                         const PlacementOptions& options = {},
                                                         std::size_t exhaustive_threshold = 12);

[[nodiscard]] nlohmann::json placement_to_json(const PlacementSolution& s);

}  // namespace gicnet
