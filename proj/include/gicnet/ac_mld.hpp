#pragma once

// Newton-Raphson ac power flow with GIC reactive losses, and the heuristic
// maximum-load-delivered evaluator built on it.

#include <complex>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gicnet/gic_engine.hpp"
#include "gicnet/grid_model.hpp"
#include "gicnet/scenario.hpp"

namespace gicnet {

struct PowerFlowOptions {
    double tolerance = 1e-8;  // p.u., infinity norm of the power mismatch
    int max_iterations = 30;
    bool enforce_q_limits = true;
};

// Served demand per load in MW / Mvar (aligned with NetworkModel::loads).
struct Demand {
    std::vector<double> pd;
    std::vector<double> qd;

    static Demand nominal(const NetworkModel& network);
};

struct PowerFlowResult {
    std::vector<double> vm;  // aligned with buses
    std::vector<double> va;
    std::vector<BusType> bus_type;  // after PV->PQ switching
    std::vector<std::complex<double>> s_from;  // MVA, aligned with branches
    std::vector<std::complex<double>> s_to;
    std::vector<double> gen_p;  // MW, aligned with gens
    std::vector<double> gen_q;
    bool converged = false;
    int iterations = 0;
    double mismatch = 0.0;  // final infinity norm, p.u.
    int worst_bus = -1;     // position of the largest mismatch
};

// qloss_pos / qloss_neg are per coupling (Mvar) and are drawn as reactive
// demand at the from / to terminal of the coupled branch. Passing `warm`
// starts from its voltages instead of a flat start. Throws SolverError on a
// singular Jacobian; non-convergence is reported through `converged`.
// q_per_vm (per bus, Mvar per p.u. voltage, optional) adds reactive demand
// proportional to the solved |v| at that bus.
[[nodiscard]] PowerFlowResult power_flow(const NetworkModel& network, const Demand& demand,
                                         std::span<const double> qloss_pos, std::span<const double> qloss_neg,
                                         const PowerFlowOptions& options = {}, const PowerFlowResult* warm = nullptr,
                                         std::span<const double> q_per_vm = {});

enum class LimitKind { voltage_low, voltage_high, thermal, angle, gen_p_high, gen_p_low, gen_q_high, gen_q_low, no_convergence };

struct LimitViolation {
    LimitKind kind = LimitKind::voltage_low;
    int id = 0;  // bus, branch or generator id
    double value = 0.0;
    double limit = 0.0;
    double severity = 0.0;  // relative exceedance
};

[[nodiscard]] std::string to_string(LimitKind k);

// Limit checks of a solved operating point (voltage, thermal, angle, generator).
[[nodiscard]] std::vector<LimitViolation> check_limits(const NetworkModel& network, const PowerFlowResult& pf,
                                                       double tolerance = 1e-6);

struct MldOptions {
    double shed_step = 0.05;
    // GIC losses are linear in the high-side |v|; solve them inside Newton
    // instead of alternating dc losses and power flow.
    bool coupled_newton = true;
    int coupling_rounds = 10;
    double coupling_tolerance = 1e-6;  // Mvar
    double limit_tolerance = 1e-6;
    // Shedding stops once the cost exceeds this; the result is then a lower bound.
    double cost_cap = std::numeric_limits<double>::infinity();
    PowerFlowOptions power_flow;
};

struct MldResult {
    double shed_cost = 0.0;
    std::vector<double> shed_fraction;  // aligned with loads
    bool converged = false;
    int pf_iterations = 0;
    int shed_steps = 0;
    bool capped = false;  // stopped at MldOptions::cost_cap
    std::vector<LimitViolation> violations;  // left after shedding
    std::vector<std::complex<double>> branch_flows_from;
    std::vector<std::complex<double>> branch_flows_to;
    std::vector<double> vm;
    std::vector<double> va;
    std::vector<double> qloss;  // per coupling, Mvar
    std::vector<double> shed_cost_trace;  // after every shedding step
};

// Scaled demand of a scenario with the given shed fractions applied.
[[nodiscard]] Demand scenario_demand(const NetworkModel& network, const GmdScenario& scenario,
                                     std::span<const double> shed_fraction = {});

// Load-shed cost sum |pd| * shed_cost * fraction over the scenario's scaled demand.
[[nodiscard]] double shed_cost(const NetworkModel& network, const GmdScenario& scenario,
                               std::span<const double> shed_fraction);

[[nodiscard]] MldResult evaluate_mld(const NetworkModel& network, const GmdScenario& scenario, const BlockerVector& z,
                                     const MldOptions& options = {});

[[nodiscard]] nlohmann::json mld_result_to_json(const NetworkModel& network, const MldResult& r);

}  // namespace gicnet
