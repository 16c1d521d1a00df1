#pragma once

// Quasi-dc GIC network: induced branch voltages, nodal solve with
// conductance-scaled blockers, effective transformer GIC, and the reactive
// losses it induces on the ac side.

#include <array>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <nlohmann/json.hpp>

#include "gicnet/grid_model.hpp"

namespace gicnet {

// Uniform geoelectric field. direction_deg is measured clockwise from
// geographic north, so 0 points north and 90 points east.
struct EField {
    double magnitude = 0.0;  // V/km
    double direction_deg = 0.0;

    EField() = default;
    EField(double magnitude_v_per_km, double direction);

    [[nodiscard]] double north() const;
    [[nodiscard]] double east() const;
};

enum class BlockerMode { binary, soft };

// Blocker state per candidate gmd bus; absent keys mean 0 (unblocked).
struct BlockerVector {
    std::map<int, double> z;
    BlockerMode mode = BlockerMode::binary;

    static BlockerVector none() { return {}; }
    static BlockerVector binary_from(std::span<const int> blocked_ids);
    // Candidates in network.candidates() order.
    static BlockerVector from_dense(const NetworkModel& network, std::span<const double> values, BlockerMode mode);

    [[nodiscard]] double at(int id) const;
    [[nodiscard]] std::vector<double> dense(const NetworkModel& network) const;
};

// Everything is aligned with the model's vectors: node_voltage and
// grounding_current with gmd_buses, branch_current with gmd_branches,
// the per-transformer fields with couplings (lines carry zeros).
struct GicSolution {
    std::vector<double> node_voltage;
    std::vector<double> branch_current;
    std::vector<double> grounding_current;
    std::vector<double> effective_gic;
    std::vector<double> effective_gic_mag;
    std::vector<double> qloss_pos;  // Mvar at the from-bus terminal
    std::vector<double> qloss_neg;  // Mvar at the to-bus terminal
};

// Induced voltage per gmd branch (aligned with gmd_branches).
[[nodiscard]] std::vector<double> induced_voltages(const NetworkModel& network, const EField& field);

// Solves (L + diag((1-z) a^s)) V = J. Components left without any grounding
// (every grounding blocked) float; their lowest node is pinned to 0 V, which
// fixes the gauge without changing any branch current.
[[nodiscard]] GicSolution solve_dc(const NetworkModel& network, std::span<const double> vbr, const BlockerVector& z);

// Largest nodal current-balance residual |sum_in I - sum_out I - (1-z) a^s V| in amperes.
[[nodiscard]] double kcl_residual(const NetworkModel& network, const BlockerVector& z, const GicSolution& sol);

[[nodiscard]] double effective_gic_value(TransformerConfig config, double alpha, double beta, double i_hi, double i_lo,
                                         double i_series, double i_common, double i_tertiary);

// Per coupling; throws MissingWindingError when a mandated winding is absent.
[[nodiscard]] std::vector<double> effective_gic(const NetworkModel& network, std::span<const double> branch_current);

// sqrt(2/3) * S_base / V_base_hi * |v_hi| * K, the Mvar-per-ampere factor.
[[nodiscard]] double qloss_coefficient(const TransformerCoupling& coupling, double hi_vm);

// ac_vm is aligned with buses (p.u.).
[[nodiscard]] std::pair<std::vector<double>, std::vector<double>> qloss(const NetworkModel& network,
                                                                       std::span<const double> effective_gic_mag,
                                                                       std::span<const double> ac_vm);

// Whether the from-bus is the high-voltage terminal of the coupled branch.
[[nodiscard]] bool from_is_high_side(const NetworkModel& network, const TransformerCoupling& coupling);

// Complete chain at the given ac voltage magnitudes (defaults to bus vm).
[[nodiscard]] GicSolution solve_gic(const NetworkModel& network, const EField& field, const BlockerVector& z,
                                    std::span<const double> ac_vm = {});

// (total q-loss in Mvar, max effective GIC magnitude in A, total |grounding current| in A).
using PhysicsFeatures = std::array<double, 3>;

struct PhysicsFeaturesGrad {
    PhysicsFeatures value{};
    Eigen::MatrixXd jacobian;  // 3 x |candidates|, candidate order of network.candidates()
};

// Cached dc system for one network and field; evaluates the physics summary
// and its adjoint gradient with respect to candidate blocker values.
class PhysicsEvaluator {
  public:
    PhysicsEvaluator(const NetworkModel& network, const EField& field);

    [[nodiscard]] const std::vector<int>& candidates() const { return candidates_; }
    [[nodiscard]] PhysicsFeatures features(std::span<const double> z) const;
    [[nodiscard]] PhysicsFeaturesGrad features_and_grad(std::span<const double> z) const;

  private:
    struct Solved;
    [[nodiscard]] Solved solve(std::span<const double> z) const;

    const NetworkModel* network_;
    std::vector<int> candidates_;
    std::vector<int> candidate_node_;  // position in gmd_buses
    std::vector<double> vbr_;
    Eigen::VectorXd injection_;
    std::vector<Eigen::Triplet<double>> laplacian_;
    std::vector<double> g_gnd_;
    std::vector<int> component_;  // dc component per node
    int n_components_ = 0;
    // Effective GIC as a linear map of node voltages plus a constant.
    struct EffRow {
        int coupling = 0;
        double coef_q = 0.0;  // Mvar per ampere
        std::vector<std::pair<int, double>> node_coef;
        double constant = 0.0;
    };
    std::vector<EffRow> eff_rows_;
};

[[nodiscard]] PhysicsFeatures physics_features(const NetworkModel& network, const EField& field, const BlockerVector& z);

// z must be soft with every candidate strictly inside (0, 1).
[[nodiscard]] PhysicsFeaturesGrad physics_features_grad(const NetworkModel& network, const EField& field,
                                                        const BlockerVector& z);

[[nodiscard]] nlohmann::json gic_solution_to_json(const NetworkModel& network, const GicSolution& sol);

}  // namespace gicnet
