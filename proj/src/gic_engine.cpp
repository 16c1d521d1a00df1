#include "gicnet/gic_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <memory>
#include <numeric>

#include <Eigen/SparseCholesky>

#include "gicnet/error.hpp"

namespace gicnet {

namespace {

const double kSqrtTwoThirds = std::sqrt(2.0 / 3.0);

double sign(double x) { return (x > 0.0) - (x < 0.0); }

struct DcAssembly {
    std::vector<Eigen::Triplet<double>> laplacian;
    Eigen::VectorXd injection;
    std::vector<double> g_gnd;
    std::vector<int> component;
    int n_components = 0;
};

DcAssembly assemble(const NetworkModel& net, std::span<const double> vbr) {
    const auto n = static_cast<int>(net.gmd_buses.size());
    if (vbr.size() != net.gmd_branches.size()) {
        throw DimensionMismatch("induced voltage vector has " + std::to_string(vbr.size()) + " entries, network has " +
                                std::to_string(net.gmd_branches.size()) + " gmd branches");
    }
    DcAssembly out;
    out.injection = Eigen::VectorXd::Zero(n);
    out.g_gnd.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.g_gnd[static_cast<std::size_t>(i)] = net.gmd_buses[static_cast<std::size_t>(i)].g_gnd;

    std::vector<int> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&parent](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
        }
        return x;
    };

    for (std::size_t b = 0; b < net.gmd_branches.size(); ++b) {
        const auto& e = net.gmd_branches[b];
        const int f = net.gmd_bus_pos.at(e.from_node);
        const int t = net.gmd_bus_pos.at(e.to_node);
        out.laplacian.emplace_back(f, f, e.a);
        out.laplacian.emplace_back(t, t, e.a);
        out.laplacian.emplace_back(f, t, -e.a);
        out.laplacian.emplace_back(t, f, -e.a);
        // Current a(Vf - Vt + Vbr) leaves f and enters t.
        out.injection[f] -= e.a * vbr[b];
        out.injection[t] += e.a * vbr[b];
        parent[static_cast<std::size_t>(find(f))] = find(t);
    }
    out.component.resize(static_cast<std::size_t>(n));
    std::vector<int> label(static_cast<std::size_t>(n), -1);
    for (int i = 0; i < n; ++i) {
        int r = find(i);
        if (label[static_cast<std::size_t>(r)] < 0) label[static_cast<std::size_t>(r)] = out.n_components++;
        out.component[static_cast<std::size_t>(i)] = label[static_cast<std::size_t>(r)];
    }
    return out;
}

// Effective grounding conductance (1 - z) a^s per node.
std::vector<double> scaled_grounding(const NetworkModel& net, const std::vector<double>& g_gnd, const BlockerVector& z) {
    std::vector<double> g = g_gnd;
    const auto cands = net.candidates();
    for (const auto& [id, value] : z.z) {
        if (!std::binary_search(cands.begin(), cands.end(), id)) {
            throw InvalidArgument("blocker on gmd_bus " + std::to_string(id) + " which is not a candidate");
        }
        const bool ok = z.mode == BlockerMode::binary ? (value == 0.0 || value == 1.0) : (value >= 0.0 && value <= 1.0);
        if (!ok) throw InvalidArgument("blocker value out of range for gmd_bus " + std::to_string(id));
        auto pos = static_cast<std::size_t>(net.gmd_bus_pos.at(id));
        g[pos] = (1.0 - value) * g_gnd[pos];
    }
    return g;
}

// Factorizes G = L + diag(g) with floating components pinned, then solves for
// each right-hand side column. Pinned rows get a zero solution.
class DcFactor {
  public:
    DcFactor(const DcAssembly& dc, const std::vector<double>& g) {
        const auto n = static_cast<int>(g.size());
        std::vector<double> comp_ground(static_cast<std::size_t>(dc.n_components), 0.0);
        for (int i = 0; i < n; ++i) comp_ground[static_cast<std::size_t>(dc.component[static_cast<std::size_t>(i)])] += g[static_cast<std::size_t>(i)];
        pinned_.assign(static_cast<std::size_t>(n), false);
        std::vector<bool> comp_pinned(static_cast<std::size_t>(dc.n_components), false);
        for (int i = 0; i < n; ++i) {
            auto c = static_cast<std::size_t>(dc.component[static_cast<std::size_t>(i)]);
            if (comp_ground[c] == 0.0 && !comp_pinned[c]) {
                comp_pinned[c] = true;
                pinned_[static_cast<std::size_t>(i)] = true;
            }
        }
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(dc.laplacian.size() + static_cast<std::size_t>(n));
        for (const auto& t : dc.laplacian) {
            if (pinned_[static_cast<std::size_t>(t.row())] || pinned_[static_cast<std::size_t>(t.col())]) continue;
            trip.push_back(t);
        }
        for (int i = 0; i < n; ++i) {
            trip.emplace_back(i, i, pinned_[static_cast<std::size_t>(i)] ? 1.0 : g[static_cast<std::size_t>(i)]);
        }
        Eigen::SparseMatrix<double> G(n, n);
        G.setFromTriplets(trip.begin(), trip.end());
        solver_.compute(G);
        if (solver_.info() != Eigen::Success) throw SingularSystemError("dc conductance matrix factorization failed");
        // LDLT of a singular semidefinite matrix can succeed with a zero pivot.
        const auto& d = solver_.vectorD();
        for (Eigen::Index i = 0; i < d.size(); ++i) {
            if (!(std::abs(d[i]) > 1e-300)) throw SingularSystemError("dc conductance matrix is singular");
        }
    }

    [[nodiscard]] Eigen::VectorXd solve(Eigen::VectorXd rhs) const {
        for (std::size_t i = 0; i < pinned_.size(); ++i) {
            if (pinned_[i]) rhs[static_cast<Eigen::Index>(i)] = 0.0;
        }
        Eigen::VectorXd x = solver_.solve(rhs);
        if (solver_.info() != Eigen::Success) throw SingularSystemError("dc solve failed");
        return x;
    }

  private:
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
    std::vector<bool> pinned_;
};

std::vector<double> branch_currents(const NetworkModel& net, std::span<const double> vbr, const Eigen::VectorXd& v) {
    std::vector<double> cur(net.gmd_branches.size());
    for (std::size_t b = 0; b < net.gmd_branches.size(); ++b) {
        const auto& e = net.gmd_branches[b];
        const double vf = v[net.gmd_bus_pos.at(e.from_node)];
        const double vt = v[net.gmd_bus_pos.at(e.to_node)];
        cur[b] = e.a * (vf - vt + vbr[b]);
    }
    return cur;
}

// Effective GIC of coupling c as sum of coef * (branch current of winding).
std::vector<std::pair<int, double>> winding_weights(const NetworkModel& net, const TransformerCoupling& c) {
    auto pos = [&](const std::optional<int>& w, const char* role) {
        if (!w || !net.gmd_branch_pos.count(*w)) {
            throw MissingWindingError("transformer on branch " + std::to_string(c.ac_branch) + " lacks its " + role +
                                      " winding");
        }
        return net.gmd_branch_pos.at(*w);
    };
    switch (c.config) {
        case TransformerConfig::gwye_delta: return {{pos(c.hi_node, "hi"), 1.0}};
        case TransformerConfig::gwye_gwye: return {{pos(c.hi_node, "hi"), 1.0}, {pos(c.lo_node, "lo"), 1.0 / c.alpha}};
        case TransformerConfig::autotransformer:
            return {{pos(c.series_node, "series"), c.alpha / (c.alpha + 1.0)},
                    {pos(c.common_node, "common"), 1.0 / (c.alpha + 1.0)}};
        case TransformerConfig::three_winding:
            return {{pos(c.hi_node, "hi"), 1.0},
                    {pos(c.lo_node, "lo"), 1.0 / c.alpha},
                    {pos(c.tertiary_node, "tertiary"), 1.0 / c.beta}};
        case TransformerConfig::line: return {};
    }
    return {};
}

int hi_bus_position(const NetworkModel& net, const TransformerCoupling& c) {
    const auto& br = net.branch(c.ac_branch);
    return net.bus_pos.at(from_is_high_side(net, c) ? br.from_bus : br.to_bus);
}

}  // namespace

EField::EField(double magnitude_v_per_km, double direction) : magnitude(magnitude_v_per_km) {
    if (magnitude_v_per_km < 0.0) throw InvalidArgument("E-field magnitude must be non-negative");
    direction_deg = std::fmod(direction, 360.0);
    if (direction_deg < 0.0) direction_deg += 360.0;
}

double EField::north() const { return magnitude * std::cos(direction_deg * std::numbers::pi / 180.0); }
double EField::east() const { return magnitude * std::sin(direction_deg * std::numbers::pi / 180.0); }

BlockerVector BlockerVector::binary_from(std::span<const int> blocked_ids) {
    BlockerVector v;
    for (int id : blocked_ids) v.z[id] = 1.0;
    return v;
}

BlockerVector BlockerVector::from_dense(const NetworkModel& network, std::span<const double> values, BlockerMode mode) {
    const auto cands = network.candidates();
    if (values.size() != cands.size()) {
        throw DimensionMismatch("blocker vector has " + std::to_string(values.size()) + " entries for " +
                                std::to_string(cands.size()) + " candidates");
    }
    BlockerVector v;
    v.mode = mode;
    for (std::size_t i = 0; i < cands.size(); ++i) v.z[cands[i]] = values[i];
    return v;
}

double BlockerVector::at(int id) const {
    auto it = z.find(id);
    return it == z.end() ? 0.0 : it->second;
}

std::vector<double> BlockerVector::dense(const NetworkModel& network) const {
    std::vector<double> out;
    for (int id : network.candidates()) out.push_back(at(id));
    return out;
}

std::vector<double> induced_voltages(const NetworkModel& network, const EField& field) {
    std::vector<double> v(network.gmd_branches.size(), 0.0);
    const double en = field.north();
    const double ee = field.east();
    for (std::size_t b = 0; b < network.gmd_branches.size(); ++b) {
        const auto& e = network.gmd_branches[b];
        if (e.kind == GmdBranchKind::line) v[b] = en * e.disp_north_km + ee * e.disp_east_km;
    }
    return v;
}

GicSolution solve_dc(const NetworkModel& network, std::span<const double> vbr, const BlockerVector& z) {
    const DcAssembly dc = assemble(network, vbr);
    const auto g = scaled_grounding(network, dc.g_gnd, z);
    const DcFactor factor(dc, g);
    const Eigen::VectorXd v = factor.solve(dc.injection);

    GicSolution sol;
    sol.node_voltage.assign(v.data(), v.data() + v.size());
    sol.branch_current = branch_currents(network, vbr, v);
    sol.grounding_current.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) sol.grounding_current[i] = g[i] * v[static_cast<Eigen::Index>(i)];
    return sol;
}

double kcl_residual(const NetworkModel& network, const BlockerVector& z, const GicSolution& sol) {
    std::vector<double> net_in(network.gmd_buses.size(), 0.0);
    for (std::size_t b = 0; b < network.gmd_branches.size(); ++b) {
        const auto& e = network.gmd_branches[b];
        net_in[static_cast<std::size_t>(network.gmd_bus_pos.at(e.to_node))] += sol.branch_current[b];
        net_in[static_cast<std::size_t>(network.gmd_bus_pos.at(e.from_node))] -= sol.branch_current[b];
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < network.gmd_buses.size(); ++i) {
        const auto& node = network.gmd_buses[i];
        const double g = (1.0 - z.at(node.id)) * node.g_gnd;
        worst = std::max(worst, std::abs(net_in[i] - g * sol.node_voltage[i]));
    }
    return worst;
}

double effective_gic_value(TransformerConfig config, double alpha, double beta, double i_hi, double i_lo,
                           double i_series, double i_common, double i_tertiary) {
    switch (config) {
        case TransformerConfig::gwye_delta: return i_hi;
        case TransformerConfig::gwye_gwye: return (alpha * i_hi + i_lo) / alpha;
        case TransformerConfig::autotransformer: return (alpha * i_series + i_common) / (alpha + 1.0);
        case TransformerConfig::three_winding: return i_hi + i_lo / alpha + i_tertiary / beta;
        case TransformerConfig::line: return 0.0;
    }
    return 0.0;
}

std::vector<double> effective_gic(const NetworkModel& network, std::span<const double> branch_current) {
    if (branch_current.size() != network.gmd_branches.size()) {
        throw DimensionMismatch("branch current vector does not match gmd branch count");
    }
    std::vector<double> out(network.couplings.size(), 0.0);
    for (std::size_t k = 0; k < network.couplings.size(); ++k) {
        const auto& c = network.couplings[k];
        auto current = [&](const std::optional<int>& w, const char* role, bool needed) {
            if (!needed) return 0.0;
            if (!w || !network.gmd_branch_pos.count(*w)) {
                throw MissingWindingError("transformer on branch " + std::to_string(c.ac_branch) + " lacks its " +
                                          role + " winding");
            }
            return branch_current[static_cast<std::size_t>(network.gmd_branch_pos.at(*w))];
        };
        const auto cfg = c.config;
        using TC = TransformerConfig;
        const double ih = current(c.hi_node, "hi", cfg == TC::gwye_delta || cfg == TC::gwye_gwye || cfg == TC::three_winding);
        const double il = current(c.lo_node, "lo", cfg == TC::gwye_gwye || cfg == TC::three_winding);
        const double is = current(c.series_node, "series", cfg == TC::autotransformer);
        const double ic = current(c.common_node, "common", cfg == TC::autotransformer);
        const double it = current(c.tertiary_node, "tertiary", cfg == TC::three_winding);
        out[k] = effective_gic_value(cfg, c.alpha, c.beta, ih, il, is, ic, it);
    }
    return out;
}

bool from_is_high_side(const NetworkModel& network, const TransformerCoupling& coupling) {
    const auto& br = network.branch(coupling.ac_branch);
    return network.bus(br.from_bus).base_kv >= network.bus(br.to_bus).base_kv;
}

double qloss_coefficient(const TransformerCoupling& coupling, double hi_vm) {
    return kSqrtTwoThirds * (coupling.S_base / coupling.V_base_hi) * std::abs(hi_vm) * coupling.K;
}

std::pair<std::vector<double>, std::vector<double>> qloss(const NetworkModel& network,
                                                         std::span<const double> effective_gic_mag,
                                                         std::span<const double> ac_vm) {
    if (effective_gic_mag.size() != network.couplings.size() || ac_vm.size() != network.buses.size()) {
        throw DimensionMismatch("qloss inputs do not match the network");
    }
    std::vector<double> pos(network.couplings.size(), 0.0);
    std::vector<double> neg(network.couplings.size(), 0.0);
    for (std::size_t k = 0; k < network.couplings.size(); ++k) {
        const auto& c = network.couplings[k];
        if (!c.is_transformer()) continue;
        const int hb = hi_bus_position(network, c);
        const double q = qloss_coefficient(c, ac_vm[static_cast<std::size_t>(hb)]) * effective_gic_mag[k];
        (from_is_high_side(network, c) ? pos : neg)[k] = q;
    }
    return {std::move(pos), std::move(neg)};
}

GicSolution solve_gic(const NetworkModel& network, const EField& field, const BlockerVector& z,
                      std::span<const double> ac_vm) {
    const auto vbr = induced_voltages(network, field);
    GicSolution sol = solve_dc(network, vbr, z);
    sol.effective_gic = effective_gic(network, sol.branch_current);
    sol.effective_gic_mag.resize(sol.effective_gic.size());
    std::transform(sol.effective_gic.begin(), sol.effective_gic.end(), sol.effective_gic_mag.begin(),
                   [](double x) { return std::abs(x); });
    std::vector<double> vm;
    if (ac_vm.empty()) {
        for (const auto& b : network.buses) vm.push_back(b.vm);
        ac_vm = vm;
    }
    std::tie(sol.qloss_pos, sol.qloss_neg) = qloss(network, sol.effective_gic_mag, ac_vm);
    return sol;
}

struct PhysicsEvaluator::Solved {
    Eigen::VectorXd v;
    std::vector<double> g;
    std::unique_ptr<DcFactor> factor;
};

PhysicsEvaluator::PhysicsEvaluator(const NetworkModel& network, const EField& field)
    : network_(&network), candidates_(network.candidates()), vbr_(induced_voltages(network, field)) {
    DcAssembly dc = assemble(network, vbr_);
    injection_ = std::move(dc.injection);
    laplacian_ = std::move(dc.laplacian);
    g_gnd_ = std::move(dc.g_gnd);
    component_ = std::move(dc.component);
    n_components_ = dc.n_components;
    for (int id : candidates_) candidate_node_.push_back(network.gmd_bus_pos.at(id));

    for (std::size_t k = 0; k < network.couplings.size(); ++k) {
        const auto& c = network.couplings[k];
        if (!c.is_transformer()) continue;
        EffRow row;
        row.coupling = static_cast<int>(k);
        const int hb = hi_bus_position(network, c);
        row.coef_q = qloss_coefficient(c, network.buses[static_cast<std::size_t>(hb)].vm);
        std::map<int, double> coef;
        for (const auto& [b, w] : winding_weights(network, c)) {
            const auto& e = network.gmd_branches[static_cast<std::size_t>(b)];
            coef[network.gmd_bus_pos.at(e.from_node)] += w * e.a;
            coef[network.gmd_bus_pos.at(e.to_node)] -= w * e.a;
            row.constant += w * e.a * vbr_[static_cast<std::size_t>(b)];
        }
        row.node_coef.assign(coef.begin(), coef.end());
        eff_rows_.push_back(std::move(row));
    }
}

PhysicsEvaluator::Solved PhysicsEvaluator::solve(std::span<const double> z) const {
    if (z.size() != candidates_.size()) throw DimensionMismatch("blocker vector length does not match candidates");
    std::vector<double> g = g_gnd_;
    for (std::size_t k = 0; k < z.size(); ++k) {
        if (!(z[k] >= 0.0 && z[k] <= 1.0)) throw InvalidArgument("blocker value outside [0, 1]");
        auto p = static_cast<std::size_t>(candidate_node_[k]);
        g[p] = (1.0 - z[k]) * g_gnd_[p];
    }
    DcAssembly dc;
    dc.laplacian = laplacian_;
    dc.injection = injection_;
    dc.g_gnd = g_gnd_;
    dc.component = component_;
    dc.n_components = n_components_;
    auto factor = std::make_unique<DcFactor>(dc, g);
    Eigen::VectorXd v = factor->solve(injection_);
    return Solved{std::move(v), std::move(g), std::move(factor)};
}

PhysicsFeatures PhysicsEvaluator::features(std::span<const double> z) const {
    const Solved s = solve(z);
    PhysicsFeatures f{0.0, 0.0, 0.0};
    for (const auto& row : eff_rows_) {
        double eff = row.constant;
        for (const auto& [node, c] : row.node_coef) eff += c * s.v[node];
        f[0] += row.coef_q * std::abs(eff);
        f[1] = std::max(f[1], std::abs(eff));
    }
    for (std::size_t i = 0; i < s.g.size(); ++i) f[2] += std::abs(s.g[i] * s.v[static_cast<Eigen::Index>(i)]);
    return f;
}

PhysicsFeaturesGrad PhysicsEvaluator::features_and_grad(std::span<const double> z) const {
    const Solved s = solve(z);
    const auto n = static_cast<Eigen::Index>(g_gnd_.size());
    const auto m = static_cast<Eigen::Index>(candidates_.size());

    PhysicsFeaturesGrad out;
    out.jacobian = Eigen::MatrixXd::Zero(3, m);
    // dF/dV for each feature; explicit dF/dz collected separately.
    Eigen::MatrixXd dfdv = Eigen::MatrixXd::Zero(n, 3);
    Eigen::MatrixXd explicit_dz = Eigen::MatrixXd::Zero(3, m);

    int argmax = -1;
    double best = 0.0;
    std::vector<double> eff(eff_rows_.size());
    for (std::size_t r = 0; r < eff_rows_.size(); ++r) {
        const auto& row = eff_rows_[r];
        double e = row.constant;
        for (const auto& [node, c] : row.node_coef) e += c * s.v[node];
        eff[r] = e;
        out.value[0] += row.coef_q * std::abs(e);
        for (const auto& [node, c] : row.node_coef) dfdv(node, 0) += row.coef_q * sign(e) * c;
        if (std::abs(e) > best) {
            best = std::abs(e);
            argmax = static_cast<int>(r);
        }
    }
    out.value[1] = best;
    if (argmax >= 0) {
        const auto& row = eff_rows_[static_cast<std::size_t>(argmax)];
        for (const auto& [node, c] : row.node_coef) dfdv(node, 1) += sign(eff[static_cast<std::size_t>(argmax)]) * c;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const double gi = s.g[static_cast<std::size_t>(i)];
        const double cur = gi * s.v[i];
        out.value[2] += std::abs(cur);
        dfdv(i, 2) += sign(cur) * gi;
    }
    for (Eigen::Index k = 0; k < m; ++k) {
        const auto p = candidate_node_[static_cast<std::size_t>(k)];
        const double cur = s.g[static_cast<std::size_t>(p)] * s.v[p];
        explicit_dz(2, k) = -sign(cur) * g_gnd_[static_cast<std::size_t>(p)] * s.v[p];
    }

    // G is symmetric, so the adjoint system reuses the factorization.
    for (int f = 0; f < 3; ++f) {
        const Eigen::VectorXd lambda = s.factor->solve(dfdv.col(f));
        for (Eigen::Index k = 0; k < m; ++k) {
            const auto p = candidate_node_[static_cast<std::size_t>(k)];
            out.jacobian(f, k) = explicit_dz(f, k) + lambda[p] * g_gnd_[static_cast<std::size_t>(p)] * s.v[p];
        }
    }
    return out;
}

PhysicsFeatures physics_features(const NetworkModel& network, const EField& field, const BlockerVector& z) {
    const PhysicsEvaluator eval(network, field);
    for (const auto& [id, value] : z.z) {
        if (!std::binary_search(eval.candidates().begin(), eval.candidates().end(), id)) {
            throw InvalidArgument("blocker on gmd_bus " + std::to_string(id) + " which is not a candidate");
        }
    }
    return eval.features(z.dense(network));
}

PhysicsFeaturesGrad physics_features_grad(const NetworkModel& network, const EField& field, const BlockerVector& z) {
    if (z.mode != BlockerMode::soft) throw InvalidArgument("physics_features_grad needs a soft blocker vector");
    const PhysicsEvaluator eval(network, field);
    const auto dense = z.dense(network);
    for (double v : dense) {
        if (!(v > 0.0 && v < 1.0)) throw InvalidArgument("soft blocker values must lie strictly inside (0, 1)");
    }
    return eval.features_and_grad(dense);
}

nlohmann::json gic_solution_to_json(const NetworkModel& network, const GicSolution& sol) {
    using nlohmann::json;
    json out;
    json nodes = json::array();
    for (std::size_t i = 0; i < network.gmd_buses.size(); ++i) {
        nodes.push_back({{"id", network.gmd_buses[i].id},
                         {"voltage", sol.node_voltage[i]},
                         {"grounding_current", sol.grounding_current[i]}});
    }
    out["gmd_bus"] = std::move(nodes);
    json branches = json::array();
    for (std::size_t b = 0; b < network.gmd_branches.size(); ++b) {
        branches.push_back({{"id", network.gmd_branches[b].id}, {"current", sol.branch_current[b]}});
    }
    out["gmd_branch"] = std::move(branches);
    json xf = json::array();
    for (std::size_t k = 0; k < network.couplings.size() && k < sol.effective_gic.size(); ++k) {
        const auto& c = network.couplings[k];
        if (!c.is_transformer()) continue;
        xf.push_back({{"ac_branch", c.ac_branch},
                      {"config", to_string(c.config)},
                      {"effective_gic", sol.effective_gic[k]},
                      {"effective_gic_mag", sol.effective_gic_mag[k]},
                      {"qloss_pos", sol.qloss_pos[k]},
                      {"qloss_neg", sol.qloss_neg[k]}});
    }
    out["transformer"] = std::move(xf);
    return out;
}

}  // namespace gicnet
