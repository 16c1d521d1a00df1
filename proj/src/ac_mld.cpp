#include "gicnet/ac_mld.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "gicnet/error.hpp"

namespace gicnet {

namespace {

using cplx = std::complex<double>;

constexpr Eigen::Index kDenseJacobian = 64;
using SpMatC = Eigen::SparseMatrix<cplx>;

struct BranchAdmittance {
    cplx yff, yft, ytf, ytt;
};

BranchAdmittance branch_admittance(const AcBranch& br) {
    const cplx ys = 1.0 / cplx(br.r, br.x);
    const cplx tt = ys + cplx(0.0, br.b_sh / 2.0);
    const double tap = br.tap == 0.0 ? 1.0 : br.tap;
    const cplx t = std::polar(tap, br.shift);
    return {tt / (tap * tap), -ys / std::conj(t), -ys / t, tt};
}

SpMatC build_ybus(const NetworkModel& net, const std::vector<bool>& active) {
    const auto n = static_cast<int>(net.buses.size());
    std::vector<Eigen::Triplet<cplx>> trip;
    for (const auto& br : net.branches) {
        if (!br.status) continue;
        const int f = net.bus_pos.at(br.from_bus);
        const int t = net.bus_pos.at(br.to_bus);
        if (!active[static_cast<std::size_t>(f)] || !active[static_cast<std::size_t>(t)]) continue;
        const auto y = branch_admittance(br);
        trip.emplace_back(f, f, y.yff);
        trip.emplace_back(f, t, y.yft);
        trip.emplace_back(t, f, y.ytf);
        trip.emplace_back(t, t, y.ytt);
    }
    for (int i = 0; i < n; ++i) {
        const auto& b = net.buses[static_cast<std::size_t>(i)];
        if (active[static_cast<std::size_t>(i)]) {
            trip.emplace_back(i, i, cplx(b.gs, b.bs));
        } else {
            trip.emplace_back(i, i, cplx(1.0, 0.0));
        }
    }
    SpMatC y(n, n);
    y.setFromTriplets(trip.begin(), trip.end());
    return y;
}

}  // namespace

Demand Demand::nominal(const NetworkModel& network) {
    Demand d;
    for (const auto& l : network.loads) {
        d.pd.push_back(l.pd);
        d.qd.push_back(l.qd);
    }
    return d;
}

std::string to_string(LimitKind k) {
    switch (k) {
        case LimitKind::voltage_low: return "voltage_low";
        case LimitKind::voltage_high: return "voltage_high";
        case LimitKind::thermal: return "thermal";
        case LimitKind::angle: return "angle";
        case LimitKind::gen_p_high: return "gen_p_high";
        case LimitKind::gen_p_low: return "gen_p_low";
        case LimitKind::gen_q_high: return "gen_q_high";
        case LimitKind::gen_q_low: return "gen_q_low";
        case LimitKind::no_convergence: return "no_convergence";
    }
    return "unknown";
}

PowerFlowResult power_flow(const NetworkModel& net, const Demand& demand, std::span<const double> qloss_pos,
                           std::span<const double> qloss_neg, const PowerFlowOptions& options,
                           const PowerFlowResult* warm, std::span<const double> q_per_vm) {
    const std::size_t n = net.buses.size();
    if (demand.pd.size() != net.loads.size() || demand.qd.size() != net.loads.size()) {
        throw DimensionMismatch("demand does not match the load count");
    }
    if (qloss_pos.size() != net.couplings.size() || qloss_neg.size() != net.couplings.size()) {
        throw DimensionMismatch("qloss vectors do not match the coupling count");
    }
    if (!q_per_vm.empty() && q_per_vm.size() != n) throw DimensionMismatch("q_per_vm does not match the bus count");
    const double base = net.base_mva;

    std::vector<bool> active(n, true);
    std::vector<BusType> type(n);
    for (std::size_t i = 0; i < n; ++i) {
        type[i] = net.buses[i].bus_type;
        active[i] = type[i] != BusType::isolated;
    }

    // Fixed injections in p.u.: load and GIC losses (negative), scheduled generation.
    std::vector<double> p_load(n, 0.0), q_load(n, 0.0), p_gen(n, 0.0), q_gen(n, 0.0);
    std::vector<double> q_max(n, 0.0), q_min(n, 0.0), v_set(n, 0.0);
    std::vector<int> gen_count(n, 0);
    for (std::size_t k = 0; k < net.loads.size(); ++k) {
        auto i = static_cast<std::size_t>(net.bus_pos.at(net.loads[k].bus));
        p_load[i] += demand.pd[k] / base;
        q_load[i] += demand.qd[k] / base;
    }
    for (std::size_t k = 0; k < net.couplings.size(); ++k) {
        const auto& br = net.branch(net.couplings[k].ac_branch);
        q_load[static_cast<std::size_t>(net.bus_pos.at(br.from_bus))] += qloss_pos[k] / base;
        q_load[static_cast<std::size_t>(net.bus_pos.at(br.to_bus))] += qloss_neg[k] / base;
    }
    std::vector<double> q_vdep(n, 0.0);
    for (std::size_t i = 0; i < q_per_vm.size(); ++i) q_vdep[i] = q_per_vm[i] / base;
    for (const auto& g : net.gens) {
        if (!g.status) continue;
        auto i = static_cast<std::size_t>(net.bus_pos.at(g.bus));
        p_gen[i] += g.pg / base;
        q_gen[i] += g.qg / base;
        q_max[i] += g.qmax / base;
        q_min[i] += g.qmin / base;
        if (gen_count[i]++ == 0) v_set[i] = g.vg;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (type[i] == BusType::pv && gen_count[i] == 0) type[i] = BusType::pq;
    }

    const SpMatC ybus = build_ybus(net, active);

    Eigen::VectorXcd v(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        double vm = 1.0;
        double va = 0.0;
        if (warm && warm->vm.size() == n) {
            vm = warm->vm[i];
            va = warm->va[i];
        }
        if ((type[i] == BusType::pv || type[i] == BusType::slack) && gen_count[i] > 0) vm = v_set[i];
        if (type[i] == BusType::slack && gen_count[i] == 0) vm = net.buses[i].vm;
        if (!active[i]) vm = 0.0;
        v[static_cast<Eigen::Index>(i)] = std::polar(vm, va);
    }

    PowerFlowResult res;
    std::vector<double> q_fixed_gen = q_gen;  // Q of generators at buses held as PQ
    bool converged = false;

    for (std::size_t round = 0; round <= n; ++round) {
        std::vector<int> pvpq, pq;
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            if (type[i] == BusType::pv || type[i] == BusType::pq) pvpq.push_back(static_cast<int>(i));
            if (type[i] == BusType::pq) pq.push_back(static_cast<int>(i));
        }
        std::vector<int> col_a(n, -1), col_m(n, -1);
        for (std::size_t k = 0; k < pvpq.size(); ++k) col_a[static_cast<std::size_t>(pvpq[k])] = static_cast<int>(k);
        for (std::size_t k = 0; k < pq.size(); ++k) {
            col_m[static_cast<std::size_t>(pq[k])] = static_cast<int>(pvpq.size() + k);
        }
        const auto dim = static_cast<Eigen::Index>(pvpq.size() + pq.size());

        Eigen::VectorXcd sspec(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            const double qg = type[i] == BusType::pq ? q_fixed_gen[i] : 0.0;
            sspec[static_cast<Eigen::Index>(i)] = cplx(p_gen[i] - p_load[i], qg - q_load[i]);
        }

        converged = false;
        Eigen::SparseLU<Eigen::SparseMatrix<double>> sparse_lu;
        bool pattern_ready = false;
        for (int it = 1; it <= options.max_iterations; ++it) {
            ++res.iterations;
            const Eigen::VectorXcd ibus = ybus * v;
            const Eigen::VectorXcd scalc = v.cwiseProduct(ibus.conjugate());
            Eigen::VectorXd f(dim);
            double norm = 0.0;
            int worst = -1;
            for (int i : pvpq) {
                const double d = scalc[i].real() - sspec[i].real();
                f[col_a[static_cast<std::size_t>(i)]] = d;
                if (!(std::abs(d) <= norm)) {
                    norm = std::abs(d);
                    worst = i;
                }
            }
            for (int i : pq) {
                const double d = scalc[i].imag() - sspec[i].imag() + q_vdep[static_cast<std::size_t>(i)] * std::abs(v[i]);
                f[col_m[static_cast<std::size_t>(i)]] = d;
                if (!(std::abs(d) <= norm)) {
                    norm = std::abs(d);
                    worst = i;
                }
            }
            res.mismatch = norm;
            res.worst_bus = worst;
            if (!std::isfinite(norm) || norm > 1e8) break;
            if (norm <= options.tolerance) {
                converged = true;
                break;
            }
            if (it == options.max_iterations) break;

            std::vector<Eigen::Triplet<double>> trip;
            trip.reserve(static_cast<std::size_t>(ybus.nonZeros()) * 4);
            for (Eigen::Index col = 0; col < ybus.outerSize(); ++col) {
                for (SpMatC::InnerIterator itr(ybus, col); itr; ++itr) {
                    const auto i = static_cast<std::size_t>(itr.row());
                    const auto k = static_cast<std::size_t>(itr.col());
                    const cplx yik = itr.value();
                    const cplx vi = v[static_cast<Eigen::Index>(i)];
                    const cplx vk = v[static_cast<Eigen::Index>(k)];
                    cplx ds_da, ds_dm;
                    if (i == k) {
                        const cplx ii = ibus[static_cast<Eigen::Index>(i)];
                        ds_da = cplx(0.0, 1.0) * vi * std::conj(ii - yik * vi);
                        ds_dm = vi * std::conj(yik * vi / std::abs(vi)) + std::conj(ii) * vi / std::abs(vi);
                    } else {
                        ds_da = -cplx(0.0, 1.0) * vi * std::conj(yik * vk);
                        ds_dm = vi * std::conj(yik * vk / std::abs(vk));
                    }
                    if (col_a[i] >= 0 && col_a[k] >= 0) trip.emplace_back(col_a[i], col_a[k], ds_da.real());
                    if (col_a[i] >= 0 && col_m[k] >= 0) trip.emplace_back(col_a[i], col_m[k], ds_dm.real());
                    if (col_m[i] >= 0 && col_a[k] >= 0) trip.emplace_back(col_m[i], col_a[k], ds_da.imag());
                    if (col_m[i] >= 0 && col_m[k] >= 0) trip.emplace_back(col_m[i], col_m[k], ds_dm.imag());
                }
            }
            for (int i : pq) {
                const auto c = static_cast<std::size_t>(i);
                if (q_vdep[c] != 0.0) trip.emplace_back(col_m[c], col_m[c], q_vdep[c]);
            }
            Eigen::SparseMatrix<double> jac(dim, dim);
            jac.setFromTriplets(trip.begin(), trip.end());
            Eigen::VectorXd dx;
            if (dim <= kDenseJacobian) {
                const Eigen::FullPivLU<Eigen::MatrixXd> lu{Eigen::MatrixXd(jac)};
                if (!lu.isInvertible()) throw SolverError("singular power-flow Jacobian");
                dx = lu.solve(-f);
            } else {
                if (!pattern_ready) {
                    sparse_lu.analyzePattern(jac);
                    pattern_ready = true;
                }
                auto& lu = sparse_lu;
                lu.factorize(jac);
                if (lu.info() != Eigen::Success) throw SolverError("singular power-flow Jacobian");
                dx = lu.solve(-f);
                if (lu.info() != Eigen::Success) throw SolverError("singular power-flow Jacobian");
            }
            if (!dx.allFinite()) throw SolverError("singular power-flow Jacobian");
            for (int i : pvpq) {
                const double va = std::arg(v[i]) + dx[col_a[static_cast<std::size_t>(i)]];
                double vm = std::abs(v[i]);
                if (col_m[static_cast<std::size_t>(i)] >= 0) vm += dx[col_m[static_cast<std::size_t>(i)]];
                v[i] = std::polar(vm, va);
            }
        }
        if (!converged || !options.enforce_q_limits) break;

        // PV -> PQ switching at reactive limits.
        const Eigen::VectorXcd scalc = v.cwiseProduct((ybus * v).conjugate());
        bool switched = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (type[i] != BusType::pv) continue;
            const double qg = scalc[static_cast<Eigen::Index>(i)].imag() + q_load[i] +
                              q_vdep[i] * std::abs(v[static_cast<Eigen::Index>(i)]);
            if (qg > q_max[i] + options.tolerance) {
                type[i] = BusType::pq;
                q_fixed_gen[i] = q_max[i];
                switched = true;
            } else if (qg < q_min[i] - options.tolerance) {
                type[i] = BusType::pq;
                q_fixed_gen[i] = q_min[i];
                switched = true;
            }
        }
        if (!switched) break;
    }

    res.converged = converged;
    res.bus_type = type;
    res.vm.resize(n);
    res.va.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        res.vm[i] = std::abs(v[static_cast<Eigen::Index>(i)]);
        res.va[i] = active[i] ? std::arg(v[static_cast<Eigen::Index>(i)]) : 0.0;
    }

    res.s_from.assign(net.branches.size(), cplx(0.0, 0.0));
    res.s_to.assign(net.branches.size(), cplx(0.0, 0.0));
    for (std::size_t b = 0; b < net.branches.size(); ++b) {
        const auto& br = net.branches[b];
        const int f = net.bus_pos.at(br.from_bus);
        const int t = net.bus_pos.at(br.to_bus);
        if (!br.status || !active[static_cast<std::size_t>(f)] || !active[static_cast<std::size_t>(t)]) continue;
        const auto y = branch_admittance(br);
        const cplx vf = v[f];
        const cplx vt = v[t];
        res.s_from[b] = vf * std::conj(y.yff * vf + y.yft * vt) * base;
        res.s_to[b] = vt * std::conj(y.ytf * vf + y.ytt * vt) * base;
    }

    // Generator dispatch: slack absorbs P split by pmax, PV/slack absorb Q split by range.
    const Eigen::VectorXcd scalc = v.cwiseProduct((ybus * v).conjugate());
    std::vector<double> bus_p(n), bus_q(n);
    for (std::size_t i = 0; i < n; ++i) {
        const cplx s = scalc[static_cast<Eigen::Index>(i)];
        bus_p[i] = type[i] == BusType::slack ? s.real() + p_load[i] : p_gen[i];
        bus_q[i] = type[i] == BusType::pq ? q_fixed_gen[i]
                                          : s.imag() + q_load[i] + q_vdep[i] * std::abs(v[static_cast<Eigen::Index>(i)]);
    }
    std::vector<double> range_sum(n, 0.0), pmax_sum(n, 0.0);
    for (const auto& g : net.gens) {
        if (!g.status) continue;
        range_sum[static_cast<std::size_t>(net.bus_pos.at(g.bus))] += g.qmax - g.qmin;
        pmax_sum[static_cast<std::size_t>(net.bus_pos.at(g.bus))] += g.pmax;
    }
    res.gen_p.assign(net.gens.size(), 0.0);
    res.gen_q.assign(net.gens.size(), 0.0);
    for (std::size_t k = 0; k < net.gens.size(); ++k) {
        const auto& g = net.gens[k];
        if (!g.status) continue;
        const auto i = static_cast<std::size_t>(net.bus_pos.at(g.bus));
        const double share_q = range_sum[i] > 0.0 ? (g.qmax - g.qmin) / range_sum[i] : 1.0 / gen_count[i];
        const double share_p = pmax_sum[i] > 0.0 ? g.pmax / pmax_sum[i] : 1.0 / gen_count[i];
        res.gen_p[k] = type[i] == BusType::slack ? bus_p[i] * base * share_p : g.pg;
        res.gen_q[k] = bus_q[i] * base * share_q;
    }
    return res;
}

std::vector<LimitViolation> check_limits(const NetworkModel& net, const PowerFlowResult& pf, double tol) {
    std::vector<LimitViolation> out;
    if (!pf.converged) {
        const int id = pf.worst_bus >= 0 ? net.buses[static_cast<std::size_t>(pf.worst_bus)].id : 0;
        out.push_back({LimitKind::no_convergence, id, pf.mismatch, 0.0, std::numeric_limits<double>::infinity()});
        return out;
    }
    for (std::size_t i = 0; i < net.buses.size(); ++i) {
        const auto& b = net.buses[i];
        if (b.bus_type == BusType::isolated) continue;
        if (pf.vm[i] < b.vmin - tol) {
            out.push_back({LimitKind::voltage_low, b.id, pf.vm[i], b.vmin, b.vmin - pf.vm[i]});
        } else if (pf.vm[i] > b.vmax + tol) {
            out.push_back({LimitKind::voltage_high, b.id, pf.vm[i], b.vmax, pf.vm[i] - b.vmax});
        }
    }
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const auto& br = net.branches[k];
        if (!br.status) continue;
        const double s = std::max(std::abs(pf.s_from[k]), std::abs(pf.s_to[k]));
        if (br.rate > 0.0 && s > br.rate * (1.0 + tol)) {
            out.push_back({LimitKind::thermal, br.id, s, br.rate, (s - br.rate) / br.rate});
        }
        const double dtheta = pf.va[static_cast<std::size_t>(net.bus_pos.at(br.from_bus))] -
                              pf.va[static_cast<std::size_t>(net.bus_pos.at(br.to_bus))];
        if (dtheta > br.angmax + tol) {
            out.push_back({LimitKind::angle, br.id, dtheta, br.angmax, dtheta - br.angmax});
        } else if (dtheta < br.angmin - tol) {
            out.push_back({LimitKind::angle, br.id, dtheta, br.angmin, br.angmin - dtheta});
        }
    }
    const double base = net.base_mva;
    for (std::size_t k = 0; k < net.gens.size(); ++k) {
        const auto& g = net.gens[k];
        if (!g.status) continue;
        const auto i = static_cast<std::size_t>(net.bus_pos.at(g.bus));
        if (pf.bus_type[i] == BusType::slack) {
            if (pf.gen_p[k] > g.pmax + tol * base) {
                out.push_back({LimitKind::gen_p_high, g.id, pf.gen_p[k], g.pmax, (pf.gen_p[k] - g.pmax) / base});
            } else if (pf.gen_p[k] < g.pmin - tol * base) {
                out.push_back({LimitKind::gen_p_low, g.id, pf.gen_p[k], g.pmin, (g.pmin - pf.gen_p[k]) / base});
            }
        }
        if (pf.bus_type[i] != BusType::pq) {
            if (pf.gen_q[k] > g.qmax + tol * base) {
                out.push_back({LimitKind::gen_q_high, g.id, pf.gen_q[k], g.qmax, (pf.gen_q[k] - g.qmax) / base});
            } else if (pf.gen_q[k] < g.qmin - tol * base) {
                out.push_back({LimitKind::gen_q_low, g.id, pf.gen_q[k], g.qmin, (g.qmin - pf.gen_q[k]) / base});
            }
        }
    }
    return out;
}

Demand scenario_demand(const NetworkModel& network, const GmdScenario& scenario, std::span<const double> shed) {
    Demand d;
    for (std::size_t k = 0; k < network.loads.size(); ++k) {
        const double served = shed.empty() ? 1.0 : 1.0 - shed[k];
        d.pd.push_back(network.loads[k].pd * scenario.scale_p(k) * served);
        d.qd.push_back(network.loads[k].qd * scenario.scale_q(k) * served);
    }
    return d;
}

double shed_cost(const NetworkModel& network, const GmdScenario& scenario, std::span<const double> shed_fraction) {
    double cost = 0.0;
    for (std::size_t k = 0; k < network.loads.size(); ++k) {
        cost += std::abs(network.loads[k].pd * scenario.scale_p(k)) * network.loads[k].shed_cost * shed_fraction[k];
    }
    return cost;
}

namespace {

bool sheddable(LimitKind k) {
    switch (k) {
        case LimitKind::voltage_low:
        case LimitKind::thermal:
        case LimitKind::angle:
        case LimitKind::gen_p_high:
        case LimitKind::gen_q_high:
        case LimitKind::no_convergence: return true;
        default: return false;
    }
}

// Bus positions where a violation is located.
std::vector<int> violation_buses(const NetworkModel& net, const LimitViolation& v) {
    switch (v.kind) {
        case LimitKind::voltage_low:
        case LimitKind::voltage_high:
        case LimitKind::no_convergence: return {net.bus_pos.at(v.id)};
        case LimitKind::thermal:
        case LimitKind::angle: {
            const auto& br = net.branch(v.id);
            return {net.bus_pos.at(br.from_bus), net.bus_pos.at(br.to_bus)};
        }
        default:
            for (const auto& g : net.gens) {
                if (g.id == v.id) return {net.bus_pos.at(g.bus)};
            }
    }
    return {};
}

}  // namespace

MldResult evaluate_mld(const NetworkModel& net, const GmdScenario& scenario, const BlockerVector& z,
                       const MldOptions& options) {
    if (z.mode != BlockerMode::binary) throw InvalidArgument("evaluate_mld needs a binary blocker vector");
    const std::size_t n_bus = net.buses.size();
    const std::size_t n_load = net.loads.size();

    const GicSolution gic = solve_gic(net, scenario.field, z);
    const auto& imag = gic.effective_gic_mag;

    std::vector<std::vector<int>> adjacency(n_bus);
    for (const auto& br : net.branches) {
        if (!br.status) continue;
        const int f = net.bus_pos.at(br.from_bus);
        const int t = net.bus_pos.at(br.to_bus);
        adjacency[static_cast<std::size_t>(f)].push_back(t);
        adjacency[static_cast<std::size_t>(t)].push_back(f);
    }
    std::vector<std::vector<int>> loads_at(n_bus);
    for (std::size_t k = 0; k < n_load; ++k) {
        loads_at[static_cast<std::size_t>(net.bus_pos.at(net.loads[k].bus))].push_back(static_cast<int>(k));
    }
    const int max_steps = static_cast<int>(std::ceil(1.0 / options.shed_step - 1e-9));

    MldResult res;
    res.shed_fraction.assign(n_load, 0.0);
    std::vector<int> steps(n_load, 0);
    PowerFlowResult pf;
    bool have_pf = false;
    std::vector<double> vm0(n_bus);
    for (std::size_t i = 0; i < n_bus; ++i) vm0[i] = net.buses[i].vm;
    const std::vector<double> zero_q(net.couplings.size(), 0.0);
    std::vector<double> q_per_vm(n_bus, 0.0);
    {
        const std::vector<double> unit(n_bus, 1.0);
        const auto [pos, neg] = qloss(net, imag, unit);
        for (std::size_t k = 0; k < net.couplings.size(); ++k) {
            const auto& br = net.branch(net.couplings[k].ac_branch);
            q_per_vm[static_cast<std::size_t>(net.bus_pos.at(br.from_bus))] += pos[k];
            q_per_vm[static_cast<std::size_t>(net.bus_pos.at(br.to_bus))] += neg[k];
        }
    }

    while (true) {
        // GIC losses and ac voltages are coupled only through |v| at the high side.
        const Demand demand = scenario_demand(net, scenario, res.shed_fraction);
        std::vector<double> vm = have_pf && pf.converged ? pf.vm : vm0;
        auto [qpos, qneg] = qloss(net, imag, vm);
        const int rounds = options.coupled_newton ? 1 : options.coupling_rounds;
        for (int round = 0; round < rounds; ++round) {
            const PowerFlowResult* warm = have_pf && pf.converged ? &pf : nullptr;
            const std::span<const double> pos = options.coupled_newton ? std::span<const double>(zero_q) : qpos;
            const std::span<const double> neg = options.coupled_newton ? std::span<const double>(zero_q) : qneg;
            const std::span<const double> vdep = options.coupled_newton ? std::span<const double>(q_per_vm)
                                                                        : std::span<const double>();
            PowerFlowResult next;
            try {
                next = power_flow(net, demand, pos, neg, options.power_flow, warm, vdep);
                if (!next.converged && warm) next = power_flow(net, demand, pos, neg, options.power_flow, nullptr, vdep);
            } catch (const SolverError&) {
                // A singular Jacobian is a collapsed operating point for shedding purposes.
                next = PowerFlowResult{};
                next.converged = false;
                next.worst_bus = -1;
                next.vm = vm0;
                next.va.assign(n_bus, 0.0);
                next.bus_type.assign(n_bus, BusType::pq);
                next.s_from.assign(net.branches.size(), {});
                next.s_to.assign(net.branches.size(), {});
                next.gen_p.assign(net.gens.size(), 0.0);
                next.gen_q.assign(net.gens.size(), 0.0);
                next.mismatch = std::numeric_limits<double>::infinity();
            }
            res.pf_iterations += next.iterations;
            pf = std::move(next);
            have_pf = true;
            if (!pf.converged) break;
            auto [npos, nneg] = qloss(net, imag, pf.vm);
            double change = 0.0;
            for (std::size_t k = 0; k < npos.size(); ++k) {
                change = std::max({change, std::abs(npos[k] - qpos[k]), std::abs(nneg[k] - qneg[k])});
            }
            qpos = std::move(npos);
            qneg = std::move(nneg);
            if (change <= options.coupling_tolerance) break;
        }
        res.qloss.resize(qpos.size());
        for (std::size_t k = 0; k < qpos.size(); ++k) res.qloss[k] = qpos[k] + qneg[k];

        auto violations = check_limits(net, pf, options.limit_tolerance);
        if (!pf.converged && pf.worst_bus < 0) {
            // Singular Jacobian: locate at the most loaded bus still serving demand.
            int worst = 0;
            double worst_q = -1.0;
            for (std::size_t i = 0; i < n_bus; ++i) {
                double q = 0.0;
                for (int k : loads_at[i]) q += demand.qd[static_cast<std::size_t>(k)];
                if (q > worst_q) {
                    worst_q = q;
                    worst = static_cast<int>(i);
                }
            }
            violations.front().id = net.buses[static_cast<std::size_t>(worst)].id;
        }
        res.violations = violations;

        const LimitViolation* target = nullptr;
        for (const auto& v : violations) {
            if (!sheddable(v.kind)) continue;
            if (!target || v.severity > target->severity ||
                (v.severity == target->severity &&
                 std::pair(static_cast<int>(v.kind), v.id) < std::pair(static_cast<int>(target->kind), target->id))) {
                target = &v;
            }
        }
        if (!target) break;

        if (target->kind == LimitKind::no_convergence) {
            // Collapse is system-wide: every load still serving takes one step.
            bool any = false;
            for (std::size_t k = 0; k < n_load; ++k) {
                const auto& load = net.loads[k];
                if (steps[k] >= max_steps || (load.pd == 0.0 && load.qd == 0.0)) continue;
                ++steps[k];
                res.shed_fraction[k] = std::min(1.0, steps[k] * options.shed_step);
                any = true;
            }
            if (!any) break;
            ++res.shed_steps;
            res.shed_cost_trace.push_back(shed_cost(net, scenario, res.shed_fraction));
            if (res.shed_cost_trace.back() > options.cost_cap) {
                res.capped = true;
                break;
            }
            continue;
        }

        // Breadth-first search outward from the violation for loads left to shed.
        std::vector<int> dist(n_bus, -1);
        std::deque<int> queue;
        for (int b : violation_buses(net, *target)) {
            if (dist[static_cast<std::size_t>(b)] < 0) {
                dist[static_cast<std::size_t>(b)] = 0;
                queue.push_back(b);
            }
        }
        int chosen = -1;
        int chosen_dist = -1;
        while (!queue.empty()) {
            const int b = queue.front();
            queue.pop_front();
            const int d = dist[static_cast<std::size_t>(b)];
            if (chosen >= 0 && d > chosen_dist) break;
            for (int k : loads_at[static_cast<std::size_t>(b)]) {
                const auto& load = net.loads[static_cast<std::size_t>(k)];
                if (steps[static_cast<std::size_t>(k)] >= max_steps) continue;
                if (load.pd == 0.0 && load.qd == 0.0) continue;
                if (chosen < 0 || load.shed_cost < net.loads[static_cast<std::size_t>(chosen)].shed_cost ||
                    (load.shed_cost == net.loads[static_cast<std::size_t>(chosen)].shed_cost &&
                     load.id < net.loads[static_cast<std::size_t>(chosen)].id)) {
                    chosen = k;
                    chosen_dist = d;
                }
            }
            for (int nb : adjacency[static_cast<std::size_t>(b)]) {
                if (dist[static_cast<std::size_t>(nb)] < 0) {
                    dist[static_cast<std::size_t>(nb)] = d + 1;
                    queue.push_back(nb);
                }
            }
        }
        if (chosen < 0) break;
        auto& s = steps[static_cast<std::size_t>(chosen)];
        ++s;
        res.shed_fraction[static_cast<std::size_t>(chosen)] = std::min(1.0, s * options.shed_step);
        ++res.shed_steps;
        res.shed_cost_trace.push_back(shed_cost(net, scenario, res.shed_fraction));
        if (res.shed_cost_trace.back() > options.cost_cap) {
            res.capped = true;
            break;
        }
    }

    res.converged = pf.converged;
    res.vm = pf.vm;
    res.va = pf.va;
    res.branch_flows_from = pf.s_from;
    res.branch_flows_to = pf.s_to;
    res.shed_cost = shed_cost(net, scenario, res.shed_fraction);
    return res;
}

nlohmann::json mld_result_to_json(const NetworkModel& network, const MldResult& r) {
    using nlohmann::json;
    json out;
    out["shed_cost"] = r.shed_cost;
    out["converged"] = r.converged;
    out["pf_iterations"] = r.pf_iterations;
    out["shed_steps"] = r.shed_steps;
    if (r.capped) out["capped"] = true;
    json loads = json::array();
    for (std::size_t k = 0; k < network.loads.size(); ++k) {
        loads.push_back({{"id", network.loads[k].id}, {"shed_fraction", r.shed_fraction[k]}});
    }
    out["load"] = std::move(loads);
    json buses = json::array();
    for (std::size_t i = 0; i < network.buses.size() && i < r.vm.size(); ++i) {
        buses.push_back({{"id", network.buses[i].id}, {"vm", r.vm[i]}, {"va", r.va[i]}});
    }
    out["bus"] = std::move(buses);
    json flows = json::array();
    for (std::size_t b = 0; b < network.branches.size() && b < r.branch_flows_from.size(); ++b) {
        const auto sf = r.branch_flows_from[b];
        const auto st = r.branch_flows_to[b];
        flows.push_back({{"id", network.branches[b].id},
                         {"p_from", sf.real()}, {"q_from", sf.imag()},
                         {"p_to", st.real()}, {"q_to", st.imag()}});
    }
    out["branch"] = std::move(flows);
    json viol = json::array();
    for (const auto& v : r.violations) {
        viol.push_back({{"kind", to_string(v.kind)}, {"id", v.id}, {"value", v.value}, {"limit", v.limit}});
    }
    out["violations"] = std::move(viol);
    return out;
}

}  // namespace gicnet
