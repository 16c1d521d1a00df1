#pragma once

// Textbook polar Newton power flow: dense admittance matrix, mismatch
// Jacobian by central differences, dense LU. No reactive limits.

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "gicnet/grid_model.hpp"

namespace oracle {

struct DensePf {
    std::vector<double> vm, va;
    bool converged = false;
    int iterations = 0;
};

// pd/qd in MW/Mvar per load; q_extra in Mvar per bus (constant reactive
// demand); q_per_vm in Mvar per p.u. |v| per bus.
inline DensePf dense_newton(const gicnet::NetworkModel& net, const std::vector<double>& pd, const std::vector<double>& qd,
                            const std::vector<double>& q_extra = {}, const std::vector<double>& q_per_vm = {}) {
    using cplx = std::complex<double>;
    using gicnet::BusType;
    const int n = static_cast<int>(net.buses.size());
    auto pos = [&](int id) {
        for (int i = 0; i < n; ++i) {
            if (net.buses[static_cast<std::size_t>(i)].id == id) return i;
        }
        return -1;
    };
    const double base = net.base_mva;

    Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(n, n);
    for (const auto& br : net.branches) {
        if (!br.status) continue;
        const int f = pos(br.from_bus), t = pos(br.to_bus);
        if (net.buses[static_cast<std::size_t>(f)].bus_type == BusType::isolated ||
            net.buses[static_cast<std::size_t>(t)].bus_type == BusType::isolated) {
            continue;
        }
        const cplx ys = 1.0 / cplx(br.r, br.x);
        const double ratio = br.tap == 0.0 ? 1.0 : br.tap;
        const cplx a = ratio * std::exp(cplx(0.0, br.shift));
        const cplx half_b(0.0, br.b_sh / 2.0);
        Y(f, f) += (ys + half_b) / (ratio * ratio);
        Y(t, t) += ys + half_b;
        Y(f, t) += -ys / std::conj(a);
        Y(t, f) += -ys / a;
    }
    std::vector<double> p_spec(n, 0.0), q_spec(n, 0.0), qv(n, 0.0), vset(n, -1.0);
    std::vector<int> ngen(n, 0);
    for (int i = 0; i < n; ++i) {
        const auto& b = net.buses[static_cast<std::size_t>(i)];
        Y(i, i) += cplx(b.gs, b.bs);
        if (!q_extra.empty()) q_spec[i] -= q_extra[static_cast<std::size_t>(i)] / base;
        if (!q_per_vm.empty()) qv[i] = q_per_vm[static_cast<std::size_t>(i)] / base;
    }
    for (std::size_t k = 0; k < net.loads.size(); ++k) {
        const int i = pos(net.loads[k].bus);
        p_spec[i] -= pd[k] / base;
        q_spec[i] -= qd[k] / base;
    }
    for (const auto& g : net.gens) {
        if (!g.status) continue;
        const int i = pos(g.bus);
        p_spec[i] += g.pg / base;
        q_spec[i] += g.qg / base;
        if (ngen[i]++ == 0) vset[i] = g.vg;
    }

    std::vector<int> ang, mag;
    Eigen::VectorXd vm(n), va = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
        const auto& b = net.buses[static_cast<std::size_t>(i)];
        BusType t = b.bus_type;
        if (t == BusType::pv && ngen[i] == 0) t = BusType::pq;
        vm[i] = 1.0;
        if (t == BusType::isolated) {
            vm[i] = 0.0;
            continue;
        }
        if (t == BusType::slack) vm[i] = ngen[i] ? vset[i] : b.vm;
        if (t == BusType::pv) vm[i] = vset[i];
        if (t != BusType::slack) ang.push_back(i);
        if (t == BusType::pq) mag.push_back(i);
    }
    const auto na = static_cast<Eigen::Index>(ang.size());
    const auto dim = na + static_cast<Eigen::Index>(mag.size());

    auto unpack = [&](const Eigen::VectorXd& x, Eigen::VectorXd& m, Eigen::VectorXd& a) {
        for (Eigen::Index k = 0; k < na; ++k) a[ang[static_cast<std::size_t>(k)]] = x[k];
        for (std::size_t k = 0; k < mag.size(); ++k) m[mag[k]] = x[na + static_cast<Eigen::Index>(k)];
    };
    auto mismatch = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd m = vm, a = va;
        unpack(x, m, a);
        Eigen::VectorXcd v(n);
        for (int i = 0; i < n; ++i) v[i] = std::polar(m[i], a[i]);
        const Eigen::VectorXcd s = v.cwiseProduct((Y * v).conjugate());
        Eigen::VectorXd F(dim);
        for (Eigen::Index k = 0; k < na; ++k) {
            const int i = ang[static_cast<std::size_t>(k)];
            F[k] = s[i].real() - p_spec[i];
        }
        for (std::size_t k = 0; k < mag.size(); ++k) {
            const int i = mag[k];
            F[na + static_cast<Eigen::Index>(k)] = s[i].imag() - q_spec[i] + qv[i] * m[i];
        }
        return F;
    };

    Eigen::VectorXd x(dim);
    for (Eigen::Index k = 0; k < na; ++k) x[k] = va[ang[static_cast<std::size_t>(k)]];
    for (std::size_t k = 0; k < mag.size(); ++k) x[na + static_cast<Eigen::Index>(k)] = vm[mag[k]];

    DensePf out;
    for (int it = 0; it < 50; ++it) {
        const Eigen::VectorXd F = mismatch(x);
        if (F.size() == 0 || F.cwiseAbs().maxCoeff() < 1e-12) {
            out.converged = true;
            break;
        }
        Eigen::MatrixXd J(dim, dim);
        const double h = 1e-7;
        for (Eigen::Index c = 0; c < dim; ++c) {
            Eigen::VectorXd xp = x, xm = x;
            xp[c] += h;
            xm[c] -= h;
            J.col(c) = (mismatch(xp) - mismatch(xm)) / (2.0 * h);
        }
        x -= J.fullPivLu().solve(F);
        out.iterations = it + 1;
    }
    unpack(x, vm, va);
    out.vm.assign(vm.data(), vm.data() + n);
    out.va.assign(va.data(), va.data() + n);
    return out;
}

}  // namespace oracle
