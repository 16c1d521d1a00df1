#pragma once

// Seeded random networks for property tests.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "gicnet/grid_model.hpp"

namespace testnet {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// dc-only network: a random spanning tree plus extra lines over n nodes,
// roughly a third of the nodes grounded (node 0 always). Grounded nodes are
// the blocker candidates.
inline gicnet::NetworkModel random_dc_network(std::uint64_t seed, int n) {
    using namespace gicnet;
    std::mt19937_64 rng(seed);
    NetworkModel net;
    net.name = "random_dc";
    for (int i = 0; i < n; ++i) {
        GmdBus b;
        b.id = i + 1;
        b.kind = GmdBusKind::substation_ground;
        b.g_gnd = (i == 0 || uniform(rng, 0, 1) < 0.33) ? uniform(rng, 0.5, 10.0) : 0.0;
        net.gmd_buses.push_back(b);
        if (b.g_gnd > 0.0) net.blockers.costs.push_back({b.id, 1.0});
    }
    int id = 1;
    auto add_branch = [&](int f, int t) {
        GmdBranch e;
        e.id = id++;
        e.from_node = f + 1;
        e.to_node = t + 1;
        e.a = uniform(rng, 0.2, 20.0);
        if (uniform(rng, 0, 1) < 0.8) {
            e.kind = GmdBranchKind::line;
            e.disp_east_km = uniform(rng, -200, 200);
            e.disp_north_km = uniform(rng, -200, 200);
            e.len_km = std::hypot(e.disp_east_km, e.disp_north_km);
        } else {
            e.kind = GmdBranchKind::winding;
        }
        net.gmd_branches.push_back(e);
    };
    for (int i = 1; i < n; ++i) add_branch(static_cast<int>(rng() % static_cast<std::uint64_t>(i)), i);
    for (int k = 0; k < n / 3; ++k) {
        const int f = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
        const int t = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
        if (f != t) add_branch(f, t);
    }
    net.blockers.budget = 1.0;
    net.index();
    return net;
}

// Coupled ac/dc network of `subs` substations. Each substation has a
// low-voltage bus, a high-voltage bus, a grounded-wye/grounded-wye
// transformer between them and a substation ground (the blocker
// candidate). High-voltage buses are joined by a random tree of lines.
inline gicnet::NetworkModel random_coupled_network(std::uint64_t seed, int subs) {
    using namespace gicnet;
    std::mt19937_64 rng(seed);
    NetworkModel net;
    net.name = "random_coupled";
    std::vector<double> lat(static_cast<std::size_t>(subs)), lon(static_cast<std::size_t>(subs));
    int branch_id = 1, gmd_branch_id = 1;
    for (int s = 0; s < subs; ++s) {
        lat[static_cast<std::size_t>(s)] = uniform(rng, 33.0, 35.0);
        lon[static_cast<std::size_t>(s)] = uniform(rng, -88.0, -85.0);
        const double la = lat[static_cast<std::size_t>(s)], lo = lon[static_cast<std::size_t>(s)];
        const int lv = 10 * s + 1, hv = 10 * s + 2;
        AcBus b_lv{lv, s == 0 ? BusType::slack : BusType::pq, 1.0, 0.0, 0.9, 1.1, 20.0, 0.0, 0.0, la, lo, s + 1};
        AcBus b_hv{hv, BusType::pq, 1.0, 0.0, 0.9, 1.1, 345.0, 0.0, 0.0, la, lo, s + 1};
        net.buses.push_back(b_lv);
        net.buses.push_back(b_hv);
        if (s == 0) {
            Generator g;
            g.id = 1;
            g.bus = lv;
            g.pmax = 2000.0;
            g.qmin = -1000.0;
            g.qmax = 1000.0;
            g.vg = 1.0;
            net.gens.push_back(g);
        } else {
            net.loads.push_back({s, lv, uniform(rng, 20.0, 80.0), uniform(rng, 5.0, 20.0), 1.0});
        }
        const int ground = 100 + s, n_hv = 200 + s, n_lv = 300 + s;
        net.gmd_buses.push_back({ground, GmdBusKind::substation_ground, uniform(rng, 1.0, 10.0), std::nullopt, la, lo, s + 1});
        net.gmd_buses.push_back({n_hv, GmdBusKind::bus_node, 0.0, hv, la, lo, s + 1});
        net.gmd_buses.push_back({n_lv, GmdBusKind::bus_node, 0.0, lv, la, lo, s + 1});
        net.branches.push_back({branch_id, hv, lv, 0.0005, 0.015, 0.0, 0.0, 1.0, 0.0, -1.0471975511965976,
                                1.0471975511965976, true});
        const int hi_w = gmd_branch_id++, lo_w = gmd_branch_id++;
        net.gmd_branches.push_back({hi_w, n_hv, ground, uniform(rng, 5.0, 30.0), 0.0, 0.0, 0.0, GmdBranchKind::winding});
        net.gmd_branches.push_back({lo_w, n_lv, ground, uniform(rng, 5.0, 30.0), 0.0, 0.0, 0.0, GmdBranchKind::winding});
        TransformerCoupling c;
        c.ac_branch = branch_id++;
        c.config = TransformerConfig::gwye_gwye;
        c.hi_node = hi_w;
        c.lo_node = lo_w;
        c.alpha = 345.0 / 20.0;
        c.K = uniform(rng, 0.5, 2.0);
        c.V_base_hi = 345.0;
        c.V_base_lo = 20.0;
        c.neutral_gmd_bus = ground;
        c.is_blocker_candidate = true;
        net.couplings.push_back(c);
        net.blockers.costs.push_back({ground, 1.0});
    }
    for (int s = 1; s < subs; ++s) {
        const int p = static_cast<int>(rng() % static_cast<std::uint64_t>(s));
        const auto sp = static_cast<std::size_t>(p), ss = static_cast<std::size_t>(s);
        const double north = (lat[ss] - lat[sp]) * 111.2;
        const double east = (lon[ss] - lon[sp]) * 111.2 * std::cos(0.5 * (lat[ss] + lat[sp]) * std::acos(-1.0) / 180.0);
        net.branches.push_back({branch_id, 10 * p + 2, 10 * s + 2, 0.002, 0.02, 0.2, 0.0, 1.0, 0.0,
                                -1.0471975511965976, 1.0471975511965976, true});
        TransformerCoupling line;
        line.ac_branch = branch_id++;
        net.couplings.push_back(line);
        net.gmd_branches.push_back({gmd_branch_id++, 200 + p, 200 + s, uniform(rng, 0.5, 3.0), std::hypot(north, east),
                                    east, north, GmdBranchKind::line});
    }
    net.blockers.budget = std::ceil(subs / 2.0);
    net.index();
    return net;
}

}  // namespace testnet
