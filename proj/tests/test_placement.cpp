#include <doctest.h>

#include <algorithm>
#include <array>
#include <random>

#include "gicnet/error.hpp"
#include "gicnet/placement.hpp"

using namespace gicnet;

namespace {

const std::string kData = GICNET_DATA_DIR;

const NetworkModel& epri21() {
    static const NetworkModel net = load_network(kData + "/epri21.json");
    return net;
}

GmdScenario random_scenario(std::mt19937_64& rng, const NetworkModel& net) {
    std::uniform_real_distribution<double> mag(5.0, 20.0), dir(0.0, 360.0), scale(0.8, 1.2);
    auto s = GmdScenario::nominal(EField(mag(rng), dir(rng)));
    for (std::size_t k = 0; k < net.loads.size(); ++k) s.load_scale_p.push_back(scale(rng));
    s.load_scale_q = s.load_scale_p;
    return s;
}

void check_feasible(const NetworkModel& net, const GmdScenario& s, const PlacementSolution& p, double budget) {
    CHECK(p.cost <= budget + 1e-9);
    CHECK(p.cost == doctest::Approx(placement_cost(net, p.blocked)));
    CHECK(std::is_sorted(p.blocked.begin(), p.blocked.end()));
    for (const auto& [id, v] : p.z.z) CHECK((v == 0.0 || v == 1.0));
    CHECK(p.shed_cost == evaluate_mld(net, s, p.z).shed_cost);
}

}  // namespace

TEST_CASE("zero budget places nothing") {
    const auto& net = epri21();
    const auto s = GmdScenario::nominal(EField(15.0, 45.0));
    const double base = evaluate_mld(net, s, BlockerVector::none()).shed_cost;
    for (const auto& p : {solve_exhaustive(net, s, 0.0), solve_heuristic(net, s, 0.0)}) {
        CHECK(p.blocked.empty());
        CHECK(p.cost == 0.0);
        CHECK(p.shed_cost == base);
    }
}

TEST_CASE("zero field prefers the empty placement") {
    const auto& net = epri21();
    const auto s = GmdScenario::nominal(EField(0.0, 0.0));
    CHECK(solve_exhaustive(net, s, net.blockers.budget).blocked.empty());
    CHECK(solve_heuristic(net, s, net.blockers.budget).blocked.empty());
}

TEST_CASE("budget below the cheapest blocker places nothing") {
    auto net = epri21();
    for (auto& c : net.blockers.costs) c.cost = 3.0;
    const auto s = GmdScenario::nominal(EField(20.0, 45.0));
    CHECK(solve_heuristic(net, s, 2.5).blocked.empty());
    CHECK(solve_exhaustive(net, s, 2.5).blocked.empty());
}

TEST_CASE("a single useful candidate is taken") {
    const auto& full = epri21();
    int useful = -1;
    GmdScenario s;
    for (double mag = 5.0; mag <= 20.0 && useful < 0; mag += 2.5) {
        for (double dir = 0.0; dir < 360.0 && useful < 0; dir += 45.0) {
            s = GmdScenario::nominal(EField(mag, dir));
            const double base = evaluate_mld(full, s, BlockerVector::none()).shed_cost;
            for (int c : full.candidates()) {
                const std::array<int, 1> one{c};
                if (evaluate_mld(full, s, BlockerVector::binary_from(one)).shed_cost < base - 1e-9) {
                    useful = c;
                    break;
                }
            }
        }
    }
    REQUIRE(useful >= 0);
    auto net = full;
    net.blockers.costs = {{useful, 1.0}};
    const auto p = solve_heuristic(net, s, 1.0);
    CHECK(p.blocked == std::vector<int>{useful});
}

TEST_CASE("exhaustive enumerates every subset of EPRI21 at full budget") {
    const auto& net = epri21();
    const auto s = GmdScenario::nominal(EField(10.0, 90.0));
    const auto p = solve_exhaustive(net, s, 8.0);
    CHECK(p.evaluations == 256);
    CHECK(p.method == PlacementMethod::exhaustive);
    check_feasible(net, s, p, 8.0);
}

TEST_CASE("exhaustive refuses oversized candidate sets") {
    const auto net = load_network(kData + "/uiuc150.json");
    CHECK_THROWS_AS((void)solve_exhaustive(net, GmdScenario::nominal(EField(5.0, 45.0)), 4.0), InvalidArgument);
}

TEST_CASE("heuristic against the exhaustive oracle on random scenarios") {
    const auto& net = epri21();
    const double budget = net.blockers.budget;
    std::mt19937_64 rng(2024);
    int equal = 0;
    const int n = 50;
    for (int i = 0; i < n; ++i) {
        const auto s = random_scenario(rng, net);
        const auto h = solve_heuristic(net, s, budget);
        const auto e = solve_exhaustive(net, s, budget);
        CAPTURE(i);
        check_feasible(net, s, h, budget);
        check_feasible(net, s, e, budget);
        CHECK(h.shed_cost >= e.shed_cost - 1e-9);
        CHECK(std::is_sorted(h.incumbent_trace.rbegin(), h.incumbent_trace.rend()));
        equal += h.shed_cost <= e.shed_cost + 1e-9;
    }
    MESSAGE("heuristic matched the oracle on " << equal << " of " << n);
    CHECK(equal >= 40);
}

TEST_CASE("labels are deterministic") {
    const auto& net = epri21();
    std::mt19937_64 rng(7);
    const auto s = random_scenario(rng, net);
    const std::vector<GmdScenario> twice{s, s};
    const auto labels = label_scenarios(net, twice, net.blockers.budget);
    REQUIRE(labels.size() == 2);
    CHECK(labels[0].solution.blocked == labels[1].solution.blocked);
    CHECK(labels[0].solution.shed_cost == labels[1].solution.shed_cost);
    CHECK(labels[0].solution.method == PlacementMethod::exhaustive);
    CHECK(labels[0].seconds >= 0.0);

    const auto a = solve_heuristic(net, s, net.blockers.budget, 3);
    const auto b = solve_heuristic(net, s, net.blockers.budget, 3);
    CHECK(a.blocked == b.blocked);
}

TEST_CASE("default economics") {
    const auto& net = epri21();
    const auto econ = default_economics(net);
    CHECK(econ.budget == 4.0);
    CHECK(econ.costs.size() == 8);
    for (const auto& c : econ.costs) CHECK(c.cost == 1.0);
}
