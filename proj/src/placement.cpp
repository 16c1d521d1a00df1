#include "gicnet/placement.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "gicnet/error.hpp"

namespace gicnet {

namespace {

constexpr double kBudgetSlack = 1e-9;

// Memoized evaluate_mld over candidate masks.
class MaskEvaluator {
  public:
    MaskEvaluator(const NetworkModel& net, const GmdScenario& scenario, const MldOptions& options)
        : net_(net), scenario_(scenario), options_(options), candidates_(net.candidates()) {
        for (int c : candidates_) costs_.push_back(net.blocker_cost(c));
    }

    // Exact shed cost when it is <= cap; otherwise some value > cap and
    // `exact` (when given) is cleared.
    double shed(const std::vector<char>& mask, double cap = std::numeric_limits<double>::infinity(),
                bool* exact = nullptr) {
        auto it = cache_.find(mask);
        if (it == cache_.end() || (!it->second.exact && it->second.value <= cap)) {
            MldOptions opts = options_;
            opts.cost_cap = cap;
            const auto r = evaluate_mld(net_, scenario_, BlockerVector::binary_from(ids(mask)), opts);
            ++evaluations;
            it = cache_.insert_or_assign(mask, Entry{r.shed_cost, !r.capped}).first;
        }
        if (exact) *exact = it->second.exact;
        return it->second.value;
    }

    [[nodiscard]] std::vector<int> ids(const std::vector<char>& mask) const {
        std::vector<int> out;
        for (std::size_t k = 0; k < mask.size(); ++k) {
            if (mask[k]) out.push_back(candidates_[k]);
        }
        return out;
    }

    [[nodiscard]] double cost(const std::vector<char>& mask) const {
        double c = 0.0;
        for (std::size_t k = 0; k < mask.size(); ++k) {
            if (mask[k]) c += costs_[k];
        }
        return c;
    }

    [[nodiscard]] std::size_t size() const { return candidates_.size(); }
    [[nodiscard]] double unit_cost(std::size_t k) const { return costs_[k]; }

    int evaluations = 0;

  private:
    const NetworkModel& net_;
    const GmdScenario& scenario_;
    const MldOptions& options_;
    std::vector<int> candidates_;
    std::vector<double> costs_;
    struct Entry {
        double value;
        bool exact;
    };
    std::map<std::vector<char>, Entry> cache_;
};

PlacementSolution finish(MaskEvaluator& ev, const std::vector<char>& mask, double shed, PlacementMethod method,
                         double budget) {
    PlacementSolution s;
    s.blocked = ev.ids(mask);
    s.z = BlockerVector::binary_from(s.blocked);
    s.cost = ev.cost(mask);
    s.shed_cost = shed;
    s.evaluations = ev.evaluations;
    s.method = method;
    if (s.cost > budget + kBudgetSlack) throw SolverError("placement exceeds the blocker budget");
    return s;
}

void check_budget(double budget) {
    if (!(budget >= 0.0) || !std::isfinite(budget)) throw InvalidArgument("budget must be a finite non-negative number");
}

}  // namespace

std::string to_string(PlacementMethod m) {
    return m == PlacementMethod::exhaustive ? "exhaustive" : "greedy_local";
}

double placement_cost(const NetworkModel& network, std::span<const int> blocked) {
    double c = 0.0;
    for (int id : blocked) c += network.blocker_cost(id);
    return c;
}

BlockerEconomics default_economics(const NetworkModel& network) {
    BlockerEconomics e;
    for (int c : network.candidates()) e.costs.push_back({c, 1.0});
    e.budget = std::ceil(static_cast<double>(e.costs.size()) / 2.0);
    return e;
}

PlacementSolution solve_exhaustive(const NetworkModel& network, const GmdScenario& scenario, double budget,
                                   const PlacementOptions& options) {
    check_budget(budget);
    MaskEvaluator ev(network, scenario, options.mld);
    const std::size_t n = ev.size();
    if (n > options.exhaustive_cap) {
        throw InvalidArgument("exhaustive placement is capped at " + std::to_string(options.exhaustive_cap) +
                              " candidates, got " + std::to_string(n));
    }
    std::vector<char> best_mask(n, 0);
    double best_shed = std::numeric_limits<double>::infinity();
    double best_cost = 0.0;
    std::vector<int> best_ids;
    std::vector<double> trace;
    // Visit subsets by ascending total GIC reactive loss: low-loss subsets tend
    // to shed least, which tightens the cost cap early. The optimum and its
    // tie-break do not depend on the order.
    const PhysicsEvaluator physics(network, scenario.field);
    std::vector<std::pair<double, std::uint64_t>> order;
    for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << n); ++bits) {
        std::vector<char> mask(n);
        std::vector<double> z(n);
        for (std::size_t k = 0; k < n; ++k) {
            mask[k] = static_cast<char>((bits >> k) & 1U);
            z[k] = mask[k];
        }
        if (ev.cost(mask) > budget + kBudgetSlack) continue;
        order.emplace_back(physics.features(z)[0], bits);
    }
    std::sort(order.begin(), order.end());
    for (const auto& [qloss_total, bits] : order) {
        std::vector<char> mask(n);
        for (std::size_t k = 0; k < n; ++k) mask[k] = static_cast<char>((bits >> k) & 1U);
        const double cost = ev.cost(mask);
        const double shed = ev.shed(mask, best_shed);
        const auto ids = ev.ids(mask);
        bool better = shed < best_shed;
        if (shed == best_shed) {
            better = cost < best_cost || (cost == best_cost && ids < best_ids);
        }
        if (better) {
            best_mask = mask;
            best_shed = shed;
            best_cost = cost;
            best_ids = ids;
            trace.push_back(shed);
        }
    }
    auto s = finish(ev, best_mask, best_shed, PlacementMethod::exhaustive, budget);
    s.incumbent_trace = std::move(trace);
    return s;
}

PlacementSolution solve_heuristic(const NetworkModel& network, const GmdScenario& scenario, double budget,
                                  std::uint64_t seed, const PlacementOptions& options) {
    check_budget(budget);
    MaskEvaluator ev(network, scenario, options.mld);
    const std::size_t n = ev.size();

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    if (seed != 0) {
        std::mt19937_64 rng(seed);
        for (std::size_t k = n; k > 1; --k) std::swap(order[k - 1], order[rng() % k]);
    }

    std::vector<std::size_t> rank(n);
    for (std::size_t r = 0; r < n; ++r) rank[order[r]] = r;
    const PhysicsEvaluator physics(network, scenario.field);
    const auto candidates = network.candidates();

    // Grounds without any dc branch never carry current, whatever else is blocked.
    std::vector<char> idle(n, 1);
    for (const auto& e : network.gmd_branches) {
        for (std::size_t k = 0; k < n; ++k) {
            if (e.from_node == candidates[k] || e.to_node == candidates[k]) idle[k] = 0;
        }
    }

    std::vector<char> mask(n, 0);
    double current = ev.shed(mask);
    std::vector<double> trace{current};
    std::vector<char> settled = mask;
    int plateau = 0;

    while (current > 0.0) {
        const double spent = ev.cost(mask);
        std::vector<double> z(mask.begin(), mask.end());
        const auto gic = solve_gic(network, scenario.field, BlockerVector::from_dense(network, z, BlockerMode::binary));
        const double proxy_now = physics.features(z)[0];
        // Visit promising additions first so the cost cap tightens early.
        std::vector<std::pair<double, std::size_t>> visit;
        for (std::size_t k = 0; k < n; ++k) {
            if (mask[k] || idle[k] || spent + ev.unit_cost(k) > budget + kBudgetSlack) continue;
            // Blocking a neutral that carries no current leaves every quantity unchanged.
            if (gic.grounding_current[static_cast<std::size_t>(network.gmd_bus_pos.at(candidates[k]))] == 0.0) continue;
            z[k] = 1.0;
            visit.emplace_back(physics.features(z)[0], k);
            z[k] = 0.0;
        }
        std::sort(visit.begin(), visit.end(), [&](const auto& a, const auto& b) {
            return a.first != b.first ? a.first < b.first : rank[a.second] < rank[b.second];
        });

        std::size_t pick = n;
        double pick_gain = 0.0;
        double pick_shed = current;
        std::size_t level = n;  // lowest-proxy addition that keeps the shed cost
        for (const auto& [proxy, k] : visit) {
            // Anything above this cannot beat the best gain found so far.
            // Slack keeps exact ties exact.
            const double cap = pick == n ? current : current - pick_gain * ev.unit_cost(k) + 1e-9 * (1.0 + current);
            bool exact = true;
            mask[k] = 1;
            const double shed = ev.shed(mask, cap, &exact);
            mask[k] = 0;
            if (!exact) continue;
            if (current - shed <= options.min_improvement) {
                if (level == n && pick == n && shed <= current && proxy < proxy_now) level = k;
                continue;
            }
            const double gain = (current - shed) / ev.unit_cost(k);
            if (pick == n || gain > pick_gain || (gain == pick_gain && rank[k] < rank[pick])) {
                pick = k;
                pick_gain = gain;
                pick_shed = shed;
            }
        }
        if (pick == n) {
            if (level == n || plateau >= options.plateau_moves) break;
            mask[level] = 1;
            ++plateau;
            continue;
        }
        mask[pick] = 1;
        current = pick_shed;
        trace.push_back(current);
        settled = mask;
        plateau = 0;
    }
    // Plateau moves that never paid off are undone.
    mask = settled;

    // First-improvement 1-swap until no swap lowers the shed cost.
    bool improved = current > 0.0;
    while (improved) {
        improved = false;
        const double spent = ev.cost(mask);
        for (std::size_t out : order) {
            if (!mask[out]) continue;
            for (std::size_t in : order) {
                if (mask[in] || idle[in]) continue;
                if (spent - ev.unit_cost(out) + ev.unit_cost(in) > budget + kBudgetSlack) continue;
                mask[out] = 0;
                mask[in] = 1;
                const double shed = ev.shed(mask, current - options.min_improvement);
                if (shed < current - options.min_improvement) {
                    current = shed;
                    trace.push_back(current);
                    improved = true;
                    break;
                }
                mask[in] = 0;
                mask[out] = 1;
            }
            if (improved) break;
        }
        if (current <= 0.0) break;
    }

    auto s = finish(ev, mask, current, PlacementMethod::greedy_local, budget);
    s.incumbent_trace = std::move(trace);
    return s;
}

std::vector<ScenarioLabel> label_scenarios(const NetworkModel& network, std::span<const GmdScenario> scenarios,
                                           double budget, const PlacementOptions& options,
                                           std::size_t exhaustive_threshold) {
    const bool exhaustive = network.candidates().size() <= exhaustive_threshold;
    std::vector<ScenarioLabel> out;
    out.reserve(scenarios.size());
    for (const auto& sc : scenarios) {
        const auto start = std::chrono::steady_clock::now();
        ScenarioLabel label;
        label.scenario_id = sc.id;
        label.solution = exhaustive ? solve_exhaustive(network, sc, budget, options)
                                    : solve_heuristic(network, sc, budget, 0, options);
        label.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out.push_back(std::move(label));
    }
    return out;
}

nlohmann::json placement_to_json(const PlacementSolution& s) {
    return {{"blocked", s.blocked},
            {"cost", s.cost},
            {"shed_cost", s.shed_cost},
            {"evaluations", s.evaluations},
            {"method", to_string(s.method)}};
}

}  // namespace gicnet
