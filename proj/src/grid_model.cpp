#include "gicnet/grid_model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "gicnet/error.hpp"

namespace gicnet {

using nlohmann::json;

namespace {

template <typename T>
const T& lookup(const std::vector<T>& items, const std::unordered_map<int, int>& pos, int id,
                const char* what) {
    auto it = pos.find(id);
    if (it == pos.end()) {
        throw DanglingReferenceError(std::string("unknown ") + what + " id " + std::to_string(id));
    }
    return items[static_cast<std::size_t>(it->second)];
}

BusType parse_bus_type(const std::string& s) {
    if (s == "pq") return BusType::pq;
    if (s == "pv") return BusType::pv;
    if (s == "slack") return BusType::slack;
    if (s == "isolated") return BusType::isolated;
    throw ParseError("unknown bus type '" + s + "'");
}

TransformerConfig parse_config(const std::string& s) {
    if (s == "gwye_delta") return TransformerConfig::gwye_delta;
    if (s == "gwye_gwye") return TransformerConfig::gwye_gwye;
    if (s == "auto") return TransformerConfig::autotransformer;
    if (s == "three_winding") return TransformerConfig::three_winding;
    if (s == "line") return TransformerConfig::line;
    throw ParseError("unknown transformer config '" + s + "'");
}

GmdBusKind parse_gmd_bus_kind(const std::string& s) {
    if (s == "substation_ground") return GmdBusKind::substation_ground;
    if (s == "bus_node") return GmdBusKind::bus_node;
    throw ParseError("unknown gmd_bus kind '" + s + "'");
}

GmdBranchKind parse_gmd_branch_kind(const std::string& s) {
    if (s == "line") return GmdBranchKind::line;
    if (s == "winding") return GmdBranchKind::winding;
    if (s == "grounding_lead") return GmdBranchKind::grounding_lead;
    throw ParseError("unknown gmd_branch kind '" + s + "'");
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    return it->get<T>();
}

std::optional<int> get_opt_id(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<int>();
}

int get_id(const json& j, const char* key, const char* table) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_number_integer()) {
        throw ParseError(std::string(table) + ": missing integer field '" + key + "'");
    }
    return it->get<int>();
}

const json& table(const json& doc, const char* name, bool required = true) {
    static const json empty = json::array();
    auto it = doc.find(name);
    if (it == doc.end()) {
        if (required) throw ParseError(std::string("missing top-level array '") + name + "'");
        return empty;
    }
    if (!it->is_array()) throw ParseError(std::string("'") + name + "' must be an array");
    return *it;
}

void put_opt(json& j, const char* key, const std::optional<int>& v) {
    if (v) {
        j[key] = *v;
    } else {
        j[key] = nullptr;
    }
}

}  // namespace

std::string to_string(BusType t) {
    switch (t) {
        case BusType::pq: return "pq";
        case BusType::pv: return "pv";
        case BusType::slack: return "slack";
        case BusType::isolated: return "isolated";
    }
    return "pq";
}

std::string to_string(TransformerConfig c) {
    switch (c) {
        case TransformerConfig::gwye_delta: return "gwye_delta";
        case TransformerConfig::gwye_gwye: return "gwye_gwye";
        case TransformerConfig::autotransformer: return "auto";
        case TransformerConfig::three_winding: return "three_winding";
        case TransformerConfig::line: return "line";
    }
    return "line";
}

std::string to_string(GmdBusKind k) {
    return k == GmdBusKind::substation_ground ? "substation_ground" : "bus_node";
}

std::string to_string(GmdBranchKind k) {
    switch (k) {
        case GmdBranchKind::line: return "line";
        case GmdBranchKind::winding: return "winding";
        case GmdBranchKind::grounding_lead: return "grounding_lead";
    }
    return "line";
}

void NetworkModel::index() {
    bus_pos.clear();
    branch_pos.clear();
    gmd_bus_pos.clear();
    gmd_branch_pos.clear();
    for (std::size_t i = 0; i < buses.size(); ++i) bus_pos.emplace(buses[i].id, static_cast<int>(i));
    for (std::size_t i = 0; i < branches.size(); ++i) branch_pos.emplace(branches[i].id, static_cast<int>(i));
    for (std::size_t i = 0; i < gmd_buses.size(); ++i) gmd_bus_pos.emplace(gmd_buses[i].id, static_cast<int>(i));
    for (std::size_t i = 0; i < gmd_branches.size(); ++i) {
        gmd_branch_pos.emplace(gmd_branches[i].id, static_cast<int>(i));
    }
    std::sort(blockers.costs.begin(), blockers.costs.end(),
              [](const BlockerCost& a, const BlockerCost& b) { return a.candidate < b.candidate; });
}

const AcBus& NetworkModel::bus(int id) const { return lookup(buses, bus_pos, id, "bus"); }
const AcBranch& NetworkModel::branch(int id) const { return lookup(branches, branch_pos, id, "branch"); }
const GmdBus& NetworkModel::gmd_bus(int id) const { return lookup(gmd_buses, gmd_bus_pos, id, "gmd_bus"); }
const GmdBranch& NetworkModel::gmd_branch(int id) const {
    return lookup(gmd_branches, gmd_branch_pos, id, "gmd_branch");
}

std::vector<int> NetworkModel::candidates() const {
    std::vector<int> ids;
    ids.reserve(blockers.costs.size());
    for (const auto& c : blockers.costs) ids.push_back(c.candidate);
    std::sort(ids.begin(), ids.end());
    return ids;
}

double NetworkModel::blocker_cost(int candidate) const {
    for (const auto& c : blockers.costs) {
        if (c.candidate == candidate) return c.cost;
    }
    throw InvalidArgument("gmd_bus " + std::to_string(candidate) + " is not a blocker candidate");
}

std::vector<std::pair<int, int>> NetworkModel::gmd_attachments() const {
    std::map<int, int> first_bus_of_sub;
    for (const auto& b : buses) {
        if (b.substation == 0) continue;
        auto [it, inserted] = first_bus_of_sub.emplace(b.substation, b.id);
        if (!inserted) it->second = std::min(it->second, b.id);
    }
    std::vector<std::pair<int, int>> out;
    out.reserve(gmd_buses.size());
    for (const auto& g : gmd_buses) {
        if (g.kind == GmdBusKind::bus_node) {
            if (g.parent_ac_bus) out.emplace_back(g.id, *g.parent_ac_bus);
        } else {
            auto it = first_bus_of_sub.find(g.substation);
            if (it != first_bus_of_sub.end()) out.emplace_back(g.id, it->second);
        }
    }
    return out;
}

std::vector<Violation> validate(const NetworkModel& net) {
    std::vector<Violation> out;
    auto add = [&out](std::string entity, std::optional<int> id, std::string rule, std::string detail = {}) {
        out.push_back({std::move(entity), id, std::move(rule), std::move(detail)});
    };
    auto dangling = [&add](const std::string& entity, int id, const std::string& target, int ref) {
        add(entity, id, "dangling reference", "references missing " + target + " id " + std::to_string(ref));
    };

    auto check_unique = [&add](const std::string& entity, auto const& items, auto id_of) {
        std::set<int> seen;
        for (const auto& it : items) {
            int id = id_of(it);
            if (id <= 0) add(entity, id, "positive id");
            if (!seen.insert(id).second) add(entity, id, "unique id");
        }
    };
    check_unique("AcBus", net.buses, [](const AcBus& b) { return b.id; });
    check_unique("Load", net.loads, [](const Load& l) { return l.id; });
    check_unique("Generator", net.gens, [](const Generator& g) { return g.id; });
    check_unique("AcBranch", net.branches, [](const AcBranch& b) { return b.id; });
    check_unique("GmdBus", net.gmd_buses, [](const GmdBus& b) { return b.id; });
    check_unique("GmdBranch", net.gmd_branches, [](const GmdBranch& b) { return b.id; });

    const auto has_bus = [&net](int id) { return net.bus_pos.count(id) > 0; };
    const auto has_gmd_bus = [&net](int id) { return net.gmd_bus_pos.count(id) > 0; };

    for (const auto& b : net.buses) {
        if (!(b.vmin <= b.vmax)) add("AcBus", b.id, "vmin≤vmax");
        if (!(b.base_kv > 0.0)) add("AcBus", b.id, "base_kv>0");
    }
    for (const auto& l : net.loads) {
        if (!has_bus(l.bus)) dangling("Load", l.id, "AcBus", l.bus);
        if (!(l.shed_cost >= 0.0)) add("Load", l.id, "shed_cost≥0");
    }
    for (const auto& g : net.gens) {
        if (!has_bus(g.bus)) dangling("Generator", g.id, "AcBus", g.bus);
        if (!(g.pmin <= g.pmax)) add("Generator", g.id, "pmin≤pmax");
        if (!(g.qmin <= g.qmax)) add("Generator", g.id, "qmin≤qmax");
    }

    std::unordered_map<int, const TransformerConfig*> config_of_branch;
    for (const auto& c : net.couplings) config_of_branch.emplace(c.ac_branch, &c.config);

    for (const auto& br : net.branches) {
        if (!has_bus(br.from_bus)) dangling("AcBranch", br.id, "AcBus", br.from_bus);
        if (!has_bus(br.to_bus)) dangling("AcBranch", br.id, "AcBus", br.to_bus);
        if (!(br.r * br.r + br.x * br.x > 0.0)) add("AcBranch", br.id, "r²+x²>0");
        if (!(br.rate >= 0.0)) add("AcBranch", br.id, "rate≥0");
        if (!(br.angmin <= br.angmax)) add("AcBranch", br.id, "angmin≤angmax");
        auto it = config_of_branch.find(br.id);
        if (it != config_of_branch.end() && *it->second != TransformerConfig::line && br.b_sh != 0.0) {
            add("AcBranch", br.id, "transformer b_sh=0");
        }
    }

    // Exactly one slack per connected ac component (isolated buses excluded).
    {
        std::unordered_map<int, int> parent;
        for (const auto& b : net.buses) {
            if (b.bus_type != BusType::isolated) parent[b.id] = b.id;
        }
        std::function<int(int)> find = [&](int x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        for (const auto& br : net.branches) {
            if (!br.status || !parent.count(br.from_bus) || !parent.count(br.to_bus)) continue;
            parent[find(br.from_bus)] = find(br.to_bus);
        }
        std::map<int, int> slack_count;
        for (const auto& b : net.buses) {
            if (b.bus_type == BusType::isolated) continue;
            int root = find(b.id);
            slack_count[root] += (b.bus_type == BusType::slack) ? 1 : 0;
        }
        for (const auto& [root, n] : slack_count) {
            if (n != 1) add("AcBus", std::nullopt, "single slack", std::to_string(n) + " slack buses in component of bus " + std::to_string(root));
        }
    }

    for (const auto& g : net.gmd_buses) {
        if (!(g.g_gnd >= 0.0)) add("GmdBus", g.id, "g_gnd≥0");
        if (g.kind == GmdBusKind::substation_ground && g.parent_ac_bus) {
            add("GmdBus", g.id, "substation ground has no parent");
        }
        if (g.kind == GmdBusKind::bus_node) {
            if (!g.parent_ac_bus) {
                add("GmdBus", g.id, "bus node has parent");
            } else if (!has_bus(*g.parent_ac_bus)) {
                dangling("GmdBus", g.id, "AcBus", *g.parent_ac_bus);
            }
        }
    }
    {
        std::set<int> attached;
        for (const auto& [gid, bid] : net.gmd_attachments()) attached.insert(gid);
        for (const auto& g : net.gmd_buses) {
            if (g.kind == GmdBusKind::substation_ground && !attached.count(g.id)) {
                add("GmdBus", g.id, "substation attachment", "no ac bus shares substation " + std::to_string(g.substation));
            }
        }
    }

    for (const auto& e : net.gmd_branches) {
        if (!has_gmd_bus(e.from_node)) dangling("GmdBranch", e.id, "GmdBus", e.from_node);
        if (!has_gmd_bus(e.to_node)) dangling("GmdBranch", e.id, "GmdBus", e.to_node);
        if (!(e.a > 0.0)) add("GmdBranch", e.id, "a>0");
        if (e.kind != GmdBranchKind::line && (e.disp_east_km != 0.0 || e.disp_north_km != 0.0)) {
            add("GmdBranch", e.id, "zero displacement");
        }
    }

    std::set<int> candidate_set;
    for (const auto& c : net.blockers.costs) {
        if (!candidate_set.insert(c.candidate).second) add("BlockerEconomics", c.candidate, "unique candidate");
        if (!has_gmd_bus(c.candidate)) {
            dangling("BlockerEconomics", c.candidate, "GmdBus", c.candidate);
        } else if (!(net.gmd_bus(c.candidate).g_gnd > 0.0)) {
            add("BlockerEconomics", c.candidate, "candidate grounded");
        }
        if (!(c.cost > 0.0)) add("BlockerEconomics", c.candidate, "cost>0");
    }
    if (!(net.blockers.budget >= 0.0)) add("BlockerEconomics", std::nullopt, "budget≥0");

    std::set<int> coupled;
    for (const auto& c : net.couplings) {
        if (!net.branch_pos.count(c.ac_branch)) {
            dangling("TransformerCoupling", c.ac_branch, "AcBranch", c.ac_branch);
            continue;
        }
        if (!coupled.insert(c.ac_branch).second) add("TransformerCoupling", c.ac_branch, "one coupling per branch");
        auto require = [&](const std::optional<int>& w, const char* role) {
            if (!w) {
                add("TransformerCoupling", c.ac_branch, "winding present", std::string(role) + " winding missing");
                return;
            }
            if (!net.gmd_branch_pos.count(*w)) {
                dangling("TransformerCoupling", c.ac_branch, "GmdBranch", *w);
            } else if (net.gmd_branch(*w).kind != GmdBranchKind::winding) {
                add("TransformerCoupling", c.ac_branch, "winding kind", std::string(role) + " is not a winding");
            }
        };
        switch (c.config) {
            case TransformerConfig::gwye_delta: require(c.hi_node, "hi"); break;
            case TransformerConfig::gwye_gwye:
                require(c.hi_node, "hi");
                require(c.lo_node, "lo");
                break;
            case TransformerConfig::autotransformer:
                require(c.series_node, "series");
                require(c.common_node, "common");
                break;
            case TransformerConfig::three_winding:
                require(c.hi_node, "hi");
                require(c.lo_node, "lo");
                require(c.tertiary_node, "tertiary");
                break;
            case TransformerConfig::line: break;
        }
        if (c.is_transformer()) {
            bool needs_alpha = c.config != TransformerConfig::gwye_delta;
            if (needs_alpha && !(c.alpha > 0.0)) add("TransformerCoupling", c.ac_branch, "alpha>0");
            if (c.config == TransformerConfig::three_winding && !(c.beta > 0.0)) {
                add("TransformerCoupling", c.ac_branch, "beta>0");
            }
            if (!(c.K >= 0.0)) add("TransformerCoupling", c.ac_branch, "K≥0");
            if (!(c.S_base > 0.0)) add("TransformerCoupling", c.ac_branch, "S_base>0");
            if (!(c.V_base_hi > 0.0) || !(c.V_base_lo > 0.0)) add("TransformerCoupling", c.ac_branch, "V_base>0");
        }
        if (c.neutral_gmd_bus && !has_gmd_bus(*c.neutral_gmd_bus)) {
            dangling("TransformerCoupling", c.ac_branch, "GmdBus", *c.neutral_gmd_bus);
        }
        if (c.is_blocker_candidate && (!c.neutral_gmd_bus || !candidate_set.count(*c.neutral_gmd_bus))) {
            add("TransformerCoupling", c.ac_branch, "candidate neutral listed");
        }
    }

    // Every dc component carrying a branch needs a path to remote earth.
    {
        std::unordered_map<int, int> parent;
        for (const auto& g : net.gmd_buses) parent[g.id] = g.id;
        std::function<int(int)> find = [&](int x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        for (const auto& e : net.gmd_branches) {
            if (!parent.count(e.from_node) || !parent.count(e.to_node)) continue;
            parent[find(e.from_node)] = find(e.to_node);
        }
        std::map<int, bool> grounded;
        std::set<int> has_branch;
        for (const auto& e : net.gmd_branches) {
            if (parent.count(e.from_node)) has_branch.insert(find(e.from_node));
        }
        for (const auto& g : net.gmd_buses) {
            bool& flag = grounded[find(g.id)];
            flag = flag || g.g_gnd > 0.0;
        }
        for (const auto& [root, ok] : grounded) {
            if (!ok && has_branch.count(root)) {
                add("GmdBus", root, "grounded dc component", "dc component without grounding");
            }
        }
    }

    return out;
}

void ensure_valid(const NetworkModel& network) {
    auto violations = validate(network);
    if (violations.empty()) return;
    const auto& v = violations.front();
    std::ostringstream msg;
    msg << v.entity;
    if (v.id) msg << ' ' << *v.id;
    msg << ": " << v.rule;
    if (!v.detail.empty()) msg << " (" << v.detail << ')';
    if (v.rule == "dangling reference") throw DanglingReferenceError(msg.str());
    throw ValidationError(msg.str());
}

NetworkModel network_from_json(const json& doc) {
    if (!doc.is_object()) throw ParseError("case document must be a JSON object");
    NetworkModel net;
    try {
        net.name = get_or<std::string>(doc, "name", "");
        net.base_mva = get_or(doc, "baseMVA", 100.0);

        for (const auto& j : table(doc, "bus")) {
            AcBus b;
            b.id = get_id(j, "id", "bus");
            b.bus_type = parse_bus_type(get_or<std::string>(j, "type", "pq"));
            b.vm = get_or(j, "vm", 1.0);
            b.va = get_or(j, "va", 0.0);
            b.vmin = get_or(j, "vmin", 0.9);
            b.vmax = get_or(j, "vmax", 1.1);
            b.base_kv = get_or(j, "base_kv", 0.0);
            b.gs = get_or(j, "gs", 0.0);
            b.bs = get_or(j, "bs", 0.0);
            b.lat = get_or(j, "lat", 0.0);
            b.lon = get_or(j, "lon", 0.0);
            b.substation = get_or(j, "substation", 0);
            net.buses.push_back(b);
        }
        for (const auto& j : table(doc, "load", false)) {
            Load l;
            l.id = get_id(j, "id", "load");
            l.bus = get_id(j, "bus", "load");
            l.pd = get_or(j, "pd", 0.0);
            l.qd = get_or(j, "qd", 0.0);
            l.shed_cost = get_or(j, "shed_cost", 1.0);
            net.loads.push_back(l);
        }
        for (const auto& j : table(doc, "gen")) {
            Generator g;
            g.id = get_id(j, "id", "gen");
            g.bus = get_id(j, "bus", "gen");
            g.pg = get_or(j, "pg", 0.0);
            g.qg = get_or(j, "qg", 0.0);
            g.pmin = get_or(j, "pmin", 0.0);
            g.pmax = get_or(j, "pmax", 0.0);
            g.qmin = get_or(j, "qmin", 0.0);
            g.qmax = get_or(j, "qmax", 0.0);
            g.vg = get_or(j, "vg", 1.0);
            g.status = get_or(j, "status", 1) != 0;
            g.mbase = get_or(j, "mbase", net.base_mva);
            if (auto it = j.find("cost"); it != j.end()) {
                auto c = it->get<std::vector<double>>();
                if (c.size() != 3) throw ParseError("gen " + std::to_string(g.id) + ": cost needs 3 coefficients");
                g.cost = {c[0], c[1], c[2]};
            }
            g.startup = get_or(j, "startup", 0.0);
            g.shutdown = get_or(j, "shutdown", 0.0);
            g.ramp_agc = get_or(j, "ramp_agc", 0.0);
            g.ramp_10 = get_or(j, "ramp_10", 0.0);
            g.ramp_30 = get_or(j, "ramp_30", 0.0);
            g.ramp_q = get_or(j, "ramp_q", 0.0);
            g.apf = get_or(j, "apf", 0.0);
            net.gens.push_back(g);
        }
        for (const auto& j : table(doc, "branch")) {
            AcBranch b;
            b.id = get_id(j, "id", "branch");
            b.from_bus = get_id(j, "from_bus", "branch");
            b.to_bus = get_id(j, "to_bus", "branch");
            b.r = get_or(j, "r", 0.0);
            b.x = get_or(j, "x", 0.0);
            b.b_sh = get_or(j, "b_sh", 0.0);
            b.rate = get_or(j, "rate", 0.0);
            b.tap = get_or(j, "tap", 1.0);
            b.shift = get_or(j, "shift", 0.0);
            b.angmin = get_or(j, "angmin", b.angmin);
            b.angmax = get_or(j, "angmax", b.angmax);
            b.status = get_or(j, "status", 1) != 0;
            net.branches.push_back(b);
        }
        for (const auto& j : table(doc, "gmd_bus")) {
            GmdBus g;
            g.id = get_id(j, "id", "gmd_bus");
            g.kind = parse_gmd_bus_kind(get_or<std::string>(j, "kind", "bus_node"));
            g.g_gnd = get_or(j, "g_gnd", 0.0);
            g.parent_ac_bus = get_opt_id(j, "parent_ac_bus");
            g.lat = get_or(j, "lat", 0.0);
            g.lon = get_or(j, "lon", 0.0);
            g.substation = get_or(j, "substation", 0);
            net.gmd_buses.push_back(g);
        }
        for (const auto& j : table(doc, "gmd_branch")) {
            GmdBranch e;
            e.id = get_id(j, "id", "gmd_branch");
            e.from_node = get_id(j, "from_node", "gmd_branch");
            e.to_node = get_id(j, "to_node", "gmd_branch");
            e.a = get_or(j, "a", 0.0);
            e.len_km = get_or(j, "len_km", 0.0);
            e.disp_east_km = get_or(j, "disp_east_km", 0.0);
            e.disp_north_km = get_or(j, "disp_north_km", 0.0);
            e.kind = parse_gmd_branch_kind(get_or<std::string>(j, "kind", "line"));
            net.gmd_branches.push_back(e);
        }
        for (const auto& j : table(doc, "branch_gmd")) {
            TransformerCoupling c;
            c.ac_branch = get_id(j, "ac_branch", "branch_gmd");
            c.config = parse_config(get_or<std::string>(j, "config", "line"));
            c.hi_node = get_opt_id(j, "hi_node");
            c.lo_node = get_opt_id(j, "lo_node");
            c.series_node = get_opt_id(j, "series_node");
            c.common_node = get_opt_id(j, "common_node");
            c.tertiary_node = get_opt_id(j, "tertiary_node");
            c.alpha = get_or(j, "alpha", 1.0);
            c.beta = get_or(j, "beta", 1.0);
            c.K = get_or(j, "K", 0.0);
            c.S_base = get_or(j, "S_base", net.base_mva);
            c.V_base_hi = get_or(j, "V_base_hi", 1.0);
            c.V_base_lo = get_or(j, "V_base_lo", 1.0);
            c.neutral_gmd_bus = get_opt_id(j, "neutral_gmd_bus");
            c.is_blocker_candidate = get_or(j, "is_blocker_candidate", false);
            net.couplings.push_back(c);
        }
        if (auto it = doc.find("blocker"); it != doc.end()) {
            net.blockers.budget = get_or(*it, "budget", 0.0);
            for (const auto& j : table(*it, "costs", false)) {
                net.blockers.costs.push_back({get_id(j, "candidate", "blocker.costs"), get_or(j, "cost", 1.0)});
            }
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("case format: ") + e.what());
    }
    net.index();
    return net;
}

json network_to_json(const NetworkModel& net) {
    json doc;
    doc["schema_version"] = 1;
    doc["name"] = net.name;
    doc["baseMVA"] = net.base_mva;
    json buses = json::array();
    for (const auto& b : net.buses) {
        buses.push_back({{"id", b.id}, {"type", to_string(b.bus_type)}, {"vm", b.vm}, {"va", b.va},
                         {"vmin", b.vmin}, {"vmax", b.vmax}, {"base_kv", b.base_kv}, {"gs", b.gs},
                         {"bs", b.bs}, {"lat", b.lat}, {"lon", b.lon}, {"substation", b.substation}});
    }
    doc["bus"] = std::move(buses);
    json loads = json::array();
    for (const auto& l : net.loads) {
        loads.push_back({{"id", l.id}, {"bus", l.bus}, {"pd", l.pd}, {"qd", l.qd}, {"shed_cost", l.shed_cost}});
    }
    doc["load"] = std::move(loads);
    json gens = json::array();
    for (const auto& g : net.gens) {
        gens.push_back({{"id", g.id}, {"bus", g.bus}, {"pg", g.pg}, {"qg", g.qg}, {"pmin", g.pmin},
                        {"pmax", g.pmax}, {"qmin", g.qmin}, {"qmax", g.qmax}, {"vg", g.vg},
                        {"status", g.status ? 1 : 0}, {"mbase", g.mbase},
                        {"cost", {g.cost[0], g.cost[1], g.cost[2]}}, {"startup", g.startup},
                        {"shutdown", g.shutdown}, {"ramp_agc", g.ramp_agc}, {"ramp_10", g.ramp_10},
                        {"ramp_30", g.ramp_30}, {"ramp_q", g.ramp_q}, {"apf", g.apf}});
    }
    doc["gen"] = std::move(gens);
    json branches = json::array();
    for (const auto& b : net.branches) {
        branches.push_back({{"id", b.id}, {"from_bus", b.from_bus}, {"to_bus", b.to_bus}, {"r", b.r},
                            {"x", b.x}, {"b_sh", b.b_sh}, {"rate", b.rate}, {"tap", b.tap},
                            {"shift", b.shift}, {"angmin", b.angmin}, {"angmax", b.angmax},
                            {"status", b.status ? 1 : 0}});
    }
    doc["branch"] = std::move(branches);
    json gbuses = json::array();
    for (const auto& g : net.gmd_buses) {
        json j = {{"id", g.id}, {"kind", to_string(g.kind)}, {"g_gnd", g.g_gnd},
                  {"lat", g.lat}, {"lon", g.lon}, {"substation", g.substation}};
        put_opt(j, "parent_ac_bus", g.parent_ac_bus);
        gbuses.push_back(std::move(j));
    }
    doc["gmd_bus"] = std::move(gbuses);
    json gbranches = json::array();
    for (const auto& e : net.gmd_branches) {
        gbranches.push_back({{"id", e.id}, {"from_node", e.from_node}, {"to_node", e.to_node}, {"a", e.a},
                             {"len_km", e.len_km}, {"disp_east_km", e.disp_east_km},
                             {"disp_north_km", e.disp_north_km}, {"kind", to_string(e.kind)}});
    }
    doc["gmd_branch"] = std::move(gbranches);
    json couplings = json::array();
    for (const auto& c : net.couplings) {
        json j = {{"ac_branch", c.ac_branch}, {"config", to_string(c.config)}, {"alpha", c.alpha},
                  {"beta", c.beta}, {"K", c.K}, {"S_base", c.S_base}, {"V_base_hi", c.V_base_hi},
                  {"V_base_lo", c.V_base_lo}, {"is_blocker_candidate", c.is_blocker_candidate}};
        put_opt(j, "hi_node", c.hi_node);
        put_opt(j, "lo_node", c.lo_node);
        put_opt(j, "series_node", c.series_node);
        put_opt(j, "common_node", c.common_node);
        put_opt(j, "tertiary_node", c.tertiary_node);
        put_opt(j, "neutral_gmd_bus", c.neutral_gmd_bus);
        couplings.push_back(std::move(j));
    }
    doc["branch_gmd"] = std::move(couplings);
    json costs = json::array();
    for (const auto& c : net.blockers.costs) costs.push_back({{"candidate", c.candidate}, {"cost", c.cost}});
    doc["blocker"] = {{"budget", net.blockers.budget}, {"costs", std::move(costs)}};
    return doc;
}

NetworkModel load_network(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open case file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    NetworkModel net = network_from_json(doc);
    ensure_valid(net);
    return net;
}

void save_network(const NetworkModel& network, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot write " + path.string());
    out << network_to_json(network).dump(1) << '\n';
}

NetworkModel bundled_example() {
    NetworkModel net;
    net.name = "b4gic";
    net.base_mva = 100.0;

    // Substation 1 at the south-west end, substation 2 about 156 km north-east.
    const double lat1 = 33.6, lon1 = -87.0, lat2 = 34.6, lon2 = -85.8;
    net.buses = {
        {1, BusType::slack, 1.02, 0.0, 0.9, 1.1, 20.0, 0.0, 0.0, lat1, lon1, 1},
        {2, BusType::pq, 1.0, 0.0, 0.9, 1.1, 500.0, 0.0, 0.0, lat1, lon1, 1},
        {3, BusType::pq, 1.0, 0.0, 0.9, 1.1, 500.0, 0.0, 0.0, lat2, lon2, 2},
        {4, BusType::pq, 1.0, 0.0, 0.9, 1.1, 20.0, 0.0, 0.0, lat2, lon2, 2},
    };
    net.loads = {{1, 4, 400.0, 80.0, 10.0}};
    Generator g;
    g.id = 1;
    g.bus = 1;
    g.pg = 400.0;
    g.qg = 0.0;
    g.pmin = 0.0;
    g.pmax = 1000.0;
    g.qmin = -300.0;
    g.qmax = 400.0;
    g.vg = 1.02;
    g.mbase = 1000.0;
    g.cost = {0.01, 20.0, 0.0};
    net.gens = {g};

    AcBranch t1{1, 2, 1, 0.0005, 0.015, 0.0, 1200.0, 1.0, 0.0, -1.0471975511965976, 1.0471975511965976, true};
    AcBranch line{2, 2, 3, 0.002, 0.025, 0.6, 1200.0, 1.0, 0.0, -1.0471975511965976, 1.0471975511965976, true};
    AcBranch t2{3, 3, 4, 0.0005, 0.015, 0.0, 1200.0, 1.0, 0.0, -1.0471975511965976, 1.0471975511965976, true};
    line.tap = 1.0;
    net.branches = {t1, line, t2};

    net.gmd_buses = {
        {1, GmdBusKind::substation_ground, 5.0, std::nullopt, lat1, lon1, 1},
        {2, GmdBusKind::substation_ground, 5.0, std::nullopt, lat2, lon2, 2},
        {3, GmdBusKind::bus_node, 0.0, 1, lat1, lon1, 1},
        {4, GmdBusKind::bus_node, 0.0, 2, lat1, lon1, 1},
        {5, GmdBusKind::bus_node, 0.0, 3, lat2, lon2, 2},
        {6, GmdBusKind::bus_node, 0.0, 4, lat2, lon2, 2},
    };
    const double north = 111.2;  // 1.0 degree of latitude
    const double east = 110.6;   // 1.2 degrees of longitude near 34 N
    net.gmd_branches = {
        {1, 4, 5, 1.0, std::hypot(north, east), east, north, GmdBranchKind::line},
        {2, 4, 1, 15.0, 0.0, 0.0, 0.0, GmdBranchKind::winding},
        {3, 3, 1, 15.0, 0.0, 0.0, 0.0, GmdBranchKind::winding},
        {4, 5, 2, 15.0, 0.0, 0.0, 0.0, GmdBranchKind::winding},
        {5, 6, 2, 15.0, 0.0, 0.0, 0.0, GmdBranchKind::winding},
    };

    TransformerCoupling c1;
    c1.ac_branch = 1;
    c1.config = TransformerConfig::gwye_gwye;
    c1.hi_node = 2;
    c1.lo_node = 3;
    c1.alpha = 25.0;
    c1.K = 0.6;
    c1.S_base = 100.0;
    c1.V_base_hi = 500.0;
    c1.V_base_lo = 20.0;
    c1.neutral_gmd_bus = 1;
    c1.is_blocker_candidate = true;
    TransformerCoupling c2 = c1;
    c2.ac_branch = 3;
    c2.hi_node = 4;
    c2.lo_node = 5;
    c2.neutral_gmd_bus = 2;
    TransformerCoupling c3;
    c3.ac_branch = 2;
    c3.config = TransformerConfig::line;
    net.couplings = {c1, c3, c2};

    net.blockers.costs = {{1, 1.0}, {2, 1.0}};
    net.blockers.budget = 1.0;
    net.index();
    return net;
}

}  // namespace gicnet
