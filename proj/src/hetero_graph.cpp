#include "gicnet/hetero_graph.hpp"

#include <algorithm>
#include <unordered_map>

#include "gicnet/error.hpp"

namespace gicnet {

namespace {

constexpr int kSchemaVersion = 1;

constexpr std::array<const char*, kNodeTypes> kNodeNames{"bus", "gen", "gmd_bus"};
constexpr std::array<const char*, kRelations> kRelationNames{"branch", "branch_gmd", "gmd_branch", "bus_conn_gen",
                                                             "gmd_bus_attach_bus"};

// Column names, in order; the schema hash covers them.
const std::array<std::vector<std::string>, kNodeTypes>& node_columns() {
    static const std::array<std::vector<std::string>, kNodeTypes> cols{{
        {"type_pq", "type_pv", "type_slack", "type_isolated", "vm", "va", "vmin", "vmax", "base_kv", "pd", "qd", "gs",
         "bs", "lat", "lon"},
        {"pg", "qg", "pmin", "pmax", "qmin", "qmax", "vg", "mbase", "status", "c2", "c1", "c0", "startup", "shutdown",
         "ramp_agc", "ramp_10", "ramp_30", "ramp_q", "apf", "bus_base_kv"},
        {"g_gnd", "lat", "lon"},
    }};
    return cols;
}

const std::array<std::vector<std::string>, kRelations>& edge_columns() {
    static const std::array<std::vector<std::string>, kRelations> cols{{
        {"r", "x", "b_sh", "rate", "tap", "shift", "status", "angmin", "angmax", "from_base_kv", "to_base_kv"},
        {"cfg_gwye_delta", "cfg_gwye_gwye", "cfg_auto", "cfg_three_winding", "cfg_line", "K", "alpha", "beta",
         "S_base", "V_base_hi", "V_base_lo", "r_hi", "r_lo", "r_series", "r_common", "r_tertiary", "neutral_grounded",
         "candidate"},
        {"a", "len_km", "field_east_disp", "field_north_disp"},
        {},
        {},
    }};
    return cols;
}

int type_index(BusType t) {
    switch (t) {
        case BusType::pq: return 0;
        case BusType::pv: return 1;
        case BusType::slack: return 2;
        case BusType::isolated: return 3;
    }
    return 0;
}

int config_index(TransformerConfig c) {
    switch (c) {
        case TransformerConfig::gwye_delta: return 0;
        case TransformerConfig::gwye_gwye: return 1;
        case TransformerConfig::autotransformer: return 2;
        case TransformerConfig::three_winding: return 3;
        case TransformerConfig::line: return 4;
    }
    return 4;
}

double winding_resistance(const NetworkModel& net, const std::optional<int>& branch) {
    if (!branch) return 0.0;
    const double a = net.gmd_branch(*branch).a;
    return a > 0.0 ? 1.0 / a : 0.0;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, int cols) {
    if (!j.is_array()) throw ParseError("feature matrix must be an array of rows");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
    for (std::size_t r = 0; r < j.size(); ++r) {
        const auto& row = j[r];
        if (!row.is_array() || static_cast<int>(row.size()) != cols) {
            throw SchemaError("feature row " + std::to_string(r) + " does not have " + std::to_string(cols) +
                              " columns");
        }
        for (int c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j, int size) {
    const auto v = j.get<std::vector<double>>();
    if (static_cast<int>(v.size()) != size) throw SchemaError("normalization vector has the wrong width");
    return Eigen::Map<const Eigen::VectorXd>(v.data(), size);
}

void scale_columns(Eigen::MatrixXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double span = hi[c] - lo[c];
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            x(r, c) = span > 0.0 ? std::clamp((x(r, c) - lo[c]) / span, 0.0, 1.0) : 0.0;
        }
    }
}

void fit_columns(const Eigen::MatrixXd& x, Eigen::VectorXd& lo, Eigen::VectorXd& hi, bool& seen) {
    if (x.rows() == 0) return;
    const Eigen::VectorXd mn = x.colwise().minCoeff().transpose();
    const Eigen::VectorXd mx = x.colwise().maxCoeff().transpose();
    if (!seen) {
        lo = mn;
        hi = mx;
        seen = true;
    } else {
        lo = lo.cwiseMin(mn);
        hi = hi.cwiseMax(mx);
    }
}

}  // namespace

std::string to_string(NodeType t) { return kNodeNames[static_cast<std::size_t>(t)]; }

std::string to_string(Relation r) { return kRelationNames[static_cast<std::size_t>(r)]; }

HeteroGraph build_graph(const NetworkModel& net, const GmdScenario& scenario,
                        std::optional<std::span<const double>> labels) {
    HeteroGraph g;
    g.network = net.name;
    g.scenario_id = scenario.id;
    g.magnitude = scenario.field.magnitude;
    g.direction_deg = scenario.field.direction_deg;

    std::vector<double> pd(net.buses.size(), 0.0), qd(net.buses.size(), 0.0);
    for (std::size_t k = 0; k < net.loads.size(); ++k) {
        const auto i = static_cast<std::size_t>(net.bus_pos.at(net.loads[k].bus));
        pd[i] += net.loads[k].pd * scenario.scale_p(k);
        qd[i] += net.loads[k].qd * scenario.scale_q(k);
    }

    auto& bus = g.nodes[static_cast<std::size_t>(NodeType::bus)];
    bus.x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(net.buses.size()), kNodeWidth[0]);
    for (std::size_t i = 0; i < net.buses.size(); ++i) {
        const auto& b = net.buses[i];
        const auto r = static_cast<Eigen::Index>(i);
        bus.ids.push_back(b.id);
        bus.x(r, type_index(b.bus_type)) = 1.0;
        const std::array<double, 11> rest{b.vm, b.va, b.vmin, b.vmax, b.base_kv, pd[i], qd[i], b.gs, b.bs, b.lat, b.lon};
        for (std::size_t c = 0; c < rest.size(); ++c) bus.x(r, static_cast<Eigen::Index>(4 + c)) = rest[c];
    }

    auto& gen = g.nodes[static_cast<std::size_t>(NodeType::gen)];
    gen.x.resize(static_cast<Eigen::Index>(net.gens.size()), kNodeWidth[1]);
    for (std::size_t k = 0; k < net.gens.size(); ++k) {
        const auto& e = net.gens[k];
        gen.ids.push_back(e.id);
        const std::array<double, 20> row{e.pg,        e.qg,       e.pmin,        e.pmax,      e.qmin,
                                         e.qmax,      e.vg,       e.mbase,       e.status ? 1.0 : 0.0,
                                         e.cost[0],   e.cost[1],  e.cost[2],     e.startup,   e.shutdown,
                                         e.ramp_agc,  e.ramp_10,  e.ramp_30,     e.ramp_q,    e.apf,
                                         net.bus(e.bus).base_kv};
        for (std::size_t c = 0; c < row.size(); ++c) gen.x(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = row[c];
    }

    auto& gmd = g.nodes[static_cast<std::size_t>(NodeType::gmd_bus)];
    gmd.x.resize(static_cast<Eigen::Index>(net.gmd_buses.size()), kNodeWidth[2]);
    for (std::size_t k = 0; k < net.gmd_buses.size(); ++k) {
        const auto& n = net.gmd_buses[k];
        gmd.ids.push_back(n.id);
        gmd.x.row(static_cast<Eigen::Index>(k)) << n.g_gnd, n.lat, n.lon;
    }

    auto& branch = g.relations[static_cast<std::size_t>(Relation::branch)];
    branch.x.resize(static_cast<Eigen::Index>(net.branches.size()), kEdgeWidth[0]);
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const auto& b = net.branches[k];
        branch.a.push_back(net.bus_pos.at(b.from_bus));
        branch.b.push_back(net.bus_pos.at(b.to_bus));
        branch.x.row(static_cast<Eigen::Index>(k)) << b.r, b.x, b.b_sh, b.rate, b.tap, b.shift, b.status ? 1.0 : 0.0,
            b.angmin, b.angmax, net.bus(b.from_bus).base_kv, net.bus(b.to_bus).base_kv;
    }

    auto& coupling = g.relations[static_cast<std::size_t>(Relation::branch_gmd)];
    coupling.x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(net.couplings.size()), kEdgeWidth[1]);
    for (std::size_t k = 0; k < net.couplings.size(); ++k) {
        const auto& c = net.couplings[k];
        const auto& b = net.branch(c.ac_branch);
        const auto r = static_cast<Eigen::Index>(k);
        coupling.a.push_back(net.bus_pos.at(b.from_bus));
        coupling.b.push_back(net.bus_pos.at(b.to_bus));
        coupling.x(r, config_index(c.config)) = 1.0;
        const bool grounded = c.neutral_gmd_bus && net.gmd_bus(*c.neutral_gmd_bus).g_gnd > 0.0;
        const std::array<double, 13> rest{c.K,
                                          c.alpha,
                                          c.beta,
                                          c.S_base,
                                          c.V_base_hi,
                                          c.V_base_lo,
                                          winding_resistance(net, c.hi_node),
                                          winding_resistance(net, c.lo_node),
                                          winding_resistance(net, c.series_node),
                                          winding_resistance(net, c.common_node),
                                          winding_resistance(net, c.tertiary_node),
                                          grounded ? 1.0 : 0.0,
                                          c.is_blocker_candidate ? 1.0 : 0.0};
        for (std::size_t j = 0; j < rest.size(); ++j) coupling.x(r, static_cast<Eigen::Index>(5 + j)) = rest[j];
    }

    auto& dc = g.relations[static_cast<std::size_t>(Relation::gmd_branch)];
    dc.x.resize(static_cast<Eigen::Index>(net.gmd_branches.size()), kEdgeWidth[2]);
    const double east = scenario.field.east();
    const double north = scenario.field.north();
    for (std::size_t k = 0; k < net.gmd_branches.size(); ++k) {
        const auto& e = net.gmd_branches[k];
        dc.a.push_back(net.gmd_bus_pos.at(e.from_node));
        dc.b.push_back(net.gmd_bus_pos.at(e.to_node));
        dc.x.row(static_cast<Eigen::Index>(k)) << e.a, e.len_km, east * e.disp_east_km, north * e.disp_north_km;
    }

    auto& conn = g.relations[static_cast<std::size_t>(Relation::bus_conn_gen)];
    for (std::size_t k = 0; k < net.gens.size(); ++k) {
        conn.a.push_back(static_cast<int>(k));
        conn.b.push_back(net.bus_pos.at(net.gens[k].bus));
    }
    conn.x.resize(static_cast<Eigen::Index>(conn.a.size()), 0);

    auto& attach = g.relations[static_cast<std::size_t>(Relation::gmd_bus_attach_bus)];
    for (const auto& [gmd_id, bus_id] : net.gmd_attachments()) {
        attach.a.push_back(net.gmd_bus_pos.at(gmd_id));
        attach.b.push_back(net.bus_pos.at(bus_id));
    }
    attach.x.resize(static_cast<Eigen::Index>(attach.a.size()), 0);

    for (int c : net.candidates()) g.mask.push_back(net.gmd_bus_pos.at(c));
    if (labels) {
        if (labels->size() != g.mask.size()) {
            throw SchemaError("expected " + std::to_string(g.mask.size()) + " labels, got " +
                              std::to_string(labels->size()));
        }
        g.labels = std::vector<double>(labels->begin(), labels->end());
    }
    check_schema(g);
    return g;
}

void check_schema(const HeteroGraph& g) {
    for (std::size_t t = 0; t < kNodeTypes; ++t) {
        const auto& n = g.nodes[t];
        if (n.x.cols() != kNodeWidth[t]) {
            throw SchemaError(std::string(kNodeNames[t]) + " features have width " + std::to_string(n.x.cols()) +
                              ", expected " + std::to_string(kNodeWidth[t]));
        }
        if (static_cast<std::size_t>(n.x.rows()) != n.ids.size()) {
            throw SchemaError(std::string(kNodeNames[t]) + " feature rows do not match the node ids");
        }
    }
    for (std::size_t r = 0; r < kRelations; ++r) {
        const auto& e = g.relations[r];
        if (e.x.cols() != kEdgeWidth[r]) {
            throw SchemaError(std::string(kRelationNames[r]) + " features have width " + std::to_string(e.x.cols()) +
                              ", expected " + std::to_string(kEdgeWidth[r]));
        }
        if (e.a.size() != e.b.size() || static_cast<std::size_t>(e.x.rows()) != e.a.size()) {
            throw SchemaError(std::string(kRelationNames[r]) + " endpoint and feature rows disagree");
        }
        const auto [ta, tb] = kRelationEnds[r];
        const auto na = static_cast<int>(g.node_set(ta).ids.size());
        const auto nb = static_cast<int>(g.node_set(tb).ids.size());
        for (std::size_t k = 0; k < e.a.size(); ++k) {
            if (e.a[k] < 0 || e.a[k] >= na || e.b[k] < 0 || e.b[k] >= nb) {
                throw SchemaError(std::string(kRelationNames[r]) + " edge " + std::to_string(k) +
                                  " has an endpoint outside its node set");
            }
        }
    }
    const auto n_gmd = static_cast<int>(g.node_set(NodeType::gmd_bus).ids.size());
    for (int m : g.mask) {
        if (m < 0 || m >= n_gmd) throw SchemaError("mask entry outside the gmd_bus node set");
    }
    if (g.labels && g.labels->size() != g.mask.size()) throw SchemaError("labels do not match the mask");
}

std::uint64_t schema_hash() {
    std::string desc = "gicnet-hetero-graph/" + std::to_string(kSchemaVersion);
    for (std::size_t t = 0; t < kNodeTypes; ++t) {
        desc += "|node:" + std::string(kNodeNames[t]);
        for (const auto& c : node_columns()[t]) desc += "," + c;
    }
    for (std::size_t r = 0; r < kRelations; ++r) {
        desc += "|edge:" + std::string(kRelationNames[r]) + ":" + kNodeNames[static_cast<std::size_t>(kRelationEnds[r].first)] +
                "-" + kNodeNames[static_cast<std::size_t>(kRelationEnds[r].second)];
        for (const auto& c : edge_columns()[r]) desc += "," + c;
    }
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : desc) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

NormStats fit_normalization(std::span<const HeteroGraph> graphs) {
    if (graphs.empty()) throw InvalidArgument("normalization needs at least one graph");
    NormStats s;
    for (std::size_t t = 0; t < kNodeTypes; ++t) {
        s.node_min[t] = Eigen::VectorXd::Zero(kNodeWidth[t]);
        s.node_max[t] = Eigen::VectorXd::Zero(kNodeWidth[t]);
        bool seen = false;
        for (const auto& g : graphs) fit_columns(g.nodes[t].x, s.node_min[t], s.node_max[t], seen);
    }
    for (std::size_t r = 0; r < kRelations; ++r) {
        s.edge_min[r] = Eigen::VectorXd::Zero(kEdgeWidth[r]);
        s.edge_max[r] = Eigen::VectorXd::Zero(kEdgeWidth[r]);
        bool seen = false;
        for (const auto& g : graphs) fit_columns(g.relations[r].x, s.edge_min[r], s.edge_max[r], seen);
    }
    return s;
}

HeteroGraph normalize(const HeteroGraph& graph, const NormStats& stats) {
    HeteroGraph out = graph;
    for (std::size_t t = 0; t < kNodeTypes; ++t) {
        if (stats.node_min[t].size() != kNodeWidth[t] || stats.node_max[t].size() != kNodeWidth[t]) {
            throw SchemaError("normalization stats do not match the " + std::string(kNodeNames[t]) + " schema");
        }
        scale_columns(out.nodes[t].x, stats.node_min[t], stats.node_max[t]);
    }
    for (std::size_t r = 0; r < kRelations; ++r) {
        if (stats.edge_min[r].size() != kEdgeWidth[r] || stats.edge_max[r].size() != kEdgeWidth[r]) {
            throw SchemaError("normalization stats do not match the " + std::string(kRelationNames[r]) + " schema");
        }
        scale_columns(out.relations[r].x, stats.edge_min[r], stats.edge_max[r]);
    }
    return out;
}

HeteroGraph disjoint_union(std::span<const HeteroGraph* const> graphs) {
    HeteroGraph out;
    if (graphs.empty()) return out;
    out.network = graphs.front()->network;
    out.scenario_id = graphs.front()->scenario_id;
    out.magnitude = graphs.front()->magnitude;
    out.direction_deg = graphs.front()->direction_deg;
    bool labelled = true;
    for (const auto* g : graphs) labelled = labelled && g->labels.has_value();
    if (labelled) out.labels.emplace();

    std::array<Eigen::Index, kNodeTypes> rows{};
    std::array<Eigen::Index, kRelations> edges{};
    for (const auto* g : graphs) {
        for (std::size_t t = 0; t < kNodeTypes; ++t) rows[t] += g->nodes[t].x.rows();
        for (std::size_t r = 0; r < kRelations; ++r) edges[r] += g->relations[r].x.rows();
    }
    for (std::size_t t = 0; t < kNodeTypes; ++t) out.nodes[t].x.resize(rows[t], kNodeWidth[t]);
    for (std::size_t r = 0; r < kRelations; ++r) out.relations[r].x.resize(edges[r], kEdgeWidth[r]);

    std::array<int, kNodeTypes> offset{};
    std::array<Eigen::Index, kRelations> edge_offset{};
    for (const auto* g : graphs) {
        for (std::size_t t = 0; t < kNodeTypes; ++t) {
            const auto& n = g->nodes[t];
            out.nodes[t].ids.insert(out.nodes[t].ids.end(), n.ids.begin(), n.ids.end());
            out.nodes[t].x.middleRows(offset[t], n.x.rows()) = n.x;
        }
        for (std::size_t r = 0; r < kRelations; ++r) {
            const auto& e = g->relations[r];
            const auto oa = offset[static_cast<std::size_t>(kRelationEnds[r].first)];
            const auto ob = offset[static_cast<std::size_t>(kRelationEnds[r].second)];
            for (std::size_t k = 0; k < e.a.size(); ++k) {
                out.relations[r].a.push_back(e.a[k] + oa);
                out.relations[r].b.push_back(e.b[k] + ob);
            }
            out.relations[r].x.middleRows(edge_offset[r], e.x.rows()) = e.x;
            edge_offset[r] += e.x.rows();
        }
        const int og = offset[static_cast<std::size_t>(NodeType::gmd_bus)];
        for (int m : g->mask) out.mask.push_back(m + og);
        if (labelled) out.labels->insert(out.labels->end(), g->labels->begin(), g->labels->end());
        for (std::size_t t = 0; t < kNodeTypes; ++t) offset[t] += static_cast<int>(g->nodes[t].ids.size());
    }
    return out;
}

nlohmann::json graph_to_json(const HeteroGraph& g) {
    using nlohmann::json;
    json j;
    j["schema_hash"] = schema_hash();
    j["network"] = g.network;
    j["scenario_id"] = g.scenario_id;
    j["magnitude"] = g.magnitude;
    j["direction_deg"] = g.direction_deg;
    json nodes;
    for (std::size_t t = 0; t < kNodeTypes; ++t) {
        nodes[kNodeNames[t]] = {{"ids", g.nodes[t].ids}, {"x", matrix_to_json(g.nodes[t].x)}};
    }
    j["nodes"] = std::move(nodes);
    json rels;
    for (std::size_t r = 0; r < kRelations; ++r) {
        const auto& e = g.relations[r];
        json rel = {{"a", e.a}, {"b", e.b}};
        if (kEdgeWidth[r] > 0) rel["x"] = matrix_to_json(e.x);
        rels[kRelationNames[r]] = std::move(rel);
    }
    j["relations"] = std::move(rels);
    j["mask"] = g.mask;
    if (g.labels) j["labels"] = *g.labels;
    return j;
}

HeteroGraph graph_from_json(const nlohmann::json& j) {
    try {
        if (j.at("schema_hash").get<std::uint64_t>() != schema_hash()) {
            throw SchemaError("graph was written with a different feature schema");
        }
        HeteroGraph g;
        g.network = j.at("network").get<std::string>();
        g.scenario_id = j.at("scenario_id").get<int>();
        g.magnitude = j.at("magnitude").get<double>();
        g.direction_deg = j.at("direction_deg").get<double>();
        for (std::size_t t = 0; t < kNodeTypes; ++t) {
            const auto& n = j.at("nodes").at(kNodeNames[t]);
            g.nodes[t].ids = n.at("ids").get<std::vector<int>>();
            g.nodes[t].x = matrix_from_json(n.at("x"), kNodeWidth[t]);
        }
        for (std::size_t r = 0; r < kRelations; ++r) {
            const auto& e = j.at("relations").at(kRelationNames[r]);
            g.relations[r].a = e.at("a").get<std::vector<int>>();
            g.relations[r].b = e.at("b").get<std::vector<int>>();
            if (kEdgeWidth[r] > 0) {
                g.relations[r].x = matrix_from_json(e.at("x"), kEdgeWidth[r]);
            } else {
                g.relations[r].x.resize(static_cast<Eigen::Index>(g.relations[r].a.size()), 0);
            }
        }
        g.mask = j.at("mask").get<std::vector<int>>();
        if (j.contains("labels")) g.labels = j.at("labels").get<std::vector<double>>();
        check_schema(g);
        return g;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed graph: ") + e.what());
    }
}

nlohmann::json norm_stats_to_json(const NormStats& s) {
    nlohmann::json j;
    for (std::size_t t = 0; t < kNodeTypes; ++t) {
        j["node"][kNodeNames[t]] = {{"min", vector_to_json(s.node_min[t])}, {"max", vector_to_json(s.node_max[t])}};
    }
    for (std::size_t r = 0; r < kRelations; ++r) {
        j["edge"][kRelationNames[r]] = {{"min", vector_to_json(s.edge_min[r])}, {"max", vector_to_json(s.edge_max[r])}};
    }
    return j;
}

NormStats norm_stats_from_json(const nlohmann::json& j) {
    try {
        NormStats s;
        for (std::size_t t = 0; t < kNodeTypes; ++t) {
            const auto& n = j.at("node").at(kNodeNames[t]);
            s.node_min[t] = vector_from_json(n.at("min"), kNodeWidth[t]);
            s.node_max[t] = vector_from_json(n.at("max"), kNodeWidth[t]);
        }
        for (std::size_t r = 0; r < kRelations; ++r) {
            const auto& e = j.at("edge").at(kRelationNames[r]);
            s.edge_min[r] = vector_from_json(e.at("min"), kEdgeWidth[r]);
            s.edge_max[r] = vector_from_json(e.at("max"), kEdgeWidth[r]);
        }
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed normalization stats: ") + e.what());
    }
}

}  // namespace gicnet
