#include "gicnet/hgnn.hpp"

#include <cmath>
#include <fstream>
#include <optional>
#include <random>

#include "gicnet/error.hpp"

namespace gicnet::nn {

namespace {

constexpr int kCheckpointVersion = 1;
constexpr const char* kCheckpointFormat = "gicnet-hgnn";

bool has_edge_features(std::size_t r) { return kEdgeWidth[r] > 0; }

std::string relation_key(std::size_t r) { return to_string(static_cast<Relation>(r)); }
std::string node_key(std::size_t t) { return to_string(static_cast<NodeType>(t)); }

Mat to_mat(const Eigen::MatrixXd& m) { return Mat(m); }

}  // namespace

nlohmann::json config_to_json(const HgnnConfig& c) {
    return {{"hidden", c.hidden},         {"layers", c.layers},         {"heads", c.heads},
            {"attention", c.attention},   {"mlp_layers", c.mlp_layers}, {"mlp_hidden", c.mlp_hidden},
            {"seed", c.seed}};
}

HgnnConfig config_from_json(const nlohmann::json& j) {
    HgnnConfig c;
    c.hidden = j.value("hidden", c.hidden);
    c.layers = j.value("layers", c.layers);
    c.heads = j.value("heads", c.heads);
    c.attention = j.value("attention", c.attention);
    c.mlp_layers = j.value("mlp_layers", c.mlp_layers);
    c.mlp_hidden = j.value("mlp_hidden", c.mlp_hidden);
    c.seed = j.value("seed", c.seed);
    return c;
}

HgnnModel::HgnnModel(const HgnnConfig& config) : config_(config) {
    if (config.hidden < 1 || config.layers < 0 || config.mlp_layers < 1 || config.mlp_hidden < 1) {
        throw InvalidArgument("hidden, mlp_layers and mlp_hidden must be positive");
    }
    if (config.attention && (config.heads < 1 || config.hidden % config.heads != 0)) {
        throw InvalidArgument("hidden width must be divisible by the number of heads");
    }
    const int d = config.hidden;
    const double bd = 1.0 / std::sqrt(static_cast<double>(d));
    for (std::size_t t = 0; t < kNodeTypes; ++t) {
        const double b = 1.0 / std::sqrt(static_cast<double>(kNodeWidth[t]));
        add_parameter("in.node." + node_key(t) + ".W", kNodeWidth[t], d, b);
        add_parameter("in.node." + node_key(t) + ".b", 1, d, b);
    }
    for (std::size_t r = 0; r < kRelations; ++r) {
        if (!has_edge_features(r)) continue;
        const double b = 1.0 / std::sqrt(static_cast<double>(kEdgeWidth[r]));
        add_parameter("in.edge." + relation_key(r) + ".W", kEdgeWidth[r], d, b);
        add_parameter("in.edge." + relation_key(r) + ".b", 1, d, b);
    }
    for (int l = 0; l < config.layers; ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        for (std::size_t r = 0; r < kRelations; ++r) {
            for (const char* dir : {"fwd", "rev"}) {
                add_parameter(p + relation_key(r) + "." + dir + ".Wa", d, d, bd);
                if (config.attention) add_parameter(p + relation_key(r) + "." + dir + ".Wq", d, d, bd);
            }
            if (has_edge_features(r)) {
                add_parameter(p + relation_key(r) + ".Wb", d, d, bd);
                add_parameter(p + relation_key(r) + ".edge.Wa", d, d, bd);
                add_parameter(p + relation_key(r) + ".edge.Wb", d, d, bd);
            }
        }
    }
    int in = 2 * d;
    for (int k = 0; k < config.mlp_layers; ++k) {
        const int out = k + 1 == config.mlp_layers ? 1 : config.mlp_hidden;
        const double b = 1.0 / std::sqrt(static_cast<double>(in));
        add_parameter("readout." + std::to_string(k) + ".W", in, out, b);
        add_parameter("readout." + std::to_string(k) + ".b", 1, out, b);
        in = out;
    }

    // Uniform(-bound, bound) from the top 53 bits of a seeded 64-bit engine.
    std::mt19937_64 rng(config.seed);
    for (auto& p : params_) {
        const double bound = p.grad(0, 0);
        for (Eigen::Index i = 0; i < p.value.size(); ++i) {
            const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
            p.value.data()[i] = (2.0 * u - 1.0) * bound;
        }
        p.zero_grad();
    }
}

Parameter& HgnnModel::add_parameter(const std::string& name, Eigen::Index rows, Eigen::Index cols, double bound) {
    Parameter p;
    p.name = name;
    p.value = Mat::Zero(rows, cols);
    p.grad = Mat::Constant(1, 1, bound);  // initialization bound, replaced in the constructor
    index_[name] = params_.size();
    params_.push_back(std::move(p));
    return params_.back();
}

std::size_t HgnnModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
}

Parameter& HgnnModel::parameter(const std::string& name) {
    const auto it = index_.find(name);
    if (it == index_.end()) throw InvalidArgument("no parameter named " + name);
    return params_[it->second];
}

void HgnnModel::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

Var HgnnModel::forward(Tape& tape, const HeteroGraph& g) {
    check_schema(g);
    const int heads = config_.heads;
    auto P = [&](const std::string& name) { return tape.param(parameter(name)); };

    std::array<Var, kNodeTypes> h;
    std::array<Eigen::Index, kNodeTypes> count{};
    for (std::size_t t = 0; t < kNodeTypes; ++t) {
        count[t] = g.nodes[t].x.rows();
        const Var x = tape.constant(to_mat(g.nodes[t].x));
        h[t] = add_row(matmul(x, P("in.node." + node_key(t) + ".W")), P("in.node." + node_key(t) + ".b"));
    }
    std::array<std::optional<Var>, kRelations> e;
    for (std::size_t r = 0; r < kRelations; ++r) {
        if (!has_edge_features(r)) continue;
        const Var x = tape.constant(to_mat(g.relations[r].x));
        e[r] = add_row(matmul(x, P("in.edge." + relation_key(r) + ".W")), P("in.edge." + relation_key(r) + ".b"));
    }

    for (int l = 0; l < config_.layers; ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        std::array<std::optional<Var>, kNodeTypes> acc;
        for (std::size_t r = 0; r < kRelations; ++r) {
            const auto& rel = g.relations[r];
            if (rel.a.empty()) continue;
            const auto ta = static_cast<std::size_t>(kRelationEnds[r].first);
            const auto tb = static_cast<std::size_t>(kRelationEnds[r].second);
            std::optional<Var> edge_msg;
            if (e[r]) edge_msg = matmul(*e[r], P(p + relation_key(r) + ".Wb"));
            for (int dir = 0; dir < 2; ++dir) {
                const std::size_t src_t = dir == 0 ? ta : tb;
                const std::size_t dst_t = dir == 0 ? tb : ta;
                const auto& src = dir == 0 ? rel.a : rel.b;
                const auto& dst = dir == 0 ? rel.b : rel.a;
                const std::string key = p + relation_key(r) + (dir == 0 ? ".fwd" : ".rev");
                Var m = gather_rows(matmul(h[src_t], P(key + ".Wa")), src);
                if (edge_msg) m = add(m, *edge_msg);
                if (config_.attention) {
                    const Var q = gather_rows(matmul(h[dst_t], P(key + ".Wq")), dst);
                    const Var w = segment_softmax(head_dot(q, m, heads), dst, count[dst_t]);
                    m = head_weight(m, w, heads);
                }
                const Var agg = scatter_add_rows(m, dst, count[dst_t]);
                acc[dst_t] = acc[dst_t] ? add(*acc[dst_t], agg) : agg;
            }
        }

        std::array<std::optional<Var>, kRelations> e_next;
        for (std::size_t r = 0; r < kRelations; ++r) {
            if (!e[r]) continue;
            const auto& rel = g.relations[r];
            if (rel.a.empty()) {
                e_next[r] = e[r];
                continue;
            }
            const auto ta = static_cast<std::size_t>(kRelationEnds[r].first);
            const auto tb = static_cast<std::size_t>(kRelationEnds[r].second);
            Var s_a, s_b;
            if (ta == tb) {
                const Var inc = add(scatter_add_rows(*e[r], rel.a, count[ta]), scatter_add_rows(*e[r], rel.b, count[ta]));
                s_a = gather_rows(inc, rel.a);
                s_b = gather_rows(inc, rel.b);
            } else {
                s_a = gather_rows(scatter_add_rows(*e[r], rel.a, count[ta]), rel.a);
                s_b = gather_rows(scatter_add_rows(*e[r], rel.b, count[tb]), rel.b);
            }
            const Var hs = add(gather_rows(h[ta], rel.a), gather_rows(h[tb], rel.b));
            const Var upd = add(matmul(add(s_a, s_b), P(p + relation_key(r) + ".edge.Wa")),
                                matmul(hs, P(p + relation_key(r) + ".edge.Wb")));
            e_next[r] = add(*e[r], relu(upd));
        }

        for (std::size_t t = 0; t < kNodeTypes; ++t) {
            if (acc[t]) h[t] = add(h[t], relu(*acc[t]));
        }
        e = e_next;
    }

    const auto gt = static_cast<std::size_t>(NodeType::gmd_bus);
    const auto gr = static_cast<std::size_t>(Relation::gmd_branch);
    const auto& dc = g.relations[gr];
    Var incident;
    if (dc.a.empty()) {
        incident = tape.constant(Mat::Zero(count[gt], config_.hidden));
    } else {
        Eigen::VectorXd inv_deg = Eigen::VectorXd::Zero(count[gt]);
        for (std::size_t k = 0; k < dc.a.size(); ++k) {
            inv_deg[dc.a[k]] += 1.0;
            inv_deg[dc.b[k]] += 1.0;
        }
        for (Eigen::Index i = 0; i < inv_deg.size(); ++i) inv_deg[i] = inv_deg[i] > 0.0 ? 1.0 / inv_deg[i] : 0.0;
        incident = row_scale(add(scatter_add_rows(*e[gr], dc.a, count[gt]), scatter_add_rows(*e[gr], dc.b, count[gt])),
                             inv_deg);
    }
    Var z = gather_rows(concat_cols(h[gt], incident), g.mask);
    for (int k = 0; k < config_.mlp_layers; ++k) {
        z = add_row(matmul(z, P("readout." + std::to_string(k) + ".W")), P("readout." + std::to_string(k) + ".b"));
        if (k + 1 < config_.mlp_layers) z = relu(z);
    }
    check_finite(z, "network logits");
    return z;
}

std::vector<double> HgnnModel::predict(const HeteroGraph& graph) {
    Tape tape;
    const Var logits = forward(tape, graph);
    std::vector<double> out(static_cast<std::size_t>(logits.rows()));
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double x = logits.value()(i, 0);
        out[static_cast<std::size_t>(i)] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    }
    return out;
}

void adam_step(std::span<Parameter> params, AdamState& state, const AdamOptions& o) {
    if (state.m.empty() && state.v.empty() && state.t == 0) {
        for (const auto& p : params) {
            state.m.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
            state.v.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
        }
    }
    if (state.m.size() != params.size() || state.v.size() != params.size()) {
        throw DimensionMismatch("optimizer state does not match the parameter list");
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        const auto& p = params[k];
        if (state.m[k].rows() != p.value.rows() || state.m[k].cols() != p.value.cols() ||
            state.v[k].rows() != p.value.rows() || state.v[k].cols() != p.value.cols() ||
            p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) {
            throw DimensionMismatch("optimizer state shape differs for " + p.name);
        }
    }
    ++state.t;
    const double c1 = 1.0 - std::pow(o.beta1, state.t);
    const double c2 = 1.0 - std::pow(o.beta2, state.t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& p = params[k];
        auto& m = state.m[k];
        auto& v = state.v[k];
        m = o.beta1 * m + (1.0 - o.beta1) * p.grad;
        v = o.beta2 * v + (1.0 - o.beta2) * p.grad.cwiseProduct(p.grad);
        p.value -= o.lr * o.weight_decay * p.value;
        p.value.array() -= o.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + o.eps);
    }
}

nlohmann::json checkpoint_to_json(const Checkpoint& c) {
    nlohmann::json params = nlohmann::json::array();
    for (const auto& p : c.params) {
        params.push_back({{"name", p.name},
                          {"rows", p.value.rows()},
                          {"cols", p.value.cols()},
                          {"data", std::vector<double>(p.value.data(), p.value.data() + p.value.size())}});
    }
    return {{"format", kCheckpointFormat},
            {"version", kCheckpointVersion},
            {"schema_hash", schema_hash()},
            {"config", config_to_json(c.config)},
            {"norm", norm_stats_to_json(c.norm)},
            {"params", std::move(params)},
            {"extra", c.extra}};
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != kCheckpointFormat) throw ParseError("not a model checkpoint");
        if (j.at("version").get<int>() != kCheckpointVersion) throw ParseError("unsupported checkpoint version");
        if (j.at("schema_hash").get<std::uint64_t>() != schema_hash()) {
            throw SchemaError("checkpoint was trained on a different feature schema");
        }
        Checkpoint c;
        c.config = config_from_json(j.at("config"));
        c.norm = norm_stats_from_json(j.at("norm"));
        for (const auto& pj : j.at("params")) {
            Parameter p;
            p.name = pj.at("name").get<std::string>();
            const auto rows = pj.at("rows").get<Eigen::Index>();
            const auto cols = pj.at("cols").get<Eigen::Index>();
            const auto data = pj.at("data").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw ParseError("parameter " + p.name + " has the wrong size");
            p.value = Eigen::Map<const Mat>(data.data(), rows, cols);
            p.zero_grad();
            c.params.push_back(std::move(p));
        }
        c.extra = j.value("extra", nlohmann::json::object());
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed checkpoint: ") + e.what());
    }
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path.string());
    out << checkpoint_to_json(c).dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot read " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return checkpoint_from_json(j);
}

HgnnModel model_from_checkpoint(const Checkpoint& c) {
    HgnnModel m(c.config);
    if (m.parameters().size() != c.params.size()) throw SchemaError("checkpoint parameter list does not match its config");
    for (const auto& p : c.params) {
        auto& q = m.parameter(p.name);
        if (q.value.rows() != p.value.rows() || q.value.cols() != p.value.cols()) {
            throw SchemaError("checkpoint parameter " + p.name + " has the wrong shape");
        }
        q.value = p.value;
    }
    return m;
}

}  // namespace gicnet::nn
