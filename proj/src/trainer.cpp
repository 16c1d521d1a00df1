#include "gicnet/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "gicnet/error.hpp"
#include "gicnet/metrics.hpp"

namespace gicnet {

namespace {

using nn::Mat;
using nn::Tape;
using nn::Var;

constexpr std::uint64_t kShuffleSalt = 0x9e3779b97f4a7c15ULL;

double bce(double x, double y) { return std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Logits of every graph, evaluated in chunks of `chunk` graphs.
std::vector<std::vector<double>> logits_of(nn::HgnnModel& model, std::span<const HeteroGraph> graphs, int chunk) {
    std::vector<std::vector<double>> out;
    out.reserve(graphs.size());
    for (std::size_t s = 0; s < graphs.size(); s += static_cast<std::size_t>(chunk)) {
        const std::size_t e = std::min(graphs.size(), s + static_cast<std::size_t>(chunk));
        std::vector<const HeteroGraph*> part;
        for (std::size_t k = s; k < e; ++k) part.push_back(&graphs[k]);
        const HeteroGraph batch = disjoint_union(part);
        Tape tape;
        const Var lg = model.forward(tape, batch);
        std::size_t row = 0;
        for (std::size_t k = s; k < e; ++k) {
            std::vector<double> v(graphs[k].mask.size());
            for (auto& x : v) x = lg.value()(static_cast<Eigen::Index>(row++), 0);
            out.push_back(std::move(v));
        }
    }
    return out;
}

PiScale fit_pi_scale(std::span<const PhysicsFeatures> label_features) {
    PiScale scale{1.0, 1.0, 1.0};
    if (label_features.size() < 2) return scale;
    for (std::size_t f = 0; f < 3; ++f) {
        std::vector<double> v;
        for (const auto& x : label_features) v.push_back(x[f]);
        const auto ms = mean_std(v);
        if (ms.std > 1e-12 * std::max(1.0, std::abs(ms.mean))) scale[f] = ms.std;
    }
    return scale;
}

}  // namespace

std::string to_string(PiMode m) { return m == PiMode::hard ? "hard" : "soft"; }

PiMode pi_mode_from_string(const std::string& s) {
    if (s == "soft") return PiMode::soft;
    if (s == "hard") return PiMode::hard;
    throw InvalidArgument("unknown PI mode '" + s + "' (soft or hard)");
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
    return {{"eta", c.eta},
            {"pi_period", c.pi_period},
            {"lr", c.lr},
            {"weight_decay", c.weight_decay},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"seed", c.seed},
            {"threshold", c.threshold},
            {"pi_mode", to_string(c.pi_mode)},
            {"model", nn::config_to_json(c.model)}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    try {
        c.eta = j.value("eta", c.eta);
        c.pi_period = j.value("pi_period", c.pi_period);
        c.lr = j.value("lr", c.lr);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.epochs = j.value("epochs", c.epochs);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.seed = j.value("seed", c.seed);
        c.threshold = j.value("threshold", c.threshold);
        c.pi_mode = pi_mode_from_string(j.value("pi_mode", std::string("soft")));
        if (j.contains("model")) c.model = nn::config_from_json(j.at("model"));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed training config: ") + e.what());
    }
    validate(c);
    return c;
}

void validate(const TrainConfig& c) {
    if (c.pi_period < 1) throw InvalidArgument("pi_period must be >= 1");
    if (c.epochs < 1) throw InvalidArgument("epochs must be >= 1");
    if (c.batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
    if (!(c.threshold > 0.0 && c.threshold < 1.0)) throw InvalidArgument("threshold must lie in (0, 1)");
    if (c.eta < 0.0) throw InvalidArgument("eta must be >= 0");
}

double ce_loss(std::span<const double> logits, std::span<const double> labels) {
    if (logits.size() != labels.size()) throw DimensionMismatch("logits and labels differ in length");
    if (logits.empty()) throw InvalidArgument("cross-entropy over an empty mask");
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) total += bce(logits[i], labels[i]);
    return total / static_cast<double>(logits.size());
}

PiLoss pi_loss_grad(const PhysicsEvaluator& physics, std::span<const double> z_pred, std::span<const double> z_label,
                    const PiScale& scale, PiMode mode, double threshold) {
    const std::size_t n = physics.candidates().size();
    if (z_pred.size() != n || z_label.size() != n) throw DimensionMismatch("blocker vectors do not match the candidates");
    std::vector<double> z(z_pred.begin(), z_pred.end());
    if (mode == PiMode::hard) {
        for (auto& v : z) v = v >= threshold ? 1.0 : 0.0;
    }
    const auto pred = physics.features_and_grad(z);
    const auto label = physics.features(z_label);
    PiLoss out;
    out.grad.assign(n, 0.0);
    for (std::size_t f = 0; f < 3; ++f) {
        const double diff = (pred.value[f] - label[f]) / scale[f];
        out.value += diff * diff;
        for (std::size_t k = 0; k < n; ++k) {
            out.grad[k] += 2.0 * diff / scale[f] * pred.jacobian(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(k));
        }
    }
    return out;
}

double pi_loss(const NetworkModel& network, const GmdScenario& scenario, std::span<const double> z_pred,
               std::span<const double> z_label, const PiScale& scale) {
    const PhysicsEvaluator physics(network, scenario.field);
    return pi_loss_grad(physics, z_pred, z_label, scale).value;
}

std::string report_to_csv(const TrainReport& r) {
    std::ostringstream out;
    out << "epoch,train_ce,train_pi,pi_weight,val_ce,val_accuracy,val_auc\n";
    for (const auto& e : r.epochs) {
        out << e.epoch << ',' << fmt(e.train_ce) << ',' << (e.train_pi ? fmt(*e.train_pi) : "") << ','
            << fmt(e.pi_weight) << ',' << fmt(e.val_ce) << ',' << fmt(e.val_accuracy) << ','
            << (e.val_auc ? fmt(*e.val_auc) : "") << '\n';
    }
    return out.str();
}

nlohmann::json report_to_json(const TrainReport& r) {
    nlohmann::json epochs = nlohmann::json::array();
    for (const auto& e : r.epochs) {
        nlohmann::json row = {{"epoch", e.epoch},   {"train_ce", e.train_ce},         {"pi_weight", e.pi_weight},
                              {"val_ce", e.val_ce}, {"val_accuracy", e.val_accuracy}};
        row["train_pi"] = e.train_pi ? nlohmann::json(*e.train_pi) : nlohmann::json(nullptr);
        row["val_auc"] = e.val_auc ? nlohmann::json(*e.val_auc) : nlohmann::json(nullptr);
        epochs.push_back(std::move(row));
    }
    return {{"best_epoch", r.best_epoch},
            {"best_val_auc", r.best_val_auc ? nlohmann::json(*r.best_val_auc) : nlohmann::json(nullptr)},
            {"best_val_accuracy", r.best_val_accuracy},
            {"parameter_count", r.parameter_count},
            {"epochs", std::move(epochs)}};
}

TrainResult train(std::span<const TrainSample> train_set, std::span<const TrainSample> val_set,
                  const TrainConfig& config) {
    validate(config);
    if (train_set.empty()) throw InvalidArgument("the training split is empty");
    for (const auto& s : train_set) {
        if (!s.graph.labels) throw SchemaError("training graph without labels");
        if (s.graph.mask.empty()) throw InvalidArgument("training graph without candidates");
    }
    for (const auto& s : val_set) {
        if (!s.graph.labels) throw SchemaError("validation graph without labels");
    }

    std::vector<HeteroGraph> raw;
    for (const auto& s : train_set) raw.push_back(s.graph);
    const NormStats norm = fit_normalization(raw);
    std::vector<HeteroGraph> tr, va;
    for (const auto& g : raw) tr.push_back(normalize(g, norm));
    for (const auto& s : val_set) va.push_back(normalize(s.graph, norm));
    raw.clear();

    const bool use_pi = config.eta > 0.0;
    std::vector<std::optional<PhysicsEvaluator>> physics(train_set.size());
    PiScale scale{1.0, 1.0, 1.0};
    if (use_pi) {
        std::vector<PhysicsFeatures> label_features;
        for (std::size_t i = 0; i < train_set.size(); ++i) {
            if (!train_set[i].network) throw InvalidArgument("PI training needs the sample network");
            physics[i].emplace(*train_set[i].network, train_set[i].scenario.field);
            label_features.push_back(physics[i]->features(*tr[i].labels));
        }
        scale = fit_pi_scale(label_features);
    }

    nn::HgnnConfig mc = config.model;
    mc.seed = config.seed;
    nn::HgnnModel model(mc);
    nn::AdamState adam;
    const nn::AdamOptions adam_opts{config.lr, config.weight_decay};

    TrainReport report;
    report.parameter_count = model.parameter_count();
    std::vector<nn::Parameter> best = model.parameters();
    double best_key = -1.0;
    bool best_by_auc = false;

    std::vector<std::size_t> order(tr.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(config.seed ^ kShuffleSalt);
    const auto b = static_cast<std::size_t>(config.batch_size);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[rng() % k]);
        const bool pi_epoch = use_pi && epoch % config.pi_period == 0;
        const double w = pi_epoch ? config.eta / std::sqrt(static_cast<double>(epoch)) : 0.0;

        double ce_sum = 0.0;
        double pi_sum = 0.0;
        for (std::size_t s = 0; s < order.size(); s += b) {
            const std::size_t e = std::min(order.size(), s + b);
            const auto bsz = static_cast<double>(e - s);
            std::vector<const HeteroGraph*> part;
            for (std::size_t k = s; k < e; ++k) part.push_back(&tr[order[k]]);
            const HeteroGraph batch = disjoint_union(part);

            Tape tape;
            const Var logits = model.forward(tape, batch);
            const auto n = static_cast<Eigen::Index>(batch.mask.size());
            Eigen::VectorXd targets(n), weights(n);
            Eigen::Index row = 0;
            for (const auto* g : part) {
                const double wi = 1.0 / (bsz * static_cast<double>(g->mask.size()));
                for (double y : *g->labels) {
                    targets[row] = y;
                    weights[row++] = wi;
                }
            }
            Var loss = nn::weighted_bce_with_logits(logits, targets, weights);
            ce_sum += loss.value()(0, 0) * bsz;

            if (pi_epoch) {
                const Var probs = nn::sigmoid(logits);
                row = 0;
                std::optional<Var> pi_total;
                for (std::size_t k = s; k < e; ++k) {
                    const auto& g = tr[order[k]];
                    std::vector<int> rows(g.mask.size());
                    for (auto& r : rows) r = static_cast<int>(row++);
                    const Var slice = nn::gather_rows(probs, rows);
                    std::vector<double> z(slice.value().data(), slice.value().data() + slice.value().size());
                    const auto pl = pi_loss_grad(*physics[order[k]], z, *g.labels, scale, config.pi_mode,
                                                 config.threshold);
                    pi_sum += pl.value;
                    Mat value(1, 1);
                    value(0, 0) = pl.value;
                    Mat grad = Eigen::Map<const Mat>(pl.grad.data(), static_cast<Eigen::Index>(pl.grad.size()), 1);
                    const std::array in{slice};
                    const Var term = tape.record(std::move(value), in, [slice, grad](Tape& t, const Mat& gout) {
                        t.accumulate(slice, grad * gout(0, 0));
                    });
                    pi_total = pi_total ? nn::add(*pi_total, term) : term;
                }
                loss = nn::add(loss, nn::scale(*pi_total, w / bsz));
            }
            nn::check_finite(loss, "training loss");
            model.zero_grad();
            tape.backward(loss);
            nn::adam_step(model.parameters(), adam, adam_opts);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_ce = ce_sum / static_cast<double>(tr.size());
        if (pi_epoch) rec.train_pi = pi_sum / static_cast<double>(tr.size());
        rec.pi_weight = w;

        if (!va.empty()) {
            const auto lg = logits_of(model, va, config.batch_size);
            std::vector<double> scores, labels;
            double ce = 0.0;
            for (std::size_t i = 0; i < va.size(); ++i) {
                ce += ce_loss(lg[i], *va[i].labels);
                for (std::size_t k = 0; k < lg[i].size(); ++k) {
                    scores.push_back(sigmoid(lg[i][k]));
                    labels.push_back((*va[i].labels)[k]);
                }
            }
            rec.val_ce = ce / static_cast<double>(va.size());
            rec.val_accuracy = accuracy_at(scores, labels, config.threshold);
            rec.val_auc = try_roc_auc(scores, labels);
            const bool by_auc = rec.val_auc.has_value();
            const double key = by_auc ? *rec.val_auc : rec.val_accuracy;
            // An AUC-ranked epoch always beats an accuracy-ranked one.
            if ((by_auc && !best_by_auc) || (by_auc == best_by_auc && key > best_key)) {
                best_key = key;
                best_by_auc = by_auc;
                best = model.parameters();
                report.best_epoch = epoch;
                report.best_val_auc = rec.val_auc;
                report.best_val_accuracy = rec.val_accuracy;
            }
        } else {
            best = model.parameters();
            report.best_epoch = epoch;
        }
        report.epochs.push_back(rec);
        report.epoch_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }

    TrainResult result;
    result.checkpoint.config = mc;
    result.checkpoint.norm = norm;
    result.checkpoint.params = std::move(best);
    result.checkpoint.extra = {{"pi_scale", scale},
                               {"train", train_config_to_json(config)},
                               {"best_epoch", report.best_epoch}};
    result.report = std::move(report);
    return result;
}

std::vector<std::vector<double>> predict(const nn::Checkpoint& checkpoint, std::span<const HeteroGraph> graphs) {
    auto model = nn::model_from_checkpoint(checkpoint);
    std::vector<HeteroGraph> norm;
    norm.reserve(graphs.size());
    for (const auto& g : graphs) norm.push_back(normalize(g, checkpoint.norm));
    auto lg = logits_of(model, norm, 64);
    for (auto& v : lg) {
        for (auto& x : v) x = sigmoid(x);
    }
    return lg;
}

}  // namespace gicnet
