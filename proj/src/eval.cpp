#include "gicnet/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "gicnet/error.hpp"

namespace gicnet {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

nlohmann::json mean_std_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}, {"count", m.count}}; }

nlohmann::json confusion_json(const Confusion& c) { return {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}}; }

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string join_ids(std::span<const int> ids) {
    std::string out;
    for (std::size_t k = 0; k < ids.size(); ++k) {
        if (k) out += ' ';
        out += std::to_string(ids[k]);
    }
    return out;
}

}  // namespace

std::string to_string(ModelKind k) { return k == ModelKind::hgnn ? "hgnn" : "pihgnn"; }

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "hgnn") return ModelKind::hgnn;
    if (s == "pihgnn") return ModelKind::pihgnn;
    throw InvalidArgument("unknown model kind '" + s + "' (hgnn or pihgnn)");
}

Scores score(const nn::Checkpoint& checkpoint, std::span<const HeteroGraph> graphs, double threshold) {
    for (const auto& g : graphs) {
        if (!g.labels) throw SchemaError("cannot score a graph without labels");
    }
    Scores out;
    out.samples = graphs.size();
    const auto t0 = Clock::now();
    const auto probs = predict(checkpoint, graphs);
    out.seconds = seconds_since(t0);

    std::vector<double> scores, labels, per_acc, per_auc;
    for (std::size_t i = 0; i < graphs.size(); ++i) {
        const auto& y = *graphs[i].labels;
        for (std::size_t k = 0; k < y.size(); ++k) {
            const bool p = probs[i][k] >= threshold;
            const bool t = y[k] >= 0.5;
            (p ? (t ? out.confusion.tp : out.confusion.fp) : (t ? out.confusion.fn : out.confusion.tn))++;
            scores.push_back(probs[i][k]);
            labels.push_back(y[k]);
        }
        if (!y.empty()) {
            per_acc.push_back(accuracy_at(probs[i], y, threshold));
            if (const auto a = try_roc_auc(probs[i], y)) per_auc.push_back(*a);
        }
    }
    if (scores.empty()) throw InvalidArgument("no masked nodes to score");
    out.accuracy = accuracy_at(scores, labels, threshold);
    out.roc_auc = try_roc_auc(scores, labels);
    out.sample_accuracy = mean_std(per_acc).mean;
    if (!per_auc.empty()) out.sample_auc = mean_std(per_auc).mean;
    return out;
}

nlohmann::json scores_to_json(const Scores& s) {
    return {{"accuracy", s.accuracy},
            {"roc_auc", optional_json(s.roc_auc)},
            {"sample_accuracy", s.sample_accuracy},
            {"sample_roc_auc", optional_json(s.sample_auc)},
            {"confusion", confusion_json(s.confusion)},
            {"samples", s.samples}};
}

nlohmann::json eval_report_to_json(const EvalReport& r) {
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& f : r.folds) {
        folds.push_back({{"fold", f.fold},
                         {"train_samples", f.train_samples},
                         {"val_samples", f.val_samples},
                         {"best_epoch", f.best_epoch},
                         {"test", scores_to_json(f.test)}});
    }
    return {{"kind", to_string(r.kind)},
            {"k", r.k},
            {"accuracy", mean_std_json(r.accuracy)},
            {"roc_auc", mean_std_json(r.roc_auc)},
            {"sample_accuracy", mean_std_json(r.sample_accuracy)},
            {"auc_undefined_folds", r.auc_undefined_folds},
            {"confusion", confusion_json(r.confusion)},
            {"folds", std::move(folds)}};
}

nlohmann::json timing_to_json(const Timing& t) {
    return {{"train_sec_per_sample", t.train_sec_per_sample},
            {"test_sec_per_sample", t.test_sec_per_sample},
            {"solver_sec_per_sample", t.solver_sec_per_sample}};
}

EvalReport run_cv(const Dataset& dataset, const TrainConfig& config, ModelKind kind, const CvOptions& options) {
    if (options.val_fraction < 0.0 || options.val_fraction >= 1.0) {
        throw InvalidArgument("val_fraction must lie in [0, 1)");
    }
    TrainConfig cfg = config;
    if (kind == ModelKind::hgnn) cfg.eta = 0.0;
    validate(cfg);

    EvalReport report;
    report.kind = kind;
    report.k = options.k;
    const auto folds = kfold(dataset.graphs.size(), options.k, options.seed);

    std::vector<double> acc, auc, sacc;
    double train_seconds = 0.0, test_seconds = 0.0, solver_seconds = 0.0;
    std::size_t train_count = 0, test_count = 0;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::vector<std::size_t> pool = folds[f].train;
        std::mt19937_64 rng(options.seed ^ (0xc0ffeeULL + f));
        for (std::size_t k = pool.size(); k > 1; --k) std::swap(pool[k - 1], pool[rng() % k]);
        const auto n_val = std::min(pool.size() - 1,
                                    static_cast<std::size_t>(std::llround(options.val_fraction * static_cast<double>(pool.size()))));
        std::vector<std::size_t> val(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_val));
        std::vector<std::size_t> tr(pool.begin() + static_cast<std::ptrdiff_t>(n_val), pool.end());
        std::sort(val.begin(), val.end());
        std::sort(tr.begin(), tr.end());

        const auto train_samples = dataset.samples(tr);
        const auto val_samples = dataset.samples(val);
        const auto t0 = Clock::now();
        const auto result = train(train_samples, val_samples, cfg);
        const double tsec = seconds_since(t0);

        std::vector<HeteroGraph> test;
        for (std::size_t i : folds[f].test) {
            test.push_back(dataset.graphs[i]);
            if (i < dataset.solver_seconds.size()) solver_seconds += dataset.solver_seconds[i];
        }
        FoldResult fr;
        fr.fold = static_cast<int>(f);
        fr.train_samples = tr.size();
        fr.val_samples = val.size();
        fr.best_epoch = result.report.best_epoch;
        fr.test = score(result.checkpoint, test, cfg.threshold);
        fr.train_seconds = tsec;

        acc.push_back(fr.test.accuracy);
        sacc.push_back(fr.test.sample_accuracy);
        if (fr.test.roc_auc) {
            auc.push_back(*fr.test.roc_auc);
        } else {
            report.auc_undefined_folds.push_back(fr.fold);
        }
        report.confusion.tp += fr.test.confusion.tp;
        report.confusion.fp += fr.test.confusion.fp;
        report.confusion.tn += fr.test.confusion.tn;
        report.confusion.fn += fr.test.confusion.fn;
        train_seconds += tsec;
        test_seconds += fr.test.seconds;
        train_count += tr.size();
        test_count += test.size();
        report.folds.push_back(std::move(fr));
    }
    report.accuracy = mean_std(acc);
    report.roc_auc = mean_std(auc);
    report.sample_accuracy = mean_std(sacc);
    if (train_count) report.timing.train_sec_per_sample = train_seconds / static_cast<double>(train_count);
    if (test_count) {
        report.timing.test_sec_per_sample = test_seconds / static_cast<double>(test_count);
        report.timing.solver_sec_per_sample = solver_seconds / static_cast<double>(test_count);
    }
    return report;
}

std::vector<int> select_blockers(const NetworkModel& network, std::span<const double> probabilities, double budget,
                                 double threshold) {
    const auto cands = network.candidates();
    if (probabilities.size() != cands.size()) throw DimensionMismatch("one probability per candidate expected");
    std::vector<std::size_t> order(cands.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return probabilities[a] > probabilities[b]; });
    std::vector<int> chosen;
    double spent = 0.0;
    for (std::size_t k : order) {
        if (probabilities[k] < threshold) break;
        const double c = network.blocker_cost(cands[k]);
        if (spent + c > budget + 1e-9) continue;
        spent += c;
        chosen.push_back(cands[k]);
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

std::vector<SweepPoint> efield_sweep(const NetworkModel& network, const nn::Checkpoint& checkpoint,
                                     std::span<const double> magnitudes, double direction_deg, double budget,
                                     double threshold, const PlacementOptions& options) {
    std::vector<SweepPoint> out;
    for (double mag : magnitudes) {
        const auto scenario = GmdScenario::nominal(EField(mag, direction_deg));
        SweepPoint p;
        p.magnitude = mag;
        const auto h = solve_heuristic(network, scenario, budget, 0, options);
        p.objective_heuristic = h.shed_cost;
        p.blocked_heuristic = h.blocked;

        const std::vector<HeteroGraph> g{build_graph(network, scenario)};
        const auto probs = predict(checkpoint, g);
        p.blocked_ml = select_blockers(network, probs.front(), budget, threshold);
        p.objective_ml = evaluate_mld(network, scenario, BlockerVector::binary_from(p.blocked_ml), options.mld).shed_cost;
        out.push_back(std::move(p));
    }
    return out;
}

std::string sweep_to_csv(std::span<const SweepPoint> points) {
    std::ostringstream out;
    out << "magnitude,objective_heuristic,objective_ml,blocked_heuristic,blocked_ml\n";
    for (const auto& p : points) {
        out << fmt(p.magnitude) << ',' << fmt(p.objective_heuristic) << ',' << fmt(p.objective_ml) << ','
            << join_ids(p.blocked_heuristic) << ',' << join_ids(p.blocked_ml) << '\n';
    }
    return out.str();
}

Scores cross_network_eval(const nn::Checkpoint& checkpoint, const Dataset& dataset,
                          std::span<const std::size_t> indices, double threshold) {
    if (dataset.manifest.schema_hash != schema_hash()) throw SchemaError("dataset feature schema differs from the model's");
    std::vector<HeteroGraph> graphs;
    for (std::size_t i : indices) {
        check_schema(dataset.graphs.at(i));
        graphs.push_back(dataset.graphs[i]);
    }
    return score(checkpoint, graphs, threshold);
}

}  // namespace gicnet
