#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gicnet/dataset.hpp"
#include "gicnet/error.hpp"
#include "gicnet/eval.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gicnet;

namespace {

struct Global {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> config;
    std::optional<std::string> out;
};

struct FieldArgs {
    std::string network;
    double emag = 0.0;
    double edir = 0.0;
    std::vector<int> block;
};

struct TrainArgs {
    std::optional<double> eta, lr, wd, threshold;
    std::optional<int> pi_period, epochs, batch, hidden, layers, heads, mlp_layers, mlp_hidden;
    std::optional<std::string> pi_mode;
    bool no_attention = false;
};

void add_field_options(CLI::App* app, FieldArgs& a) {
    app->add_option("--network", a.network, "network JSON")->required()->check(CLI::ExistingFile);
    app->add_option("--emag", a.emag, "E-field magnitude, V/km");
    app->add_option("--edir", a.edir, "E-field direction, degrees clockwise from north");
    app->add_option("--blockers", a.block, "candidate ids carrying a blocker")->delimiter(',');
}

void add_train_options(CLI::App* app, TrainArgs& a) {
    app->add_option("--eta", a.eta, "PI loss weight (0 = plain HGNN)");
    app->add_option("--pi-period", a.pi_period, "epochs between PI evaluations");
    app->add_option("--epochs", a.epochs);
    app->add_option("--lr", a.lr);
    app->add_option("--weight-decay", a.wd);
    app->add_option("--batch", a.batch);
    app->add_option("--threshold", a.threshold);
    app->add_option("--pi-mode", a.pi_mode, "soft or hard");
    app->add_option("--hidden", a.hidden);
    app->add_option("--layers", a.layers);
    app->add_option("--heads", a.heads);
    app->add_option("--mlp-layers", a.mlp_layers);
    app->add_option("--mlp-hidden", a.mlp_hidden);
    app->add_flag("--no-attention", a.no_attention, "plain sum aggregation");
}

TrainConfig make_train_config(const Global& g, const TrainArgs& a) {
    TrainConfig c;
    if (g.config) c = train_config_from_json(read_json(*g.config));
    if (g.seed) c.seed = *g.seed;
    if (a.eta) c.eta = *a.eta;
    if (a.pi_period) c.pi_period = *a.pi_period;
    if (a.epochs) c.epochs = *a.epochs;
    if (a.lr) c.lr = *a.lr;
    if (a.wd) c.weight_decay = *a.wd;
    if (a.batch) c.batch_size = *a.batch;
    if (a.threshold) c.threshold = *a.threshold;
    if (a.pi_mode) c.pi_mode = pi_mode_from_string(*a.pi_mode);
    if (a.hidden) c.model.hidden = *a.hidden;
    if (a.layers) c.model.layers = *a.layers;
    if (a.heads) c.model.heads = *a.heads;
    if (a.mlp_layers) c.model.mlp_layers = *a.mlp_layers;
    if (a.mlp_hidden) c.model.mlp_hidden = *a.mlp_hidden;
    if (a.no_attention) c.model.attention = false;
    validate(c);
    return c;
}

NetworkModel read_network(const std::string& path) {
    auto net = load_network(path);
    ensure_valid(net);
    return net;
}

// Writes `name` under --out, or prints it when --out is absent.
void emit(const Global& g, const std::string& name, const std::string& text) {
    if (!g.out) {
        std::cout << text;
        return;
    }
    fs::create_directories(*g.out);
    write_atomic(fs::path(*g.out) / name, text);
}

void emit_json(const Global& g, const std::string& name, const json& j) { emit(g, name, j.dump(1) + "\n"); }

fs::path out_dir(const Global& g) { return g.out ? fs::path(*g.out) : fs::path("."); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GIC blocker placement with heterogeneous graph networks"};
    app.require_subcommand(1);
    Global g;
    app.add_option("--seed", g.seed, "random seed");
    app.add_option("--config", g.config, "training config JSON")->check(CLI::ExistingFile);
    app.add_option("--out", g.out, "output directory");

    FieldArgs gic_args;
    auto* gic_cmd = app.add_subcommand("solve-gic", "dc GIC solution for one field");
    add_field_options(gic_cmd, gic_args);

    FieldArgs mld_args;
    auto* mld_cmd = app.add_subcommand("solve-mld", "ac load shed under GIC reactive losses");
    add_field_options(mld_cmd, mld_args);
    double mld_load_scale = 1.0;
    mld_cmd->add_option("--load-scale", mld_load_scale, "uniform scale of every load");

    FieldArgs place_args;
    std::optional<double> place_budget;
    std::string place_method = "greedy";
    auto* place_cmd = app.add_subcommand("place-blockers", "budget-constrained blocker placement");
    add_field_options(place_cmd, place_args);
    place_cmd->add_option("--budget", place_budget, "placement budget (default: network economics)");
    place_cmd->add_option("--method", place_method)->check(CLI::IsMember({"greedy", "exhaustive"}));

    std::string gen_network;
    std::vector<double> gen_dirs{45.0, 135.0}, gen_mags{5.0, 10.0, 15.0, 20.0}, gen_split{0.8, 0.1, 0.1};
    int gen_per_cell = 50;
    std::optional<double> gen_budget;
    bool gen_independent = false;
    auto* gen_cmd = app.add_subcommand("gen-dataset", "generate and label GMD scenarios");
    gen_cmd->add_option("--network", gen_network)->required()->check(CLI::ExistingFile);
    gen_cmd->add_option("--dirs", gen_dirs)->delimiter(',');
    gen_cmd->add_option("--mags", gen_mags)->delimiter(',');
    gen_cmd->add_option("--per-cell", gen_per_cell);
    gen_cmd->add_option("--budget", gen_budget);
    gen_cmd->add_option("--split", gen_split, "train,val,test fractions")->delimiter(',')->expected(3);
    gen_cmd->add_flag("--independent-pq", gen_independent, "draw qd scales separately");

    std::string train_data;
    std::optional<std::string> model_out;
    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "train on a dataset's train/val splits");
    train_cmd->add_option("--data", train_data)->required()->check(CLI::ExistingDirectory);
    train_cmd->add_option("--model-out", model_out, "checkpoint path (default <out>/model.json)");
    add_train_options(train_cmd, train_args);

    std::string eval_data;
    std::optional<std::string> eval_model;
    std::string eval_kind = "both";
    int eval_folds = 10;
    double eval_val_fraction = 0.1;
    TrainArgs eval_args;
    auto* eval_cmd = app.add_subcommand("evaluate", "k-fold cross-validation, or test-split scores of --model");
    eval_cmd->add_option("--data", eval_data)->required()->check(CLI::ExistingDirectory);
    eval_cmd->add_option("--model", eval_model)->check(CLI::ExistingFile);
    eval_cmd->add_option("--kind", eval_kind)->check(CLI::IsMember({"hgnn", "pihgnn", "both"}));
    eval_cmd->add_option("--folds", eval_folds);
    eval_cmd->add_option("--val-fraction", eval_val_fraction);
    add_train_options(eval_cmd, eval_args);

    std::string sweep_network, sweep_model;
    std::vector<double> sweep_mags{5.0, 10.0, 15.0, 20.0};
    double sweep_dir = 45.0, sweep_threshold = 0.5;
    std::optional<double> sweep_budget;
    auto* sweep_cmd = app.add_subcommand("sweep", "heuristic vs model objective over E-field magnitudes");
    sweep_cmd->add_option("--network", sweep_network)->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--model", sweep_model)->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--mags", sweep_mags)->delimiter(',');
    sweep_cmd->add_option("--edir", sweep_dir);
    sweep_cmd->add_option("--budget", sweep_budget);
    sweep_cmd->add_option("--threshold", sweep_threshold);

    std::string cross_model, cross_data, cross_split = "test";
    double cross_threshold = 0.5;
    auto* cross_cmd = app.add_subcommand("crosstest", "score a model on another network's dataset");
    cross_cmd->add_option("--model", cross_model)->required()->check(CLI::ExistingFile);
    cross_cmd->add_option("--data", cross_data)->required()->check(CLI::ExistingDirectory);
    cross_cmd->add_option("--split", cross_split)->check(CLI::IsMember({"train", "val", "test", "all"}));
    cross_cmd->add_option("--threshold", cross_threshold);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*gic_cmd) {
            const auto net = read_network(gic_args.network);
            const auto sol = solve_gic(net, EField(gic_args.emag, gic_args.edir), BlockerVector::binary_from(gic_args.block));
            emit_json(g, "gic.json", gic_solution_to_json(net, sol));
        } else if (*mld_cmd) {
            const auto net = read_network(mld_args.network);
            auto scenario = GmdScenario::nominal(EField(mld_args.emag, mld_args.edir));
            scenario.load_scale_p.assign(net.loads.size(), mld_load_scale);
            scenario.load_scale_q = scenario.load_scale_p;
            const auto r = evaluate_mld(net, scenario, BlockerVector::binary_from(mld_args.block));
            emit_json(g, "mld.json", mld_result_to_json(net, r));
        } else if (*place_cmd) {
            const auto net = read_network(place_args.network);
            const auto scenario = GmdScenario::nominal(EField(place_args.emag, place_args.edir));
            const double budget = place_budget.value_or(net.blockers.budget);
            const auto s = place_method == "exhaustive" ? solve_exhaustive(net, scenario, budget)
                                                        : solve_heuristic(net, scenario, budget, g.seed.value_or(0));
            emit_json(g, "placement.json", placement_to_json(s));
        } else if (*gen_cmd) {
            if (!g.out) throw InvalidArgument("gen-dataset needs --out");
            const auto net = read_network(gen_network);
            GenerateOptions opts;
            opts.independent_pq = gen_independent;
            const auto seed = g.seed.value_or(0);
            const auto scenarios = generate(net, gen_dirs, gen_mags, gen_per_cell, seed, opts);
            const auto ds = build_dataset(net, scenarios, gen_budget.value_or(net.blockers.budget),
                                          {gen_split[0], gen_split[1], gen_split[2]}, seed, fs::path(*g.out));
            std::fprintf(stderr, "%zu samples written to %s\n", ds.graphs.size(), g.out->c_str());
        } else if (*train_cmd) {
            const auto cfg = make_train_config(g, train_args);
            const auto ds = load_dataset(train_data);
            const auto tr = ds.samples(ds.manifest.indices(Split::train));
            const auto va = ds.samples(ds.manifest.indices(Split::val));
            const auto result = train(tr, va, cfg);
            const fs::path dir = out_dir(g);
            fs::create_directories(dir);
            const fs::path model_path = model_out ? fs::path(*model_out) : dir / "model.json";
            nn::save_checkpoint(result.checkpoint, model_path);
            write_atomic(dir / "train_report.csv", report_to_csv(result.report));
            write_atomic(dir / "train_report.json", report_to_json(result.report).dump(1) + "\n");
            write_atomic(dir / "train_timing.json", json{{"epoch_seconds", result.report.epoch_seconds}}.dump(1) + "\n");
            std::fprintf(stderr, "best epoch %d, checkpoint %s\n", result.report.best_epoch, model_path.c_str());
        } else if (*eval_cmd) {
            const auto ds = load_dataset(eval_data);
            if (eval_model) {
                const auto ck = nn::load_checkpoint(*eval_model);
                const auto idx = ds.manifest.indices(Split::test);
                emit_json(g, "test_scores.json", scores_to_json(cross_network_eval(ck, ds, idx)));
            } else {
                const auto cfg = make_train_config(g, eval_args);
                CvOptions opts;
                opts.k = eval_folds;
                opts.seed = cfg.seed;
                opts.val_fraction = eval_val_fraction;
                std::vector<ModelKind> kinds;
                if (eval_kind != "pihgnn") kinds.push_back(ModelKind::hgnn);
                if (eval_kind != "hgnn") kinds.push_back(ModelKind::pihgnn);
                json summary = json::object();
                for (const auto kind : kinds) {
                    const auto r = run_cv(ds, cfg, kind, opts);
                    const auto name = to_string(kind);
                    emit_json(g, "cv_" + name + ".json", eval_report_to_json(r));
                    if (g.out) write_atomic(out_dir(g) / ("cv_" + name + "_timing.json"), timing_to_json(r.timing).dump(1) + "\n");
                    summary[name] = {{"accuracy", r.accuracy.mean}, {"roc_auc", r.roc_auc.mean}};
                }
                if (summary.contains("hgnn") && summary.contains("pihgnn")) {
                    summary["delta_accuracy"] = summary["pihgnn"]["accuracy"].get<double>() - summary["hgnn"]["accuracy"].get<double>();
                    summary["delta_roc_auc"] = summary["pihgnn"]["roc_auc"].get<double>() - summary["hgnn"]["roc_auc"].get<double>();
                }
                emit_json(g, "cv_summary.json", summary);
            }
        } else if (*sweep_cmd) {
            const auto net = read_network(sweep_network);
            const auto ck = nn::load_checkpoint(sweep_model);
            const auto pts = efield_sweep(net, ck, sweep_mags, sweep_dir, sweep_budget.value_or(net.blockers.budget),
                                          sweep_threshold);
            emit(g, "sweep.csv", sweep_to_csv(pts));
        } else if (*cross_cmd) {
            const auto ck = nn::load_checkpoint(cross_model);
            const auto ds = load_dataset(cross_data);
            std::vector<std::size_t> idx;
            if (cross_split == "all") {
                for (std::size_t i = 0; i < ds.graphs.size(); ++i) idx.push_back(i);
            } else {
                idx = ds.manifest.indices(cross_split == "train" ? Split::train
                                          : cross_split == "val" ? Split::val
                                                                 : Split::test);
            }
            json j = scores_to_json(cross_network_eval(ck, ds, idx, cross_threshold));
            j["network"] = ds.manifest.network;
            j["split"] = cross_split;
            emit_json(g, "crosstest.json", j);
        }
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 2;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return 2;
    } catch (const InvalidArgument& e) {
        std::fprintf(stderr, "invalid argument: %s\n", e.what());
        return 2;
    } catch (const DimensionMismatch& e) {
        std::fprintf(stderr, "dimension mismatch: %s\n", e.what());
        return 2;
    } catch (const SolverError& e) {
        std::fprintf(stderr, "solver failure: %s\n", e.what());
        return 3;
    } catch (const NonFiniteError& e) {
        std::fprintf(stderr, "solver failure: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
