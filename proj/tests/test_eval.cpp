#include <doctest.h>

#include <cmath>
#include <random>

#include "gicnet/error.hpp"
#include "gicnet/eval.hpp"
#include "gicnet/metrics.hpp"
#include "oracles/brute_auc.hpp"

using namespace gicnet;

namespace {

const std::string kData = GICNET_DATA_DIR;

const Dataset& tiny_dataset() {
    static const Dataset ds = [] {
        const auto net = load_network(kData + "/epri21.json");
        const std::vector<double> dirs{45.0, 135.0}, mags{10.0, 20.0};
        const auto sc = generate(net, dirs, mags, 2, 8);
        return build_dataset(net, sc, net.blockers.budget, {0.75, 0.125, 0.125}, 8);
    }();
    return ds;
}

TrainConfig tiny_config() {
    TrainConfig c;
    c.eta = 0.1;
    c.pi_period = 2;
    c.epochs = 3;
    c.batch_size = 4;
    c.seed = 4;
    c.model.hidden = 6;
    c.model.layers = 1;
    c.model.heads = 2;
    c.model.mlp_layers = 2;
    c.model.mlp_hidden = 6;
    return c;
}

}  // namespace

TEST_CASE("accuracy") {
    const std::vector<double> y{1, 0, 1, 1};
    const std::vector<double> flipped{0, 1, 0, 0};
    CHECK(accuracy(y, y) == 1.0);
    CHECK(accuracy(flipped, y) == 0.0);
    CHECK(accuracy(std::vector<double>{1, 0, 0, 1}, y) == 0.75);
    CHECK(accuracy_at(std::vector<double>{0.9, 0.1, 0.4, 0.5}, y, 0.5) == 0.75);
    CHECK_THROWS_AS((void)accuracy(std::vector<double>{1, 0}, y), DimensionMismatch);
}

TEST_CASE("ROC AUC") {
    CHECK(roc_auc(std::vector<double>{0.9, 0.8, 0.2}, std::vector<double>{1, 1, 0}) == 1.0);
    CHECK(roc_auc(std::vector<double>{0.2, 0.8}, std::vector<double>{1, 0}) == 0.0);
    CHECK(roc_auc(std::vector<double>{0.5, 0.5}, std::vector<double>{1, 0}) == 0.5);
    CHECK_THROWS_AS((void)roc_auc(std::vector<double>{0.1, 0.3}, std::vector<double>{1, 1}), InvalidArgument);
    CHECK_FALSE(try_roc_auc(std::vector<double>{0.1, 0.3}, std::vector<double>{0, 0}).has_value());

    std::mt19937_64 rng(31);
    for (std::size_t n : {50UL, 1000UL, 10000UL}) {
        std::vector<double> s, y;
        for (std::size_t i = 0; i < n; ++i) {
            // Coarse scores force ties.
            s.push_back(std::floor(std::uniform_real_distribution<double>(0.0, 20.0)(rng)) / 20.0);
            y.push_back(static_cast<double>(rng() % 3 == 0));
        }
        CAPTURE(n);
        CHECK(std::abs(roc_auc(s, y) - oracle::brute_auc(s, y)) <= 1e-12);
    }
}

TEST_CASE("mean and population std") {
    const std::vector<double> v{0.5, 0.7, 0.9, 0.7};
    const auto m = mean_std(v);
    CHECK(m.count == 4);
    CHECK(m.mean == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(m.std == doctest::Approx(std::sqrt(0.02)).epsilon(1e-14));
    CHECK(mean_std(std::vector<double>{0.3}).std == 0.0);
}

TEST_CASE("budget-feasible blocker selection") {
    auto net = load_network(kData + "/epri21.json");
    const auto cands = net.candidates();
    for (std::size_t k = 0; k < cands.size(); ++k) net.blockers.costs[k].cost = k == 1 ? 3.0 : 1.0;
    const std::vector<double> p{0.2, 0.99, 0.6, 0.7, 0.4, 0.95, 0.55, 0.5};

    CHECK(select_blockers(net, p, 0.0).empty());
    CHECK(select_blockers(net, p, 1.0) == std::vector<int>{cands[5]});
    // The costly top candidate is skipped when it no longer fits.
    const auto two = select_blockers(net, p, 2.0);
    CHECK(two == std::vector<int>{std::min(cands[3], cands[5]), std::max(cands[3], cands[5])});
    const auto all = select_blockers(net, p, 100.0);
    CHECK(all.size() == 6);
    CHECK(placement_cost(net, select_blockers(net, p, 4.5)) <= 4.5);
    CHECK(select_blockers(net, p, 100.0, 0.96).size() == 1);
    CHECK_THROWS_AS((void)select_blockers(net, std::vector<double>{0.5}, 1.0), DimensionMismatch);
}

TEST_CASE("cross-validation is deterministic and its summary matches the folds") {
    const auto& ds = tiny_dataset();
    CvOptions opts;
    opts.k = 2;
    opts.seed = 3;
    opts.val_fraction = 0.25;
    const auto a = run_cv(ds, tiny_config(), ModelKind::pihgnn, opts);
    const auto b = run_cv(ds, tiny_config(), ModelKind::pihgnn, opts);
    CHECK(eval_report_to_json(a).dump() == eval_report_to_json(b).dump());

    REQUIRE(a.folds.size() == 2);
    std::vector<double> acc, auc;
    std::size_t tested = 0;
    for (const auto& f : a.folds) {
        acc.push_back(f.test.accuracy);
        if (f.test.roc_auc) auc.push_back(*f.test.roc_auc);
        tested += f.test.samples;
        CHECK(f.test.accuracy >= 0.0);
        CHECK(f.test.accuracy <= 1.0);
    }
    CHECK(tested == ds.graphs.size());
    const auto ma = mean_std(acc);
    CHECK(a.accuracy.mean == ma.mean);
    CHECK(a.accuracy.std == ma.std);
    CHECK(a.roc_auc.count == static_cast<int>(auc.size()));
    if (!auc.empty()) {
        CHECK(a.roc_auc.std == mean_std(auc).std);
    }
    const auto& c = a.confusion;
    CHECK(c.tp + c.fp + c.tn + c.fn == static_cast<int>(8 * ds.graphs.size()));

    const auto h = run_cv(ds, tiny_config(), ModelKind::hgnn, opts);
    CHECK(h.kind == ModelKind::hgnn);
    CHECK(model_kind_from_string(to_string(ModelKind::hgnn)) == ModelKind::hgnn);
}

TEST_CASE("sweep and cross-network scoring") {
    const auto& ds = tiny_dataset();
    const auto train_idx = ds.manifest.indices(Split::train);
    const auto trained = train(ds.samples(train_idx), {}, tiny_config());
    const auto& net = ds.network;

    const std::vector<double> mags{0.0, 10.0};
    const auto sweep = efield_sweep(net, trained.checkpoint, mags, 45.0, net.blockers.budget);
    REQUIRE(sweep.size() == 2);
    CHECK(sweep[0].objective_heuristic == sweep[0].objective_ml);
    CHECK(sweep[1].objective_ml >= sweep[1].objective_heuristic - 1e-9);
    CHECK(placement_cost(net, sweep[1].blocked_ml) <= net.blockers.budget + 1e-9);
    const auto csv = sweep_to_csv(sweep);
    CHECK(csv.rfind("magnitude,objective_heuristic,objective_ml", 0) == 0);

    const auto test_idx = ds.manifest.indices(Split::test);
    const auto s1 = cross_network_eval(trained.checkpoint, ds, test_idx);
    const auto s2 = cross_network_eval(trained.checkpoint, ds, test_idx);
    CHECK(scores_to_json(s1) == scores_to_json(s2));
    CHECK(s1.samples == test_idx.size());

    auto other = ds;
    other.manifest.schema_hash += 1;
    CHECK_THROWS_AS((void)cross_network_eval(trained.checkpoint, other, test_idx), SchemaError);

    std::vector<HeteroGraph> unlabelled{build_graph(net, GmdScenario::nominal(EField(5.0, 45.0)))};
    CHECK_THROWS_AS((void)score(trained.checkpoint, unlabelled), SchemaError);
}
