#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "gicnet/dataset.hpp"
#include "gicnet/error.hpp"
#include "gicnet/trainer.hpp"
#include "oracles/dense_features.hpp"
#include "oracles/finite_diff.hpp"

using namespace gicnet;

namespace {

const std::string kData = GICNET_DATA_DIR;

const NetworkModel& epri21() {
    static const NetworkModel net = load_network(kData + "/epri21.json");
    return net;
}

// Twelve labelled EPRI21 samples.
const std::vector<TrainSample>& samples() {
    static const std::vector<TrainSample> out = [] {
        const auto& net = epri21();
        const std::vector<double> dirs{45.0, 135.0}, mags{10.0, 15.0, 20.0};
        const auto sc = generate(net, dirs, mags, 2, 42);
        const auto labels = label_scenarios(net, sc, net.blockers.budget);
        std::vector<TrainSample> v;
        for (std::size_t i = 0; i < sc.size(); ++i) {
            const auto z = labels[i].solution.z.dense(net);
            v.push_back({&net, sc[i], build_graph(net, sc[i], z)});
        }
        return v;
    }();
    return out;
}

TrainConfig small_config() {
    TrainConfig c;
    c.eta = 0.5;
    c.pi_period = 3;
    c.epochs = 7;
    c.batch_size = 4;
    c.seed = 9;
    c.model.hidden = 8;
    c.model.layers = 2;
    c.model.heads = 2;
    c.model.mlp_layers = 2;
    c.model.mlp_hidden = 8;
    return c;
}

std::span<const TrainSample> head(std::size_t n) { return std::span(samples()).first(n); }
std::span<const TrainSample> tail(std::size_t n) { return std::span(samples()).subspan(n); }

bool same_params(const nn::Checkpoint& a, const nn::Checkpoint& b) {
    if (a.params.size() != b.params.size()) return false;
    for (std::size_t i = 0; i < a.params.size(); ++i) {
        if (a.params[i].value != b.params[i].value) return false;
    }
    return true;
}

double naive_bce(double x, double y) {
    const double p = 1.0 / (1.0 + std::exp(-x));
    return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
}

}  // namespace

TEST_CASE("cross-entropy") {
    const std::vector<double> zero{0.0}, one{1.0};
    CHECK(ce_loss(zero, one) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    const std::vector<double> big{60.0};
    CHECK(ce_loss(big, one) < 1e-20);
    const std::vector<double> neg{-800.0};
    CHECK(ce_loss(neg, one) == doctest::Approx(800.0));

    std::mt19937_64 rng(5);
    std::vector<double> logits, labels;
    double naive = 0.0;
    for (int i = 0; i < 40; ++i) {
        logits.push_back(std::uniform_real_distribution<double>(-8.0, 8.0)(rng));
        labels.push_back(static_cast<double>(rng() % 2));
        naive += naive_bce(logits.back(), labels.back());
    }
    CHECK(oracle::rel_err(ce_loss(logits, labels), naive / 40.0) <= 1e-12);

    CHECK_THROWS_AS((void)ce_loss(std::vector<double>{}, std::vector<double>{}), InvalidArgument);
}

TEST_CASE("physics-informed loss values") {
    const auto& net = epri21();
    const auto s = GmdScenario::nominal(EField(15.0, 60.0));
    std::vector<double> label(8, 0.0);
    label[1] = label[4] = 1.0;

    CHECK(pi_loss(net, s, label, label) == 0.0);
    const std::vector<double> other{1, 0, 1, 0, 0, 0, 1, 0};
    CHECK(pi_loss(net, GmdScenario::nominal(EField(0.0, 60.0)), other, label) == 0.0);
    CHECK(pi_loss(net, s, other, label) > 0.0);

    SUBCASE("a candidate without dc branches changes nothing") {
        auto ext = net;
        ext.gmd_buses.push_back({999, GmdBusKind::substation_ground, 5.0, std::nullopt, 0.0, 0.0, 999});
        ext.blockers.costs.push_back({999, 1.0});
        ext.index();
        std::vector<double> a(label), b(label);
        a.push_back(0.0);
        b.push_back(1.0);
        CHECK(pi_loss(ext, s, b, a) == 0.0);
    }
}

TEST_CASE("physics-informed loss matches the dense recomputation") {
    const auto net = bundled_example();
    const auto s = GmdScenario::nominal(EField(10.0, 45.0));
    const auto cands = net.candidates();
    std::vector<double> half(cands.size(), 0.5), label(cands.size(), 0.0);
    label[0] = 1.0;
    const PiScale scale{2.0, 3.0, 5.0};

    auto positions = [&](const std::vector<double>& z) {
        return oracle::z_positions(net, BlockerVector::from_dense(net, z, BlockerMode::soft));
    };
    const auto fp = oracle::dense_features(net, 10.0, 45.0, positions(half));
    const auto fl = oracle::dense_features(net, 10.0, 45.0, positions(label));
    double expect = 0.0;
    for (std::size_t f = 0; f < 3; ++f) expect += std::pow((fp[f] - fl[f]) / scale[f], 2);
    REQUIRE(expect > 0.0);
    CHECK(oracle::rel_err(pi_loss(net, s, half, label, scale), expect) <= 1e-9);
}

TEST_CASE("physics-informed loss gradient") {
    const auto& net = epri21();
    const PhysicsEvaluator physics(net, EField(14.0, 120.0));
    std::mt19937_64 rng(17);
    std::vector<double> z, label(8, 0.0);
    for (int k = 0; k < 8; ++k) z.push_back(std::uniform_real_distribution<double>(0.2, 0.8)(rng));
    label[2] = label[6] = 1.0;
    const PiScale scale{50.0, 20.0, 100.0};

    const auto soft = pi_loss_grad(physics, z, label, scale);
    const auto fd = oracle::central_diff(
        [&](const std::vector<double>& x) { return pi_loss_grad(physics, x, label, scale).value; }, z, 1e-6);
    for (std::size_t k = 0; k < z.size(); ++k) CHECK(oracle::rel_err(soft.grad[k], fd[k], 1e-6) <= 1e-5);

    std::vector<double> snapped(z);
    for (auto& v : snapped) v = v >= 0.5 ? 1.0 : 0.0;
    const auto hard = pi_loss_grad(physics, z, label, scale, PiMode::hard, 0.5);
    const auto at_snap = pi_loss_grad(physics, snapped, label, scale);
    CHECK(hard.value == at_snap.value);
    CHECK(hard.grad == at_snap.grad);
}

TEST_CASE("training configuration is validated") {
    auto c = small_config();
    CHECK_NOTHROW(validate(c));
    c.pi_period = 0;
    CHECK_THROWS_AS(validate(c), InvalidArgument);
    c = small_config();
    c.epochs = 0;
    CHECK_THROWS_AS(validate(c), InvalidArgument);
    c = small_config();
    c.threshold = 1.0;
    CHECK_THROWS_AS(validate(c), InvalidArgument);
    c.threshold = 0.0;
    CHECK_THROWS_AS(validate(c), InvalidArgument);

    const auto j = train_config_to_json(small_config());
    CHECK(train_config_to_json(train_config_from_json(j)) == j);
    auto bad = j;
    bad["epochs"] = "many";
    CHECK_THROWS_AS((void)train_config_from_json(bad), ParseError);

    CHECK_THROWS_AS((void)train({}, {}, small_config()), InvalidArgument);
}

TEST_CASE("PI epochs and weights follow the schedule") {
    const auto cfg = small_config();
    const auto r = train(head(9), tail(9), cfg);
    REQUIRE(r.report.epochs.size() == 7);
    for (const auto& e : r.report.epochs) {
        CAPTURE(e.epoch);
        const bool pi = e.epoch % cfg.pi_period == 0;
        CHECK(e.train_pi.has_value() == pi);
        CHECK(e.pi_weight == (pi ? cfg.eta / std::sqrt(static_cast<double>(e.epoch)) : 0.0));
        CHECK(std::isfinite(e.train_ce));
        CHECK(e.val_accuracy >= 0.0);
        CHECK(e.val_accuracy <= 1.0);
    }
    CHECK(r.report.best_epoch >= 1);
    CHECK(r.report.parameter_count > 0);

    const auto csv = report_to_csv(r.report);
    CHECK(csv.rfind("epoch,train_ce,train_pi,pi_weight,val_ce,val_accuracy,val_auc\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 8);
}

TEST_CASE("training is deterministic") {
    const auto cfg = small_config();
    const auto a = train(head(9), tail(9), cfg);
    const auto b = train(head(9), tail(9), cfg);
    CHECK(report_to_json(a.report).dump() == report_to_json(b.report).dump());
    CHECK(nn::checkpoint_to_json(a.checkpoint).dump() == nn::checkpoint_to_json(b.checkpoint).dump());
}

TEST_CASE("zero eta is plain HGNN training") {
    auto cfg = small_config();
    cfg.eta = 0.0;
    const auto a = train(head(9), tail(9), cfg);
    cfg.pi_period = 1;
    cfg.pi_mode = PiMode::hard;
    const auto b = train(head(9), tail(9), cfg);
    for (const auto& e : a.report.epochs) {
        CHECK_FALSE(e.train_pi.has_value());
        CHECK(e.pi_weight == 0.0);
    }
    CHECK(same_params(a.checkpoint, b.checkpoint));

    // A positive eta changes the trajectory once a PI epoch is reached.
    cfg.eta = 0.5;
    const auto c = train(head(9), tail(9), cfg);
    CHECK_FALSE(same_params(a.checkpoint, c.checkpoint));
}

TEST_CASE("prediction returns one probability per candidate") {
    auto cfg = small_config();
    cfg.epochs = 2;
    const auto r = train(head(9), {}, cfg);
    CHECK(r.report.best_epoch == 2);
    std::vector<HeteroGraph> graphs;
    for (const auto& s : tail(9)) graphs.push_back(s.graph);
    const auto probs = predict(r.checkpoint, graphs);
    REQUIRE(probs.size() == 3);
    for (const auto& p : probs) {
        CHECK(p.size() == 8);
        for (double v : p) CHECK((v >= 0.0 && v <= 1.0));
    }
}
