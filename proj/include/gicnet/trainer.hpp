#pragma once

// Cross-entropy and physics-informed losses and the training loop.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gicnet/hgnn.hpp"
#include "gicnet/scenario.hpp"

namespace gicnet {

enum class PiMode { soft, hard };

[[nodiscard]] std::string to_string(PiMode m);
[[nodiscard]] PiMode pi_mode_from_string(const std::string& s);

struct TrainConfig {
    double eta = 1.0;
    int pi_period = 10;
    double lr = 1e-3;
    double weight_decay = 1e-4;
    int epochs = 200;
    int batch_size = 32;
    std::uint64_t seed = 0;
    double threshold = 0.5;
    PiMode pi_mode = PiMode::soft;
    nn::HgnnConfig model;
};

[[nodiscard]] nlohmann::json train_config_to_json(const TrainConfig& c);
// Throws InvalidArgument on p < 1, epochs < 1, batch < 1 or threshold outside (0, 1).
[[nodiscard]] TrainConfig train_config_from_json(const nlohmann::json& j);
void validate(const TrainConfig& c);

// Mean binary cross-entropy of logits over labels. Throws InvalidArgument on
// an empty mask.
[[nodiscard]] double ce_loss(std::span<const double> logits, std::span<const double> labels);

// Per-feature divisor applied to the physics features before the distance.
using PiScale = std::array<double, 3>;

struct PiLoss {
    double value = 0.0;
    std::vector<double> grad;  // d value / d z_pred, candidate order
};

// Squared distance between standardized physics features of z_pred and
// z_label. Soft mode evaluates z_pred as given; hard mode thresholds it and
// returns the gradient at the thresholded point (straight-through).
[[nodiscard]] PiLoss pi_loss_grad(const PhysicsEvaluator& physics, std::span<const double> z_pred,
                                  std::span<const double> z_label, const PiScale& scale = {1.0, 1.0, 1.0},
                                  PiMode mode = PiMode::soft, double threshold = 0.5);

[[nodiscard]] double pi_loss(const NetworkModel& network, const GmdScenario& scenario, std::span<const double> z_pred,
                             std::span<const double> z_label, const PiScale& scale = {1.0, 1.0, 1.0});

// One labelled sample: raw (unnormalized) graph plus the instance it came from.
struct TrainSample {
    const NetworkModel* network = nullptr;
    GmdScenario scenario;
    HeteroGraph graph;
};

struct EpochRecord {
    int epoch = 0;
    double train_ce = 0.0;
    std::optional<double> train_pi;  // set only on PI epochs
    double pi_weight = 0.0;          // eta / sqrt(epoch) on PI epochs, else 0
    double val_ce = 0.0;
    double val_accuracy = 0.0;
    std::optional<double> val_auc;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    std::optional<double> best_val_auc;
    double best_val_accuracy = 0.0;
    std::size_t parameter_count = 0;
    std::vector<double> epoch_seconds;  // wall time, kept apart from the deterministic fields
};

[[nodiscard]] std::string report_to_csv(const TrainReport& r);
// Deterministic summary; wall times are excluded.
[[nodiscard]] nlohmann::json report_to_json(const TrainReport& r);

struct TrainResult {
    nn::Checkpoint checkpoint;
    TrainReport report;
};

// Normalization is fitted on `train` only. Returns the checkpoint of the
// epoch with the best validation ROC-AUC (accuracy when AUC is undefined;
// the last epoch when `val` is empty).
[[nodiscard]] TrainResult train(std::span<const TrainSample> train, std::span<const TrainSample> val,
                                const TrainConfig& config);

// Probabilities per masked node of each graph, using the checkpoint's
// normalization (clamped to [0, 1]).
[[nodiscard]] std::vector<std::vector<double>> predict(const nn::Checkpoint& checkpoint,
                                                       std::span<const HeteroGraph> graphs);

}  // namespace gicnet
