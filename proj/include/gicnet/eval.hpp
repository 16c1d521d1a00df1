#pragma once

// Cross-validation, E-field sweeps and cross-network evaluation.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gicnet/dataset.hpp"
#include "gicnet/metrics.hpp"
#include "gicnet/trainer.hpp"

namespace gicnet {

enum class ModelKind { hgnn, pihgnn };

[[nodiscard]] std::string to_string(ModelKind k);
[[nodiscard]] ModelKind model_kind_from_string(const std::string& s);

struct Confusion {
    int tp = 0;
    int fp = 0;
    int tn = 0;
    int fn = 0;
};

// Scores of one model on a set of labelled graphs.
struct Scores {
    double accuracy = 0.0;              // pooled over every masked node
    std::optional<double> roc_auc;      // pooled; nullopt with a single class
    double sample_accuracy = 0.0;       // mean of per-graph accuracies
    std::optional<double> sample_auc;   // mean over graphs where AUC is defined
    Confusion confusion;
    std::size_t samples = 0;
    double seconds = 0.0;               // inference wall time
};

// Predicts every graph with the checkpoint (its own normalization) and
// thresholds at `threshold`. Throws SchemaError on unlabelled graphs.
[[nodiscard]] Scores score(const nn::Checkpoint& checkpoint, std::span<const HeteroGraph> graphs,
                           double threshold = 0.5);

[[nodiscard]] nlohmann::json scores_to_json(const Scores& s);

struct FoldResult {
    int fold = 0;
    std::size_t train_samples = 0;
    std::size_t val_samples = 0;
    int best_epoch = 0;
    Scores test;
    double train_seconds = 0.0;
};

struct Timing {
    double train_sec_per_sample = 0.0;
    double test_sec_per_sample = 0.0;
    double solver_sec_per_sample = 0.0;  // label solver time of the evaluated samples
};

struct EvalReport {
    ModelKind kind = ModelKind::pihgnn;
    int k = 0;
    std::vector<FoldResult> folds;
    MeanStd accuracy;
    MeanStd roc_auc;  // over folds where AUC is defined
    MeanStd sample_accuracy;
    std::vector<int> auc_undefined_folds;
    Confusion confusion;  // summed over folds
    Timing timing;
};

// Deterministic fields only; timing goes through timing_to_json.
[[nodiscard]] nlohmann::json eval_report_to_json(const EvalReport& r);
[[nodiscard]] nlohmann::json timing_to_json(const Timing& t);

struct CvOptions {
    int k = 10;
    std::uint64_t seed = 0;        // fold assignment
    double val_fraction = 0.1;     // carved from each training fold for checkpoint selection
};

// k-fold cross-validation over every sample of the dataset. hgnn forces
// eta = 0; pihgnn uses config.eta. Both kinds see identical folds, carve-outs
// and model seeds for equal options and config.seed.
[[nodiscard]] EvalReport run_cv(const Dataset& dataset, const TrainConfig& config, ModelKind kind,
                                const CvOptions& options = {});

struct SweepPoint {
    double magnitude = 0.0;
    double objective_heuristic = 0.0;  // shed cost of the heuristic placement
    double objective_ml = 0.0;         // shed cost of the thresholded prediction
    std::vector<int> blocked_heuristic;
    std::vector<int> blocked_ml;
};

// Nominal-load scenarios at each magnitude along `direction_deg`. The ML
// placement keeps predicted candidates (probability >= threshold) in order of
// decreasing probability while they fit the budget.
[[nodiscard]] std::vector<SweepPoint> efield_sweep(const NetworkModel& network, const nn::Checkpoint& checkpoint,
                                                   std::span<const double> magnitudes, double direction_deg,
                                                   double budget, double threshold = 0.5,
                                                   const PlacementOptions& options = {});

[[nodiscard]] std::string sweep_to_csv(std::span<const SweepPoint> points);

// Budget-feasible blocker set from candidate probabilities (candidate order).
[[nodiscard]] std::vector<int> select_blockers(const NetworkModel& network, std::span<const double> probabilities,
                                               double budget, double threshold = 0.5);

// Scores a checkpoint trained on one network against the given samples of
// another dataset. Throws SchemaError when the dataset schema differs.
[[nodiscard]] Scores cross_network_eval(const nn::Checkpoint& checkpoint, const Dataset& dataset,
                                        std::span<const std::size_t> indices, double threshold = 0.5);

}  // namespace gicnet
