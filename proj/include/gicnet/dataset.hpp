#pragma once

// Scenario generation, labelling, splits and on-disk datasets.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gicnet/hetero_graph.hpp"
#include "gicnet/placement.hpp"
#include "gicnet/trainer.hpp"

namespace gicnet {

struct GenerateOptions {
    double scale_lo = 0.8;
    double scale_hi = 1.2;
    bool independent_pq = false;  // draw qd scales separately from pd scales
};

// directions x magnitudes x samples_per_cell scenarios, ids 0.., cells in
// (direction, magnitude) order. Scenario k draws from its own seed derived
// from `seed` and k. Throws InvalidArgument when samples_per_cell < 1.
[[nodiscard]] std::vector<GmdScenario> generate(const NetworkModel& network, std::span<const double> directions,
                                                std::span<const double> magnitudes, int samples_per_cell,
                                                std::uint64_t seed, const GenerateOptions& options = {});

enum class Split { train, val, test };

[[nodiscard]] std::string to_string(Split s);

struct SplitSpec {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

struct SampleRecord {
    int scenario_id = 0;
    std::string file;  // relative to the dataset directory
    Split split = Split::train;
    std::vector<int> blocked;
    double cost = 0.0;
    double shed_cost = 0.0;
    int evaluations = 0;
};

struct DatasetManifest {
    int version = 1;
    std::string network;
    std::uint64_t schema_hash = 0;
    std::uint64_t seed = 0;
    double budget = 0.0;
    std::vector<BlockerCost> costs;
    std::string method;  // placement method used for the labels
    SplitSpec split;
    std::vector<SampleRecord> samples;
    std::string norm_file;  // normalization stats of the train split, empty without train samples

    [[nodiscard]] std::vector<std::size_t> indices(Split s) const;
};

[[nodiscard]] nlohmann::json manifest_to_json(const DatasetManifest& m);
[[nodiscard]] DatasetManifest manifest_from_json(const nlohmann::json& j);

struct Dataset {
    NetworkModel network;
    DatasetManifest manifest;
    std::vector<GmdScenario> scenarios;
    std::vector<HeteroGraph> graphs;       // raw features, labelled
    std::vector<double> solver_seconds;    // label wall time per sample

    // Training samples (pointing at `network`) for the given indices.
    [[nodiscard]] std::vector<TrainSample> samples(std::span<const std::size_t> indices) const;
};

// Split sizes: round(n * train), round(n * val), remainder to test.
// Throws InvalidArgument when the fractions are negative or do not sum to 1.
[[nodiscard]] std::vector<Split> assign_splits(std::size_t n, const SplitSpec& split, std::uint64_t seed);

// Labels every scenario with label_scenarios, builds the graphs and, when
// `out_dir` is given, writes network.json, samples/, norm.json, timing.json
// and manifest.json (the manifest last, via rename).
[[nodiscard]] Dataset build_dataset(const NetworkModel& network, std::span<const GmdScenario> scenarios, double budget,
                                    const SplitSpec& split, std::uint64_t seed,
                                    const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                                    const PlacementOptions& options = {});

[[nodiscard]] Dataset load_dataset(const std::filesystem::path& dir);

struct Fold {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

// Seeded partition of 0..n-1 into k folds whose sizes differ by at most 1.
// Throws InvalidArgument unless 2 <= k <= n.
[[nodiscard]] std::vector<Fold> kfold(std::size_t n, int k, std::uint64_t seed);

// Writes `text` to a sibling temp file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& text);

[[nodiscard]] nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace gicnet
