#pragma once

// Heterogeneous message-passing network over HeteroGraph, its Adam
// optimizer and the parameter checkpoint format.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gicnet/autodiff.hpp"
#include "gicnet/hetero_graph.hpp"

namespace gicnet::nn {

struct HgnnConfig {
    int hidden = 128;
    int layers = 4;
    int heads = 4;
    bool attention = true;
    int mlp_layers = 4;  // linear layers in the readout, the last one emits the logit
    int mlp_hidden = 128;
    std::uint64_t seed = 0;
};

[[nodiscard]] nlohmann::json config_to_json(const HgnnConfig& c);
[[nodiscard]] HgnnConfig config_from_json(const nlohmann::json& j);

// Node update per layer, for every relation r and both traversal directions:
//   H_i <- H_i + relu( sum_r sum_{j->i} a_ji (H_j Wa_r + E_ji Wb_r) )
// with a_ji = 1, or a per-head softmax over the incoming edges of i scored by
// (H_i Wq_r) . message. Edge update for relations with features:
//   E_ab <- E_ab + relu( (S_a + S_b) Wea_r + (H_a + H_b) Web_r )
// where S_v sums the relation's edge embeddings incident to v. The readout
// MLP sees [H_v, mean incident gmd_branch embedding] of each masked node.
class HgnnModel {
  public:
    explicit HgnnModel(const HgnnConfig& config);

    [[nodiscard]] const HgnnConfig& config() const { return config_; }
    [[nodiscard]] std::vector<Parameter>& parameters() { return params_; }
    [[nodiscard]] const std::vector<Parameter>& parameters() const { return params_; }
    [[nodiscard]] std::size_t parameter_count() const;
    [[nodiscard]] Parameter& parameter(const std::string& name);

    // Logits (|mask| x 1) of a normalized graph, recorded on `tape`.
    // Throws NonFiniteError on NaN or infinite activations.
    [[nodiscard]] Var forward(Tape& tape, const HeteroGraph& graph);

    // Forward without gradients; one probability per masked node.
    [[nodiscard]] std::vector<double> predict(const HeteroGraph& graph);

    void zero_grad();

  private:
    Parameter& add_parameter(const std::string& name, Eigen::Index rows, Eigen::Index cols, double bound);

    HgnnConfig config_;
    std::vector<Parameter> params_;
    std::map<std::string, std::size_t> index_;
};

// Adam with decoupled weight decay: theta -= lr * wd * theta, then the
// bias-corrected Adam step.
struct AdamState {
    int t = 0;
    std::vector<Mat> m;
    std::vector<Mat> v;
};

struct AdamOptions {
    double lr = 1e-3;
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Uses each parameter's grad. Throws DimensionMismatch when the state does
// not match the parameters.
void adam_step(std::span<Parameter> params, AdamState& state, const AdamOptions& options);

// Model weights plus everything needed to reuse them on new graphs.
struct Checkpoint {
    HgnnConfig config;
    NormStats norm;
    std::vector<Parameter> params;
    nlohmann::json extra = nlohmann::json::object();
};

[[nodiscard]] nlohmann::json checkpoint_to_json(const Checkpoint& c);
// Throws SchemaError when the stored schema hash differs from schema_hash().
[[nodiscard]] Checkpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
[[nodiscard]] Checkpoint load_checkpoint(const std::filesystem::path& path);

// Rebuilds a model from a checkpoint's config and weights.
[[nodiscard]] HgnnModel model_from_checkpoint(const Checkpoint& c);

}  // namespace gicnet::nn
