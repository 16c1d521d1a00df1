#pragma once

// Typed graph view of a coupled ac/dc network under one GMD scenario.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "gicnet/grid_model.hpp"
#include "gicnet/scenario.hpp"

namespace gicnet {

enum class NodeType { bus = 0, gen = 1, gmd_bus = 2 };
constexpr std::size_t kNodeTypes = 3;

enum class Relation { branch = 0, branch_gmd = 1, gmd_branch = 2, bus_conn_gen = 3, gmd_bus_attach_bus = 4 };
constexpr std::size_t kRelations = 5;

constexpr std::array<int, kNodeTypes> kNodeWidth{15, 20, 3};
constexpr std::array<int, kRelations> kEdgeWidth{11, 18, 4, 0, 0};

// Endpoint types (a, b) of every relation.
constexpr std::array<std::pair<NodeType, NodeType>, kRelations> kRelationEnds{{
    {NodeType::bus, NodeType::bus},
    {NodeType::bus, NodeType::bus},
    {NodeType::gmd_bus, NodeType::gmd_bus},
    {NodeType::gen, NodeType::bus},
    {NodeType::gmd_bus, NodeType::bus},
}};

[[nodiscard]] std::string to_string(NodeType t);
[[nodiscard]] std::string to_string(Relation r);

struct NodeSet {
    std::vector<int> ids;
    Eigen::MatrixXd x;  // rows aligned with ids
};

// One row per undirected entity; a[k] and b[k] index the endpoint node sets.
// Message passing traverses every entry in both directions.
struct RelationSet {
    std::vector<int> a;
    std::vector<int> b;
    Eigen::MatrixXd x;  // rows aligned with a/b, kEdgeWidth columns
};

struct HeteroGraph {
    std::string network;
    int scenario_id = 0;
    double magnitude = 0.0;
    double direction_deg = 0.0;
    std::array<NodeSet, kNodeTypes> nodes;
    std::array<RelationSet, kRelations> relations;
    std::vector<int> mask;  // gmd_bus rows of the blocker candidates, ascending id
    std::optional<std::vector<double>> labels;  // aligned with mask

    [[nodiscard]] const NodeSet& node_set(NodeType t) const { return nodes[static_cast<std::size_t>(t)]; }
    [[nodiscard]] const RelationSet& relation(Relation r) const { return relations[static_cast<std::size_t>(r)]; }
};

// Throws SchemaError when labels do not match the candidate count.
[[nodiscard]] HeteroGraph build_graph(const NetworkModel& network, const GmdScenario& scenario,
                                      std::optional<std::span<const double>> labels = std::nullopt);

// Throws SchemaError when any feature matrix deviates from the declared widths.
void check_schema(const HeteroGraph& graph);

// Stable 64-bit hash of the feature schema; stored with models and datasets.
[[nodiscard]] std::uint64_t schema_hash();

// Column-wise min/max per node type and relation.
struct NormStats {
    std::array<Eigen::VectorXd, kNodeTypes> node_min, node_max;
    std::array<Eigen::VectorXd, kRelations> edge_min, edge_max;
};

[[nodiscard]] NormStats fit_normalization(std::span<const HeteroGraph> graphs);

// (x - min) / (max - min) clamped to [0, 1]; constant columns map to 0.
[[nodiscard]] HeteroGraph normalize(const HeteroGraph& graph, const NormStats& stats);

// Disjoint union with node and mask indices offset per graph; labels are
// kept only when every graph has them.
[[nodiscard]] HeteroGraph disjoint_union(std::span<const HeteroGraph* const> graphs);

[[nodiscard]] nlohmann::json graph_to_json(const HeteroGraph& graph);
[[nodiscard]] HeteroGraph graph_from_json(const nlohmann::json& j);
[[nodiscard]] nlohmann::json norm_stats_to_json(const NormStats& stats);
[[nodiscard]] NormStats norm_stats_from_json(const nlohmann::json& j);

}  // namespace gicnet
