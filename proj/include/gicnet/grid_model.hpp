#pragma once

// Coupled ac/dc network data model and the JSON case format.

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace gicnet {

enum class BusType { pq, pv, slack, isolated };

enum class GmdBusKind { substation_ground, bus_node };

enum class GmdBranchKind { line, winding, grounding_lead };

enum class TransformerConfig { gwye_delta, gwye_gwye, autotransformer, three_winding, line };

struct AcBus {
    int id = 0;
    BusType bus_type = BusType::pq;
    double vm = 1.0;  // p.u.
    double va = 0.0;  // rad
    double vmin = 0.9;
    double vmax = 1.1;
    double base_kv = 1.0;
    double gs = 0.0;  // p.u. shunt conductance at 1 p.u. voltage
    double bs = 0.0;
    double lat = 0.0;
    double lon = 0.0;
    int substation = 0;  // 0 = unassigned
};

struct Load {
    int id = 0;
    int bus = 0;
    double pd = 0.0;  // MW
    double qd = 0.0;  // Mvar
    double shed_cost = 1.0;  // $/MW
};

struct Generator {
    int id = 0;
    int bus = 0;
    double pg = 0.0;  // MW
    double qg = 0.0;  // Mvar
    double pmin = 0.0;
    double pmax = 0.0;
    double qmin = 0.0;
    double qmax = 0.0;
    double vg = 1.0;  // p.u. setpoint
    bool status = true;
    double mbase = 100.0;
    std::array<double, 3> cost{0.0, 0.0, 0.0};  // c2, c1, c0
    double startup = 0.0;
    double shutdown = 0.0;
    double ramp_agc = 0.0;
    double ramp_10 = 0.0;
    double ramp_30 = 0.0;
    double ramp_q = 0.0;
    double apf = 0.0;
};

struct AcBranch {
    int id = 0;
    int from_bus = 0;
    int to_bus = 0;
    double r = 0.0;  // p.u.
    double x = 0.0;
    double b_sh = 0.0;
    double rate = 0.0;  // MVA, 0 = unlimited
    double tap = 1.0;   // 0 is read as 1
    double shift = 0.0;  // rad
    double angmin = -1.0471975511965976;
    double angmax = 1.0471975511965976;
    bool status = true;
};

struct GmdBus {
    int id = 0;
    GmdBusKind kind = GmdBusKind::bus_node;
    double g_gnd = 0.0;  // S to remote earth
    std::optional<int> parent_ac_bus;
    double lat = 0.0;
    double lon = 0.0;
    int substation = 0;
};

struct GmdBranch {
    int id = 0;
    int from_node = 0;
    int to_node = 0;
    double a = 0.0;  // S
    double len_km = 0.0;
    double disp_east_km = 0.0;
    double disp_north_km = 0.0;
    GmdBranchKind kind = GmdBranchKind::line;
};

// One record per ac branch; lines carry config == line.
struct TransformerCoupling {
    int ac_branch = 0;
    TransformerConfig config = TransformerConfig::line;
    std::optional<int> hi_node;  // GmdBranch ids of the windings
    std::optional<int> lo_node;
    std::optional<int> series_node;
    std::optional<int> common_node;
    std::optional<int> tertiary_node;
    double alpha = 1.0;
    double beta = 1.0;
    double K = 0.0;
    double S_base = 100.0;     // MVA
    double V_base_hi = 1.0;    // kV
    double V_base_lo = 1.0;    // kV
    std::optional<int> neutral_gmd_bus;
    bool is_blocker_candidate = false;

    [[nodiscard]] bool is_transformer() const { return config != TransformerConfig::line; }
};

struct BlockerCost {
    int candidate = 0;  // GmdBus id
    double cost = 1.0;
};

struct BlockerEconomics {
    std::vector<BlockerCost> costs;  // sorted by candidate id after load
    double budget = 0.0;
};

struct NetworkModel {
    std::string name;
    double base_mva = 100.0;
    std::vector<AcBus> buses;
    std::vector<Load> loads;
    std::vector<Generator> gens;
    std::vector<AcBranch> branches;
    std::vector<GmdBus> gmd_buses;
    std::vector<GmdBranch> gmd_branches;
    std::vector<TransformerCoupling> couplings;
    BlockerEconomics blockers;

    // id -> position lookups; rebuilt by index().
    std::unordered_map<int, int> bus_pos;
    std::unordered_map<int, int> branch_pos;
    std::unordered_map<int, int> gmd_bus_pos;
    std::unordered_map<int, int> gmd_branch_pos;

    void index();

    [[nodiscard]] const AcBus& bus(int id) const;
    [[nodiscard]] const AcBranch& branch(int id) const;
    [[nodiscard]] const GmdBus& gmd_bus(int id) const;
    [[nodiscard]] const GmdBranch& gmd_branch(int id) const;

    // Candidate GmdBus ids in ascending order.
    [[nodiscard]] std::vector<int> candidates() const;
    [[nodiscard]] double blocker_cost(int candidate) const;

    // Ac bus each gmd bus attaches to: parent_ac_bus for bus nodes, the
    // lowest-id ac bus of the same substation for substation grounds.
    [[nodiscard]] std::vector<std::pair<int, int>> gmd_attachments() const;
};

struct Violation {
    std::string entity;  // "AcBus", "GmdBranch", ...
    std::optional<int> id;
    std::string rule;
    std::string detail;
};

[[nodiscard]] std::vector<Violation> validate(const NetworkModel& network);

// Throws ValidationError / DanglingReferenceError on the first violation.
void ensure_valid(const NetworkModel& network);

[[nodiscard]] NetworkModel network_from_json(const nlohmann::json& doc);
[[nodiscard]] nlohmann::json network_to_json(const NetworkModel& network);

// Parses, indexes and validates a case file.
[[nodiscard]] NetworkModel load_network(const std::filesystem::path& path);
void save_network(const NetworkModel& network, const std::filesystem::path& path);

// Four-bus, two-substation fixture: two grounded-wye/grounded-wye
// transformers joined by one long high-voltage line.
[[nodiscard]] NetworkModel bundled_example();

[[nodiscard]] std::string to_string(BusType t);
[[nodiscard]] std::string to_string(TransformerConfig c);
[[nodiscard]] std::string to_string(GmdBusKind k);
[[nodiscard]] std::string to_string(GmdBranchKind k);

}  // namespace gicnet
