#pragma once

#include <vector>

#include "gridrl/grid.hpp"

namespace gridrl {

/// Generator and load set points for one time step, per-unit MW.
struct Injections {
    std::vector<double> gen_p;
    std::vector<double> load_p;
    int t = 0;

    double total_load() const {
        double s = 0.0;
        for (double p : load_p) s += p;
        return s;
    }
};

/// Electrical node mapping: each (substation, bus) pair holding at least one
/// connected element becomes a node is ordered substation-major, bus-minor.
struct ElectricalNodes {
    int count = 0;
    /// node_of[sub][bus] is the node index or -1.
    std::vector<std::array<int, 2>> node_of;
    /// node -> (substation, bus index 0/1)
    std::vector<std::pair<int, int>> key_of;

    int endpoint_node(const Grid& grid, const TopologyState& state, int endpoint) const {
        const Bus b = state.endpoint_bus[endpoint];
        if (b == Bus::kDisconnected) return -1;
        return node_of[grid.endpoint_substation(endpoint)][static_cast<int>(b)];
    }
};

ElectricalNodes electrical_nodes(const Grid& grid, const TopologyState& state);

struct SolverOptions {
    /// Slack absorption may deviate from the dispatched range by this
    /// fraction of the slack generator's p_max before the island is declared
    /// infeasible.
    double slack_tolerance = 0.2;
};

/// DC power-flow result. Disconnected lines carry zero flow and ratio.
struct FlowSolution {
    bool solvable = false;
    std::vector<double> node_angle;     // radians, slack node of each island at 0
    std::vector<double> line_flow;      // signed, origin -> extremity positive
    std::vector<double> load_ratio;     // |flow| / thermal limit
    std::vector<int> island_of_node;
    int num_islands = 0;
    std::vector<double> gen_p_actual;   // injections after per-island slack absorption

    double max_ratio() const {
        double m = 0.0;
        for (double r : load_ratio) m = std::max(m, r);
        return m;
    }
};

/// Solve B*theta = P per island over the topology-induced electrical graph.
/// Islands with load and no generator, slack absorption outside the
/// tolerated band, and singular systems all yield solvable = false.
FlowSolution dc_solve(const Grid& grid, const TopologyState& state, const Injections& inj,
                      const SolverOptions& options = {});

/// rho vector of a solved state (copy of solution.load_ratio).
std::vector<double> load_ratios(const FlowSolution& solution);

} // namespace gridrl
