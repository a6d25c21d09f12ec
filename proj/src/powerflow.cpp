#include "gridrl/powerflow.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gridrl {

ElectricalNodes electrical_nodes(const Grid& grid, const TopologyState& state) {
    ElectricalNodes nodes;
    nodes.node_of.assign(grid.num_substations(), {-1, -1});

    // Substation-major, bus-minor numbering.
    for (int sub = 0; sub < grid.num_substations(); ++sub) {
        for (int bus = 0; bus < 2; ++bus) {
            bool occupied = false;
            for (int e : grid.substation_endpoints(sub)) {
                if (state.endpoint_bus[e] != static_cast<Bus>(bus)) continue;
                if (grid.endpoint_is_line(e) && !state.is_connected(grid.endpoint_line(e)))
                    continue;
                occupied = true;
                break;
            }
            if (occupied) {
                nodes.node_of[sub][bus] = nodes.count++;
                nodes.key_of.emplace_back(sub, bus);
            }
        }
    }
    return nodes;
}

namespace {

std::vector<int> island_partition(const Grid& grid, const TopologyState& state,
                                  const ElectricalNodes& nodes, int& num_islands) {
    std::vector<std::vector<int>> adj(nodes.count);
    for (const auto& l : grid.lines()) {
        if (!state.is_connected(l.id)) continue;
        const int a = nodes.endpoint_node(grid, state, grid.line_endpoint(l.id, LineEnd::kOrigin));
        const int b =
            nodes.endpoint_node(grid, state, grid.line_endpoint(l.id, LineEnd::kExtremity));
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    std::vector<int> island(nodes.count, -1);
    num_islands = 0;
    std::vector<int> stack;
    for (int start = 0; start < nodes.count; ++start) {
        if (island[start] >= 0) continue;
        const int id = num_islands++;
        stack.push_back(start);
        island[start] = id;
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            for (int u : adj[v]) {
                if (island[u] < 0) {
                    island[u] = id;
                    stack.push_back(u);
                }
            }
        }
    }
    return island;
}

} // namespace

FlowSolution dc_solve(const Grid& grid, const TopologyState& state, const Injections& inj,
                      const SolverOptions& options) {
    if (static_cast<int>(inj.gen_p.size()) != grid.num_generators() ||
        static_cast<int>(inj.load_p.size()) != grid.num_loads())
        throw std::invalid_argument("injection vector shape does not match grid");

    const ElectricalNodes nodes = electrical_nodes(grid, state);

    FlowSolution sol;
    sol.solvable = true;
    sol.node_angle.assign(nodes.count, 0.0);
    sol.line_flow.assign(grid.num_lines(), 0.0);
    sol.load_ratio.assign(grid.num_lines(), 0.0);
    sol.gen_p_actual = inj.gen_p;
    sol.island_of_node = island_partition(grid, state, nodes, sol.num_islands);

    std::vector<double> net_injection(nodes.count, 0.0);
    for (const auto& g : grid.generators()) {
        const int n = nodes.endpoint_node(grid, state, grid.gen_endpoint(g.id));
        if (n >= 0) net_injection[n] += inj.gen_p[g.id];
    }
    for (const auto& d : grid.loads()) {
        const int n = nodes.endpoint_node(grid, state, grid.load_endpoint(d.id));
        if (n >= 0) net_injection[n] -= inj.load_p[d.id];
    }

    const int slack_node =
        nodes.endpoint_node(grid, state, grid.gen_endpoint(grid.slack_gen()));

    for (int island = 0; island < sol.num_islands; ++island) {
        std::vector<int> members;
        for (int n = 0; n < nodes.count; ++n)
            if (sol.island_of_node[n] == island) members.push_back(n);

        // Island census: pick the slack (global slack if present, else the
        // lowest-id generator) and tally load.
        int island_slack_gen = -1;
        double island_load = 0.0;
        double island_balance = 0.0;
        for (int n : members) island_balance += net_injection[n];
        for (const auto& g : grid.generators()) {
            const int n = nodes.endpoint_node(grid, state, grid.gen_endpoint(g.id));
            if (n < 0 || sol.island_of_node[n] != island) continue;
            if (island_slack_gen < 0) island_slack_gen = g.id;
        }
        if (slack_node >= 0 && sol.island_of_node[slack_node] == island)
            island_slack_gen = grid.slack_gen();
        for (const auto& d : grid.loads()) {
            const int n = nodes.endpoint_node(grid, state, grid.load_endpoint(d.id));
            if (n >= 0 && sol.island_of_node[n] == island) island_load += inj.load_p[d.id];
        }

        if (island_slack_gen < 0) {
            if (island_load > 0.0) sol.solvable = false;  // unserved load
            continue;  // degenerate island: zero flow, zero angles
        }

        // Absorb the imbalance at the island slack and verify the band.
        const double adjusted =
            inj.gen_p[island_slack_gen] - island_balance;
        const double p_max = grid.generator(island_slack_gen).p_max;
        const double tol = options.slack_tolerance * p_max;
        if (adjusted > p_max + tol || adjusted < -tol) {
            sol.solvable = false;
            continue;
        }
        sol.gen_p_actual[island_slack_gen] = adjusted;
        const int island_slack_node =
            nodes.endpoint_node(grid, state, grid.gen_endpoint(island_slack_gen));
        net_injection[island_slack_node] -= island_balance;

        // Reduced susceptance Laplacian without the slack row/column.
        std::vector<int> reduced_index(nodes.count, -1);
        std::vector<int> reduced_members;
        for (int n : members) {
            if (n == island_slack_node) continue;
            reduced_index[n] = static_cast<int>(reduced_members.size());
            reduced_members.push_back(n);
        }
        const int m = static_cast<int>(reduced_members.size());
        if (m == 0) continue;  // single-node island, angles stay 0

        Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m, m);
        Eigen::VectorXd p = Eigen::VectorXd::Zero(m);
        for (const auto& l : grid.lines()) {
            if (!state.is_connected(l.id)) continue;
            const int a =
                nodes.endpoint_node(grid, state, grid.line_endpoint(l.id, LineEnd::kOrigin));
            const int c =
                nodes.endpoint_node(grid, state, grid.line_endpoint(l.id, LineEnd::kExtremity));
            if (sol.island_of_node[a] != island) continue;
            const double y = 1.0 / l.reactance;
            const int ra = reduced_index[a];
            const int rc = reduced_index[c];
            if (ra >= 0) b(ra, ra) += y;
            if (rc >= 0) b(rc, rc) += y;
            if (ra >= 0 && rc >= 0) {
                b(ra, rc) -= y;
                b(rc, ra) -= y;
            }
        }
        for (int n : reduced_members) p(reduced_index[n]) = net_injection[n];

        Eigen::LDLT<Eigen::MatrixXd> ldlt(b);
        if (ldlt.info() != Eigen::Success) {
            sol.solvable = false;
            continue;
        }
        const Eigen::VectorXd theta = ldlt.solve(p);
        if ((b * theta - p).lpNorm<Eigen::Infinity>() > 1e-9) {
            sol.solvable = false;  // singular reduced system
            continue;
        }
        for (int n : reduced_members) sol.node_angle[n] = theta(reduced_index[n]);
    }

    if (!sol.solvable) return sol;

    for (const auto& l : grid.lines()) {
        if (!state.is_connected(l.id)) continue;
        const int a = nodes.endpoint_node(grid, state, grid.line_endpoint(l.id, LineEnd::kOrigin));
        const int c =
            nodes.endpoint_node(grid, state, grid.line_endpoint(l.id, LineEnd::kExtremity));
        sol.line_flow[l.id] = (sol.node_angle[a] - sol.node_angle[c]) / l.reactance;
        sol.load_ratio[l.id] = std::abs(sol.line_flow[l.id]) / l.thermal_limit;
    }
    return sol;
}

std::vector<double> load_ratios(const FlowSolution& solution) { return solution.load_ratio; }

} // namespace gridrl
