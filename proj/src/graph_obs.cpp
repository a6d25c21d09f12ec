#include "gridrl/graph_obs.hpp"

#include <fstream>
#include <stdexcept>

namespace gridrl {

namespace {

/// Bus an endpoint effectively occupies: ends of disconnected lines sit on
/// the virtual disconnected bus no matter what their stored assignment says.
Bus effective_bus(const SimState& state, int endpoint) {
    const Grid& g = *state.grid;
    if (g.endpoint_is_line(endpoint) && !state.topology.is_connected(g.endpoint_line(endpoint)))
        return Bus::kDisconnected;
    return state.topology.endpoint_bus[endpoint];
}

} // namespace

Eigen::RowVectorXd element_feature(const SimState& state, int endpoint) {
    const Grid& g = *state.grid;
    Eigen::RowVectorXd f = Eigen::RowVectorXd::Zero(kElementWidth);
    const double total_load = state.injections.total_load();

    if (g.endpoint_is_gen(endpoint)) {
        const int gen = g.endpoint_gen(endpoint);
        const double p = state.solution.solvable ? state.solution.gen_p_actual[gen]
                                                 : state.injections.gen_p[gen];
        f(0) = p / g.generator(gen).p_max;
        f(1) = total_load > 0.0 ? p / total_load : 0.0;
    } else if (g.endpoint_is_load(endpoint)) {
        const int load = g.endpoint_load(endpoint);
        const double p = state.injections.load_p[load];
        f(kDGen + 0) = total_load > 0.0 ? p / total_load : 0.0;
        f(kDGen + 1) = 1.0;
    } else {
        const int line = g.endpoint_line(endpoint);
        if (state.topology.is_connected(line)) {
            const double flow = state.solution.line_flow[line];
            // Signed per-end: positive when power leaves this end's bus.
            const double sign = g.endpoint_line_end(endpoint) == LineEnd::kOrigin ? 1.0 : -1.0;
            f(kDGen + kDLoad + 0) = sign * flow / g.line(line).thermal_limit;
            f(kDGen + kDLoad + 1) = state.solution.load_ratio[line];
            f(kDGen + kDLoad + 2) = 1.0;  // status
        }
        // Disconnected ends keep flow, rho and status at zero.
    }
    return f;
}

Eigen::RowVectorXd bus_embedding(const SimState& state, int substation, Bus bus) {
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(kElementWidth);
    for (int e : state.grid->substation_endpoints(substation))
        if (effective_bus(state, e) == bus) sum += element_feature(state, e);
    return sum;
}

Eigen::RowVectorXd substation_embedding(const SimState& state, int substation) {
    Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(3 * kElementWidth);
    out.segment(0, kElementWidth) = bus_embedding(state, substation, Bus::kBus1);
    out.segment(kElementWidth, kElementWidth) = bus_embedding(state, substation, Bus::kBus2);
    out.segment(2 * kElementWidth, kElementWidth) =
        bus_embedding(state, substation, Bus::kDisconnected);
    return out;
}

Eigen::MatrixXd line_adjacency(const Grid& grid) {
    const int L = grid.num_lines();
    Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(L, L);
    for (int sub = 0; sub < grid.num_substations(); ++sub) {
        const auto& lines = grid.substation_lines(sub);
        for (size_t i = 0; i < lines.size(); ++i)
            for (size_t j = i + 1; j < lines.size(); ++j) {
                adj(lines[i], lines[j]) = 1.0;
                adj(lines[j], lines[i]) = 1.0;
            }
    }
    return adj;
}

LineGraph build_line_graph(const SimState& state) {
    const Grid& g = *state.grid;
    const int L = g.num_lines();

    // Substation embeddings are shared by every incident line.
    std::vector<Eigen::RowVectorXd> sub_embed(g.num_substations());
    for (int s = 0; s < g.num_substations(); ++s) sub_embed[s] = substation_embedding(state, s);

    LineGraph graph;
    graph.node_features.resize(L, kNodeWidth);
    for (int l = 0; l < L; ++l) {
        graph.node_features.row(l).segment(0, 3 * kElementWidth) = sub_embed[g.line(l).origin];
        graph.node_features.row(l).segment(3 * kElementWidth, 3 * kElementWidth) =
            sub_embed[g.line(l).extremity];
    }
    graph.adjacency = line_adjacency(g);
    return graph;
}

void write_line_graph_csv(const LineGraph& graph, const std::string& edges_path,
                          const std::string& features_path) {
    std::ofstream edges(edges_path);
    if (!edges) throw std::runtime_error("cannot write " + edges_path);
    edges << "src,dst\n";
    for (int i = 0; i < graph.adjacency.rows(); ++i)
        for (int j = i + 1; j < graph.adjacency.cols(); ++j)
            if (graph.adjacency(i, j) != 0.0) edges << i << "," << j << "\n";

    std::ofstream feats(features_path);
    if (!feats) throw std::runtime_error("cannot write " + features_path);
    feats << "line";
    for (int c = 0; c < graph.node_features.cols(); ++c) feats << ",f" << c;
    feats << "\n";
    feats.precision(17);
    for (int r = 0; r < graph.node_features.rows(); ++r) {
        feats << r;
        for (int c = 0; c < graph.node_features.cols(); ++c)
            feats << "," << graph.node_features(r, c);
        feats << "\n";
    }
}

} // namespace gridrl
