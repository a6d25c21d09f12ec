#pragma once

#include <Eigen/Core>
#include <string>

#include "gridrl/env.hpp"
#include "gridrl/grid.hpp"

namespace gridrl {

/// Element feature layout: [gen slots | load slots | line-end slots]; only
/// the slots of the element's own type are ever non-zero.
inline constexpr int kDGen = 2;
inline constexpr int kDLoad = 2;
inline constexpr int kDLineEnd = 3;
inline constexpr int kElementWidth = kDGen + kDLoad + kDLineEnd;  // d = 7
/// Line node feature: two substations x (bus1 | bus2 | disconnected) x d.
inline constexpr int kNodeWidth = 6 * kElementWidth;  // 42

/// Homogeneous line graph: one node per power line.
struct LineGraph {
    Eigen::MatrixXd node_features;  // L x 6d
    Eigen::MatrixXd adjacency;      // L x L, symmetric 0/1, zero diagonal
};

/// One-hot-like element encoding of endpoint `e` in a solved state:
/// generators fill (p/p_max, p/total_load), loads (p/total_load, 1),
/// line ends (signed flow/limit, rho, status). Ends of disconnected lines
/// have flow, rho and status all zero.
Eigen::RowVectorXd element_feature(const SimState& state, int endpoint);

/// Sum of the features of the elements on one (substation, bus).
Eigen::RowVectorXd bus_embedding(const SimState& state, int substation, Bus bus);

/// concat(bus1, bus2, disconnected-bus) embeddings, width 3d.
Eigen::RowVectorXd substation_embedding(const SimState& state, int substation);

/// Static line-graph adjacency: lines are neighbours iff they share a
/// substation in the grid definition (independent of bus assignments).
Eigen::MatrixXd line_adjacency(const Grid& grid);

/// Full observation graph for one solved state.
LineGraph build_line_graph(const SimState& state);

/// Write the graph as an edge list plus a node-feature table (CSV).
void write_line_graph_csv(const LineGraph& graph, const std::string& edges_path,
                          const std::string& features_path);

} // namespace gridrl
