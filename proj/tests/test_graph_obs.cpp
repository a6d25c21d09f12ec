#include <doctest.h>

#include <cmath>

#include "gridrl/graph_obs.hpp"
#include "gridrl/rng.hpp"

using namespace gridrl;

namespace {

Grid triangle() {
    return Grid::from_parts("triangle", 3,
                            {{0, 0, 1, 1.0, 1.0}, {1, 0, 2, 1.0, 1.0}, {2, 1, 2, 1.0, 1.0}},
                            {{0, 0, 10.0}}, {{0, 1}, {1, 2}}, 0);
}

Chronic flat(const Grid& g, double total_load) {
    Chronic c;
    c.id = "flat";
    c.gen_p = Eigen::MatrixXd::Zero(4, g.num_generators());
    c.load_p =
        Eigen::MatrixXd::Constant(4, g.num_loads(), total_load / g.num_loads());
    c.gen_p.col(0).setConstant(total_load);
    return c;
}

} // namespace

TEST_CASE("element features fill only their type slots") {
    const Grid g = triangle();
    const SimState s = reset(g, flat(g, 1.0));
    for (int e = 0; e < g.num_endpoints(); ++e) {
        const Eigen::RowVectorXd f = element_feature(s, e);
        REQUIRE(f.size() == kElementWidth);
        const double gen_mass = f.segment(0, kDGen).cwiseAbs().sum();
        const double load_mass = f.segment(kDGen, kDLoad).cwiseAbs().sum();
        const double line_mass = f.segment(kDGen + kDLoad, kDLineEnd).cwiseAbs().sum();
        if (g.endpoint_is_gen(e)) CHECK(load_mass + line_mass == 0.0);
        if (g.endpoint_is_load(e)) CHECK(gen_mass + line_mass == 0.0);
        if (g.endpoint_is_line(e)) CHECK(gen_mass + load_mass == 0.0);
    }
}

TEST_CASE("feature values match their definitions") {
    const Grid g = triangle();
    const SimState s = reset(g, flat(g, 1.0));

    // Generator: p = 1.0 (all load), p_max = 10.
    const Eigen::RowVectorXd gen = element_feature(s, g.gen_endpoint(0));
    CHECK(gen(0) == doctest::Approx(0.1));
    CHECK(gen(1) == doctest::Approx(1.0));

    // Load 0 draws half the total.
    const Eigen::RowVectorXd load = element_feature(s, g.load_endpoint(0));
    CHECK(load(kDGen + 0) == doctest::Approx(0.5));
    CHECK(load(kDGen + 1) == 1.0);

    // Line 0 origin: signed flow out of substation 0; extremity negated.
    const double flow = s.solution.line_flow[0];
    const Eigen::RowVectorXd o = element_feature(s, g.line_endpoint(0, LineEnd::kOrigin));
    const Eigen::RowVectorXd x = element_feature(s, g.line_endpoint(0, LineEnd::kExtremity));
    const int base = kDGen + kDLoad;
    CHECK(o(base + 0) == doctest::Approx(flow / 1.0));
    CHECK(x(base + 0) == doctest::Approx(-flow / 1.0));
    CHECK(o(base + 1) == doctest::Approx(std::abs(flow)));
    CHECK(o(base + 2) == 1.0);

    // Flow at exactly the limit reads rho = 1 at both ends (reset would
    // reject such a start, so restore the state from a snapshot).
    Grid tight = Grid::from_parts(
        "tight", 2, {{0, 0, 1, 1.0, 0.5}}, {{0, 0, 10.0}}, {{0, 1}}, 0);
    StateSnapshot snap;
    snap.topology = TopologyState::initial(tight);
    snap.injections.gen_p = {0.5};
    snap.injections.load_p = {0.5};
    const SimState ts = from_snapshot(tight, snap);
    REQUIRE(ts.solution.solvable);
    const Eigen::RowVectorXd tf = element_feature(ts, tight.line_endpoint(0, LineEnd::kOrigin));
    CHECK(tf(base + 1) == doctest::Approx(1.0));

    // Disconnected line end: flow, rho and status all zero.
    SimState cut = s;
    cut.topology.line_connected[2] = 0;
    cut.solution = dc_solve(g, cut.topology, cut.injections, cut.config.solver_options());
    const Eigen::RowVectorXd dead = element_feature(cut, g.line_endpoint(2, LineEnd::kOrigin));
    CHECK(dead.cwiseAbs().sum() == 0.0);
}

TEST_CASE("bus embedding equals the brute-force element sum") {
    const Grid g = triangle();
    SimState s = reset(g, flat(g, 1.0));
    // Shuffle some endpoints onto bus 2 for a non-trivial layout.
    s.topology.endpoint_bus[g.load_endpoint(0)] = Bus::kBus2;
    s.topology.endpoint_bus[g.line_endpoint(0, LineEnd::kExtremity)] = Bus::kBus2;
    s.solution = dc_solve(g, s.topology, s.injections, s.config.solver_options());
    REQUIRE(s.solution.solvable);

    for (int sub = 0; sub < g.num_substations(); ++sub) {
        for (Bus bus : {Bus::kBus1, Bus::kBus2}) {
            Eigen::RowVectorXd expect = Eigen::RowVectorXd::Zero(kElementWidth);
            for (int e : g.substation_endpoints(sub)) {
                if (s.topology.endpoint_bus[e] != bus) continue;
                if (g.endpoint_is_line(e) && !s.topology.is_connected(g.endpoint_line(e)))
                    continue;
                expect += element_feature(s, e);
            }
            CHECK((bus_embedding(s, sub, bus) - expect).cwiseAbs().maxCoeff() < 1e-15);
        }
    }
}

TEST_CASE("substation embedding concatenates bus1|bus2|disconnected") {
    const Grid g = triangle();
    const SimState s = reset(g, flat(g, 1.0));

    // Default topology: everything in segment 1.
    const Eigen::RowVectorXd sub1 = substation_embedding(s, 1);
    REQUIRE(sub1.size() == 3 * kElementWidth);
    CHECK(sub1.segment(kElementWidth, 2 * kElementWidth).cwiseAbs().sum() == 0.0);
    CHECK(sub1.segment(0, kElementWidth).cwiseAbs().sum() > 0.0);

    // Moving the load to bus 2 migrates its contribution; with element
    // features held fixed, the segment totals are conserved (the embedding
    // is a pure layout function).
    SimState moved = s;
    moved.topology.endpoint_bus[g.load_endpoint(0)] = Bus::kBus2;
    const Eigen::RowVectorXd after = substation_embedding(moved, 1);
    const Eigen::RowVectorXd before_total =
        sub1.segment(0, kElementWidth) + sub1.segment(kElementWidth, kElementWidth);
    const Eigen::RowVectorXd after_total =
        after.segment(0, kElementWidth) + after.segment(kElementWidth, kElementWidth);
    CHECK((before_total - after_total).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(after.segment(kDGen, 1)(0) != sub1.segment(kDGen, 1)(0));  // load share moved out

    // A disconnected line end contributes nothing to any segment (its
    // features are zeroed), so segment 3 stays zero.
    SimState cut = s;
    cut.topology.line_connected[0] = 0;
    cut.solution = dc_solve(g, cut.topology, cut.injections, cut.config.solver_options());
    const Eigen::RowVectorXd sub0 = substation_embedding(cut, 0);
    CHECK(sub0.segment(2 * kElementWidth, kElementWidth).cwiseAbs().sum() == 0.0);
}

TEST_CASE("line graph shape, symmetry and determinism") {
    const Grid g = triangle();
    const SimState s = reset(g, flat(g, 1.0));
    const LineGraph graph = build_line_graph(s);

    CHECK(graph.node_features.rows() == 3);
    CHECK(graph.node_features.cols() == kNodeWidth);
    CHECK(graph.adjacency.rows() == 3);
    // The triangle's line graph is complete.
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(graph.adjacency(i, j) == (i == j ? 0.0 : 1.0));

    // Node rows are the concatenated terminal substation embeddings.
    const Eigen::RowVectorXd expect0 =
        (Eigen::RowVectorXd(kNodeWidth) << substation_embedding(s, 0),
         substation_embedding(s, 1))
            .finished();
    CHECK((graph.node_features.row(0) - expect0).cwiseAbs().maxCoeff() < 1e-15);

    const LineGraph again = build_line_graph(s);
    CHECK((graph.node_features - again.node_features).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single-line grid yields one node and no edges") {
    Grid g = Grid::from_parts("single", 2, {{0, 0, 1, 1.0, 1.0}}, {{0, 0, 10.0}}, {{0, 1}}, 0);
    const SimState s = reset(g, flat(g, 0.5));
    const LineGraph graph = build_line_graph(s);
    CHECK(graph.node_features.rows() == 1);
    CHECK(graph.adjacency.cwiseAbs().sum() == 0.0);
}

TEST_CASE("adjacency matches the brute-force shared-substation oracle") {
    Rng rng = Rng::fork(11, "test/graph/adjacency");
    for (int trial = 0; trial < 100; ++trial) {
        const int S = 4 + rng.index(6);
        const int L = 3 + rng.index(28);
        std::vector<LineDef> lines;
        for (int l = 0; l < L; ++l) {
            int a = rng.index(S), b = rng.index(S);
            if (a == b) b = (b + 1) % S;
            lines.push_back({l, a, b, 1.0, 1.0});
        }
        const Grid g = Grid::from_parts("rand", S, lines, {{0, 0, 1.0}}, {{0, 1 % S}}, 0);
        const Eigen::MatrixXd adj = line_adjacency(g);

        for (int i = 0; i < L; ++i) {
            CHECK(adj(i, i) == 0.0);
            for (int j = 0; j < L; ++j) {
                const bool share = i != j && (lines[i].origin == lines[j].origin ||
                                              lines[i].origin == lines[j].extremity ||
                                              lines[i].extremity == lines[j].origin ||
                                              lines[i].extremity == lines[j].extremity);
                CHECK(adj(i, j) == (share ? 1.0 : 0.0));
                CHECK(adj(i, j) == adj(j, i));
            }
        }
    }
}

TEST_CASE("case14 line graph has 20 nodes and the frozen edge count") {
    const Grid g = Grid::load(std::string(GRIDRL_DATA_DIR) + "/case14.grid");
    CHECK(g.num_substations() == 14);
    CHECK(g.num_lines() == 20);
    CHECK(g.num_generators() == 6);
    CHECK(g.num_loads() == 11);

    const Eigen::MatrixXd adj = line_adjacency(g);
    CHECK(adj.rows() == 20);
    // Brute-force count over unordered pairs, frozen: 46 edges.
    int edges = 0;
    for (int i = 0; i < 20; ++i)
        for (int j = i + 1; j < 20; ++j)
            if (adj(i, j) != 0.0) ++edges;
    CHECK(edges == 46);
}

TEST_CASE("locality: a bus move only changes rows of incident lines") {
    const Grid g = triangle();
    const SimState s = reset(g, flat(g, 1.0));
    const LineGraph before = build_line_graph(s);

    // Substation 2 hosts lines 1 and 2; line 0 is not incident.
    SimState moved = s;
    moved.topology.endpoint_bus[g.load_endpoint(1)] = Bus::kBus2;
    moved.solution = dc_solve(g, moved.topology, moved.injections, moved.config.solver_options());
    // Keep electrical quantities identical: the load moved to bus 2 of its
    // substation, all elements still singly connected... flows may change;
    // compare only the feature-layout effect by rebuilding with the same
    // solution object.
    SimState frame = moved;
    frame.solution = s.solution;
    const LineGraph after = build_line_graph(frame);

    CHECK((before.node_features.row(0) - after.node_features.row(0)).cwiseAbs().maxCoeff() ==
          0.0);
    CHECK((before.node_features.row(1) - after.node_features.row(1)).cwiseAbs().maxCoeff() >
          0.0);
    CHECK((before.node_features.row(2) - after.node_features.row(2)).cwiseAbs().maxCoeff() >
          0.0);
}
