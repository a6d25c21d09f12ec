#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridrl/control.hpp"
#include "gridrl/demos.hpp"

using namespace gridrl;

namespace {

/// Generator at substation 0, load at substation 1, two parallel lines.
Grid pair_grid(double limit0, double limit1) {
    return Grid::from_parts("pair", 2, {{0, 0, 1, 1.0, limit0}, {1, 0, 1, 1.0, limit1}},
                            {{0, 0, 10.0}}, {{0, 1}}, 0);
}

Chronic flat_chronic(const Grid& g, int T, double load_total, double first_row_scale = 0.6) {
    Chronic c;
    c.id = "flat";
    c.gen_p = Eigen::MatrixXd::Zero(T, g.num_generators());
    c.load_p = Eigen::MatrixXd::Zero(T, g.num_loads());
    for (int t = 0; t < T; ++t) {
        const double scale = t == 0 ? first_row_scale : 1.0;
        c.load_p(t, 0) = load_total * scale;
        c.gen_p(t, 0) = load_total * scale;
    }
    return c;
}

/// State with line 1 cut and the remaining line overloaded at `rho`.
SimState one_line_down_state(const Grid& g, double rho) {
    SimState base = reset(g, flat_chronic(g, 4, 0.1));
    StateSnapshot snap = to_snapshot(base);
    snap.topology.line_connected[1] = 0;
    snap.topology.endpoint_bus[g.line_endpoint(1, LineEnd::kOrigin)] = Bus::kDisconnected;
    snap.topology.endpoint_bus[g.line_endpoint(1, LineEnd::kExtremity)] = Bus::kDisconnected;
    const double load = rho * g.line(0).thermal_limit;
    snap.injections.gen_p[0] = load;
    snap.injections.load_p[0] = load;
    return from_snapshot(g, snap);
}

/// DuelingNet rigged so Q = input - mean(input) (identity trunk, unit
/// advantage head, zero value head). Input must stay non-negative.
DuelingNet rigged_net(int width) {
    Rng rng = Rng::fork(900, "control/rig");
    DuelingNet net(width, width, width, rng);
    auto params = net.params();
    for (Tensor* p : params) {
        if (p->value.rows() == p->value.cols() && p->value.rows() > 1)
            p->value = Eigen::MatrixXd::Identity(p->value.rows(), p->value.cols());
        else
            p->value.setZero();
    }
    params[6]->value = Eigen::MatrixXd::Identity(width, width);  // advantage W
    return net;
}

} // namespace

TEST_CASE("agent local features report only the line's own state") {
    const Grid g = pair_grid(0.5, 2.0);
    const Chronic c = flat_chronic(g, 8, 0.9, 1.0);
    SimState s = reset(g, c);
    // Equal reactances split 0.9 evenly: 0.45 per line.

    Eigen::RowVectorXd f0 = agent_local_features(s, 0);
    REQUIRE(f0.size() == kAgentLocalWidth);
    CHECK(f0(0) == doctest::Approx(0.9));   // rho = 0.45 / 0.5
    CHECK(f0(1) == doctest::Approx(0.9));   // signed flow / limit, origin positive
    CHECK(f0(2) == doctest::Approx(1.0));   // connected
    CHECK(f0.tail(6).cwiseAbs().maxCoeff() == doctest::Approx(0.0));

    Eigen::RowVectorXd f1 = agent_local_features(s, 1);
    CHECK(f1(0) == doctest::Approx(0.225));  // 0.45 / 2.0
    CHECK(f1(1) == doctest::Approx(0.225));

    SUBCASE("cooldowns and bus bits appear normalized") {
        StepOutcome moved =
            step(s, Action::set_endpoint(0, LineEnd::kExtremity, Bus::kBus2));
        // Substation 1 locked for the next steps: 3 set, then one decrement.
        Eigen::RowVectorXd f = agent_local_features(moved.next, 0);
        CHECK(f(6) == doctest::Approx(2.0 / 3.0));  // extremity sub cooldown
        CHECK(f(5) == doctest::Approx(0.0));
        CHECK(f(8) == doctest::Approx(1.0));  // extremity now on bus 2
        CHECK(f(7) == doctest::Approx(0.0));
    }

    SUBCASE("a disconnected line zeroes flow-derived entries") {
        SimState down = one_line_down_state(g, 0.5);
        Eigen::RowVectorXd f = agent_local_features(down, 1);
        CHECK(f(0) == doctest::Approx(0.0));
        CHECK(f(1) == doctest::Approx(0.0));
        CHECK(f(2) == doctest::Approx(0.0));
        CHECK(f(7) == doctest::Approx(0.0));
        CHECK(f(8) == doctest::Approx(0.0));
    }

    SUBCASE("line out of range throws") {
        CHECK_THROWS_AS(agent_local_features(s, 2), std::invalid_argument);
        CHECK_THROWS_AS(agent_local_features(s, -1), std::invalid_argument);
    }
}

TEST_CASE("manager observation layout: limits, ratios, topology bits") {
    const Grid g = pair_grid(0.5, 2.0);
    // Width: 2 lines * 2 + 2 * (4 line ends + 1 gen + 1 load) = 16.
    CHECK(manager_observation_width(g) == 16);

    const Chronic c = flat_chronic(g, 8, 0.9, 1.0);
    SimState s = reset(g, c);
    Eigen::RowVectorXd obs = manager_observation(s);
    REQUIRE(obs.size() == 16);
    CHECK(obs(0) == doctest::Approx(0.25));  // 0.5 / 2.0
    CHECK(obs(1) == doctest::Approx(1.0));
    CHECK(obs(2) == doctest::Approx(0.9));   // rho line 0
    CHECK(obs(3) == doctest::Approx(0.225)); // rho line 1
    CHECK(obs.tail(12).cwiseAbs().maxCoeff() == doctest::Approx(0.0));  // all-BUS1 start

    SUBCASE("bus-2 assignment sets exactly one bit") {
        StateSnapshot snap = to_snapshot(s);
        snap.topology.endpoint_bus[g.gen_endpoint(0)] = Bus::kBus2;
        snap.topology.endpoint_bus[g.line_endpoint(0, LineEnd::kOrigin)] = Bus::kBus2;
        SimState moved = from_snapshot(g, snap);
        Eigen::RowVectorXd o = manager_observation(moved);
        const int base = 2 * g.num_lines();
        CHECK(o(base + 2 * g.gen_endpoint(0)) == doctest::Approx(1.0));
        CHECK(o(base + 2 * g.line_endpoint(0, LineEnd::kOrigin)) == doctest::Approx(1.0));
        // No disconnected flags anywhere.
        for (int e = 0; e < g.num_endpoints(); ++e)
            CHECK(o(base + 2 * e + 1) == doctest::Approx(0.0));
    }

    SUBCASE("a disconnected line flags both its endpoints and zeroes its ratio") {
        SimState down = one_line_down_state(g, 0.5);
        Eigen::RowVectorXd o = manager_observation(down);
        const int base = 2 * g.num_lines();
        CHECK(o(3) == doctest::Approx(0.0));  // line 1 ratio gone
        CHECK(o(2) == doctest::Approx(0.5));  // line 0 carries everything
        CHECK(o(base + 2 * g.line_endpoint(1, LineEnd::kOrigin) + 1) == doctest::Approx(1.0));
        CHECK(o(base + 2 * g.line_endpoint(1, LineEnd::kExtremity) + 1) == doctest::Approx(1.0));
        CHECK(o(base + 2 * g.line_endpoint(1, LineEnd::kOrigin)) == doctest::Approx(0.0));
    }
}

TEST_CASE("danger gate uses a closed boundary") {
    const Grid g = pair_grid(0.5, 2.0);
    SimState calm = reset(g, flat_chronic(g, 4, 0.3, 1.0));
    CHECK_FALSE(is_danger(calm, 0.95));

    SimState hot = reset(g, flat_chronic(g, 4, 0.96, 1.0));
    CHECK(hot.max_ratio() == doctest::Approx(0.96));
    CHECK(is_danger(hot, 0.95));

    SimState exact = reset(g, flat_chronic(g, 4, 0.95, 1.0));
    CHECK(is_danger(exact, 0.95));  // at the threshold counts as danger
}

TEST_CASE("policy system builds the full network census deterministically") {
    const Grid g = pair_grid(0.5, 2.0);
    NetConfig net_config;
    net_config.embedding_width = 8;
    net_config.agent_hidden = 16;
    net_config.manager_hidden = 16;

    PolicySystem sys(g, net_config, 42);
    CHECK(sys.num_networks() == 2 * 2 + 4);
    CHECK(sys.agents.size() == 2);
    CHECK(sys.agent_input_width() == 8 + kAgentLocalWidth);
    CHECK(sys.manager_main.actions() == 2);
    CHECK(sys.manager_main.in() == manager_observation_width(g));
    CHECK(sys.agents[0].main.actions() == kActionsPerLine);

    SUBCASE("target networks start as exact copies") {
        auto m = sys.gnn_main.params();
        auto t = sys.gnn_target.params();
        for (std::size_t i = 0; i < m.size(); ++i)
            CHECK((m[i]->value - t[i]->value).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("same seed, same parameters; different seed differs") {
        PolicySystem again(g, net_config, 42);
        PolicySystem other(g, net_config, 43);
        auto a = sys.all_params();
        auto b = again.all_params();
        auto c = other.all_params();
        REQUIRE(a.size() == b.size());
        double same = 0.0, diff = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            same += (a[i]->value - b[i]->value).cwiseAbs().sum();
            diff += (a[i]->value - c[i]->value).cwiseAbs().sum();
        }
        CHECK(same == 0.0);
        CHECK(diff > 0.0);
    }

    SUBCASE("embeddings: gnn path vs ablation zeros") {
        SimState s = reset(g, flat_chronic(g, 4, 0.3, 1.0));
        Eigen::MatrixXd emb = sys.embed(s, true);
        CHECK(emb.rows() == 2);
        CHECK(emb.cols() == 8);
        Eigen::MatrixXd zeros = sys.embed(s, false);
        CHECK(zeros.cwiseAbs().maxCoeff() == 0.0);
        CHECK(zeros.rows() == 2);
    }
}

TEST_CASE("manager selection is epsilon-greedy with lowest-index ties") {
    DuelingNet net = rigged_net(3);
    Rng rng = Rng::fork(7, "control/select");

    Eigen::RowVectorXd obs(3);
    obs << 0.1, 0.9, 0.3;
    CHECK(select_agent(net, obs, 0.0, rng) == 1);

    Eigen::RowVectorXd tied(3);
    tied << 0.5, 0.5, 0.1;
    CHECK(select_agent(net, tied, 0.0, rng) == 0);

    SUBCASE("full exploration is uniform") {
        std::map<int, int> counts;
        const int draws = 6000;
        for (int i = 0; i < draws; ++i) ++counts[select_agent(net, obs, 1.0, rng)];
        for (int a = 0; a < 3; ++a) {
            CHECK(counts[a] > draws / 3 - 300);
            CHECK(counts[a] < draws / 3 + 300);
        }
    }
}

TEST_CASE("agent action selection respects legality and the greedy filter") {
    const Grid g = pair_grid(0.5, 2.0);
    Rng rng = Rng::fork(8, "control/agent-act");
    DuelingNet net = rigged_net(kActionsPerLine);

    SUBCASE("filter off: argmax over legal actions only") {
        SimState s = reset(g, flat_chronic(g, 4, 0.3, 1.0));
        // Q favors index 1, but a connected line's slots are {0, 2, 4}
        // (1 and 3 are no-effect moves). Next best is index 3, also illegal;
        // the legal runner-up is index 4.
        Eigen::RowVectorXd input(kActionsPerLine);
        input << 0.0, 3.0, 1.0, 2.5, 2.0;
        CHECK(agent_act(net, s, 0, input, 0.0, rng, false) == 4);
    }

    SUBCASE("filter discards candidates that blackout, keeping noop") {
        // Line 1 is down; every busbar move on line 0 strands the load or
        // the generator -> the filter leaves only NOOP.
        SimState down = one_line_down_state(g, 1.05);
        Eigen::RowVectorXd input(kActionsPerLine);
        input << 0.0, 1.0, 5.0, 1.0, 5.0;  // Q begs for the blackout moves
        CHECK(agent_act(net, down, 0, input, 0.0, rng, true) == 0);
        // Filter off would have taken index 2.
        CHECK(agent_act(net, down, 0, input, 0.0, rng, false) == 2);
    }

    SUBCASE("a candidate that lowers max rho survives and wins") {
        // Reconnecting line 1 on bus 1 / bus 1 halves the overload.
        SimState down = one_line_down_state(g, 1.05);
        REQUIRE(down.max_ratio() == doctest::Approx(1.05));
        Eigen::RowVectorXd input(kActionsPerLine);
        input << 0.0, 4.0, 1.0, 1.0, 1.0;
        const int choice = agent_act(net, down, 1, input, 0.0, rng, true);
        CHECK(choice == 1);
        StepOutcome after = simulate(down, action_from_index(down.topology, 1, choice));
        CHECK(after.next.max_ratio() < 0.95);
    }

    SUBCASE("exploration draws only from the surviving set") {
        SimState down = one_line_down_state(g, 1.05);
        std::map<int, int> counts;
        for (int i = 0; i < 400; ++i)
            ++counts[agent_act(net, down, 0, Eigen::RowVectorXd::Zero(kActionsPerLine), 1.0,
                               rng, true)];
        CHECK(counts[0] == 400);  // only survivor
    }
}

TEST_CASE("full action flow gates on danger") {
    const Grid g = pair_grid(0.5, 2.0);
    NetConfig net_config;
    net_config.embedding_width = 8;
    net_config.agent_hidden = 16;
    net_config.manager_hidden = 16;
    PolicySystem sys(g, net_config, 42);
    ActorConfig actor;

    SUBCASE("quiescent state short-circuits to noop") {
        SimState calm = reset(g, flat_chronic(g, 4, 0.3, 1.0));
        Rng rng = Rng::fork(9, "control/act");
        ActDecision d = act(sys, calm, 0.0, 0.0, rng, actor);
        CHECK(d.action.kind == Action::Kind::kNoop);
        CHECK(d.line == -1);
        CHECK_FALSE(d.danger);
    }

    SUBCASE("danger state consults manager and agent, deterministically") {
        SimState hot = reset(g, flat_chronic(g, 4, 0.96, 1.0));
        Rng rng_a = Rng::fork(9, "control/act");
        ActDecision a = act(sys, hot, 0.0, 0.0, rng_a, actor);
        CHECK(a.danger);
        CHECK(a.line >= 0);
        CHECK(a.line < 2);
        CHECK(is_action_legal(g, hot.topology, a.action));

        Rng rng_b = Rng::fork(9, "control/act");
        ActDecision b = act(sys, hot, 0.0, 0.0, rng_b, actor);
        CHECK(a.line == b.line);
        CHECK(a.action_index == b.action_index);
        CHECK(a.action == b.action);
    }

    SUBCASE("finished episodes are rejected") {
        SimState calm = reset(g, flat_chronic(g, 4, 0.3, 1.0));
        calm.done = true;
        Rng rng = Rng::fork(9, "control/act");
        CHECK_THROWS_AS(act(sys, calm, 0.0, 0.0, rng, actor), std::logic_error);
    }
}

TEST_CASE("expert lookahead picks the best simulated rescue") {
    const Grid g = pair_grid(0.5, 2.0);

    SUBCASE("no candidate clears the margin: noop returned") {
        // Triangle: every busbar move dead-ends a line and re-routes the
        // whole load over the remaining path, *raising* max rho 0.04 -> 0.06.
        Grid tri = Grid::from_parts(
            "triangle", 3,
            {{0, 0, 1, 1.0, 5.0}, {1, 0, 2, 1.0, 5.0}, {2, 2, 1, 1.0, 5.0}},
            {{0, 0, 10.0}}, {{0, 1}}, 0);
        SimState calm = reset(tri, flat_chronic(tri, 4, 0.3, 1.0));
        REQUIRE(calm.max_ratio() == doctest::Approx(0.04));
        ExpertDecision d = expert_action(calm);
        CHECK(d.line == -1);
        CHECK(d.action.kind == Action::Kind::kNoop);
        CHECK(d.best_score == doctest::Approx(d.noop_score));
        CHECK(d.noop_score == doctest::Approx(0.04));
        CHECK(d.candidates == 6);
    }

    SUBCASE("overload with a dead parallel line: reconnect on bus1/bus1") {
        SimState down = one_line_down_state(g, 1.05);
        ExpertDecision d = expert_action(down);
        CHECK(d.line == 1);
        CHECK(d.action_index == 1);  // reconnect origin bus1, extremity bus1
        CHECK(d.action.kind == Action::Kind::kReconnectLine);
        CHECK(d.noop_score == doctest::Approx(1.05));
        CHECK(d.best_score == doctest::Approx(0.525));
        // Candidates: line 0 offers {2,4}, line 1 offers {1,2,3,4}.
        CHECK(d.candidates == 6);
        CHECK(count_expert_candidates(down) == 6);
    }

    SUBCASE("overloaded bottleneck rescued by a busbar split") {
        // Both lines up, load 0.96: line 0 (limit 0.5) runs at 0.96 while
        // line 1 (limit 2.0) idles. Forcing line 0's flow to zero by moving
        // one of its ends to the empty bus re-routes everything through the
        // big line: max rho 0.96 -> 0.48.
        SimState hot = reset(g, flat_chronic(g, 4, 0.96, 1.0));
        ExpertDecision d = expert_action(hot);
        CHECK(d.line == 0);
        CHECK(d.action_index == 2);  // origin -> bus 2 (ties break to low index)
        CHECK(d.best_score == doctest::Approx(0.48));
        StepOutcome after = simulate(hot, d.action);
        CHECK(after.next.max_ratio() == doctest::Approx(0.48));
    }

    SUBCASE("identical scores break to the lower line id") {
        // Four parallel lines, two of them down and identical: reconnecting
        // either yields the same network, so the expert must pick line 2.
        Grid quad = Grid::from_parts(
            "quad", 2,
            {{0, 0, 1, 1.0, 0.5}, {1, 0, 1, 1.0, 0.5}, {2, 0, 1, 1.0, 2.0},
             {3, 0, 1, 1.0, 2.0}},
            {{0, 0, 10.0}}, {{0, 1}}, 0);
        SimState base = reset(quad, flat_chronic(quad, 4, 0.2));
        StateSnapshot snap = to_snapshot(base);
        for (int line : {2, 3}) {
            snap.topology.line_connected[line] = 0;
            snap.topology.endpoint_bus[quad.line_endpoint(line, LineEnd::kOrigin)] =
                Bus::kDisconnected;
            snap.topology.endpoint_bus[quad.line_endpoint(line, LineEnd::kExtremity)] =
                Bus::kDisconnected;
        }
        snap.injections.gen_p[0] = 1.2;
        snap.injections.load_p[0] = 1.2;
        SimState state = from_snapshot(quad, snap);
        REQUIRE(state.max_ratio() == doctest::Approx(1.2));

        ExpertDecision d = expert_action(state);
        CHECK(d.line == 2);
        CHECK(d.action_index == 1);
        CHECK(d.best_score == doctest::Approx(0.8));
    }

    SUBCASE("expert is deterministic") {
        SimState down = one_line_down_state(g, 1.05);
        ExpertDecision a = expert_action(down);
        ExpertDecision b = expert_action(down);
        CHECK(a.line == b.line);
        CHECK(a.action_index == b.action_index);
        CHECK(a.best_score == b.best_score);
    }
}

namespace {

/// Load ramps from 0.4 to `peak` at step `ramp_at` and stays there.
Chronic ramp_chronic(const Grid& g, int T, double peak, int ramp_at) {
    Chronic c;
    c.id = "ramp";
    c.gen_p = Eigen::MatrixXd::Zero(T, g.num_generators());
    c.load_p = Eigen::MatrixXd::Zero(T, g.num_loads());
    for (int t = 0; t < T; ++t) {
        const double load = t < ramp_at ? 0.4 : peak;
        c.load_p(t, 0) = load;
        c.gen_p(t, 0) = load;
    }
    return c;
}

} // namespace

TEST_CASE("demonstration collection records expert rescues with returns") {
    const Grid g = pair_grid(0.5, 2.0);
    Hyperparams hp;

    SUBCASE("calm chronic yields an empty demo set") {
        std::vector<Chronic> chronics{flat_chronic(g, 16, 0.3, 1.0)};
        DemoStats stats;
        DemoSet demos = collect_demonstrations(g, chronics, {}, hp, 1, 0.02, &stats);
        CHECK(demos.agent.empty());
        CHECK(demos.manager.empty());
        CHECK(stats.episodes == 1);
        CHECK(stats.danger_steps == 0);
        CHECK(stats.expert_actions == 0);
        CHECK(stats.steps == 15);  // horizon-1 steps survived
    }

    SUBCASE("ramped overload produces matched agent and manager demos") {
        const int T = 20, ramp_at = 5;
        std::vector<Chronic> chronics{ramp_chronic(g, T, 0.96, ramp_at)};
        DemoStats stats;
        DemoSet demos = collect_demonstrations(g, chronics, {}, hp, 1, 0.02, &stats);

        REQUIRE(demos.agent.size() == 1);
        REQUIRE(demos.manager.size() == 1);
        CHECK(stats.expert_actions == 1);
        CHECK(stats.danger_steps >= 1);

        const AgentTransition& tr = demos.agent[0];
        CHECK(tr.line == 0);
        CHECK(tr.action_index == 2);
        // The demo's action was legal in its recorded state.
        SimState replayed = from_snapshot(g, tr.s0);
        const Action demo_action =
            action_from_index(replayed.topology, tr.line, tr.action_index);
        CHECK(is_action_legal(g, replayed.topology, demo_action));
        CHECK(is_danger(replayed, hp.danger_ratio));
        // One-step reward matches a direct simulation of the same action.
        StepOutcome redo = step(from_snapshot(g, tr.s0, {}, &chronics[0]), demo_action);
        CHECK(tr.reward1 == doctest::Approx(redo.reward));
        CHECK(tr.s1.t == tr.s0.t + 1);
        CHECK_FALSE(tr.done1);
        CHECK(tr.n_actual == hp.n_step);
        CHECK(tr.sn.t == tr.s0.t + hp.n_step);
        // n-step return telescopes the recorded base rewards.
        CHECK(tr.reward_n >= tr.reward1);

        const ManagerTransition& mt = demos.manager[0];
        CHECK(mt.line == 0);
        CHECK(mt.s0.t == tr.s0.t);
        // The rescue holds: no further danger, so the semi-MDP transition
        // runs to the terminal state.
        CHECK(mt.done);
        CHECK(mt.dt == (T - 1) - mt.s0.t);
        CHECK(mt.s1.t == T - 1);
        CHECK(mt.reward > 1.0);  // many healthy steps of discounted reward
    }

    SUBCASE("budget caps the episodes consumed") {
        std::vector<Chronic> chronics{ramp_chronic(g, 20, 0.96, 5),
                                      ramp_chronic(g, 20, 0.96, 7)};
        DemoStats stats;
        DemoSet demos = collect_demonstrations(g, chronics, {}, hp, 1, 0.02, &stats);
        CHECK(stats.episodes == 1);
        CHECK(demos.agent.size() == 1);
        DemoSet both = collect_demonstrations(g, chronics, {}, hp, 2, 0.02, &stats);
        CHECK(stats.episodes == 2);
        CHECK(both.agent.size() == 2);
    }

    SUBCASE("guards") {
        std::vector<Chronic> chronics{flat_chronic(g, 8, 0.3, 1.0)};
        CHECK_THROWS_AS(collect_demonstrations(g, chronics, {}, hp, 0), std::invalid_argument);
        std::vector<Chronic> none;
        CHECK_THROWS_AS(collect_demonstrations(g, none, {}, hp, 1), std::invalid_argument);
    }
}

TEST_CASE("demo sets and snapshots round-trip through jsonl") {
    const Grid g = pair_grid(0.5, 2.0);
    Hyperparams hp;
    std::vector<Chronic> chronics{ramp_chronic(g, 20, 0.96, 5)};
    DemoSet demos = collect_demonstrations(g, chronics, {}, hp, 1);
    REQUIRE(demos.agent.size() == 1);

    const std::string path = "demo_roundtrip.jsonl";
    save_demos(path, demos);
    DemoSet loaded = load_demos(path, g);
    REQUIRE(loaded.agent.size() == 1);
    REQUIRE(loaded.manager.size() == 1);

    const AgentTransition& a = demos.agent[0];
    const AgentTransition& b = loaded.agent[0];
    CHECK(a.line == b.line);
    CHECK(a.action_index == b.action_index);
    CHECK(a.reward1 == b.reward1);  // exact double round-trip
    CHECK(a.reward_n == b.reward_n);
    CHECK(a.n_actual == b.n_actual);
    CHECK(a.done1 == b.done1);
    CHECK(a.done_n == b.done_n);
    CHECK(a.s0.topology == b.s0.topology);
    CHECK(a.s0.injections.gen_p == b.s0.injections.gen_p);
    CHECK(a.s0.injections.load_p == b.s0.injections.load_p);
    CHECK(a.sn.t == b.sn.t);
    const ManagerTransition& ma = demos.manager[0];
    const ManagerTransition& mb = loaded.manager[0];
    CHECK(ma.reward == mb.reward);
    CHECK(ma.dt == mb.dt);
    CHECK(ma.s1.topology == mb.s1.topology);
    std::remove(path.c_str());

    SUBCASE("snapshot files round-trip") {
        std::vector<StateSnapshot> snaps{demos.agent[0].s0, demos.agent[0].s1};
        const std::string spath = "snaps_roundtrip.jsonl";
        save_snapshots(spath, snaps);
        std::vector<StateSnapshot> back = load_snapshots(spath, g);
        REQUIRE(back.size() == 2);
        CHECK(back[0].topology == snaps[0].topology);
        CHECK(back[0].injections.gen_p == snaps[0].injections.gen_p);
        CHECK(back[1].t == snaps[1].t);
        std::remove(spath.c_str());
    }

    SUBCASE("malformed files are rejected with location info") {
        const std::string bad = "demo_bad.jsonl";
        {
            std::ofstream out(bad);
            out << "{\"v\":1,\"level\":\"agent\"\n";  // truncated json
        }
        CHECK_THROWS_WITH_AS(load_demos(bad, g), doctest::Contains("demo_bad.jsonl:1"),
                             std::runtime_error);
        {
            std::ofstream out(bad);
            out << "{\"v\":99,\"level\":\"agent\"}\n";
        }
        CHECK_THROWS_WITH_AS(load_demos(bad, g), doctest::Contains("schema"),
                             std::runtime_error);
        std::remove(bad.c_str());
    }
}
