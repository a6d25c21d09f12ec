#include "gridrl/control.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace gridrl {

Eigen::RowVectorXd agent_local_features(const SimState& state, int line) {
    const Grid& grid = *state.grid;
    if (line < 0 || line >= grid.num_lines())
        throw std::invalid_argument("agent_local_features: line out of range");
    const LineDef& def = grid.line(line);
    const TopologyState& topo = state.topology;
    const bool connected = topo.is_connected(line);

    double rho = 0.0;
    double signed_flow = 0.0;
    if (connected && state.solution.solvable) {
        rho = state.solution.load_ratio[line];
        signed_flow = state.solution.line_flow[line] / def.thermal_limit;
    }
    const double soft = static_cast<double>(state.config.soft_overflow_steps);
    const double cooldown = static_cast<double>(state.config.cooldown_steps);

    Eigen::RowVectorXd f(kAgentLocalWidth);
    f(0) = rho;
    f(1) = signed_flow;
    f(2) = connected ? 1.0 : 0.0;
    f(3) = topo.overflow_count[line] / soft;
    f(4) = topo.line_cooldown[line] / cooldown;
    f(5) = topo.sub_cooldown[def.origin] / cooldown;
    f(6) = topo.sub_cooldown[def.extremity] / cooldown;
    f(7) = connected && topo.line_end_bus(grid, line, LineEnd::kOrigin) == Bus::kBus2 ? 1.0 : 0.0;
    f(8) = connected && topo.line_end_bus(grid, line, LineEnd::kExtremity) == Bus::kBus2 ? 1.0
                                                                                         : 0.0;
    return f;
}

int manager_observation_width(const Grid& grid) {
    return 2 * grid.num_lines() + 2 * grid.num_endpoints();
}

Eigen::RowVectorXd manager_observation(const SimState& state) {
    const Grid& grid = *state.grid;
    const int l = grid.num_lines();
    Eigen::RowVectorXd obs = Eigen::RowVectorXd::Zero(manager_observation_width(grid));

    const double limit_scale = grid.max_thermal_limit();
    for (int i = 0; i < l; ++i) obs(i) = grid.line(i).thermal_limit / limit_scale;
    if (state.solution.solvable)
        for (int i = 0; i < l; ++i)
            obs(l + i) = state.topology.is_connected(i) ? state.solution.load_ratio[i] : 0.0;

    for (int e = 0; e < grid.num_endpoints(); ++e) {
        const bool disconnected =
            grid.endpoint_is_line(e) && !state.topology.is_connected(grid.endpoint_line(e));
        const bool on_bus2 = !disconnected && state.topology.endpoint_bus[e] == Bus::kBus2;
        obs(2 * l + 2 * e) = on_bus2 ? 1.0 : 0.0;
        obs(2 * l + 2 * e + 1) = disconnected ? 1.0 : 0.0;
    }
    return obs;
}

bool is_danger(const SimState& state, double danger_ratio) {
    return state.max_ratio() >= danger_ratio;
}

PolicySystem::PolicySystem(const Grid& grid_in, const NetConfig& net_config, std::uint64_t seed)
    : grid(&grid_in), config(net_config) {
    std::vector<int> gnn_widths{kNodeWidth};
    for (int i = 0; i < config.gnn_layers; ++i) gnn_widths.push_back(config.embedding_width);

    Rng gnn_rng = Rng::fork(seed, "net/gnn");
    gnn_main = Gnn(gnn_widths, gnn_rng);
    Rng gnn_target_rng = Rng::fork(seed, "net/gnn-target");
    gnn_target = Gnn(gnn_widths, gnn_target_rng);
    copy_params(gnn_main.params(), gnn_target.params());

    const int l = grid->num_lines();
    Rng manager_rng = Rng::fork(seed, "net/manager");
    manager_main = DuelingNet(manager_observation_width(*grid), config.manager_hidden, l,
                              manager_rng);
    Rng manager_target_rng = Rng::fork(seed, "net/manager-target");
    manager_target = DuelingNet(manager_observation_width(*grid), config.manager_hidden, l,
                                manager_target_rng);
    copy_params(manager_main.params(), manager_target.params());

    agents.reserve(l);
    for (int line = 0; line < l; ++line) {
        Rng agent_rng = Rng::fork(seed, "net/agent/" + std::to_string(line));
        LineAgent agent;
        agent.line = line;
        agent.main = DuelingNet(agent_input_width(), config.agent_hidden, kActionsPerLine,
                                agent_rng);
        Rng agent_target_rng = Rng::fork(seed, "net/agent-target/" + std::to_string(line));
        agent.target = DuelingNet(agent_input_width(), config.agent_hidden, kActionsPerLine,
                                  agent_target_rng);
        copy_params(agent.main.params(), agent.target.params());
        agents.push_back(std::move(agent));
    }

    norm_adjacency = row_normalize(line_adjacency(*grid));
}

std::vector<Tensor*> PolicySystem::all_params() {
    std::vector<Tensor*> out;
    auto append = [&out](std::vector<Tensor*> block) {
        out.insert(out.end(), block.begin(), block.end());
    };
    append(gnn_main.params());
    append(gnn_target.params());
    append(manager_main.params());
    append(manager_target.params());
    for (LineAgent& agent : agents) {
        append(agent.main.params());
        append(agent.target.params());
    }
    return out;
}

Eigen::MatrixXd PolicySystem::embed(const SimState& state, bool use_gnn) const {
    if (!use_gnn)
        return Eigen::MatrixXd::Zero(grid->num_lines(), config.embedding_width);
    const LineGraph graph = build_line_graph(state);
    return gnn_main.infer(graph.node_features, norm_adjacency);
}

int select_agent(const DuelingNet& manager, const Eigen::RowVectorXd& obs, double eps, Rng& rng) {
    const int n = manager.actions();
    if (eps > 0.0 && rng.uniform() < eps) return static_cast<int>(rng.index(n));
    const Eigen::MatrixXd q = manager.infer(obs);
    int best = 0;
    for (int i = 1; i < n; ++i)
        if (q(0, i) > q(0, best)) best = i;
    return best;
}

int agent_act(const DuelingNet& agent, const SimState& state, int line,
              const Eigen::RowVectorXd& input, double eps, Rng& rng, bool filter_on) {
    std::vector<int> candidates = legal_action_indices(*state.grid, state.topology, line);

    if (filter_on) {
        const StepOutcome noop = simulate(state, Action::noop());
        const double noop_ratio = noop.next.max_ratio();
        std::vector<int> survivors;
        for (int idx : candidates) {
            if (idx == 0) {
                survivors.push_back(idx);  // NOOP always survives its own filter
                continue;
            }
            const StepOutcome outcome =
                simulate(state, action_from_index(state.topology, line, idx));
            if (outcome.next.blackout) continue;
            if (outcome.next.max_ratio() > noop_ratio) continue;
            survivors.push_back(idx);
        }
        candidates = std::move(survivors);
    }
    if (candidates.empty()) throw std::logic_error("agent_act: no surviving candidate");

    if (eps > 0.0 && rng.uniform() < eps)
        return candidates[rng.index(candidates.size())];

    const Eigen::MatrixXd q = agent.infer(input);
    int best = candidates.front();
    for (int idx : candidates)
        if (q(0, idx) > q(0, best)) best = idx;
    return best;
}

ActDecision act(const PolicySystem& system, const SimState& state, double eps_manager,
                double eps_agent, Rng& rng, const ActorConfig& actor_config) {
    if (state.done) throw std::logic_error("act: episode already finished");

    ActDecision decision;
    if (!is_danger(state, actor_config.danger_ratio)) {
        decision.action = Action::noop();
        return decision;
    }
    decision.danger = true;

    const Eigen::RowVectorXd obs = manager_observation(state);
    decision.line = select_agent(system.manager_main, obs, eps_manager, rng);

    const Eigen::MatrixXd embeddings = system.embed(state, actor_config.use_gnn);
    Eigen::RowVectorXd input(system.agent_input_width());
    input << embeddings.row(decision.line), agent_local_features(state, decision.line);

    decision.action_index = agent_act(system.agents[decision.line].main, state, decision.line,
                                      input, eps_agent, rng, actor_config.filter_on);
    decision.action = action_from_index(state.topology, decision.line, decision.action_index);
    return decision;
}

ExpertDecision expert_action(const SimState& state, double improvement_margin) {
    if (state.done) throw std::logic_error("expert_action: episode already finished");
    const Grid& grid = *state.grid;

    ExpertDecision decision;
    decision.action = Action::noop();
    decision.noop_score = simulate(state, Action::noop()).next.max_ratio();
    decision.best_score = decision.noop_score;

    double best = std::numeric_limits<double>::infinity();
    int best_line = -1;
    int best_idx = 0;
    for (int line = 0; line < grid.num_lines(); ++line) {
        for (int idx : legal_action_indices(grid, state.topology, line)) {
            if (idx == 0) continue;
            ++decision.candidates;
            const StepOutcome outcome =
                simulate(state, action_from_index(state.topology, line, idx));
            const double score = outcome.next.blackout
                                     ? std::numeric_limits<double>::infinity()
                                     : outcome.next.max_ratio();
            // Strict lexicographic (score, line, index) keeps the expert
            // deterministic.
            if (score < best) {
                best = score;
                best_line = line;
                best_idx = idx;
            }
        }
    }

    if (best_line >= 0 && best < decision.noop_score - improvement_margin) {
        decision.action = action_from_index(state.topology, best_line, best_idx);
        decision.line = best_line;
        decision.action_index = best_idx;
        decision.best_score = best;
    }
    return decision;
}

int count_expert_candidates(const SimState& state) {
    const Grid& grid = *state.grid;
    int count = 0;
    for (int line = 0; line < grid.num_lines(); ++line) {
        for (int idx : legal_action_indices(grid, state.topology, line))
            if (idx != 0) ++count;
    }
    return count;
}

} // namespace gridrl
