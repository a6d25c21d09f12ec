#pragma once

#include <string>
#include <vector>

#include "gridrl/chronics.hpp"
#include "gridrl/control.hpp"
#include "gridrl/env.hpp"
#include "gridrl/rl.hpp"

namespace gridrl {

/// One low-level transition, stored as compact snapshots. Observations are
/// recomputed through the current GNN at learning time so encoder gradients
/// keep flowing; rewards are stored unshaped and shaped on sampling.
struct AgentTransition {
    StateSnapshot s0;
    int line = -1;
    int action_index = 0;
    double reward1 = 0.0;  // base one-step reward
    StateSnapshot s1;
    bool done1 = false;
    double reward_n = 0.0;  // discounted base n-step return
    StateSnapshot sn;
    bool done_n = false;
    int n_actual = 1;  // steps folded into reward_n (discount = gamma^n_actual)
};

/// One manager decision in semi-MDP form: a danger state, the agent chosen,
/// and the discounted cumulative reward until the next danger decision (or
/// terminal), dt steps later.
struct ManagerTransition {
    StateSnapshot s0;
    int line = -1;
    double reward = 0.0;  // sum_k gamma^k r_{t+k}, k in [0, dt)
    StateSnapshot s1;
    bool done = false;
    int dt = 1;  // effective discount is gamma^dt
};

struct DemoSet {
    std::vector<AgentTransition> agent;
    std::vector<ManagerTransition> manager;
};

struct DemoStats {
    int episodes = 0;
    int steps = 0;
    int danger_steps = 0;
    int expert_actions = 0;
};

/// Rolls the expert over the first budget_episodes chronics. Every danger
/// step where the expert clears its improvement margin yields one agent demo
/// and one manager demo; expert NOOPs yield none.
DemoSet collect_demonstrations(const Grid& grid, const std::vector<Chronic>& chronics,
                               const EnvConfig& env_config, const Hyperparams& hp,
                               int budget_episodes, double improvement_margin = 0.02,
                               DemoStats* stats = nullptr);

/// JSONL, one versioned record per transition.
void save_demos(const std::string& path, const DemoSet& demos);
DemoSet load_demos(const std::string& path, const Grid& grid);

/// JSONL snapshot lists (recorded danger states for the inference bench).
void save_snapshots(const std::string& path, const std::vector<StateSnapshot>& snapshots);
std::vector<StateSnapshot> load_snapshots(const std::string& path, const Grid& grid);

} // namespace gridrl
