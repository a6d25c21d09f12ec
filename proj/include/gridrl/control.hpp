#pragma once

#include <Eigen/Core>
#include <vector>

#include "gridrl/env.hpp"
#include "gridrl/graph_obs.hpp"
#include "gridrl/nn.hpp"
#include "gridrl/rng.hpp"

namespace gridrl {

/// Raw per-line features an agent sees alongside its GNN embedding; no
/// other line's state leaks in (locality).
constexpr int kAgentLocalWidth = 9;

Eigen::RowVectorXd agent_local_features(const SimState& state, int line);

/// Manager observation: per-line normalized thermal limit, per-line load
/// ratio, then two bits per element endpoint (on-bus-2, disconnected).
int manager_observation_width(const Grid& grid);
Eigen::RowVectorXd manager_observation(const SimState& state);

/// Danger gate: max load ratio at or above the threshold (closed boundary).
bool is_danger(const SimState& state, double danger_ratio);

/// One line agent's two dueling networks. Input = GNN line embedding
/// concatenated with the raw local features of its own line.
struct LineAgent {
    int line = -1;
    DuelingNet main;
    DuelingNet target;
};

struct NetConfig {
    int embedding_width = 64;  // GNN output per line node
    int gnn_layers = 2;
    int agent_hidden = 128;
    int manager_hidden = 128;
};

/// The whole network census: one GNN pair, one manager pair, L agent
/// pairs — 2L + 4 networks.
struct PolicySystem {
    PolicySystem(const Grid& grid, const NetConfig& net_config, std::uint64_t seed);

    const Grid* grid = nullptr;
    NetConfig config;
    Gnn gnn_main;
    Gnn gnn_target;
    DuelingNet manager_main;
    DuelingNet manager_target;
    std::vector<LineAgent> agents;
    Eigen::MatrixXd norm_adjacency;  // row-normalized static line graph

    int num_networks() const { return 2 * static_cast<int>(agents.size()) + 4; }
    int agent_input_width() const { return config.embedding_width + kAgentLocalWidth; }
    /// Every parameter block in a stable order (checkpoint layout).
    std::vector<Tensor*> all_params();
    /// Line-node embeddings of the current state through the main GNN
    /// (no training cache), or zeros under the no-GNN ablation.
    Eigen::MatrixXd embed(const SimState& state, bool use_gnn) const;
};

/// ε-greedy argmax over manager Q values; greedy ties break to the lowest
/// index. q is a single row.
int select_agent(const DuelingNet& manager, const Eigen::RowVectorXd& obs, double eps, Rng& rng);

/// ε-greedy over the agent's legal action indices, optionally filtered by
/// one-step simulation: a non-NOOP candidate is discarded when it simulates
/// to blackout or to a max ratio strictly above NOOP's. NOOP always
/// survives. Returns the action index in [0, kActionsPerLine).
int agent_act(const DuelingNet& agent, const SimState& state, int line,
              const Eigen::RowVectorXd& input, double eps, Rng& rng, bool filter_on);

struct ActorConfig {
    bool filter_on = true;
    bool use_gnn = true;
    double danger_ratio = 0.95;
};

struct ActDecision {
    Action action;
    int line = -1;         // acting agent, -1 when the danger gate passes NOOP
    int action_index = 0;  // slot within the acting line's action set
    bool danger = false;
};

/// Full action-computation flow: quiescent states short-circuit to NOOP
/// without touching the manager or GNN; danger states run
/// select_agent -> line graph -> GNN -> agent_act.
ActDecision act(const PolicySystem& system, const SimState& state, double eps_manager,
                double eps_agent, Rng& rng, const ActorConfig& actor_config);

struct ExpertDecision {
    Action action;           // NOOP when no candidate clears the margin
    int line = -1;           // owning line of the action, -1 for NOOP
    int action_index = 0;
    double noop_score = 0.0; // simulated max ratio of doing nothing
    double best_score = 0.0; // simulated max ratio of the returned action
    int candidates = 0;      // non-NOOP candidates simulated
};

/// Brute-force one-step lookahead: simulate every line's legal non-NOOP
/// action, score by resulting max ratio (blackout = +inf), and act only on
/// an improvement over NOOP of at least the margin. Ties break by
/// (score, line id, action index). Deterministic.
ExpertDecision expert_action(const SimState& state, double improvement_margin = 0.02);

/// Number of legal non-NOOP actions across all lines (the expert's
/// simulation workload).
int count_expert_candidates(const SimState& state);

} // namespace gridrl
