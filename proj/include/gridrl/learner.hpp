#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gridrl/config.hpp"
#include "gridrl/control.hpp"
#include "gridrl/demos.hpp"
#include "gridrl/replay.hpp"
#include "gridrl/rl.hpp"

namespace gridrl {

/// DQfD learning over a PolicySystem: per-line agent buffers plus a manager
/// buffer, prioritized sampling, double-DQN targets with legality masks,
/// reward shaping, and shared-GNN gradient flow. Observations are rebuilt
/// from stored snapshots at update time, so every update sees the current
/// GNN and the current (frozen-between-syncs) bootstrapped potential.
class Learner {
public:
    Learner(PolicySystem& system, const RunConfig& config);

    /// Demos enter the protected buffer prefix; call before any add_*.
    void load_demo_set(const DemoSet& demos);
    void add_agent(const AgentTransition& t);
    void add_manager(const ManagerTransition& t);

    /// One DQfD round on agent `line` (and the shared GNN). Skips (nullopt)
    /// when the buffer holds fewer than min_items transitions. Throws
    /// std::runtime_error on a non-finite loss or rejected gradient.
    std::optional<DqfdTerms> update_agent(int line, int min_items);
    std::optional<DqfdTerms> update_manager(int min_items);

    /// Deterministic single-batch probe: samples one batch from `line`'s
    /// buffer, then applies `steps` updates to that same batch, returning
    /// the loss terms per step. No syncs, no priority updates.
    std::vector<DqfdTerms> overfit_agent(int line, int steps);

    /// Learner rounds completed (drives the β anneal and target syncs).
    /// One round = all component updates triggered together.
    int rounds() const { return rounds_; }
    /// Marks the end of a round: β advances; targets soft-sync every
    /// sync_interval rounds.
    void end_round();

    double beta() const;
    const ReplayBuffer<AgentTransition>& agent_buffer(int line) const;
    const ReplayBuffer<ManagerTransition>& manager_buffer() const { return manager_buffer_; }

private:
    double agent_potential(const SimState& s, int line) const;
    double manager_potential(const SimState& s) const;
    DqfdTerms apply_agent_update(int line, const ReplaySample& sample, bool update_priorities);

    PolicySystem& sys_;
    RunConfig config_;
    std::vector<ReplayBuffer<AgentTransition>> agent_buffers_;
    ReplayBuffer<ManagerTransition> manager_buffer_;
    AdamOptimizer gnn_opt_;
    AdamOptimizer manager_opt_;
    std::vector<AdamOptimizer> agent_opts_;
    Rng sample_rng_;
    int rounds_ = 0;
};

struct PretrainReport {
    int rounds = 0;
    int agents_trained = 0;
    int agents_skipped = 0;  // agents with an empty demo buffer
    double expert_loss_first = 0.0;  // mean J_E across components, first round
    double expert_loss_last = 0.0;
    double total_loss_first = 0.0;
    double total_loss_last = 0.0;
};

/// Demo-only DQfD pretraining for `steps` rounds over every component with
/// at least one demo. Throws std::invalid_argument when no component has
/// demos. steps = 0 leaves all parameters untouched.
PretrainReport pretrain_dqfd(Learner& learner, const Grid& grid, int steps);

/// Fraction of held-out demos whose greedy decision matches the recorded
/// expert decision: agent demos compare argmax over legal actions, manager
/// demos compare the line argmax. Pooled over both levels.
double demo_agreement(const PolicySystem& system, const DemoSet& held_out, bool use_gnn);

struct EpisodeMetrics {
    int episode = 0;
    std::string chronic;
    int survive_time = 0;
    int steps = 0;
    int danger_decisions = 0;
    int updates = 0;  // learner rounds this episode
    double epsilon = 0.0;  // schedule value after the episode
    double beta = 0.0;
    double agent_loss = 0.0;    // mean per-round total loss
    double manager_loss = 0.0;
    bool blackout = false;
};

struct TrainResult {
    std::vector<EpisodeMetrics> episodes;
    PretrainReport pretrain;
    DemoStats demo_stats;
    double mean_survive_time = 0.0;
    std::string metrics_path;
    std::string checkpoint_path;
    std::string config_path;
    std::string danger_states_path;
};

/// Full training run per the config: synthetic or on-disk chronics, optional
/// DQfD pretraining, ε-greedy rollouts with per-danger-decision updates,
/// periodic checkpointing, and deterministic metrics output under out_dir.
TrainResult train(const RunConfig& config);

struct EvalRow {
    std::string chronic;
    int survive_time = 0;
    bool completed = false;  // survived the whole horizon
    int danger_decisions = 0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    double mean_survive = 0.0;
    double std_survive = 0.0;
    // Wall-clock per decision; excluded from the deterministic CSV.
    double mean_decision_us = 0.0;
    double std_decision_us = 0.0;
};

/// Greedy (ε = 0) rollout of the policy over each chronic.
EvalReport evaluate_policy(const PolicySystem& system, const std::vector<Chronic>& chronics,
                           const EnvConfig& env_config, const ActorConfig& actor);
/// The Do-Nothing baseline through the same reporting path.
EvalReport evaluate_do_nothing(const Grid& grid, const std::vector<Chronic>& chronics,
                               const EnvConfig& env_config);
/// Deterministic fields only; timing goes to the sidecar.
void write_eval_csv(const std::string& path, const EvalReport& report);
void write_latency_sidecar(const std::string& path, const EvalReport& report);

struct BenchReport {
    int states = 0;
    double agent_mean_us = 0.0;        // filter off
    double agent_std_us = 0.0;
    double filter_mean_us = 0.0;       // filter on
    double filter_std_us = 0.0;
    double expert_mean_us = 0.0;
    double expert_std_us = 0.0;
    double speedup_no_filter = 0.0;    // expert_mean / agent_mean
    double expert_slope_us = 0.0;      // least-squares slope vs candidate count
    double expert_corr = 0.0;          // Pearson r of expert time vs candidates
    double agent_corr = 0.0;
    std::vector<int> candidates;       // per state
    std::vector<double> agent_us, filter_us, expert_us;  // per state (min over repeats)
};

/// Times one decision per state for (a) the system with the filter off,
/// (b) with the filter on, (c) the expert's full enumeration.
BenchReport bench_inference(const PolicySystem& system, const Grid& grid,
                            const std::vector<StateSnapshot>& danger_states,
                            const EnvConfig& env_config, int repeats = 3);
void write_bench_csv(const std::string& path, const BenchReport& report);

struct GnnHeatmap {
    Eigen::MatrixXd matrix;  // hidden x 6d: first-layer self weights, transposed
    std::vector<std::string> labels;  // one per column
    double symmetry_score = 0.0;  // corr of origin vs extremity column-norm profiles
};

GnnHeatmap gnn_heatmap(PolicySystem& system);
void write_heatmap_csv(const std::string& path, const GnnHeatmap& heatmap);
/// Reads back the matrix written by write_heatmap_csv (round-trip checks).
Eigen::MatrixXd read_heatmap_csv(const std::string& path);

/// Chronics selected by the config: loaded from chronics_dir when set,
/// otherwise synthetic sets calibrated per hardness. `eval_split` switches
/// between the train and eval seed ranges.
std::vector<Chronic> chronics_for(const RunConfig& config, const Grid& grid, bool eval_split);

} // namespace gridrl
