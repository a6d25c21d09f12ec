#pragma once

#include <cstdint>
#include <string>

#include "gridrl/control.hpp"
#include "gridrl/env.hpp"
#include "gridrl/rl.hpp"

namespace gridrl {

/// Everything one run needs. Serialized as a single JSON document; the CLI
/// exposes a flag for every field so experiments never require editing code.
struct RunConfig {
    // Assets.
    std::string grid_path = "data/case14.grid";
    std::string chronics_dir;  // empty: generate synthetic chronics in-process

    // Synthetic chronics (used when chronics_dir is empty).
    std::string hardness = "hard";  // easy | hard
    int horizon = kDefaultHorizon;
    int train_chronics = 10;
    int eval_chronics = 10;
    std::uint64_t train_chronic_seed = 9000;
    std::uint64_t eval_chronic_seed = 9100;

    // Learning.
    std::uint64_t seed = 1;
    Hyperparams hp;
    NetConfig net;
    int replay_capacity = 32768;

    // Budgets.
    int demo_episodes = 6;
    int pretrain_steps = 1500;
    int train_episodes = 30;
    int updates_per_decision = 1;
    int checkpoint_every = 10;      // episodes between checkpoint refreshes
    int beta_horizon_updates = 20000;  // PER β anneal length, in learner rounds

    // Ablation flags (Table-2 rows).
    bool use_dqfd = true;
    bool use_gnn = true;
    bool filter_on = true;
    ShapingMode shaping = ShapingMode::kBootstrapped;

    // Environment.
    EnvConfig env;

    // Outputs.
    std::string out_dir = "out";

    /// Throws std::invalid_argument on any out-of-range field.
    void validate() const;
};

/// Parse a JSON document. Unknown keys are rejected (typo protection);
/// missing keys keep their defaults.
RunConfig run_config_from_json_text(const std::string& text);
/// Stable, human-editable JSON (sorted keys, 2-space indent).
std::string run_config_to_json_text(const RunConfig& config);

RunConfig load_run_config(const std::string& path);
void save_run_config(const std::string& path, const RunConfig& config);

} // namespace gridrl
