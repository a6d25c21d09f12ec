#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gridrl/chronics.hpp"
#include "gridrl/grid.hpp"
#include "gridrl/powerflow.hpp"

namespace gridrl {

struct EnvConfig {
    int cooldown_steps = kDefaultCooldownSteps;
    /// Consecutive steps a line may run above its thermal limit before it is
    /// tripped. Reaching the threshold step trips it.
    int soft_overflow_steps = 3;
    /// Instant-trip load ratio.
    double hard_overflow_ratio = 2.0;
    double blackout_penalty = 10.0;
    double slack_tolerance = 0.2;

    SolverOptions solver_options() const { return SolverOptions{slack_tolerance}; }
};

/// Full simulator state at one step. A value: step/simulate return fresh
/// states and never mutate their input.
struct SimState {
    const Grid* grid = nullptr;
    const Chronic* chronic = nullptr;  // null for snapshot-restored states
    EnvConfig config;
    TopologyState topology;
    Injections injections;
    FlowSolution solution;
    int t = 0;
    bool done = false;
    bool blackout = false;

    double max_ratio() const { return solution.max_ratio(); }
};

struct StepInfo {
    std::vector<double> load_ratio;
    std::vector<int> disconnected_lines;  // auto-disconnected this step
    int cascade_depth = 0;
    bool illegal_action = false;  // the action was downgraded to NOOP
};

struct StepOutcome {
    SimState next;
    double reward = 0.0;
    bool done = false;
    StepInfo info;
};

/// Start an episode: t = 0, everything on bus 1, injections from chronic
/// row 0. Throws on grid/chronic shape mismatch or an unsolvable/overloaded
/// initial state (invalid chronic).
SimState reset(const Grid& grid, const Chronic& chronic, const EnvConfig& config = {});

/// Advance one chronic step: apply the action (illegal ones downgrade to
/// NOOP and are flagged), move to row t+1, run the overload cascade to its
/// fixed point, update counters and cooldowns, detect blackout.
StepOutcome step(const SimState& state, const Action& action);

/// One-step lookahead: like step but injections stay at row t and the
/// caller's state is untouched. Usable on snapshot-restored states.
StepOutcome simulate(const SimState& state, const Action& action);

/// Dense margin reward: 1 - mean(min(rho,1)^2), or -penalty on blackout.
double base_reward(const SimState& state);

/// Compact serializable form of a SimState (topology + injections + t).
struct StateSnapshot {
    TopologyState topology;
    Injections injections;
    int t = 0;
    bool done = false;
    bool blackout = false;
};

StateSnapshot to_snapshot(const SimState& state);
/// Rebuild a full state (flow re-solved) from a snapshot. The chronic may be
/// null; such states support simulate but not step.
SimState from_snapshot(const Grid& grid, const StateSnapshot& snap, const EnvConfig& config = {},
                       const Chronic* chronic = nullptr);

/// Survive time of the always-NOOP policy on one chronic.
int do_nothing_survive_time(const Grid& grid, const Chronic& chronic,
                            const EnvConfig& config = {});

/// Calibrated synthetic chronic sets. Hard profiles are scaled just above
/// the Do-Nothing capacity of the grid, so the baseline fails early in the
/// episode; easy profiles sit below it and survive the full horizon.
enum class ProfileHardness { kEasy, kHard };

SyntheticProfile calibrate_profile(const Grid& grid, ProfileHardness hardness,
                                   std::uint64_t seed, int horizon,
                                   const EnvConfig& config = {});

/// generate_synthetic + calibrate_profile for a batch of seeds.
std::vector<Chronic> make_synthetic_set(const Grid& grid, ProfileHardness hardness,
                                        std::uint64_t base_seed, int count, int horizon,
                                        const EnvConfig& config = {});

} // namespace gridrl
