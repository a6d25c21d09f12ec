#include "gridrl/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gridrl {

namespace {

FlowSolution solve_state(const Grid& grid, const TopologyState& topo, const Injections& inj,
                         const EnvConfig& config) {
    return dc_solve(grid, topo, inj, config.solver_options());
}

/// Trip overloaded lines until the flow pattern is stable. Soft trips use
/// the counters carried in from the previous step; they are not advanced
/// between cascade iterations, so only hard trips can chain within a step.
void run_cascade(const Grid& grid, const EnvConfig& config, TopologyState& topo,
                 const Injections& inj, FlowSolution& solution, StepInfo& info) {
    const int max_iters = grid.num_lines() + 1;
    for (int iter = 0; iter < max_iters; ++iter) {
        if (!solution.solvable) return;
        std::vector<int> trips;
        for (int l = 0; l < grid.num_lines(); ++l) {
            if (!topo.line_connected[l]) continue;
            const double rho = solution.load_ratio[l];
            const bool hard = rho >= config.hard_overflow_ratio;
            const bool soft =
                rho > 1.0 && topo.overflow_count[l] >= config.soft_overflow_steps - 1;
            if (hard || soft) trips.push_back(l);
        }
        if (trips.empty()) return;
        for (int l : trips) {
            topo.line_connected[l] = false;
            topo.line_cooldown[l] = config.cooldown_steps;
            info.disconnected_lines.push_back(l);
        }
        ++info.cascade_depth;
        solution = solve_state(grid, topo, inj, config);
    }
}

StepOutcome advance(const SimState& state, const Action& action, const Injections& next_inj,
                    int next_t, bool advance_time) {
    const Grid& grid = *state.grid;
    const EnvConfig& config = state.config;

    StepOutcome out;
    out.info.illegal_action = !is_action_legal(grid, state.topology, action);
    const Action& applied = out.info.illegal_action ? Action::noop() : action;

    SimState next;
    next.grid = state.grid;
    next.chronic = state.chronic;
    next.config = config;
    next.topology = apply_action(grid, state.topology, applied, config.cooldown_steps);
    next.injections = next_inj;
    next.t = next_t;

    next.solution = solve_state(grid, next.topology, next.injections, config);
    run_cascade(grid, config, next.topology, next.injections, next.solution, out.info);

    next.blackout = !next.solution.solvable;
    if (next.blackout) {
        out.reward = -config.blackout_penalty;
    } else {
        for (int l = 0; l < grid.num_lines(); ++l) {
            int& count = next.topology.overflow_count[l];
            if (next.topology.line_connected[l] && next.solution.load_ratio[l] > 1.0)
                count += 1;
            else
                count = 0;
        }
    }
    for (int s = 0; s < grid.num_substations(); ++s)
        if (next.topology.sub_cooldown[s] > 0) --next.topology.sub_cooldown[s];
    for (int l = 0; l < grid.num_lines(); ++l)
        if (next.topology.line_cooldown[l] > 0) --next.topology.line_cooldown[l];

    const bool time_limit = advance_time && state.chronic != nullptr &&
                            next.t >= state.chronic->horizon() - 1;
    next.done = next.blackout || time_limit;
    if (!next.blackout) out.reward = base_reward(next);

    out.info.load_ratio = next.solution.load_ratio;
    out.done = next.done;
    out.next = std::move(next);
    return out;
}

} // namespace

double base_reward(const SimState& state) {
    if (state.blackout || !state.solution.solvable) return -state.config.blackout_penalty;
    const int L = state.grid->num_lines();
    double acc = 0.0;
    for (int l = 0; l < L; ++l) {
        const double r = std::min(state.solution.load_ratio[l], 1.0);
        acc += r * r;
    }
    return 1.0 - acc / L;
}

SimState reset(const Grid& grid, const Chronic& chronic, const EnvConfig& config) {
    if (chronic.gen_p.cols() != grid.num_generators() || chronic.load_p.cols() != grid.num_loads())
        throw std::invalid_argument("reset: chronic '" + chronic.id +
                                    "' does not match the grid element counts");
    SimState s;
    s.grid = &grid;
    s.chronic = &chronic;
    s.config = config;
    s.topology = TopologyState::initial(grid);
    s.injections = chronic.injections_at(0);
    s.t = 0;
    s.solution = solve_state(grid, s.topology, s.injections, config);
    if (!s.solution.solvable)
        throw std::runtime_error("reset: chronic '" + chronic.id +
                                 "' is unsolvable at step 0");
    if (s.solution.max_ratio() >= 1.0)
        throw std::runtime_error("reset: chronic '" + chronic.id +
                                 "' starts overloaded (max ratio " +
                                 std::to_string(s.solution.max_ratio()) + ")");
    return s;
}

StepOutcome step(const SimState& state, const Action& action) {
    if (state.done) throw std::logic_error("step: episode already finished");
    if (state.chronic == nullptr)
        throw std::logic_error("step: state has no chronic (snapshot-restored?)");
    const int next_t = state.t + 1;
    if (next_t >= state.chronic->horizon())
        throw std::logic_error("step: chronic exhausted at step " + std::to_string(state.t));
    return advance(state, action, state.chronic->injections_at(next_t), next_t, true);
}

StepOutcome simulate(const SimState& state, const Action& action) {
    return advance(state, action, state.injections, state.t, false);
}

StateSnapshot to_snapshot(const SimState& state) {
    return StateSnapshot{state.topology, state.injections, state.t, state.done, state.blackout};
}

SimState from_snapshot(const Grid& grid, const StateSnapshot& snap, const EnvConfig& config,
                       const Chronic* chronic) {
    SimState s;
    s.grid = &grid;
    s.chronic = chronic;
    s.config = config;
    s.topology = snap.topology;
    s.injections = snap.injections;
    s.t = snap.t;
    s.done = snap.done;
    s.blackout = snap.blackout;
    s.solution = solve_state(grid, s.topology, s.injections, config);
    return s;
}

int do_nothing_survive_time(const Grid& grid, const Chronic& chronic, const EnvConfig& config) {
    SimState s = reset(grid, chronic, config);
    while (!s.done) {
        StepOutcome out = step(s, Action::noop());
        s = std::move(out.next);
    }
    return s.t;
}

namespace {

int survive_at_scale(const Grid& grid, std::uint64_t seed, const SyntheticProfile& base,
                     double scale, const EnvConfig& config) {
    SyntheticProfile p = base;
    p.peak_scale = scale;
    const Chronic c = generate_synthetic(grid, seed, p);
    try {
        return do_nothing_survive_time(grid, c, config);
    } catch (const std::runtime_error&) {
        return 0;  // invalid at reset: treated as immediate failure
    }
}

} // namespace

SyntheticProfile calibrate_profile(const Grid& grid, ProfileHardness hardness,
                                   std::uint64_t seed, int horizon, const EnvConfig& config) {
    SyntheticProfile profile;
    profile.horizon = horizon;
    const int full = horizon - 1;

    // Largest peak_scale at which the Do-Nothing baseline survives the whole
    // horizon under the current demand shape (bracket, then bisect).
    auto capacity = [&](const SyntheticProfile& base) {
        double lo = 1.0;
        if (survive_at_scale(grid, seed, base, lo, config) < full) {
            for (int i = 0; i < 40 && survive_at_scale(grid, seed, base, lo, config) < full; ++i)
                lo *= 0.85;
        }
        double hi = lo;
        for (int i = 0; i < 40 && survive_at_scale(grid, seed, base, hi, config) >= full; ++i)
            hi *= 1.15;
        for (int i = 0; i < 10; ++i) {
            const double mid = 0.5 * (lo + hi);
            if (survive_at_scale(grid, seed, base, mid, config) >= full)
                lo = mid;
            else
                hi = mid;
        }
        return lo;
    };

    if (hardness == ProfileHardness::kEasy) {
        profile.peak_scale = 0.92 * capacity(profile);
        return profile;
    }

    // Hard: find a demand curve under which the baseline dies within the
    // first 40% of the horizon. Death comes earlier as the peak rises, but
    // reset rejects any curve whose first row is already overloaded, capping
    // the peak from above. Bisect the scale between "dies too late (or
    // survives)" and "rejected"; when the default daily shape leaves no scale
    // inside the band, steepen the curve (lower overnight base) and retry.
    const int band = static_cast<int>(0.4 * horizon);
    SyntheticProfile best = profile;  // earliest-dying valid profile seen
    int best_survive = full;
    best.peak_scale = capacity(profile);

    const double default_base = profile.base_level;
    for (const double base_level : {default_base, 0.46, 0.36, 0.28}) {
        profile.base_level = base_level;
        const double cap = capacity(profile);
        double low = cap;      // highest scale seen to survive or die late
        double rejected = 0.0; // lowest scale seen rejected (0 until observed)
        double scale = 1.05 * cap;
        for (int i = 0; i < 24; ++i) {
            const int survive = survive_at_scale(grid, seed, profile, scale, config);
            if (survive > 0 && survive <= band) {
                profile.peak_scale = scale;
                return profile;
            }
            if (survive == 0) {
                rejected = scale;
                scale = 0.5 * (low + scale);
            } else {
                low = scale;
                if (survive < best_survive) {
                    best_survive = survive;
                    best = profile;
                    best.peak_scale = scale;
                }
                scale = rejected > 0.0 ? 0.5 * (scale + rejected) : scale * 1.12;
            }
        }
    }
    // No curve reached the band on this grid; take the hardest valid one.
    return best;
}

std::vector<Chronic> make_synthetic_set(const Grid& grid, ProfileHardness hardness,
                                        std::uint64_t base_seed, int count, int horizon,
                                        const EnvConfig& config) {
    std::vector<Chronic> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(i);
        const SyntheticProfile profile = calibrate_profile(grid, hardness, seed, horizon, config);
        Chronic c = generate_synthetic(grid, seed, profile);
        c.id = (hardness == ProfileHardness::kHard ? "hard-" : "easy-") + std::to_string(seed);
        out.push_back(std::move(c));
    }
    return out;
}

} // namespace gridrl
