#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "gridrl/grid.hpp"
#include "gridrl/powerflow.hpp"
#include "gridrl/rng.hpp"

namespace gridrl {

/// Default episode horizon: one week of 5-minute steps. The full-scale
/// horizon (28 days) is the hard upper bound accepted from disk.
inline constexpr int kDefaultHorizon = 2016;
inline constexpr int kMaxHorizon = 8064;

/// One episode's worth of generator and load set points.
struct Chronic {
    std::string id;
    Eigen::MatrixXd gen_p;   // T x G
    Eigen::MatrixXd load_p;  // T x D

    int horizon() const { return static_cast<int>(gen_p.rows()); }

    Injections injections_at(int t) const {
        Injections inj;
        inj.t = t;
        inj.gen_p.assign(gen_p.row(t).begin(), gen_p.row(t).end());
        inj.load_p.assign(load_p.row(t).begin(), load_p.row(t).end());
        return inj;
    }
};

/// Load every chronic directory under `dir` (sorted by name). Each chronic
/// is a folder holding gen_p.csv (T x G, header = generator ids) and
/// load_p.csv (T x D).
std::vector<Chronic> load_chronics(const std::string& dir, const Grid& grid);
Chronic load_chronic(const std::string& dir, const Grid& grid);
void save_chronic(const std::string& dir, const Chronic& chronic);

/// Synthetic chronic profile: daily-periodic loads with smooth noise and
/// renewable-style generator variability. peak_scale multiplies the whole
/// demand curve; hardness is achieved by calibrating it (see env.hpp).
struct SyntheticProfile {
    int horizon = kDefaultHorizon;
    int steps_per_day = 288;
    double peak_scale = 1.0;
    double base_level = 0.58;    // overnight demand as a fraction of peak
    double noise_level = 0.03;   // OU noise amplitude on each load
    double renewable_share = 0.35;
};

Chronic generate_synthetic(const Grid& grid, std::uint64_t seed, const SyntheticProfile& profile);

} // namespace gridrl
