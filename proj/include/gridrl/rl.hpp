#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "gridrl/env.hpp"
#include "gridrl/nn.hpp"

namespace gridrl {

/// Every training constant in one place; loaded from the run config and
/// overridable per flag.
struct Hyperparams {
    double gamma = 0.99;
    double lr = 1e-3;
    double eps0 = 1.0;
    double eps_half_life = 300.0;  // danger decisions, not env steps
    double eps_min = 0.02;
    double tau = 0.01;
    int sync_interval = 50;  // K_sync, in learner updates
    double grad_clip = 3.0;
    double alpha_per = 0.6;
    double beta_per_start = 0.4;
    double beta_per_end = 1.0;
    double eps_prio = 1e-3;
    double eps_demo = 1.0;
    double margin = 0.8;        // DQfD large-margin m
    double lambda_nstep = 1.0;  // λ1
    double lambda_expert = 1.0; // λ2
    double lambda_l2 = 1e-5;    // λ3
    int n_step = 5;
    int batch_size = 32;
    double blackout_penalty = 10.0;
    double danger_ratio = 0.95;

    /// Throws invalid_argument on out-of-range values.
    void validate() const;
};

/// ε_t = ε0 · 2^{-t/h}, floored at eps_min. Exact at integer multiples of h.
double epsilon_at(double t, double eps0, double half_life, double eps_min);

/// Linear anneal of the PER correction exponent from start to end over
/// total steps (clamped).
double beta_at(double t, double total, double beta_start, double beta_end);

enum class ShapingMode { kOff, kStatic, kBootstrapped };
ShapingMode shaping_mode_from_string(const std::string& name);
std::string to_string(ShapingMode mode);

/// Φ(s) = -max_l ρ_l(s): the static hand-crafted potential.
double static_potential(const SimState& state);

/// r' = r + γ·Φ(s') - Φ(s); the terminal potential is 0 by definition, so
/// done overrides phi_next. kOff returns r unchanged.
double shape_reward(double r, double phi_s, double phi_next, bool done, double gamma,
                    ShapingMode mode);

/// Double-DQN targets y_i = r_i + γ_i · Q_target(s'_i, argmax_a Q_main(s'_i, a)),
/// with the argmax restricted to legal_next[i] when provided (empty list of
/// lists = all actions legal; an empty inner list is rejected). done_i forces
/// y_i = r_i. gamma_eff carries γ^k per sample so the same routine serves
/// 1-step and n-step heads.
Eigen::VectorXd double_dqn_targets(const Eigen::MatrixXd& q_main_next,
                                   const Eigen::MatrixXd& q_target_next,
                                   const Eigen::VectorXd& rewards,
                                   const std::vector<std::uint8_t>& done,
                                   const Eigen::VectorXd& gamma_eff,
                                   const std::vector<std::vector<int>>& legal_next = {});

/// One batch of the DQfD objective, expressed directly on the Q matrix so
/// any network producing Q can consume the gradient.
struct DqfdBatch {
    Eigen::MatrixXd q;               // B x A, main network on s
    std::vector<int> action;         // taken / demonstrated action per row
    Eigen::VectorXd target_1step;    // y from double_dqn_targets (1-step)
    Eigen::VectorXd target_nstep;    // y from double_dqn_targets (n-step)
    std::vector<std::uint8_t> is_demo;
    Eigen::VectorXd is_weight;       // PER importance weights
};

struct DqfdTerms {
    double td = 0.0;        // J_TD  (importance-weighted mean squared 1-step error)
    double nstep = 0.0;     // J_n
    double expert = 0.0;    // J_E   (demo rows only, unweighted by λ2 here)
    double l2 = 0.0;        // ‖params‖² (unweighted by λ3 here)
    double total = 0.0;     // J_TD + λ1·J_n + λ2·J_E + λ3·L2
    Eigen::MatrixXd dq;     // d total / d Q, ready for DuelingNet::backward
    Eigen::VectorXd td_abs; // |1-step δ| per row, for priority updates
};

/// Computes losses and the Q-space gradient. The L2 term covers params; call
/// add_l2_gradient(params, λ3) separately when applying.
DqfdTerms dqfd_loss(const DqfdBatch& batch, const std::vector<Tensor*>& params,
                    const Hyperparams& hp);

/// p.grad += 2·scale·p.value for every parameter block.
void add_l2_gradient(const std::vector<Tensor*>& params, double scale);

} // namespace gridrl
