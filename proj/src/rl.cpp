#include "gridrl/rl.hpp"

#include <cmath>
#include <stdexcept>

namespace gridrl {

void Hyperparams::validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must be in (0,1)");
    if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
    if (!(eps_half_life > 0.0)) throw std::invalid_argument("eps half-life must be positive");
    if (eps0 < 0.0 || eps_min < 0.0 || eps0 > 1.0 || eps_min > eps0)
        throw std::invalid_argument("need 0 <= eps_min <= eps0 <= 1");
    if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must be in (0,1]");
    if (sync_interval < 1) throw std::invalid_argument("sync interval must be >= 1");
    if (!(grad_clip > 0.0)) throw std::invalid_argument("gradient clip must be positive");
    if (alpha_per < 0.0 || beta_per_start < 0.0 || beta_per_end < beta_per_start)
        throw std::invalid_argument("PER exponents out of range");
    if (eps_prio <= 0.0) throw std::invalid_argument("eps_prio must be positive");
    if (eps_demo < 0.0 || margin < 0.0 || lambda_nstep < 0.0 || lambda_expert < 0.0 ||
        lambda_l2 < 0.0)
        throw std::invalid_argument("loss weights must be non-negative");
    if (n_step < 1) throw std::invalid_argument("n_step must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (!(danger_ratio > 0.0)) throw std::invalid_argument("danger ratio must be positive");
}

double epsilon_at(double t, double eps0, double half_life, double eps_min) {
    if (t < 0.0) throw std::invalid_argument("epsilon_at: negative step");
    if (!(half_life > 0.0)) throw std::invalid_argument("epsilon_at: non-positive half-life");
    const double halvings = t / half_life;
    double eps;
    if (halvings == std::floor(halvings) && halvings < 1024.0) {
        // ldexp keeps ε(k·h) = ε0/2^k exact in floating point.
        eps = std::ldexp(eps0, -static_cast<int>(halvings));
    } else {
        eps = eps0 * std::exp2(-halvings);
    }
    return std::max(eps, eps_min);
}

double beta_at(double t, double total, double beta_start, double beta_end) {
    if (total <= 0.0) return beta_end;
    const double frac = std::min(std::max(t / total, 0.0), 1.0);
    return beta_start + (beta_end - beta_start) * frac;
}

ShapingMode shaping_mode_from_string(const std::string& name) {
    if (name == "off") return ShapingMode::kOff;
    if (name == "static") return ShapingMode::kStatic;
    if (name == "bootstrapped") return ShapingMode::kBootstrapped;
    throw std::invalid_argument("unknown shaping mode: " + name);
}

std::string to_string(ShapingMode mode) {
    switch (mode) {
        case ShapingMode::kOff: return "off";
        case ShapingMode::kStatic: return "static";
        case ShapingMode::kBootstrapped: return "bootstrapped";
    }
    throw std::logic_error("unreachable shaping mode");
}

double static_potential(const SimState& state) { return -state.max_ratio(); }

double shape_reward(double r, double phi_s, double phi_next, bool done, double gamma,
                    ShapingMode mode) {
    if (mode == ShapingMode::kOff) return r;
    const double next = done ? 0.0 : phi_next;
    return r + gamma * next - phi_s;
}

Eigen::VectorXd double_dqn_targets(const Eigen::MatrixXd& q_main_next,
                                   const Eigen::MatrixXd& q_target_next,
                                   const Eigen::VectorXd& rewards,
                                   const std::vector<std::uint8_t>& done,
                                   const Eigen::VectorXd& gamma_eff,
                                   const std::vector<std::vector<int>>& legal_next) {
    const Eigen::Index b = q_main_next.rows();
    const Eigen::Index a = q_main_next.cols();
    if (q_target_next.rows() != b || q_target_next.cols() != a)
        throw std::invalid_argument("double_dqn_targets: network output shape mismatch");
    if (rewards.size() != b || static_cast<Eigen::Index>(done.size()) != b ||
        gamma_eff.size() != b)
        throw std::invalid_argument("double_dqn_targets: batch size mismatch");
    if (!legal_next.empty() && static_cast<Eigen::Index>(legal_next.size()) != b)
        throw std::invalid_argument("double_dqn_targets: legality mask size mismatch");

    Eigen::VectorXd y(b);
    for (Eigen::Index i = 0; i < b; ++i) {
        if (done[i]) {
            y(i) = rewards(i);
            continue;
        }
        int best = -1;
        double best_q = 0.0;
        auto consider = [&](int action) {
            const double q = q_main_next(i, action);
            if (best < 0 || q > best_q) {
                best = action;
                best_q = q;
            }
        };
        if (legal_next.empty()) {
            for (int action = 0; action < a; ++action) consider(action);
        } else {
            for (int action : legal_next[i]) {
                if (action < 0 || action >= a)
                    throw std::invalid_argument("double_dqn_targets: legal action out of range");
                consider(action);
            }
        }
        if (best < 0) throw std::invalid_argument("double_dqn_targets: no legal next action");
        y(i) = rewards(i) + gamma_eff(i) * q_target_next(i, best);
    }
    return y;
}

DqfdTerms dqfd_loss(const DqfdBatch& batch, const std::vector<Tensor*>& params,
                    const Hyperparams& hp) {
    const Eigen::Index b = batch.q.rows();
    const Eigen::Index a = batch.q.cols();
    if (b == 0) throw std::invalid_argument("dqfd_loss: empty batch");
    if (static_cast<Eigen::Index>(batch.action.size()) != b ||
        batch.target_1step.size() != b || batch.target_nstep.size() != b ||
        static_cast<Eigen::Index>(batch.is_demo.size()) != b || batch.is_weight.size() != b)
        throw std::invalid_argument("dqfd_loss: batch field size mismatch");

    DqfdTerms terms;
    terms.dq = Eigen::MatrixXd::Zero(b, a);
    terms.td_abs = Eigen::VectorXd::Zero(b);
    const double inv_b = 1.0 / static_cast<double>(b);

    for (Eigen::Index i = 0; i < b; ++i) {
        const int act = batch.action[i];
        if (act < 0 || act >= a) throw std::invalid_argument("dqfd_loss: action out of range");
        const double w = batch.is_weight(i);
        const double q_taken = batch.q(i, act);

        const double delta1 = q_taken - batch.target_1step(i);
        terms.td += w * delta1 * delta1 * inv_b;
        terms.dq(i, act) += 2.0 * w * delta1 * inv_b;
        terms.td_abs(i) = std::abs(delta1);

        const double delta_n = q_taken - batch.target_nstep(i);
        terms.nstep += w * delta_n * delta_n * inv_b;
        terms.dq(i, act) += hp.lambda_nstep * 2.0 * w * delta_n * inv_b;

        if (batch.is_demo[i]) {
            // Large-margin classification: push Q(s, a_E) above every other
            // action by the margin. Expert action = the stored action.
            int best = 0;
            double best_val = batch.q(i, 0) + (0 == act ? 0.0 : hp.margin);
            for (int j = 1; j < a; ++j) {
                const double val = batch.q(i, j) + (j == act ? 0.0 : hp.margin);
                if (val > best_val) {
                    best = j;
                    best_val = val;
                }
            }
            const double expert_loss = best_val - q_taken;
            terms.expert += w * expert_loss * inv_b;
            if (best != act) {
                terms.dq(i, best) += hp.lambda_expert * w * inv_b;
                terms.dq(i, act) -= hp.lambda_expert * w * inv_b;
            }
        }
    }

    terms.l2 = param_squared_norm(params);
    terms.total = terms.td + hp.lambda_nstep * terms.nstep + hp.lambda_expert * terms.expert +
                  hp.lambda_l2 * terms.l2;
    return terms;
}

void add_l2_gradient(const std::vector<Tensor*>& params, double scale) {
    for (Tensor* p : params) p->grad += 2.0 * scale * p->value;
}

} // namespace gridrl
