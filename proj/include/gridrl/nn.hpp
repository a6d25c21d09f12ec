#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "gridrl/rng.hpp"

namespace gridrl {

/// A learnable parameter block with its gradient accumulator. Biases are
/// stored as 1 x out matrices so every parameter is handled uniformly.
struct Tensor {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;

    Tensor() = default;
    Tensor(int rows, int cols)
        : value(Eigen::MatrixXd::Zero(rows, cols)), grad(Eigen::MatrixXd::Zero(rows, cols)) {}

    void zero_grad() { grad.setZero(); }
};

/// Fan-in scaled uniform initialization, seeded through the caller's Rng.
void init_fan_in(Tensor& w, int fan_in, Rng& rng);

/// Affine map y = x·W + b over row-sample batches.
class Linear {
public:
    Linear() = default;
    Linear(int in, int out, Rng& rng);

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
    /// Accumulates dW, db from the cached input and returns dx.
    Eigen::MatrixXd backward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& dy);

    int in() const { return static_cast<int>(W.value.rows()); }
    int out() const { return static_cast<int>(W.value.cols()); }

    Tensor W;
    Tensor b;
};

/// Dense ReLU network: widths = {in, h1, ..., out}. The final layer is
/// linear (no activation) unless relu_last is set.
class Mlp {
public:
    Mlp() = default;
    Mlp(const std::vector<int>& widths, bool relu_last, Rng& rng);

    const Eigen::MatrixXd& forward(const Eigen::MatrixXd& x);
    /// Forward without touching the training cache.
    Eigen::MatrixXd infer(const Eigen::MatrixXd& x) const;
    /// Backprop through the cached forward; returns dx.
    Eigen::MatrixXd backward(const Eigen::MatrixXd& dout);

    std::vector<Tensor*> params();
    int in() const { return layers_.front().in(); }
    int out() const { return layers_.back().out(); }

private:
    std::vector<Linear> layers_;
    bool relu_last_ = false;
    std::vector<Eigen::MatrixXd> acts_;  // acts_[k] = input of layer k
    std::vector<Eigen::MatrixXd> pre_;   // pre-activation outputs
};

/// Dueling Q network: shared ReLU trunk, scalar value head and per-action
/// advantage head, combined as Q = V + A - mean_a A.
class DuelingNet {
public:
    DuelingNet() = default;
    DuelingNet(int in, int hidden, int actions, Rng& rng);

    const Eigen::MatrixXd& forward(const Eigen::MatrixXd& x);  // n x actions
    /// Forward without touching the training cache.
    Eigen::MatrixXd infer(const Eigen::MatrixXd& x) const;
    /// Value stream alone (the shaping potential); no cache side effects.
    Eigen::VectorXd value_stream(const Eigen::MatrixXd& x) const;
    /// Backprop dL/dQ; returns dL/dx (the GNN embedding gradient path).
    Eigen::MatrixXd backward(const Eigen::MatrixXd& dq);

    std::vector<Tensor*> params();
    int in() const { return trunk_.in(); }
    int actions() const { return adv_.out(); }

private:
    Mlp trunk_;
    Linear value_;
    Linear adv_;
    Eigen::MatrixXd h_, v_, a_, q_;
};

/// Message-passing layer stack over a fixed graph: per layer,
/// H' = relu(H·W_self + M·H·W_nbr + b) with M the row-normalized adjacency.
class Gnn {
public:
    Gnn() = default;
    Gnn(const std::vector<int>& widths, Rng& rng);

    const Eigen::MatrixXd& forward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& m);
    /// Forward without touching the training cache.
    Eigen::MatrixXd infer(const Eigen::MatrixXd& x, const Eigen::MatrixXd& m) const;
    /// Backprop through the cached forward; returns dx.
    Eigen::MatrixXd backward(const Eigen::MatrixXd& dout);

    std::vector<Tensor*> params();
    int in() const { return static_cast<int>(layers_.front().w_self.value.rows()); }
    int out() const { return static_cast<int>(layers_.back().w_self.value.cols()); }

private:
    struct Layer {
        Tensor w_self;
        Tensor w_nbr;
        Tensor b;
    };
    std::vector<Layer> layers_;
    Eigen::MatrixXd m_;
    std::vector<Eigen::MatrixXd> acts_;  // input of each layer
    std::vector<Eigen::MatrixXd> agg_;   // M·H per layer
    std::vector<Eigen::MatrixXd> pre_;
};

/// M = D^-1 · A; rows of isolated nodes stay zero.
Eigen::MatrixXd row_normalize(const Eigen::MatrixXd& adjacency);

/// Adam with element-wise gradient clipping applied before the update.
class AdamOptimizer {
public:
    AdamOptimizer() = default;
    AdamOptimizer(std::vector<Tensor*> params, double lr, double clip);

    /// One update. Returns false (and changes nothing) if any gradient is
    /// non-finite.
    bool step();
    void zero_grad();
    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }

private:
    std::vector<Tensor*> params_;
    std::vector<Eigen::MatrixXd> m_;
    std::vector<Eigen::MatrixXd> v_;
    double lr_ = 1e-3;
    double clip_ = 3.0;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    long t_ = 0;
};

/// target' = tau·main + (1 - tau)·target, element-wise over matched blocks.
void soft_update(const std::vector<Tensor*>& main, const std::vector<Tensor*>& target,
                 double tau);
void copy_params(const std::vector<Tensor*>& from, const std::vector<Tensor*>& to);
/// Sum of squares over all parameter values (the L2 regularizer); the
/// matching gradient contribution is 2·w per entry.
double param_squared_norm(const std::vector<Tensor*>& params);

struct FdReport {
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
};

/// Central-difference check of already-populated analytic gradients.
/// loss_fn must re-run the forward pass from scratch on each call.
FdReport finite_diff_check(const std::vector<Tensor*>& params,
                           const std::function<double()>& loss_fn, double epsilon);

} // namespace gridrl
