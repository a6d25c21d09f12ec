#include "gridrl/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace gridrl {

namespace {

Eigen::MatrixXd relu(const Eigen::MatrixXd& z) { return z.cwiseMax(0.0); }

/// dz = dy masked to where the pre-activation was strictly positive.
Eigen::MatrixXd relu_backward(const Eigen::MatrixXd& pre, const Eigen::MatrixXd& dy) {
    return (pre.array() > 0.0).cast<double>() * dy.array();
}

} // namespace

void init_fan_in(Tensor& w, int fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index i = 0; i < w.value.rows(); ++i)
        for (Eigen::Index j = 0; j < w.value.cols(); ++j)
            w.value(i, j) = rng.uniform(-bound, bound);
}

Linear::Linear(int in, int out, Rng& rng) : W(in, out), b(1, out) {
    if (in <= 0 || out <= 0) throw std::invalid_argument("Linear: non-positive width");
    init_fan_in(W, in, rng);
    init_fan_in(b, in, rng);
}

Eigen::MatrixXd Linear::forward(const Eigen::MatrixXd& x) const {
    if (x.cols() != W.value.rows())
        throw std::invalid_argument("Linear::forward: input width mismatch");
    return (x * W.value).rowwise() + b.value.row(0);
}

Eigen::MatrixXd Linear::backward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& dy) {
    W.grad += x.transpose() * dy;
    b.grad.row(0) += dy.colwise().sum();
    return dy * W.value.transpose();
}

Mlp::Mlp(const std::vector<int>& widths, bool relu_last, Rng& rng) : relu_last_(relu_last) {
    if (widths.size() < 2) throw std::invalid_argument("Mlp: need at least two widths");
    for (std::size_t k = 0; k + 1 < widths.size(); ++k)
        layers_.emplace_back(widths[k], widths[k + 1], rng);
}

const Eigen::MatrixXd& Mlp::forward(const Eigen::MatrixXd& x) {
    acts_.assign(1, x);
    pre_.clear();
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        pre_.push_back(layers_[k].forward(acts_.back()));
        const bool active = (k + 1 < layers_.size()) || relu_last_;
        acts_.push_back(active ? relu(pre_.back()) : pre_.back());
    }
    return acts_.back();
}

Eigen::MatrixXd Mlp::infer(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd h = x;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        h = layers_[k].forward(h);
        if ((k + 1 < layers_.size()) || relu_last_) h = relu(h);
    }
    return h;
}

Eigen::MatrixXd Mlp::backward(const Eigen::MatrixXd& dout) {
    if (acts_.size() != layers_.size() + 1)
        throw std::logic_error("Mlp::backward: no cached forward pass");
    Eigen::MatrixXd grad = dout;
    for (std::size_t k = layers_.size(); k-- > 0;) {
        const bool active = (k + 1 < layers_.size()) || relu_last_;
        if (active) grad = relu_backward(pre_[k], grad);
        grad = layers_[k].backward(acts_[k], grad);
    }
    return grad;
}

std::vector<Tensor*> Mlp::params() {
    std::vector<Tensor*> out;
    for (auto& layer : layers_) {
        out.push_back(&layer.W);
        out.push_back(&layer.b);
    }
    return out;
}

DuelingNet::DuelingNet(int in, int hidden, int actions, Rng& rng)
    : trunk_({in, hidden, hidden}, /*relu_last=*/true, rng),
      value_(hidden, 1, rng),
      adv_(hidden, actions, rng) {
    if (actions <= 0) throw std::invalid_argument("DuelingNet: non-positive action count");
}

const Eigen::MatrixXd& DuelingNet::forward(const Eigen::MatrixXd& x) {
    h_ = trunk_.forward(x);
    v_ = value_.forward(h_);
    a_ = adv_.forward(h_);
    q_ = (a_.colwise() + v_.col(0)).colwise() - a_.rowwise().mean();
    return q_;
}

Eigen::MatrixXd DuelingNet::infer(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd h = trunk_.infer(x);
    Eigen::MatrixXd v = value_.forward(h);
    Eigen::MatrixXd a = adv_.forward(h);
    return (a.colwise() + v.col(0)).colwise() - a.rowwise().mean();
}

Eigen::VectorXd DuelingNet::value_stream(const Eigen::MatrixXd& x) const {
    return value_.forward(trunk_.infer(x)).col(0);
}

Eigen::MatrixXd DuelingNet::backward(const Eigen::MatrixXd& dq) {
    if (h_.size() == 0) throw std::logic_error("DuelingNet::backward: no cached forward pass");
    // Q = V + A - mean(A):  dV_i = sum_j dQ_ij,  dA_ij = dQ_ij - mean_j dQ_i.
    Eigen::MatrixXd dv = dq.rowwise().sum();
    Eigen::MatrixXd da = dq.colwise() - dq.rowwise().mean();
    Eigen::MatrixXd dh = value_.backward(h_, dv) + adv_.backward(h_, da);
    return trunk_.backward(dh);
}

std::vector<Tensor*> DuelingNet::params() {
    std::vector<Tensor*> out = trunk_.params();
    out.push_back(&value_.W);
    out.push_back(&value_.b);
    out.push_back(&adv_.W);
    out.push_back(&adv_.b);
    return out;
}

Gnn::Gnn(const std::vector<int>& widths, Rng& rng) {
    if (widths.size() < 2) throw std::invalid_argument("Gnn: need at least two widths");
    for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
        Layer layer;
        layer.w_self = Tensor(widths[k], widths[k + 1]);
        layer.w_nbr = Tensor(widths[k], widths[k + 1]);
        layer.b = Tensor(1, widths[k + 1]);
        init_fan_in(layer.w_self, widths[k], rng);
        init_fan_in(layer.w_nbr, widths[k], rng);
        init_fan_in(layer.b, widths[k], rng);
        layers_.push_back(std::move(layer));
    }
}

const Eigen::MatrixXd& Gnn::forward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& m) {
    if (m.rows() != x.rows() || m.cols() != x.rows())
        throw std::invalid_argument("Gnn::forward: adjacency shape mismatch");
    m_ = m;
    acts_.assign(1, x);
    agg_.clear();
    pre_.clear();
    for (auto& layer : layers_) {
        const Eigen::MatrixXd& h = acts_.back();
        agg_.push_back(m_ * h);
        Eigen::MatrixXd z = (h * layer.w_self.value + agg_.back() * layer.w_nbr.value).rowwise() +
                            layer.b.value.row(0);
        pre_.push_back(z);
        acts_.push_back(relu(z));
    }
    return acts_.back();
}

Eigen::MatrixXd Gnn::infer(const Eigen::MatrixXd& x, const Eigen::MatrixXd& m) const {
    Eigen::MatrixXd h = x;
    for (const auto& layer : layers_) {
        Eigen::MatrixXd z = (h * layer.w_self.value + (m * h) * layer.w_nbr.value).rowwise() +
                            layer.b.value.row(0);
        h = relu(z);
    }
    return h;
}

Eigen::MatrixXd Gnn::backward(const Eigen::MatrixXd& dout) {
    if (acts_.size() != layers_.size() + 1)
        throw std::logic_error("Gnn::backward: no cached forward pass");
    Eigen::MatrixXd grad = dout;
    for (std::size_t k = layers_.size(); k-- > 0;) {
        Layer& layer = layers_[k];
        Eigen::MatrixXd dz = relu_backward(pre_[k], grad);
        layer.w_self.grad += acts_[k].transpose() * dz;
        layer.w_nbr.grad += agg_[k].transpose() * dz;
        layer.b.grad.row(0) += dz.colwise().sum();
        grad = dz * layer.w_self.value.transpose() +
               m_.transpose() * (dz * layer.w_nbr.value.transpose());
    }
    return grad;
}

std::vector<Tensor*> Gnn::params() {
    std::vector<Tensor*> out;
    for (auto& layer : layers_) {
        out.push_back(&layer.w_self);
        out.push_back(&layer.w_nbr);
        out.push_back(&layer.b);
    }
    return out;
}

Eigen::MatrixXd row_normalize(const Eigen::MatrixXd& adjacency) {
    Eigen::MatrixXd m = adjacency;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const double degree = m.row(i).sum();
        if (degree > 0.0) m.row(i) /= degree;
    }
    return m;
}

AdamOptimizer::AdamOptimizer(std::vector<Tensor*> params, double lr, double clip)
    : params_(std::move(params)), lr_(lr), clip_(clip) {
    for (const Tensor* p : params_) {
        m_.emplace_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
        v_.emplace_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
    }
}

bool AdamOptimizer::step() {
    for (const Tensor* p : params_)
        if (!p->grad.allFinite()) return false;
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor* p = params_[i];
        Eigen::ArrayXXd g = p->grad.array().min(clip_).max(-clip_);
        m_[i] = beta1_ * m_[i].array() + (1.0 - beta1_) * g;
        v_[i] = beta2_ * v_[i].array() + (1.0 - beta2_) * g.square();
        Eigen::ArrayXXd m_hat = m_[i].array() / bc1;
        Eigen::ArrayXXd v_hat = v_[i].array() / bc2;
        p->value.array() -= lr_ * m_hat / (v_hat.sqrt() + eps_);
    }
    return true;
}

void AdamOptimizer::zero_grad() {
    for (Tensor* p : params_) p->zero_grad();
}

void soft_update(const std::vector<Tensor*>& main, const std::vector<Tensor*>& target,
                 double tau) {
    if (main.size() != target.size())
        throw std::invalid_argument("soft_update: parameter list size mismatch");
    for (std::size_t i = 0; i < main.size(); ++i) {
        if (main[i]->value.rows() != target[i]->value.rows() ||
            main[i]->value.cols() != target[i]->value.cols())
            throw std::invalid_argument("soft_update: parameter shape mismatch");
        target[i]->value = tau * main[i]->value + (1.0 - tau) * target[i]->value;
    }
}

void copy_params(const std::vector<Tensor*>& from, const std::vector<Tensor*>& to) {
    soft_update(from, to, 1.0);
}

double param_squared_norm(const std::vector<Tensor*>& params) {
    double total = 0.0;
    for (const Tensor* p : params) total += p->value.squaredNorm();
    return total;
}

FdReport finite_diff_check(const std::vector<Tensor*>& params,
                           const std::function<double()>& loss_fn, double epsilon) {
    FdReport report;
    for (Tensor* p : params) {
        for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
            for (Eigen::Index j = 0; j < p->value.cols(); ++j) {
                const double saved = p->value(i, j);
                p->value(i, j) = saved + epsilon;
                const double up = loss_fn();
                p->value(i, j) = saved - epsilon;
                const double down = loss_fn();
                p->value(i, j) = saved;
                const double numeric = (up - down) / (2.0 * epsilon);
                const double analytic = p->grad(i, j);
                const double abs_err = std::abs(analytic - numeric);
                const double rel_err =
                    abs_err / std::max({std::abs(analytic), std::abs(numeric), 1e-3});
                report.max_abs_err = std::max(report.max_abs_err, abs_err);
                report.max_rel_err = std::max(report.max_rel_err, rel_err);
            }
        }
    }
    return report;
}

} // namespace gridrl
