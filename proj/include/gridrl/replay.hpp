#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "gridrl/rng.hpp"

namespace gridrl {

/// Complete binary tree of partial sums over leaf priorities. Supports
/// O(log n) point updates and proportional prefix search.
class SumTree {
public:
    explicit SumTree(std::size_t capacity);

    void set(std::size_t index, double priority);
    double get(std::size_t index) const;
    double total() const;
    /// Index of the leaf where the running sum first exceeds mass.
    /// mass must lie in [0, total()).
    std::size_t find(double mass) const;
    std::size_t capacity() const { return capacity_; }

private:
    std::size_t capacity_;
    std::size_t leaves_;  // capacity rounded up to a power of two
    std::vector<double> nodes_;
};

/// Drawn batch: buffer slots plus normalized importance-sampling weights.
struct ReplaySample {
    std::vector<std::size_t> indices;
    std::vector<double> weights;
};

/// Proportional prioritized replay over an arbitrary transition payload.
/// Demonstration transitions are appended first and are never evicted;
/// collected transitions cycle through the remaining capacity.
template <typename T>
class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, double alpha, double eps_prio, double eps_demo)
        : capacity_(capacity),
          alpha_(alpha),
          eps_prio_(eps_prio),
          eps_demo_(eps_demo),
          tree_(capacity) {
        if (capacity == 0) throw std::invalid_argument("ReplayBuffer: zero capacity");
        items_.reserve(capacity);
    }

    /// Appends a protected demonstration. Must precede all add() calls.
    std::size_t add_demo(T item) {
        if (items_.size() != demo_count_)
            throw std::logic_error("ReplayBuffer: demonstrations must be added first");
        if (demo_count_ == capacity_)
            throw std::invalid_argument("ReplayBuffer: capacity exhausted by demonstrations");
        items_.push_back(std::move(item));
        const std::size_t slot = demo_count_++;
        write(slot, max_raw_, /*demo=*/true);
        return slot;
    }

    /// Appends a collected transition with maximal priority, evicting the
    /// oldest collected transition once the non-demo region is full.
    std::size_t add(T item) {
        if (demo_count_ == capacity_)
            throw std::invalid_argument("ReplayBuffer: no capacity beyond demonstrations");
        std::size_t slot;
        if (items_.size() < capacity_) {
            slot = items_.size();
            items_.push_back(std::move(item));
        } else {
            slot = demo_count_ + next_;
            items_[slot] = std::move(item);
        }
        next_ = (slot + 1 - demo_count_) % (capacity_ - demo_count_);
        write(slot, max_raw_, /*demo=*/false);
        return slot;
    }

    /// Stratified proportional draw of k slots with IS weights
    /// w_i = (N * P(i))^-beta, normalized by the batch maximum.
    ReplaySample sample(std::size_t k, double beta, Rng& rng) const {
        if (size() == 0) throw std::logic_error("ReplayBuffer: sampling from empty buffer");
        if (k == 0) throw std::invalid_argument("ReplayBuffer: empty batch");
        const double total = tree_.total();
        if (!(total > 0.0)) throw std::logic_error("ReplayBuffer: zero total priority");

        ReplaySample out;
        out.indices.resize(k);
        out.weights.resize(k);
        const double segment = total / static_cast<double>(k);
        const double n = static_cast<double>(size());
        double max_w = 0.0;
        for (std::size_t s = 0; s < k; ++s) {
            const double mass = (static_cast<double>(s) + rng.uniform()) * segment;
            const std::size_t idx = tree_.find(std::min(mass, std::nexttoward(total, 0.0)));
            out.indices[s] = idx;
            const double prob = tree_.get(idx) / total;
            out.weights[s] = std::pow(n * prob, -beta);
            max_w = std::max(max_w, out.weights[s]);
        }
        for (double& w : out.weights) w /= max_w;
        return out;
    }

    /// Re-prioritizes a slot from its fresh absolute TD error.
    void update_priority(std::size_t index, double abs_td) {
        if (index >= items_.size()) throw std::out_of_range("ReplayBuffer: bad slot");
        const bool demo = demo_[index] != 0;
        write(index, std::abs(abs_td) + eps_prio_ + (demo ? eps_demo_ : 0.0), demo);
    }

    const T& at(std::size_t index) const { return items_.at(index); }
    T& at(std::size_t index) { return items_.at(index); }
    bool is_demo(std::size_t index) const { return demo_.at(index) != 0; }
    /// Tree priority (already exponentiated) — exposed for tests.
    double priority(std::size_t index) const { return tree_.get(index); }

    std::size_t size() const { return items_.size(); }
    std::size_t demo_count() const { return demo_count_; }
    std::size_t capacity() const { return capacity_; }

private:
    void write(std::size_t slot, double raw, bool demo) {
        max_raw_ = std::max(max_raw_, raw);
        if (slot >= demo_.size()) demo_.resize(slot + 1, 0);
        demo_[slot] = demo ? 1 : 0;
        tree_.set(slot, std::pow(raw, alpha_));
    }

    std::size_t capacity_;
    double alpha_;
    double eps_prio_;
    double eps_demo_;
    std::vector<T> items_;
    std::vector<std::uint8_t> demo_;
    std::size_t demo_count_ = 0;
    std::size_t next_ = 0;  // ring position within the non-demo region
    SumTree tree_;
    double max_raw_ = 1.0;
};

} // namespace gridrl
