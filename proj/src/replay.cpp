#include "gridrl/replay.hpp"

namespace gridrl {

SumTree::SumTree(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("SumTree: zero capacity");
    leaves_ = 1;
    while (leaves_ < capacity_) leaves_ <<= 1;
    nodes_.assign(2 * leaves_, 0.0);
}

void SumTree::set(std::size_t index, double priority) {
    if (index >= capacity_) throw std::out_of_range("SumTree: index beyond capacity");
    if (!(priority >= 0.0) || !std::isfinite(priority))
        throw std::invalid_argument("SumTree: priority must be finite and non-negative");
    std::size_t node = leaves_ + index;
    nodes_[node] = priority;
    for (node >>= 1; node >= 1; node >>= 1)
        nodes_[node] = nodes_[2 * node] + nodes_[2 * node + 1];
}

double SumTree::get(std::size_t index) const {
    if (index >= capacity_) throw std::out_of_range("SumTree: index beyond capacity");
    return nodes_[leaves_ + index];
}

double SumTree::total() const { return nodes_[1]; }

std::size_t SumTree::find(double mass) const {
    if (!(mass >= 0.0) || mass >= total())
        throw std::invalid_argument("SumTree: mass outside [0, total)");
    std::size_t node = 1;
    while (node < leaves_) {
        const std::size_t left = 2 * node;
        if (mass < nodes_[left]) {
            node = left;
        } else {
            mass -= nodes_[left];
            node = left + 1;
        }
    }
    return node - leaves_;
}

} // namespace gridrl
