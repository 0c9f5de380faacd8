#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <numeric>
#include <vector>

#include "unisod/common.hpp"

namespace unisod::nn {

// Dense double-precision tensor. Layout is row-major over `shape`,
// e.g. {C,H,W} features or {N,D} token sequences. `g` is allocated only
// when the tensor participates in gradient computation.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;
    std::vector<double> g;
    bool requires_grad = false;

    int64_t numel() const {
        int64_t n = 1;
        for (int d : shape) n *= d;
        return n;
    }
    int dim(size_t i) const { return shape.at(i); }
    int ndim() const { return static_cast<int>(shape.size()); }

    void alloc_grad() {
        if (g.size() != v.size()) g.assign(v.size(), 0.0);
    }
    void zero_grad() { std::fill(g.begin(), g.end(), 0.0); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

inline Tensor make_tensor(std::vector<int> shape, bool requires_grad = false) {
    Tensor t;
    t.shape = std::move(shape);
    int64_t n = t.numel();
    require(n >= 0, "tensor shape must be non-negative");
    t.v.assign(static_cast<size_t>(n), 0.0);
    t.requires_grad = requires_grad;
    if (requires_grad) t.alloc_grad();
    return t;
}

// Reverse-mode tape. Forward ops append nodes (owned here, pointer-stable)
// and backward closures; backward() replays the closures in reverse.
// Parameters live outside the graph (see ParamStore) and survive reset().
class Graph {
public:
    Tensor& make(std::vector<int> shape, bool requires_grad) {
        nodes_.push_back(make_tensor(std::move(shape), requires_grad));
        return nodes_.back();
    }

    void record(std::function<void()> fn) { tape_.push_back(std::move(fn)); }

    // Seeds d(root)/d(root) = seed for every element and replays the tape.
    void backward(Tensor& root, double seed = 1.0) {
        require(root.requires_grad, "backward() root does not require grad");
        root.alloc_grad();
        for (auto& x : root.g) x += seed;
        for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
    }

    void reset() {
        tape_.clear();
        nodes_.clear();
    }

    size_t node_count() const { return nodes_.size(); }

private:
    std::deque<Tensor> nodes_;
    std::vector<std::function<void()>> tape_;
};

}  // namespace unisod::nn
