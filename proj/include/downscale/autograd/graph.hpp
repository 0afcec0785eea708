#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "downscale/core/tensor.hpp"

namespace downscale::ag {

// Reverse-mode tape. Each op builds a Node whose backward_fn pulls this
// node's grad and accumulates into its parents. Children hold shared_ptrs
// to parents only, so releasing the loss root frees the whole graph while
// leaf parameters survive in their owning modules.

template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // allocated lazily, same shape as value
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node<T>>> parents;
    std::function<void(Node<T>&)> backward_fn;
    const char* op = "leaf";

    Tensor<T>& ensure_grad() {
        if (grad.numel() != value.numel()) grad = Tensor<T>(value.shape());
        return grad;
    }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

// When grad mode is off (inference), ops produce detached constants and the
// tape is never built.
inline bool& grad_mode_flag() {
    thread_local bool enabled = true;
    return enabled;
}

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_mode_flag()) { grad_mode_flag() = false; }
    ~NoGradGuard() { grad_mode_flag() = prev; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

template <typename T>
Var<T> leaf(Tensor<T> value, bool requires_grad = false) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return n;
}

template <typename T>
Var<T> constant(Tensor<T> value) {
    return leaf<T>(std::move(value), false);
}

// Copies the value out of the graph; gradients stop here.
template <typename T>
Var<T> detach(const Var<T>& x) {
    return leaf<T>(x->value.clone(), false);
}

template <typename T>
Var<T> make_node(Tensor<T> value, std::vector<Var<T>> parents,
                 std::function<void(Node<T>&)> backward_fn, const char* op) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->op = op;
    bool rg = false;
    for (const auto& p : parents) rg = rg || (p && p->requires_grad);
    if (rg && grad_mode_flag()) {
        n->requires_grad = true;
        n->parents = std::move(parents);
        n->backward_fn = std::move(backward_fn);
    }
    return n;
}

// Topological order (parents before children), iterative.
template <typename T>
std::vector<Node<T>*> topo_order(const Var<T>& root) {
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> visited;
    struct Frame {
        Node<T>* node;
        std::size_t next_parent;
    };
    std::vector<Frame> stack;
    if (!root || !root->requires_grad) return order;
    stack.push_back({root.get(), 0});
    visited.insert(root.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            Node<T>* p = f.node->parents[f.next_parent++].get();
            if (p && p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }
    return order;  // parents first
}

// Backpropagate from a scalar root (or from an explicit seed gradient).
template <typename T>
void backward(const Var<T>& root, const Tensor<T>* seed = nullptr) {
    if (!root) fail("backward: null root");
    if (!root->requires_grad) return;
    if (seed) {
        if (!seed->same_shape(root->value)) fail<ShapeError>("backward: seed shape mismatch");
        root->ensure_grad();
        for (std::int64_t i = 0; i < seed->numel(); ++i) root->grad[i] += (*seed)[i];
    } else {
        if (root->value.numel() != 1) fail<ShapeError>("backward: non-scalar root needs a seed gradient");
        root->ensure_grad();
        root->grad[0] += T(1);
    }
    auto order = topo_order(root);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* n = *it;
        if (n->backward_fn && n->grad.numel() == n->value.numel()) n->backward_fn(*n);
    }
}

template <typename T>
void zero_grad(const std::vector<Var<T>>& params) {
    for (const auto& p : params)
        if (p) p->grad = Tensor<T>();
}

}  // namespace downscale::ag
