#pragma once

#include <cassert>
#include <functional>
#include <utility>
#include <vector>

#include "oetr/tensor.hpp"

namespace oetr {

// Handle into a Graph. Valid only for the graph that produced it.
struct Value {
    int id = -1;
    bool ok() const { return id >= 0; }
};

// Reverse-mode tape. Each op appends a node holding the forward value and a
// backward closure; backward() walks the tape in reverse creation order.
// Gradients are only materialized for nodes reachable from a grad-requiring
// leaf, so inference graphs carry no backward state.
template <typename T>
class Graph {
public:
    using BackFn = std::function<void(Graph&)>;

    Value leaf(Tensor<T> v, bool requires_grad) {
        nodes_.push_back(Node{std::move(v), {}, nullptr, requires_grad});
        return Value{static_cast<int>(nodes_.size()) - 1};
    }

    Value constant(Tensor<T> v) { return leaf(std::move(v), false); }

    // Used by op implementations.
    Value emit(Tensor<T> v, bool requires_grad, BackFn back) {
        nodes_.push_back(Node{std::move(v), {}, requires_grad ? std::move(back) : nullptr,
                              requires_grad});
        return Value{static_cast<int>(nodes_.size()) - 1};
    }

    const Tensor<T>& value(Value v) const { return node(v).value; }
    Tensor<T>& value_mut(Value v) { return node(v).value; }
    bool requires_grad(Value v) const { return node(v).requires_grad; }

    // Gradient of the last backward() root w.r.t. v. Zero tensor when v did
    // not participate.
    const Tensor<T>& grad(Value v) {
        Node& n = node(v);
        ensure_grad(n);
        return n.grad;
    }
    Tensor<T>& grad_mut(Value v) {
        Node& n = node(v);
        ensure_grad(n);
        return n.grad;
    }

    // root must be scalar-valued (one element).
    void backward(Value root) {
        Node& r = node(root);
        assert(r.value.numel() == 1);
        for (auto& n : nodes_)
            if (n.requires_grad && !n.grad.data.empty()) n.grad.fill(T(0));
        ensure_grad(r);
        r.grad.fill(T(1));
        for (int i = root.id; i >= 0; --i) {
            Node& n = nodes_[static_cast<std::size_t>(i)];
            if (n.back) n.back(*this);
        }
    }

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        BackFn back;
        bool requires_grad = false;
    };

    Node& node(Value v) {
        assert(v.ok() && static_cast<std::size_t>(v.id) < nodes_.size());
        return nodes_[static_cast<std::size_t>(v.id)];
    }
    const Node& node(Value v) const {
        assert(v.ok() && static_cast<std::size_t>(v.id) < nodes_.size());
        return nodes_[static_cast<std::size_t>(v.id)];
    }
    void ensure_grad(Node& n) {
        if (n.grad.data.empty()) n.grad = Tensor<T>::zeros(n.value.shape);
    }

    std::vector<Node> nodes_;
};

}  // namespace oetr
