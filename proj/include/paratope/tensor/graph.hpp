#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>

#include "paratope/tensor/tensor.hpp"

namespace paratope {

/// A learnable tensor together with its accumulated gradient.
template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    /// Whether the L2 penalty applies (multiplicative weights only).
    bool decayed = false;

    Parameter() = default;
    Parameter(std::string n, Tensor<T> v, bool decay = false)
        : name(std::move(n)), value(std::move(v)), grad(Tensor<T>::zeros_like(value)), decayed(decay) {}

    void zero_grad() { grad = Tensor<T>::zeros_like(value); }
};

template <typename T>
class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
template <typename T>
struct Var {
    Graph<T>* graph = nullptr;
    std::size_t id = 0;

    const Tensor<T>& value() const;
    const Shape& shape() const { return value().shape(); }
    std::size_t numel() const { return value().numel(); }
};

/// Tape of differentiable operations recorded in execution order.
///
/// Nodes are appended after their inputs, so id order is a topological
/// order and backward() is a single reverse sweep. Parameters enter as
/// leaves; backward() adds their gradient into Parameter::grad, so two
/// backward passes without Parameter::zero_grad() accumulate.
template <typename T>
class Graph {
public:
    /// Called with the node's output gradient and output value; pushes into
    /// the input sinks.
    using Backward = std::function<void(Graph&, const Tensor<T>& grad_out, const Tensor<T>& out)>;

    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Var<T> constant(Tensor<T> value);
    Var<T> parameter(Parameter<T>& param);

    /// Appends an op node. The backward closure is dropped when no input
    /// requires a gradient.
    Var<T> record(const char* op, Tensor<T> value, std::span<const Var<T>> inputs, Backward backward);
    Var<T> record(const char* op, Tensor<T> value, std::initializer_list<Var<T>> inputs, Backward backward) {
        return record(op, std::move(value), std::span<const Var<T>>(inputs.begin(), inputs.size()), std::move(backward));
    }

    const Tensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }
    bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
    const char* op(std::size_t id) const { return nodes_.at(id).op; }

    /// Gradient accumulator for an input, or nullptr when the input does not
    /// need one. Allocated as zeros on first use.
    Tensor<T>* grad_sink(Var<T> v);

    /// Gradient of a node after backward(); empty if never reached.
    const Tensor<T>& grad(Var<T> v) const { return nodes_.at(v.id).grad; }

    /// Reverse sweep from a scalar root. Throws ShapeError for non-scalar roots.
    void backward(Var<T> loss);

    std::size_t size() const noexcept { return nodes_.size(); }

    /// When enabled every recorded value is checked for NaN/Inf.
    void set_check_finite(bool on) noexcept { check_finite_ = on; }

private:
    struct Node {
        const char* op = "";
        Tensor<T> value;
        Tensor<T> grad;
        bool requires_grad = false;
        Parameter<T>* param = nullptr;
        Backward backward;
    };

    Var<T> push(Node node);

    std::deque<Node> nodes_;
    bool check_finite_ = false;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
    return graph->value(id);
}

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace paratope
