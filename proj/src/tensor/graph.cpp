#include "paratope/tensor/graph.hpp"

namespace paratope {

template <typename T>
Var<T> Graph<T>::push(Node node) {
    if (check_finite_ && !node.value.all_finite()) {
        throw NumericError(std::string("non-finite value produced by op '") + node.op + "'");
    }
    nodes_.push_back(std::move(node));
    return Var<T>{this, nodes_.size() - 1};
}

template <typename T>
Var<T> Graph<T>::constant(Tensor<T> value) {
    Node n;
    n.op = "constant";
    n.value = std::move(value);
    return push(std::move(n));
}

template <typename T>
Var<T> Graph<T>::parameter(Parameter<T>& param) {
    if (param.grad.shape() != param.value.shape() || param.grad.numel() != param.value.numel()) param.zero_grad();
    Node n;
    n.op = "parameter";
    n.value = param.value;
    n.requires_grad = true;
    n.param = &param;
    return push(std::move(n));
}

template <typename T>
Var<T> Graph<T>::record(const char* op, Tensor<T> value, std::span<const Var<T>> inputs, Backward backward) {
    Node n;
    n.op = op;
    n.value = std::move(value);
    for (const Var<T>& in : inputs) {
        if (in.graph != this) throw ShapeError(std::string("op '") + op + "' mixes nodes of different graphs");
        n.requires_grad = n.requires_grad || nodes_.at(in.id).requires_grad;
    }
    if (n.requires_grad) n.backward = std::move(backward);
    return push(std::move(n));
}

template <typename T>
Tensor<T>* Graph<T>::grad_sink(Var<T> v) {
    Node& n = nodes_.at(v.id);
    if (!n.requires_grad) return nullptr;
    if (n.grad.shape() != n.value.shape() || n.grad.numel() != n.value.numel()) n.grad = Tensor<T>::zeros_like(n.value);
    return &n.grad;
}

template <typename T>
void Graph<T>::backward(Var<T> loss) {
    Node& root = nodes_.at(loss.id);
    if (root.value.numel() != 1) {
        throw ShapeError("backward() needs a scalar root, got shape " + shape_str(root.value.shape()));
    }
    if (!root.requires_grad) return;
    for (Node& n : nodes_) n.grad = Tensor<T>();
    root.grad = Tensor<T>(root.value.shape(), T{1});

    for (std::size_t id = loss.id + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (!n.requires_grad || n.grad.empty()) continue;
        if (n.param != nullptr) {
            auto dst = n.param->grad.data();
            auto src = n.grad.data();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        } else if (n.backward) {
            n.backward(*this, n.grad, n.value);
        }
    }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace paratope
