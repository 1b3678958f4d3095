#include "paratope/tensor/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace paratope {

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_numel(shape_)) {
        throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                         shape_str(shape_));
    }
}

template <typename T>
std::size_t Tensor<T>::dim(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(shape_));
    }
    return shape_[axis];
}

template <typename T>
std::size_t Tensor<T>::offset(std::initializer_list<std::size_t> index) const {
    if (index.size() != shape_.size()) {
        throw ShapeError("index rank " + std::to_string(index.size()) + " does not match shape " + shape_str(shape_));
    }
    std::size_t off = 0;
    std::size_t axis = 0;
    for (std::size_t i : index) {
        if (i >= shape_[axis]) {
            throw ShapeError("index " + std::to_string(i) + " out of range on axis " + std::to_string(axis) +
                             " of shape " + shape_str(shape_));
        }
        off = off * shape_[axis] + i;
        ++axis;
    }
    return off;
}

template <typename T>
T& Tensor<T>::at(std::initializer_list<std::size_t> index) {
    return data_[offset(index)];
}

template <typename T>
const T& Tensor<T>::at(std::initializer_list<std::size_t> index) const {
    return data_[offset(index)];
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape shape) const {
    if (shape_numel(shape) != data_.size()) {
        throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    }
    return Tensor(std::move(shape), data_);
}

template <typename T>
void Tensor<T>::fill(T value) {
    std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
bool Tensor<T>::all_finite() const noexcept {
    for (T v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace paratope
