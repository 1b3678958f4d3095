#include "paratope/tensor/init.hpp"

#include <cmath>

namespace paratope {

template <typename T>
Tensor<T> xavier_uniform(const Shape& shape, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
    if (fan_in + fan_out == 0) throw ShapeError("xavier_uniform: fans must not both be zero");
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor<T> out(shape);
    for (T& v : out.data()) v = static_cast<T>(dist(rng));
    return out;
}

template <typename T>
Tensor<T> xavier_uniform(const Shape& shape, std::mt19937_64& rng) {
    if (shape.size() == 2) return xavier_uniform<T>(shape, shape[0], shape[1], rng);
    if (shape.size() == 3) return xavier_uniform<T>(shape, shape[0] * shape[1], shape[0] * shape[2], rng);
    throw ShapeError("xavier_uniform: cannot infer fans for shape " + shape_str(shape) + "; pass them explicitly");
}

template Tensor<float> xavier_uniform<float>(const Shape&, std::mt19937_64&);
template Tensor<double> xavier_uniform<double>(const Shape&, std::mt19937_64&);
template Tensor<float> xavier_uniform<float>(const Shape&, std::size_t, std::size_t, std::mt19937_64&);
template Tensor<double> xavier_uniform<double>(const Shape&, std::size_t, std::size_t, std::mt19937_64&);

}  // namespace paratope
