#pragma once

#include <cstddef>
#include <random>

#include "paratope/tensor/tensor.hpp"

namespace paratope {

/// Glorot/Xavier uniform fill in +-sqrt(6 / (fan_in + fan_out)).
///
/// Fans are inferred for matrices [in, out] and kernels [K, in, out]
/// (receptive field folded into both fans); vectors need explicit fans.
template <typename T>
Tensor<T> xavier_uniform(const Shape& shape, std::mt19937_64& rng);

template <typename T>
Tensor<T> xavier_uniform(const Shape& shape, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

}  // namespace paratope
