#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "paratope/model/model.hpp"

namespace paratope::testing {

template <typename T>
Tensor<T> random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    Tensor<T> t(shape);
    for (T& v : t.data()) v = static_cast<T>(d(rng));
    return t;
}

/// Mask [B, L] whose row b has lengths[b] leading ones.
template <typename T>
Tensor<T> prefix_mask(std::size_t len, const std::vector<std::size_t>& lengths) {
    Tensor<T> m(Shape{lengths.size(), len});
    for (std::size_t b = 0; b < lengths.size(); ++b) {
        for (std::size_t i = 0; i < lengths[b]; ++i) m[b * len + i] = T{1};
    }
    return m;
}

struct GradCheck {
    double max_rel_error = 0;
    std::string worst;
    std::size_t checked = 0;
};

/// Central finite differences of a scalar loss against the analytic
/// gradient accumulated by Graph::backward. The loss builder is re-run on a
/// fresh graph for every evaluation and must be deterministic. At most
/// max_entries entries per parameter are probed (sampled with rng).
/// Relative error is |a - n| / max(|a|, |n|, floor).
GradCheck check_gradients(const std::vector<Parameter<double>*>& params,
                          const std::function<Var<double>(Graph<double>&)>& loss, std::mt19937_64& rng,
                          std::size_t max_entries = static_cast<std::size_t>(-1), double h = 1e-5,
                          double floor = 1e-6);

/// Scalar sum(out * weights) with fixed random weights, so every output
/// entry contributes a distinct gradient.
Var<double> weighted_sum(Var<double> out, const Tensor<double>& weights);

/// Direct per-pair evaluation of the attention equations for one query:
/// returns (alpha over keys, output feature row).
struct AttentionRow {
    std::vector<double> alpha;
    std::vector<double> out;
};

/// queries/keys: rows of raw features (before the linear maps).
AttentionRow attention_row_oracle(const std::vector<double>& query, const std::vector<std::vector<double>>& keys,
                                  const Tensor<double>& w_query, const Tensor<double>& w_key,
                                  const Tensor<double>& a, double slope);

/// Row r of a [R, L, D] tensor at position i.
std::vector<double> feature_row(const Tensor<double>& x, std::size_t r, std::size_t i);

/// Tiny model configuration for full-model gradient checks.
ModelConfig small_config(ModelKind kind, std::size_t width = 6);

}  // namespace paratope::testing
