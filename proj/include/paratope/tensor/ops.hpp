#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "paratope/tensor/graph.hpp"

namespace paratope {

enum class Mode { train, infer };

/// Running statistics of one batch-norm layer.
template <typename T>
struct BatchNormState {
    Tensor<T> running_mean;
    Tensor<T> running_var;
    T momentum = T(0.1);
    T eps = T(1e-5);

    BatchNormState() = default;
    explicit BatchNormState(std::size_t channels)
        : running_mean(Shape{channels}, T{0}), running_var(Shape{channels}, T{1}) {}
};

/// Sparse query -> key connectivity in CSR form.
///
/// Query (b, i) attends over key positions index[offsets[b*queries+i] ..
/// offsets[b*queries+i+1]) of key row key_row[b]. Several queries may share
/// one key row (CDRs of the same complex share their antigen).
struct AttentionPattern {
    std::size_t batch = 0;
    std::size_t queries = 0;
    std::size_t key_rows = 0;
    std::size_t keys = 0;
    std::vector<std::size_t> key_row;
    std::vector<std::size_t> offsets;
    std::vector<std::uint32_t> index;

    std::size_t nnz() const noexcept { return index.size(); }
    std::span<const std::uint32_t> row(std::size_t b, std::size_t i) const;
    std::size_t row_begin(std::size_t b, std::size_t i) const { return offsets[b * queries + i]; }
    std::size_t row_end(std::size_t b, std::size_t i) const { return offsets[b * queries + i + 1]; }

    /// Dense pattern over unmasked positions of each sequence: every unmasked
    /// query attends over every unmasked key of the same row. mask is [B, L].
    template <typename T>
    static AttentionPattern self(const Tensor<T>& mask);

    /// Throws ValidationError on out-of-range or inconsistent entries.
    void validate() const;
};

namespace ops {

/// Total number of pairwise attention logits evaluated by pair_logits()
/// since process start (per thread).
std::uint64_t pair_logit_evaluations() noexcept;

template <typename T> Var<T> matmul(Var<T> a, Var<T> b);
/// [..., k] x [k, n] -> [..., n]
template <typename T> Var<T> linear(Var<T> x, Var<T> w);
template <typename T> Var<T> add(Var<T> a, Var<T> b);
/// x [..., n] + bias [n]
template <typename T> Var<T> add_bias(Var<T> x, Var<T> bias);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
template <typename T> Var<T> scale(Var<T> x, T factor);
/// Multiplies each trailing-dim row by mask[row]; mask shape is x.shape minus the last axis.
template <typename T> Var<T> mask_rows(Var<T> x, const Tensor<T>& mask);
template <typename T> Var<T> concat(std::span<const Var<T>> xs, std::size_t axis);
template <typename T> Var<T> slice(Var<T> x, std::size_t axis, std::size_t start, std::size_t length);
template <typename T> Var<T> transpose(Var<T> x);
template <typename T> Var<T> reshape(Var<T> x, Shape shape);
template <typename T> Var<T> sum(Var<T> x);
template <typename T> Var<T> mean(Var<T> x);
template <typename T> Var<T> sum_squares(Var<T> x);

/// "Same"-padded dilated convolution along the sequence axis.
/// x [B, L, C_in], kernel [K, C_in, C_out], K odd, dilation >= 1.
template <typename T> Var<T> conv1d_dilated(Var<T> x, Var<T> kernel, std::size_t dilation);

template <typename T> Var<T> elu(Var<T> x);
template <typename T> Var<T> leaky_relu(Var<T> x, T slope = T(0.2));
template <typename T> Var<T> sigmoid(Var<T> x);

/// Softmax over the last axis restricted to mask == 1 entries; masked
/// entries are exactly 0. Every row needs at least one unmasked entry.
template <typename T> Var<T> softmax_masked(Var<T> logits, const Tensor<T>& mask);

/// Per-channel normalisation over all leading positions of x [..., C].
/// mask (optional, one entry per position) excludes padding from the
/// statistics and zeroes it in the output. Train mode needs at least two
/// unmasked positions, so a [1, C] batch is rejected.
template <typename T>
Var<T> batch_norm(Var<T> x, Var<T> gamma, Var<T> beta, BatchNormState<T>& state, Mode mode,
                  const Tensor<T>* mask = nullptr);

/// Inverted dropout; identity in infer mode or when p == 0.
template <typename T> Var<T> dropout(Var<T> x, double p, Mode mode, std::mt19937_64& rng);

/// logits[k] = query_scores[b, i] + key_scores[key_row[b], j] for the k-th
/// pattern entry (b, i, j). query_scores [B, M], key_scores [G, N].
template <typename T>
Var<T> pair_logits(Var<T> query_scores, Var<T> key_scores, std::shared_ptr<const AttentionPattern> pattern);

/// Softmax of a flat [nnz] tensor within each pattern row.
template <typename T>
Var<T> segment_softmax(Var<T> logits, std::shared_ptr<const AttentionPattern> pattern);

/// out[b, i, :] = sum over row entries k of coeffs[k] * values[key_row[b], j_k, :].
/// values [G, N, D] -> out [B, M, D]; empty rows yield zeros.
template <typename T>
Var<T> sparse_aggregate(Var<T> coeffs, Var<T> values, std::shared_ptr<const AttentionPattern> pattern);

}  // namespace ops
}  // namespace paratope
