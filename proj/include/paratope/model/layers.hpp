#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "paratope/tensor/ops.hpp"

namespace paratope {

/// conv -> ELU -> batch norm -> dropout, "same" zero padding.
template <typename T>
struct ConvBlock {
    Parameter<T> kernel;  ///< [K, C_in, C_out]
    Parameter<T> bias;    ///< [C_out]
    Parameter<T> gamma;   ///< [C_out]
    Parameter<T> beta;    ///< [C_out]
    BatchNormState<T> bn;
    std::size_t dilation = 1;
};

template <typename T>
struct AtrousStackParams {
    std::vector<ConvBlock<T>> blocks;

    std::size_t in_channels() const { return blocks.front().kernel.value.dim(1); }
    std::size_t out_channels() const { return blocks.back().kernel.value.dim(2); }
};

template <typename T>
struct SelfAttentionParams {
    Parameter<T> w;  ///< [D, D] shared linear map
    Parameter<T> a;  ///< [2D] attention vector over [W b_i || W b_j]
};

template <typename T>
struct CrossModalAttentionParams {
    Parameter<T> w_query;  ///< [D, D] applied to antibody features
    Parameter<T> w_key;    ///< [D, D] applied to antigen features (keys and values)
    Parameter<T> a;        ///< [2D]
};

template <typename T>
struct ClassifierParams {
    Parameter<T> w;  ///< [D, 1]
    Parameter<T> b;  ///< [1]
};

/// Output of an attention layer together with its normalised coefficients.
template <typename T>
struct AttentionOutput {
    Var<T> features;      ///< [B, M, D]
    Var<T> coefficients;  ///< [nnz], aligned with pattern
    std::shared_ptr<const AttentionPattern> pattern;
};

/// Three dilated conv blocks; masked positions are zeroed on input and after
/// every block so padding never leaks into real positions.
/// x [B, L, C_in], mask [B, L] -> [B, L, C_out].
template <typename T>
Var<T> atrous_stack(Var<T> x, const Tensor<T>& mask, AtrousStackParams<T>& params, Mode mode, double dropout_rate,
                    std::mt19937_64& rng);

/// e_ij = LeakyReLU(a . [W b_i || W b_j]) over unmasked pairs of the same
/// sequence, alpha = softmax_j(e), out_i = ELU(sum_j alpha_ij W b_j).
/// Masked rows of the output are zero. Throws ValidationError if a
/// sequence is fully masked.
template <typename T>
AttentionOutput<T> self_attention(Var<T> b, const Tensor<T>& mask, SelfAttentionParams<T>& params,
                                  T leaky_slope = T(0.2));

/// Antibody residues (queries, through w_query) attend over the antigen
/// residues in their neighborhood (keys and values, through w_key).
/// b [B, M, D], g [G, N, D]. Throws ValidationError when an unmasked
/// antibody residue has an empty neighborhood.
template <typename T>
AttentionOutput<T> cross_modal_attention(Var<T> b, Var<T> g, const Tensor<T>& antibody_mask,
                                         std::shared_ptr<const AttentionPattern> neighborhoods,
                                         CrossModalAttentionParams<T>& params, T leaky_slope = T(0.2));

/// dropout -> pointwise dense to one logit -> sigmoid. Masked positions
/// come out as probability 0. h [B, L, D] -> [B, L, 1].
template <typename T>
Var<T> classifier_head(Var<T> h, const Tensor<T>& mask, ClassifierParams<T>& params, Mode mode, double dropout_rate,
                       std::mt19937_64& rng);

}  // namespace paratope
