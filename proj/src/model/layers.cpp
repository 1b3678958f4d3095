#include "paratope/model/layers.hpp"

#include "paratope/errors.hpp"

namespace paratope {

namespace {

template <typename T>
void require_rank3(const Var<T>& x, const char* what) {
    if (x.shape().size() != 3) throw ShapeError(std::string(what) + ": expected [B, L, C], got " + shape_str(x.shape()));
}

template <typename T>
void require_mask(const Var<T>& x, const Tensor<T>& mask, const char* what) {
    if (mask.shape() != Shape{x.shape()[0], x.shape()[1]}) {
        throw ShapeError(std::string(what) + ": mask " + shape_str(mask.shape()) + " does not match input " +
                         shape_str(x.shape()));
    }
}

// Splits a [2D] attention vector into its query and key halves as [D, 1].
template <typename T>
std::pair<Var<T>, Var<T>> split_attention_vector(Var<T> a, std::size_t depth) {
    if (a.shape() != Shape{2 * depth}) {
        throw ShapeError("attention vector must be [" + std::to_string(2 * depth) + "], got " + shape_str(a.shape()));
    }
    return {ops::reshape(ops::slice(a, 0, 0, depth), Shape{depth, 1}),
            ops::reshape(ops::slice(a, 0, depth, depth), Shape{depth, 1})};
}

// [R, L, D] x [D, 1] -> [R, L]
template <typename T>
Var<T> project_scores(Var<T> x, Var<T> half) {
    const Shape& s = x.shape();
    return ops::reshape(ops::linear(x, half), Shape{s[0], s[1]});
}

}  // namespace

template <typename T>
Var<T> atrous_stack(Var<T> x, const Tensor<T>& mask, AtrousStackParams<T>& params, Mode mode, double dropout_rate,
                    std::mt19937_64& rng) {
    require_rank3(x, "atrous_stack");
    require_mask(x, mask, "atrous_stack");
    if (params.blocks.empty() || x.shape()[2] != params.in_channels()) {
        throw ShapeError("atrous_stack: input has " + std::to_string(x.shape()[2]) + " channels, stack expects " +
                         (params.blocks.empty() ? std::string("a non-empty stack") : std::to_string(params.in_channels())));
    }
    Graph<T>& g = *x.graph;
    Var<T> h = ops::mask_rows(x, mask);
    for (ConvBlock<T>& blk : params.blocks) {
        h = ops::conv1d_dilated(h, g.parameter(blk.kernel), blk.dilation);
        h = ops::add_bias(h, g.parameter(blk.bias));
        h = ops::elu(h);
        h = ops::batch_norm(h, g.parameter(blk.gamma), g.parameter(blk.beta), blk.bn, mode, &mask);
        h = ops::dropout(h, dropout_rate, mode, rng);
        h = ops::mask_rows(h, mask);
    }
    return h;
}

template <typename T>
AttentionOutput<T> self_attention(Var<T> b, const Tensor<T>& mask, SelfAttentionParams<T>& params, T leaky_slope) {
    require_rank3(b, "self_attention");
    require_mask(b, mask, "self_attention");
    const std::size_t batch = b.shape()[0], len = b.shape()[1], depth = b.shape()[2];
    for (std::size_t r = 0; r < batch; ++r) {
        bool any = false;
        for (std::size_t i = 0; i < len && !any; ++i) any = mask[r * len + i] != T{0};
        if (!any) throw ValidationError("self_attention: sequence " + std::to_string(r) + " is fully masked");
    }
    Graph<T>& g = *b.graph;
    auto pattern = std::make_shared<const AttentionPattern>(AttentionPattern::self(mask));
    Var<T> wb = ops::linear(b, g.parameter(params.w));
    auto [a_query, a_key] = split_attention_vector(g.parameter(params.a), depth);
    Var<T> logits = ops::leaky_relu(
        ops::pair_logits(project_scores(wb, a_query), project_scores(wb, a_key), pattern), leaky_slope);
    Var<T> alpha = ops::segment_softmax(logits, pattern);
    Var<T> out = ops::elu(ops::sparse_aggregate(alpha, wb, pattern));
    return {out, alpha, pattern};
}

template <typename T>
AttentionOutput<T> cross_modal_attention(Var<T> b, Var<T> g, const Tensor<T>& antibody_mask,
                                         std::shared_ptr<const AttentionPattern> neighborhoods,
                                         CrossModalAttentionParams<T>& params, T leaky_slope) {
    require_rank3(b, "cross_modal_attention");
    require_rank3(g, "cross_modal_attention");
    require_mask(b, antibody_mask, "cross_modal_attention");
    if (!neighborhoods) throw ValidationError("cross_modal_attention: no neighborhoods supplied");
    const AttentionPattern& p = *neighborhoods;
    const std::size_t batch = b.shape()[0], len = b.shape()[1], depth = b.shape()[2];
    if (p.batch != batch || p.queries != len || p.key_rows != g.shape()[0] || p.keys != g.shape()[1] ||
        g.shape()[2] != depth) {
        throw ShapeError("cross_modal_attention: neighborhoods do not match antibody " + shape_str(b.shape()) +
                         " and antigen " + shape_str(g.shape()));
    }
    for (std::size_t r = 0; r < batch; ++r) {
        for (std::size_t i = 0; i < len; ++i) {
            if (antibody_mask[r * len + i] != T{0} && p.row_begin(r, i) == p.row_end(r, i)) {
                throw ValidationError("cross_modal_attention: antibody residue " + std::to_string(i) + " of sequence " +
                                      std::to_string(r) + " has an empty neighborhood");
            }
        }
    }
    Graph<T>& graph = *b.graph;
    Var<T> wb = ops::linear(b, graph.parameter(params.w_query));
    Var<T> wg = ops::linear(g, graph.parameter(params.w_key));
    auto [a_query, a_key] = split_attention_vector(graph.parameter(params.a), depth);
    Var<T> logits = ops::leaky_relu(
        ops::pair_logits(project_scores(wb, a_query), project_scores(wg, a_key), neighborhoods), leaky_slope);
    Var<T> alpha = ops::segment_softmax(logits, neighborhoods);
    Var<T> out = ops::elu(ops::sparse_aggregate(alpha, wg, neighborhoods));
    return {out, alpha, neighborhoods};
}

template <typename T>
Var<T> classifier_head(Var<T> h, const Tensor<T>& mask, ClassifierParams<T>& params, Mode mode, double dropout_rate,
                       std::mt19937_64& rng) {
    require_rank3(h, "classifier_head");
    require_mask(h, mask, "classifier_head");
    Graph<T>& g = *h.graph;
    Var<T> z = ops::dropout(h, dropout_rate, mode, rng);
    Var<T> logits = ops::add_bias(ops::linear(z, g.parameter(params.w)), g.parameter(params.b));
    return ops::mask_rows(ops::sigmoid(logits), mask);
}

#define PARATOPE_INSTANTIATE_LAYERS(T)                                                                             \
    template Var<T> atrous_stack<T>(Var<T>, const Tensor<T>&, AtrousStackParams<T>&, Mode, double,                 \
                                    std::mt19937_64&);                                                             \
    template AttentionOutput<T> self_attention<T>(Var<T>, const Tensor<T>&, SelfAttentionParams<T>&, T);           \
    template AttentionOutput<T> cross_modal_attention<T>(Var<T>, Var<T>, const Tensor<T>&,                         \
                                                         std::shared_ptr<const AttentionPattern>,                  \
                                                         CrossModalAttentionParams<T>&, T);                        \
    template Var<T> classifier_head<T>(Var<T>, const Tensor<T>&, ClassifierParams<T>&, Mode, double,               \
                                       std::mt19937_64&);

PARATOPE_INSTANTIATE_LAYERS(float)
PARATOPE_INSTANTIATE_LAYERS(double)

#undef PARATOPE_INSTANTIATE_LAYERS

}  // namespace paratope
