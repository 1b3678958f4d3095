#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "paratope/data/synthetic.hpp"
#include "paratope/errors.hpp"
#include "paratope/model/model.hpp"

using namespace paratope;
using paratope::testing::attention_row_oracle;
using paratope::testing::check_gradients;
using paratope::testing::feature_row;
using paratope::testing::prefix_mask;
using paratope::testing::random_tensor;
using paratope::testing::small_config;
using paratope::testing::weighted_sum;

namespace {

SelfAttentionParams<double> random_self(std::size_t d, std::mt19937_64& rng) {
    return {Parameter<double>("w", random_tensor<double>(Shape{d, d}, rng)),
            Parameter<double>("a", random_tensor<double>(Shape{2 * d}, rng))};
}

CrossModalAttentionParams<double> random_cross(std::size_t d, std::mt19937_64& rng) {
    return {Parameter<double>("wq", random_tensor<double>(Shape{d, d}, rng)),
            Parameter<double>("wk", random_tensor<double>(Shape{d, d}, rng)),
            Parameter<double>("a", random_tensor<double>(Shape{2 * d}, rng))};
}

// Random neighborhoods: B queries rows of length M over G key rows of length N.
std::shared_ptr<AttentionPattern> random_pattern(std::size_t batch, std::size_t m, std::size_t g, std::size_t n,
                                                 std::mt19937_64& rng) {
    auto p = std::make_shared<AttentionPattern>();
    p->batch = batch;
    p->queries = m;
    p->key_rows = g;
    p->keys = n;
    p->offsets.push_back(0);
    std::uniform_int_distribution<std::size_t> row(0, g - 1);
    for (std::size_t b = 0; b < batch; ++b) {
        p->key_row.push_back(row(rng));
        for (std::size_t i = 0; i < m; ++i) {
            std::vector<std::uint32_t> all(n);
            std::iota(all.begin(), all.end(), 0u);
            std::shuffle(all.begin(), all.end(), rng);
            all.resize(std::uniform_int_distribution<std::size_t>(1, n)(rng));
            std::sort(all.begin(), all.end());
            p->index.insert(p->index.end(), all.begin(), all.end());
            p->offsets.push_back(p->index.size());
        }
    }
    return p;
}

std::vector<Complex> antigen_fixture(std::size_t complexes, std::uint64_t seed, std::size_t antigen_length = 40) {
    SyntheticSpec spec;
    spec.complexes = complexes;
    spec.antigen_length = antigen_length;
    spec.labels = SyntheticLabels::antigen;
    spec.seed = seed;
    return make_synthetic(spec);
}

template <typename T>
Tensor<T> run_forward(ModelParams<T>& params, const Batch<T>& batch, Mode mode, std::uint64_t seed = 0) {
    Graph<T> g;
    std::mt19937_64 rng(seed);
    return forward(g, params, batch, mode, rng).probabilities.value();
}

}  // namespace

TEST(SelfAttention, MatchesPairwiseOracle) {
    for (int seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed);
        const std::size_t batch = 2, len = 6, d = 5;
        const Tensor<double> x = random_tensor<double>(Shape{batch, len, d}, rng);
        const Tensor<double> mask = prefix_mask<double>(len, {6, 3});
        auto params = random_self(d, rng);
        Graph<double> g;
        const auto out = self_attention(g.constant(x), mask, params);
        const Tensor<double>& y = out.features.value();
        for (std::size_t b = 0; b < batch; ++b) {
            std::vector<std::vector<double>> keys;
            for (std::size_t j = 0; j < len; ++j) {
                if (mask[b * len + j] != 0) keys.push_back(feature_row(x, b, j));
            }
            for (std::size_t i = 0; i < len; ++i) {
                const auto got = feature_row(y, b, i);
                if (mask[b * len + i] == 0) {
                    for (double v : got) EXPECT_EQ(v, 0.0);
                    continue;
                }
                const auto want = attention_row_oracle(feature_row(x, b, i), keys, params.w.value, params.w.value,
                                                       params.a.value, 0.2);
                for (std::size_t c = 0; c < d; ++c) EXPECT_NEAR(got[c], want.out[c], 1e-6);
                const std::size_t begin = out.pattern->row_begin(b, i);
                ASSERT_EQ(out.pattern->row_end(b, i) - begin, want.alpha.size());
                for (std::size_t k = 0; k < want.alpha.size(); ++k) {
                    EXPECT_NEAR(out.coefficients.value()[begin + k], want.alpha[k], 1e-6);
                }
            }
        }
    }
}

TEST(SelfAttention, SinglePositionAndUniformWeights) {
    std::mt19937_64 rng(3);
    auto params = random_self(4, rng);
    Graph<double> g;
    const auto one = self_attention(g.constant(random_tensor<double>(Shape{1, 1, 4}, rng)), prefix_mask<double>(1, {1}),
                                    params);
    EXPECT_DOUBLE_EQ(one.coefficients.value()[0], 1.0);

    params.a.value.fill(0.0);
    const auto flat = self_attention(g.constant(random_tensor<double>(Shape{1, 5, 4}, rng)),
                                     prefix_mask<double>(5, {5}), params);
    for (double a : flat.coefficients.value().data()) EXPECT_NEAR(a, 0.2, 1e-12);
}

TEST(SelfAttention, RowsSumToOne) {
    std::mt19937_64 rng(9);
    auto params = random_self(8, rng);
    Graph<double> g;
    const auto out = self_attention(g.constant(random_tensor<double>(Shape{3, 7, 8}, rng, -3, 3)),
                                    prefix_mask<double>(7, {7, 2, 5}), params);
    const auto& p = *out.pattern;
    for (std::size_t b = 0; b < 3; ++b) {
        for (std::size_t i = 0; i < 7; ++i) {
            if (p.row_begin(b, i) == p.row_end(b, i)) continue;
            double s = 0;
            for (std::size_t k = p.row_begin(b, i); k < p.row_end(b, i); ++k) s += out.coefficients.value()[k];
            EXPECT_NEAR(s, 1.0, 1e-12);
        }
    }
}

TEST(SelfAttention, FullyMaskedSequenceRejected) {
    std::mt19937_64 rng(1);
    auto params = random_self(3, rng);
    Graph<double> g;
    EXPECT_THROW(self_attention(g.constant(random_tensor<double>(Shape{2, 4, 3}, rng)),
                                prefix_mask<double>(4, {4, 0}), params),
                 ValidationError);
}

TEST(SelfAttention, PermutationEquivariant) {
    for (int seed = 0; seed < 5; ++seed) {
        std::mt19937_64 rng(seed);
        const std::size_t len = 6, d = 4;
        const Tensor<double> x = random_tensor<double>(Shape{1, len, d}, rng);
        auto params = random_self(d, rng);
        std::vector<std::size_t> perm(len);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        Tensor<double> px(x.shape());
        for (std::size_t i = 0; i < len; ++i) {
            std::copy_n(x.raw() + perm[i] * d, d, px.raw() + i * d);
        }
        const Tensor<double> mask = prefix_mask<double>(len, {len});
        Graph<double> g;
        const Tensor<double> y = self_attention(g.constant(x), mask, params).features.value();
        const Tensor<double> py = self_attention(g.constant(px), mask, params).features.value();
        for (std::size_t i = 0; i < len; ++i) {
            for (std::size_t c = 0; c < d; ++c) EXPECT_NEAR(py[i * d + c], y[perm[i] * d + c], 1e-12);
        }
    }
}

TEST(CrossAttention, MatchesPairwiseOracle) {
    for (int seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed);
        const std::size_t batch = 3, m = 5, groups = 2, n = 6, d = 4;
        const Tensor<double> b = random_tensor<double>(Shape{batch, m, d}, rng);
        const Tensor<double> ag = random_tensor<double>(Shape{groups, n, d}, rng);
        const auto pattern = random_pattern(batch, m, groups, n, rng);
        auto params = random_cross(d, rng);
        Graph<double> g;
        const auto out = cross_modal_attention(g.constant(b), g.constant(ag), prefix_mask<double>(m, {m, m, m}),
                                               pattern, params);
        for (std::size_t s = 0; s < batch; ++s) {
            for (std::size_t i = 0; i < m; ++i) {
                std::vector<std::vector<double>> keys;
                for (std::uint32_t j : pattern->row(s, i)) keys.push_back(feature_row(ag, pattern->key_row[s], j));
                const auto want = attention_row_oracle(feature_row(b, s, i), keys, params.w_query.value,
                                                       params.w_key.value, params.a.value, 0.2);
                const auto got = feature_row(out.features.value(), s, i);
                for (std::size_t c = 0; c < d; ++c) EXPECT_NEAR(got[c], want.out[c], 1e-6);
                for (std::size_t k = 0; k < want.alpha.size(); ++k) {
                    EXPECT_NEAR(out.coefficients.value()[pattern->row_begin(s, i) + k], want.alpha[k], 1e-6);
                }
            }
        }
    }
}

TEST(CrossAttention, SingleNeighborGetsAllWeight) {
    std::mt19937_64 rng(4);
    auto pattern = random_pattern(1, 1, 1, 5, rng);
    pattern->index = {3};
    pattern->offsets = {0, 1};
    auto params = random_cross(3, rng);
    const Tensor<double> ag = random_tensor<double>(Shape{1, 5, 3}, rng);
    Graph<double> g;
    const auto out = cross_modal_attention(g.constant(random_tensor<double>(Shape{1, 1, 3}, rng)), g.constant(ag),
                                           prefix_mask<double>(1, {1}), pattern, params);
    EXPECT_DOUBLE_EQ(out.coefficients.value()[0], 1.0);
}

TEST(CrossAttention, EmptyNeighborhoodRejected) {
    std::mt19937_64 rng(5);
    auto pattern = random_pattern(1, 2, 1, 4, rng);
    pattern->index = {0, 1};
    pattern->offsets = {0, 2, 2};
    auto params = random_cross(3, rng);
    Graph<double> g;
    EXPECT_THROW(cross_modal_attention(g.constant(random_tensor<double>(Shape{1, 2, 3}, rng)),
                                       g.constant(random_tensor<double>(Shape{1, 4, 3}, rng)),
                                       prefix_mask<double>(2, {2}), pattern, params),
                 ValidationError);
}

TEST(AtrousStack, OutputShapes) {
    ModelConfig cfg;
    cfg.kind = ModelKind::ag_fast;
    auto params = ModelParams<float>::initialize(cfg, 1);
    std::mt19937_64 rng(0);
    Graph<float> g;
    const Tensor<float> ab_mask = prefix_mask<float>(32, {32});
    const auto ab = atrous_stack(g.constant(random_tensor<float>(Shape{1, 32, 34}, rng)), ab_mask,
                                 params.antibody_stack, Mode::infer, 0.0, rng);
    EXPECT_EQ(ab.shape(), (Shape{1, 32, 256}));
    const auto ag = atrous_stack(g.constant(random_tensor<float>(Shape{1, 1269, 28}, rng)),
                                 prefix_mask<float>(1269, {1269}), *params.antigen_stack, Mode::infer, 0.0, rng);
    EXPECT_EQ(ag.shape(), (Shape{1, 1269, 256}));
}

TEST(AtrousStack, MaskedRowsAreZero) {
    auto params = ModelParams<float>::initialize(small_config(ModelKind::fast, 8), 2);
    std::mt19937_64 rng(0);
    Graph<float> g;
    const auto y = atrous_stack(g.constant(random_tensor<float>(Shape{2, 6, 34}, rng)), prefix_mask<float>(6, {6, 0}),
                                params.antibody_stack, Mode::infer, 0.0, rng);
    for (std::size_t k = 6 * 8; k < 12 * 8; ++k) EXPECT_EQ(y.value()[k], 0.0f);
}

TEST(AtrousStack, ReceptiveFieldIsFifteen) {
    auto params = ModelParams<float>::initialize(ModelConfig{}, 3).cast<double>();
    std::mt19937_64 rng(7);
    const std::size_t len = 32, center = 16;
    const Tensor<double> mask = prefix_mask<double>(len, {len});
    const Tensor<double> x = random_tensor<double>(Shape{1, len, 34}, rng);
    Tensor<double> bumped = x;
    for (std::size_t c = 0; c < 34; ++c) bumped[center * 34 + c] += 0.5;
    Graph<double> g;
    const Tensor<double> y = atrous_stack(g.constant(x), mask, params.antibody_stack, Mode::infer, 0.0, rng).value();
    const Tensor<double> yb =
        atrous_stack(g.constant(bumped), mask, params.antibody_stack, Mode::infer, 0.0, rng).value();
    const std::size_t d = y.dim(2);
    for (std::size_t i = 0; i < len; ++i) {
        double diff = 0;
        for (std::size_t c = 0; c < d; ++c) diff = std::max(diff, std::abs(y[i * d + c] - yb[i * d + c]));
        const std::size_t dist = i > center ? i - center : center - i;
        if (dist >= 8) {
            EXPECT_EQ(diff, 0.0) << "position " << i;
        } else {
            EXPECT_GT(diff, 1e-9) << "position " << i;
        }
    }
}

TEST(Classifier, Examples) {
    ClassifierParams<double> head{Parameter<double>("w", Tensor<double>(Shape{3, 1}, 0.7)),
                                  Parameter<double>("b", Tensor<double>(Shape{1}, 0.0))};
    std::mt19937_64 rng(0);
    Graph<double> g;
    const Tensor<double> mask = prefix_mask<double>(2, {1});
    const auto zero = classifier_head(g.constant(Tensor<double>(Shape{1, 2, 3})), mask, head, Mode::infer, 0.5, rng);
    EXPECT_EQ(zero.shape(), (Shape{1, 2, 1}));
    EXPECT_DOUBLE_EQ(zero.value()[0], 0.5);
    EXPECT_EQ(zero.value()[1], 0.0);

    head.b.value[0] = std::log(3.0);
    const auto biased = classifier_head(g.constant(Tensor<double>(Shape{1, 2, 3})), mask, head, Mode::infer, 0.5, rng);
    EXPECT_NEAR(biased.value()[0], 0.75, 1e-12);

    head.b.value[0] = 0;
    const auto ones = classifier_head(g.constant(Tensor<double>(Shape{1, 2, 3}, 1.0)), mask, head, Mode::infer, 0.5, rng);
    EXPECT_NEAR(ones.value()[0], 1.0 / (1.0 + std::exp(-2.1)), 1e-12);
}

TEST(Model, OutputShapesAndRange) {
    const auto cs = antigen_fixture(3, 1);
    const auto samples = all_samples(cs);
    for (ModelKind kind : {ModelKind::fast, ModelKind::ag_fast}) {
        ModelConfig cfg;
        cfg.kind = kind;
        auto params = ModelParams<float>::initialize(cfg, 5);
        const Batch<float> batch = pad_and_mask<float>(cs, samples, kind == ModelKind::ag_fast);
        const Tensor<float> p = run_forward(params, batch, Mode::infer);
        EXPECT_EQ(p.shape(), (Shape{samples.size(), batch.max_cdr_length(), 1}));
        for (std::size_t k = 0; k < p.numel(); ++k) {
            if (batch.antibody_mask[k] == 0) {
                EXPECT_EQ(p[k], 0.0f);
            } else {
                EXPECT_GT(p[k], 0.0f);
                EXPECT_LT(p[k], 1.0f);
            }
        }
    }
}

TEST(Model, ZeroedAttentionReducesToSkipPath) {
    const auto cs = antigen_fixture(2, 2);
    const auto samples = all_samples(cs);
    for (ModelKind kind : {ModelKind::fast, ModelKind::ag_fast}) {
        auto params = ModelParams<float>::initialize(small_config(kind, 8), 6).cast<double>();
        std::visit(
            [](auto& att) {
                if constexpr (requires { att.w; }) {
                    att.w.value.fill(0.0);
                } else {
                    att.w_query.value.fill(0.0);
                    att.w_key.value.fill(0.0);
                }
            },
            params.attention);
        const Batch<double> batch = pad_and_mask<double>(cs, samples, kind == ModelKind::ag_fast);
        const Tensor<double> full = run_forward(params, batch, Mode::infer);

        Graph<double> g;
        std::mt19937_64 rng(0);
        auto h = atrous_stack(g.constant(batch.antibody), batch.antibody_mask, params.antibody_stack, Mode::infer,
                              0.0, rng);
        h = ops::batch_norm(h, g.parameter(params.out_gamma), g.parameter(params.out_beta), params.out_bn,
                            Mode::infer, &batch.antibody_mask);
        const Tensor<double> skip =
            classifier_head(h, batch.antibody_mask, params.classifier, Mode::infer, 0.0, rng).value();
        ASSERT_EQ(skip.shape(), full.shape());
        for (std::size_t k = 0; k < full.numel(); ++k) EXPECT_NEAR(full[k], skip[k], 1e-12);
    }
}

TEST(Model, InferIsDeterministic) {
    const auto cs = antigen_fixture(3, 3);
    const auto samples = all_samples(cs);
    ModelConfig cfg;
    cfg.kind = ModelKind::ag_fast;
    auto params = ModelParams<float>::initialize(cfg, 7);
    const Batch<float> batch = pad_and_mask<float>(cs, samples, true);
    EXPECT_EQ(run_forward(params, batch, Mode::infer, 1), run_forward(params, batch, Mode::infer, 99));
}

TEST(Model, PaddingDoesNotLeak) {
    const auto cs = antigen_fixture(3, 4);
    const auto samples = all_samples(cs);
    for (ModelKind kind : {ModelKind::fast, ModelKind::ag_fast}) {
        ModelConfig cfg;
        cfg.kind = kind;
        cfg.hidden_dropout = cfg.final_dropout = 0;
        const bool ag = kind == ModelKind::ag_fast;
        auto clean = ModelParams<float>::initialize(cfg, 8);
        auto noisy = clean;
        const Batch<float> batch = pad_and_mask<float>(cs, samples, ag);
        Batch<float> garbage = batch;
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<float> big(-50.0f, 50.0f);
        const std::size_t d = garbage.antibody.dim(2);
        for (std::size_t k = 0; k < garbage.antibody_mask.numel(); ++k) {
            if (garbage.antibody_mask[k] == 0) {
                for (std::size_t c = 0; c < d; ++c) garbage.antibody[k * d + c] = big(rng);
            }
        }
        if (ag) {
            const std::size_t da = garbage.antigen.dim(2);
            for (std::size_t k = 0; k < garbage.antigen_mask.numel(); ++k) {
                if (garbage.antigen_mask[k] == 0) {
                    for (std::size_t c = 0; c < da; ++c) garbage.antigen[k * da + c] = big(rng);
                }
            }
        }
        for (Mode mode : {Mode::infer, Mode::train}) {
            const Tensor<float> a = run_forward(clean, batch, mode);
            const Tensor<float> b = run_forward(noisy, garbage, mode);
            for (std::size_t k = 0; k < a.numel(); ++k) EXPECT_NEAR(a[k], b[k], 1e-6) << k;
        }

        // A sample's prediction does not depend on how far its batch is padded.
        auto fresh = ModelParams<float>::initialize(cfg, 9);
        const Tensor<float> alone = run_forward(fresh, pad_and_mask<float>(cs, {samples.data(), 1}, ag), Mode::infer);
        const Tensor<float> padded = run_forward(fresh, batch, Mode::infer);
        for (std::size_t i = 0; i < alone.numel(); ++i) EXPECT_NEAR(alone[i], padded[i], 1e-6);
    }
}

TEST(Model, GradientsMatchFiniteDifferences) {
    const auto cs = antigen_fixture(2, 5, 20);
    const auto samples = all_samples(cs);
    for (ModelKind kind : {ModelKind::fast, ModelKind::ag_fast}) {
        for (int seed = 0; seed < 3; ++seed) {
            ModelConfig cfg = small_config(kind, 4);
            cfg.hidden_dropout = cfg.final_dropout = 0;
            auto params = ModelParams<double>::initialize(cfg, seed);
            const Batch<double> batch = pad_and_mask<double>(cs, samples, kind == ModelKind::ag_fast);
            std::mt19937_64 wrng(seed);
            const Tensor<double> weights = random_tensor<double>(Shape{batch.size(), batch.max_cdr_length(), 1}, wrng);
            for (Mode mode : {Mode::train, Mode::infer}) {
                auto loss = [&](Graph<double>& g) {
                    std::mt19937_64 rng(0);
                    return weighted_sum(forward(g, params, batch, mode, rng).probabilities, weights);
                };
                std::mt19937_64 rng(seed);
                const auto r = check_gradients(params.parameters(), loss, rng, 12);
                EXPECT_LT(r.max_rel_error, 1e-3) << model_kind_name(kind) << " seed " << seed << ": " << r.worst;
            }
        }
    }
}

TEST(Model, FullWidthGradientsSampled) {
    const auto cs = antigen_fixture(1, 6, 16);
    const auto samples = all_samples(cs);
    ModelConfig cfg;
    cfg.kind = ModelKind::ag_fast;
    cfg.hidden_dropout = cfg.final_dropout = 0;
    auto params = ModelParams<double>::initialize(cfg, 1);
    const Batch<double> batch = pad_and_mask<double>(cs, samples, true);
    std::mt19937_64 wrng(1);
    const Tensor<double> weights = random_tensor<double>(Shape{batch.size(), batch.max_cdr_length(), 1}, wrng);
    auto loss = [&](Graph<double>& g) {
        std::mt19937_64 rng(0);
        return weighted_sum(forward(g, params, batch, Mode::train, rng).probabilities, weights);
    };
    std::mt19937_64 rng(2);
    const auto r = check_gradients(params.parameters(), loss, rng, 3);
    EXPECT_LT(r.max_rel_error, 1e-3) << r.worst;
}

TEST(ModelParams, ArchiveRoundTrip) {
    for (ModelKind kind : {ModelKind::fast, ModelKind::ag_fast}) {
        auto params = ModelParams<float>::initialize(small_config(kind, 5), 3);
        params.out_bn.running_mean.fill(0.25f);
        std::stringstream s;
        write_archive(s, params.to_archive());
        const auto back = ModelParams<float>::from_archive(read_archive(s));
        EXPECT_EQ(back.config, params.config);
        std::vector<Tensor<float>> want, got;
        params.for_each_tensor([&](const std::string&, const Tensor<float>& t) { want.push_back(t); });
        back.for_each_tensor([&](const std::string&, const Tensor<float>& t) { got.push_back(t); });
        EXPECT_EQ(want, got);
    }
}

TEST(ModelParams, IncompatibleArchivesRejected) {
    auto params = ModelParams<float>::initialize(small_config(ModelKind::ag_fast, 5), 3);
    TensorArchive missing = params.to_archive();
    missing.entries.pop_back();
    EXPECT_THROW(ModelParams<float>::from_archive(missing), VersionError);

    TensorArchive reshaped = params.to_archive();
    reshaped.entries.front().value = Tensor<float>(Shape{1});
    EXPECT_THROW(ModelParams<float>::from_archive(reshaped), VersionError);

    TensorArchive foreign = params.to_archive();
    foreign.metadata = R"({"format":"something-else"})";
    EXPECT_THROW(ModelParams<float>::from_archive(foreign), VersionError);
}

TEST(ModelConfig, JsonRoundTrip) {
    ModelConfig cfg = small_config(ModelKind::ag_fast, 7);
    cfg.final_dropout = 0.3;
    EXPECT_EQ(ModelConfig::from_json(cfg.to_json()), cfg);
    EXPECT_THROW(ModelConfig::from_json("{\"kind\":\"slow\"}"), ParseError);
}

TEST(Attention, ExportedRowsAreDistributions) {
    const auto cs = antigen_fixture(3, 7);
    auto params = ModelParams<float>::initialize(small_config(ModelKind::ag_fast, 8), 4);
    const auto records = export_attention(params, cs);
    std::size_t residues = 0;
    for (const auto& c : cs) {
        for (const auto& cdr : c.cdrs) residues += cdr.size();
    }
    ASSERT_EQ(records.size(), residues);
    std::size_t r = 0;
    for (const auto& c : cs) {
        for (std::size_t k = 0; k < c.cdrs.size(); ++k) {
            for (std::size_t i = 0; i < c.cdrs[k].size(); ++i, ++r) {
                const auto& rec = records[r];
                EXPECT_EQ(rec.complex_id, c.id);
                EXPECT_EQ(rec.residue, i);
                const auto& nu = c.neighborhoods[k].sets[i];
                ASSERT_EQ(rec.weights.size(), nu.size());
                double s = 0;
                for (std::size_t j = 0; j < nu.size(); ++j) {
                    EXPECT_EQ(rec.weights[j].first, nu[j]);
                    s += rec.weights[j].second;
                }
                EXPECT_NEAR(s, 1.0, 1e-5);
            }
        }
    }

    std::stringstream s;
    write_attention(s, records);
    const auto back = read_attention(s);
    ASSERT_EQ(back.size(), records.size());
    for (std::size_t k = 0; k < back.size(); ++k) {
        EXPECT_EQ(back[k].complex_id, records[k].complex_id);
        EXPECT_EQ(back[k].chain, records[k].chain);
        EXPECT_EQ(back[k].weights, records[k].weights);
    }

    auto fast = ModelParams<float>::initialize(small_config(ModelKind::fast, 8), 4);
    EXPECT_THROW(export_attention(fast, cs), ValidationError);
}
