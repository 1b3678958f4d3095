#include "paratope/model/model.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include "json.hpp"
#include "paratope/errors.hpp"
#include "paratope/tensor/init.hpp"

namespace paratope {

namespace {

using nlohmann::json;

constexpr const char* kFormatName = "paratope-model";

template <typename T>
AtrousStackParams<T> build_stack(const std::string& prefix, std::size_t in_channels, const ModelConfig& cfg,
                                 std::mt19937_64* rng) {
    AtrousStackParams<T> stack;
    std::size_t cin = in_channels;
    for (std::size_t l = 0; l < cfg.features.size(); ++l) {
        const std::size_t cout = cfg.features[l];
        const std::string name = prefix + ".conv" + std::to_string(l);
        const Shape kshape{cfg.kernel_size, cin, cout};
        ConvBlock<T> blk;
        blk.kernel = Parameter<T>(name + ".kernel", rng ? xavier_uniform<T>(kshape, *rng) : Tensor<T>(kshape), true);
        blk.bias = Parameter<T>(name + ".bias", Tensor<T>(Shape{cout}));
        blk.gamma = Parameter<T>(name + ".bn_gamma", Tensor<T>(Shape{cout}, rng ? T{1} : T{0}));
        blk.beta = Parameter<T>(name + ".bn_beta", Tensor<T>(Shape{cout}));
        blk.bn = BatchNormState<T>(cout);
        blk.bn.momentum = static_cast<T>(cfg.bn_momentum);
        blk.bn.eps = static_cast<T>(cfg.bn_eps);
        if (!rng) blk.bn.running_var.fill(T{0});
        blk.dilation = cfg.dilations[l];
        stack.blocks.push_back(std::move(blk));
        cin = cout;
    }
    return stack;
}

template <typename T>
Parameter<T> matrix_param(const std::string& name, std::size_t rows, std::size_t cols, std::mt19937_64* rng) {
    const Shape s{rows, cols};
    return Parameter<T>(name, rng ? xavier_uniform<T>(s, *rng) : Tensor<T>(s), true);
}

template <typename T>
ModelParams<T> build_model(const ModelConfig& cfg, std::mt19937_64* rng) {
    if (cfg.kernel_size % 2 == 0) throw ValidationError("kernel size must be odd");
    for (std::size_t f : cfg.features) {
        if (f == 0) throw ValidationError("feature sizes must be positive");
    }
    const std::size_t d = cfg.width();
    ModelParams<T> m;
    m.config = cfg;
    m.antibody_stack = build_stack<T>("antibody", kAntibodyFeatures, cfg, rng);
    if (cfg.kind == ModelKind::ag_fast) {
        m.antigen_stack = build_stack<T>("antigen", kAntigenFeatures, cfg, rng);
        CrossModalAttentionParams<T> att;
        att.w_query = matrix_param<T>("attention.w_query", d, d, rng);
        att.w_key = matrix_param<T>("attention.w_key", d, d, rng);
        att.a = Parameter<T>("attention.a", rng ? xavier_uniform<T>(Shape{2 * d}, 2 * d, 1, *rng) : Tensor<T>(Shape{2 * d}),
                             true);
        m.attention = std::move(att);
    } else {
        SelfAttentionParams<T> att;
        att.w = matrix_param<T>("attention.w", d, d, rng);
        att.a = Parameter<T>("attention.a", rng ? xavier_uniform<T>(Shape{2 * d}, 2 * d, 1, *rng) : Tensor<T>(Shape{2 * d}),
                             true);
        m.attention = std::move(att);
    }
    m.out_gamma = Parameter<T>("output.bn_gamma", Tensor<T>(Shape{d}, rng ? T{1} : T{0}));
    m.out_beta = Parameter<T>("output.bn_beta", Tensor<T>(Shape{d}));
    m.out_bn = BatchNormState<T>(d);
    m.out_bn.momentum = static_cast<T>(cfg.bn_momentum);
    m.out_bn.eps = static_cast<T>(cfg.bn_eps);
    if (!rng) m.out_bn.running_var.fill(T{0});
    m.classifier.w = matrix_param<T>("classifier.w", d, 1, rng);
    m.classifier.b = Parameter<T>("classifier.b", Tensor<T>(Shape{1}));
    return m;
}

template <typename T, typename Self, typename Fn>
void visit_tensors(Self& m, Fn&& fn) {
    auto stack = [&](auto& s) {
        for (auto& blk : s.blocks) {
            fn(blk.kernel.name, blk.kernel.value);
            fn(blk.bias.name, blk.bias.value);
            fn(blk.gamma.name, blk.gamma.value);
            fn(blk.beta.name, blk.beta.value);
            const std::string base = blk.kernel.name.substr(0, blk.kernel.name.rfind('.'));
            fn(base + ".bn_mean", blk.bn.running_mean);
            fn(base + ".bn_var", blk.bn.running_var);
        }
    };
    stack(m.antibody_stack);
    if (m.antigen_stack) stack(*m.antigen_stack);
    std::visit(
        [&](auto& att) {
            using A = std::decay_t<decltype(att)>;
            if constexpr (std::is_same_v<A, SelfAttentionParams<T>>) {
                fn(att.w.name, att.w.value);
            } else {
                fn(att.w_query.name, att.w_query.value);
                fn(att.w_key.name, att.w_key.value);
            }
            fn(att.a.name, att.a.value);
        },
        m.attention);
    fn(m.out_gamma.name, m.out_gamma.value);
    fn(m.out_beta.name, m.out_beta.value);
    fn(std::string("output.bn_mean"), m.out_bn.running_mean);
    fn(std::string("output.bn_var"), m.out_bn.running_var);
    fn(m.classifier.w.name, m.classifier.w.value);
    fn(m.classifier.b.name, m.classifier.b.value);
}

template <typename T>
void require_kind(const ModelParams<T>& p, ModelKind kind) {
    if (p.kind() != kind) {
        throw ValidationError(std::string("model is '") + std::string(model_kind_name(p.kind())) + "', expected '" +
                              std::string(model_kind_name(kind)) + "'");
    }
}

}  // namespace

std::string_view model_kind_name(ModelKind kind) noexcept {
    return kind == ModelKind::fast ? "fast" : "ag-fast";
}

std::optional<ModelKind> model_kind_from_name(std::string_view name) noexcept {
    if (name == "fast") return ModelKind::fast;
    if (name == "ag-fast") return ModelKind::ag_fast;
    return std::nullopt;
}

std::string ModelConfig::to_json() const {
    json j;
    j["kind"] = std::string(model_kind_name(kind));
    j["features"] = features;
    j["dilations"] = dilations;
    j["kernel_size"] = kernel_size;
    j["hidden_dropout"] = hidden_dropout;
    j["final_dropout"] = final_dropout;
    j["leaky_slope"] = leaky_slope;
    j["bn_momentum"] = bn_momentum;
    j["bn_eps"] = bn_eps;
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        ModelConfig c;
        const auto kind = model_kind_from_name(j.at("kind").get<std::string>());
        if (!kind) throw ParseError("unknown model kind '" + j.at("kind").get<std::string>() + "'");
        c.kind = *kind;
        c.features = j.at("features").get<std::array<std::size_t, 3>>();
        c.dilations = j.at("dilations").get<std::array<std::size_t, 3>>();
        c.kernel_size = j.at("kernel_size").get<std::size_t>();
        c.hidden_dropout = j.at("hidden_dropout").get<double>();
        c.final_dropout = j.at("final_dropout").get<double>();
        c.leaky_slope = j.at("leaky_slope").get<double>();
        c.bn_momentum = j.at("bn_momentum").get<double>();
        c.bn_eps = j.at("bn_eps").get<double>();
        return c;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad model config: ") + e.what());
    }
}

template <typename T>
ModelParams<T> ModelParams<T>::initialize(const ModelConfig& config, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return build_model<T>(config, &rng);
}

template <typename T>
ModelParams<T> ModelParams<T>::zeros(const ModelConfig& config) {
    return build_model<T>(config, nullptr);
}

template <typename T>
std::vector<Parameter<T>*> ModelParams<T>::parameters() {
    std::vector<Parameter<T>*> out;
    auto stack = [&](AtrousStackParams<T>& s) {
        for (auto& blk : s.blocks) {
            out.push_back(&blk.kernel);
            out.push_back(&blk.bias);
            out.push_back(&blk.gamma);
            out.push_back(&blk.beta);
        }
    };
    stack(antibody_stack);
    if (antigen_stack) stack(*antigen_stack);
    if (auto* self = std::get_if<SelfAttentionParams<T>>(&attention)) {
        out.push_back(&self->w);
        out.push_back(&self->a);
    } else {
        auto& cross = std::get<CrossModalAttentionParams<T>>(attention);
        out.push_back(&cross.w_query);
        out.push_back(&cross.w_key);
        out.push_back(&cross.a);
    }
    out.push_back(&out_gamma);
    out.push_back(&out_beta);
    out.push_back(&classifier.w);
    out.push_back(&classifier.b);
    return out;
}

template <typename T>
std::vector<const Parameter<T>*> ModelParams<T>::parameters() const {
    auto mut = const_cast<ModelParams*>(this)->parameters();
    return {mut.begin(), mut.end()};
}

template <typename T>
void ModelParams<T>::for_each_tensor(const std::function<void(const std::string&, Tensor<T>&)>& fn) {
    visit_tensors<T>(*this, fn);
}

template <typename T>
void ModelParams<T>::for_each_tensor(const std::function<void(const std::string&, const Tensor<T>&)>& fn) const {
    visit_tensors<T>(*this, fn);
}

template <typename T>
void ModelParams<T>::zero_grad() {
    for (Parameter<T>* p : parameters()) p->zero_grad();
}

template <typename T>
template <typename U>
ModelParams<U> ModelParams<T>::cast() const {
    std::vector<const Tensor<T>*> src;
    for_each_tensor([&](const std::string&, const Tensor<T>& t) { src.push_back(&t); });
    ModelParams<U> out = ModelParams<U>::zeros(config);
    std::size_t i = 0;
    out.for_each_tensor([&](const std::string&, Tensor<U>& t) { t = src[i++]->template cast<U>(); });
    for (Parameter<U>* p : out.parameters()) p->zero_grad();
    return out;
}

template <typename T>
TensorArchive ModelParams<T>::to_archive() const {
    TensorArchive archive;
    json meta;
    meta["format"] = kFormatName;
    meta["config"] = json::parse(config.to_json());
    archive.metadata = meta.dump();
    for_each_tensor([&](const std::string& name, const Tensor<T>& t) {
        archive.entries.push_back({name, t.template cast<float>()});
    });
    return archive;
}

template <typename T>
ModelParams<T> ModelParams<T>::from_archive(const TensorArchive& archive) {
    json meta;
    try {
        meta = json::parse(archive.metadata);
    } catch (const json::exception&) {
        throw VersionError("weight archive metadata is not a model description");
    }
    if (!meta.is_object() || meta.value("format", "") != kFormatName || !meta.contains("config")) {
        throw VersionError("weight archive does not hold a " + std::string(kFormatName));
    }
    const ModelConfig cfg = ModelConfig::from_json(meta["config"].dump());
    ModelParams out = zeros(cfg);
    out.for_each_tensor([&](const std::string& name, Tensor<T>& t) {
        const TensorArchive::Entry* e = archive.find(name);
        if (!e) throw VersionError("weight archive is missing tensor '" + name + "'");
        if (e->value.shape() != t.shape()) {
            throw VersionError("tensor '" + name + "' has shape " + shape_str(e->value.shape()) + ", expected " +
                               shape_str(t.shape()));
        }
        t = e->value.template cast<T>();
    });
    for (Parameter<T>* p : out.parameters()) p->zero_grad();
    return out;
}

template <typename T>
void ModelParams<T>::save(const std::filesystem::path& path) const {
    save_archive(path, to_archive());
}

template <typename T>
ModelParams<T> ModelParams<T>::load(const std::filesystem::path& path) {
    return from_archive(load_archive(path));
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template ModelParams<double> ModelParams<float>::cast<double>() const;
template ModelParams<float> ModelParams<double>::cast<float>() const;
template ModelParams<float> ModelParams<float>::cast<float>() const;
template ModelParams<double> ModelParams<double>::cast<double>() const;

template <typename T>
ForwardResult<T> fast_parapred_forward(Graph<T>& graph, ModelParams<T>& params, const Batch<T>& batch, Mode mode,
                                       std::mt19937_64& rng) {
    require_kind(params, ModelKind::fast);
    const ModelConfig& cfg = params.config;
    const Tensor<T>& mask = batch.antibody_mask;
    Var<T> h = atrous_stack(graph.constant(batch.antibody), mask, params.antibody_stack, mode, cfg.hidden_dropout, rng);
    AttentionOutput<T> att = self_attention(h, mask, std::get<SelfAttentionParams<T>>(params.attention),
                                            static_cast<T>(cfg.leaky_slope));
    Var<T> z = ops::add(att.features, h);
    z = ops::batch_norm(z, graph.parameter(params.out_gamma), graph.parameter(params.out_beta), params.out_bn, mode,
                        &mask);
    Var<T> probs = classifier_head(z, mask, params.classifier, mode, cfg.final_dropout, rng);
    return {probs, att};
}

template <typename T>
ForwardResult<T> ag_fast_parapred_forward(Graph<T>& graph, ModelParams<T>& params, const Batch<T>& batch, Mode mode,
                                          std::mt19937_64& rng) {
    require_kind(params, ModelKind::ag_fast);
    if (!batch.has_antigen()) throw ValidationError("AG model needs antigen inputs; the batch has none");
    const ModelConfig& cfg = params.config;
    const Tensor<T>& mask = batch.antibody_mask;
    Var<T> h = atrous_stack(graph.constant(batch.antibody), mask, params.antibody_stack, mode, cfg.hidden_dropout, rng);
    Var<T> hg = atrous_stack(graph.constant(batch.antigen), batch.antigen_mask, *params.antigen_stack, mode,
                             cfg.hidden_dropout, rng);
    AttentionOutput<T> att =
        cross_modal_attention(h, hg, mask, batch.neighborhoods, std::get<CrossModalAttentionParams<T>>(params.attention),
                              static_cast<T>(cfg.leaky_slope));
    Var<T> z = ops::add(att.features, h);
    z = ops::batch_norm(z, graph.parameter(params.out_gamma), graph.parameter(params.out_beta), params.out_bn, mode,
                        &mask);
    Var<T> probs = classifier_head(z, mask, params.classifier, mode, cfg.final_dropout, rng);
    return {probs, att};
}

template <typename T>
ForwardResult<T> forward(Graph<T>& graph, ModelParams<T>& params, const Batch<T>& batch, Mode mode,
                         std::mt19937_64& rng) {
    return params.kind() == ModelKind::fast ? fast_parapred_forward(graph, params, batch, mode, rng)
                                            : ag_fast_parapred_forward(graph, params, batch, mode, rng);
}

#define PARATOPE_INSTANTIATE_FORWARD(T)                                                                          \
    template ForwardResult<T> fast_parapred_forward<T>(Graph<T>&, ModelParams<T>&, const Batch<T>&, Mode,       \
                                                       std::mt19937_64&);                                       \
    template ForwardResult<T> ag_fast_parapred_forward<T>(Graph<T>&, ModelParams<T>&, const Batch<T>&, Mode,    \
                                                          std::mt19937_64&);                                    \
    template ForwardResult<T> forward<T>(Graph<T>&, ModelParams<T>&, const Batch<T>&, Mode, std::mt19937_64&);

PARATOPE_INSTANTIATE_FORWARD(float)
PARATOPE_INSTANTIATE_FORWARD(double)

#undef PARATOPE_INSTANTIATE_FORWARD

namespace {

template <typename Fn>
void for_each_batch(std::span<const SampleRef> samples, std::size_t batch_size, Fn&& fn) {
    if (batch_size == 0) throw ValidationError("batch size must be positive");
    for (std::size_t start = 0; start < samples.size(); start += batch_size) {
        fn(samples.subspan(start, std::min(batch_size, samples.size() - start)));
    }
}

}  // namespace

std::vector<ResiduePrediction> predict(ModelParams<float>& params, std::span<const Complex> complexes,
                                       std::span<const SampleRef> samples, std::size_t batch_size) {
    std::vector<ResiduePrediction> out;
    std::mt19937_64 rng(0);
    const bool with_antigen = params.kind() == ModelKind::ag_fast;
    for_each_batch(samples, batch_size, [&](std::span<const SampleRef> chunk) {
        const Batch<float> batch = pad_and_mask<float>(complexes, chunk, with_antigen);
        Graph<float> graph;
        const ForwardResult<float> res = forward(graph, params, batch, Mode::infer, rng);
        const Tensor<float>& probs = res.probabilities.value();
        const std::size_t len = batch.max_cdr_length();
        for (std::size_t b = 0; b < chunk.size(); ++b) {
            const Complex& cx = complexes[chunk[b].complex];
            const CdrSequence& cdr = cx.cdrs[chunk[b].cdr];
            for (std::size_t i = 0; i < cdr.size(); ++i) {
                out.push_back({cx.id, cdr.chain, i, cdr.residues[i], probs[b * len + i],
                               cdr.labels.empty() ? std::uint8_t{0} : cdr.labels[i]});
            }
        }
    });
    return out;
}

std::vector<AttentionRecord> export_attention(ModelParams<float>& params, std::span<const Complex> complexes) {
    if (params.kind() != ModelKind::ag_fast) {
        throw ValidationError("attention export needs an AG model; this one is antibody-only");
    }
    std::vector<AttentionRecord> out;
    std::mt19937_64 rng(0);
    const std::vector<SampleRef> samples = all_samples(complexes);
    for_each_batch(std::span<const SampleRef>(samples), 32, [&](std::span<const SampleRef> chunk) {
        const Batch<float> batch = pad_and_mask<float>(complexes, chunk, true);
        Graph<float> graph;
        const ForwardResult<float> res = forward(graph, params, batch, Mode::infer, rng);
        const Tensor<float>& alpha = res.attention.coefficients.value();
        const AttentionPattern& p = *res.attention.pattern;
        for (std::size_t b = 0; b < chunk.size(); ++b) {
            const Complex& cx = complexes[chunk[b].complex];
            const CdrSequence& cdr = cx.cdrs[chunk[b].cdr];
            const std::size_t offset = batch.antigen_offset[p.key_row[b]];
            for (std::size_t i = 0; i < cdr.size(); ++i) {
                AttentionRecord rec{cx.id, cdr.chain, i, {}};
                for (std::size_t k = p.row_begin(b, i); k < p.row_end(b, i); ++k) {
                    rec.weights.emplace_back(static_cast<std::uint32_t>(offset + p.index[k]), alpha[k]);
                }
                out.push_back(std::move(rec));
            }
        }
    });
    return out;
}

void write_attention(std::ostream& out, std::span<const AttentionRecord> records) {
    for (const AttentionRecord& r : records) {
        json j;
        j["complex"] = r.complex_id;
        j["chain"] = std::string(chain_name(r.chain));
        j["residue"] = r.residue;
        json weights = json::array();
        for (const auto& [index, alpha] : r.weights) weights.push_back({index, alpha});
        j["attention"] = std::move(weights);
        out << j.dump() << '\n';
    }
}

std::vector<AttentionRecord> read_attention(std::istream& in) {
    std::vector<AttentionRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json j = json::parse(line);
            AttentionRecord r;
            r.complex_id = j.at("complex").get<std::string>();
            const auto chain = chain_from_name(j.at("chain").get<std::string>());
            if (!chain) throw ParseError("line " + std::to_string(line_no) + ": unknown chain");
            r.chain = *chain;
            r.residue = j.at("residue").get<std::size_t>();
            for (const json& w : j.at("attention")) {
                r.weights.emplace_back(w.at(0).get<std::uint32_t>(), w.at(1).get<double>());
            }
            out.push_back(std::move(r));
        } catch (const json::exception& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace paratope
