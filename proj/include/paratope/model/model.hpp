#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "paratope/data/batch.hpp"
#include "paratope/model/layers.hpp"
#include "paratope/tensor/archive.hpp"

namespace paratope {

enum class ModelKind {
    /// Antibody-only: a trous stack -> self-attention (+ skip) -> classifier.
    fast,
    /// Antibody and antigen stacks -> cross-modal attention (+ skip) -> classifier.
    ag_fast,
};

std::string_view model_kind_name(ModelKind kind) noexcept;
std::optional<ModelKind> model_kind_from_name(std::string_view name) noexcept;

struct ModelConfig {
    ModelKind kind = ModelKind::fast;
    std::array<std::size_t, 3> features{64, 128, 256};
    std::array<std::size_t, 3> dilations{1, 2, 4};
    std::size_t kernel_size = 3;
    double hidden_dropout = 0.15;
    double final_dropout = 0.5;
    double leaky_slope = 0.2;
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;

    std::size_t width() const noexcept { return features.back(); }
    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Every learnable weight and normalisation statistic of one model.
template <typename T>
struct ModelParams {
    ModelConfig config;
    AtrousStackParams<T> antibody_stack;
    std::optional<AtrousStackParams<T>> antigen_stack;
    std::variant<SelfAttentionParams<T>, CrossModalAttentionParams<T>> attention;
    Parameter<T> out_gamma;  ///< batch norm after the skip connection
    Parameter<T> out_beta;
    BatchNormState<T> out_bn;
    ClassifierParams<T> classifier;

    ModelKind kind() const noexcept { return config.kind; }

    /// Xavier-initialised weights, zero biases, unit batch-norm scales.
    static ModelParams initialize(const ModelConfig& config, std::uint64_t seed);
    /// Same layout as initialize() with every tensor zero.
    static ModelParams zeros(const ModelConfig& config);

    std::vector<Parameter<T>*> parameters();
    std::vector<const Parameter<T>*> parameters() const;

    /// Visits parameters and batch-norm running statistics in a fixed order.
    void for_each_tensor(const std::function<void(const std::string&, Tensor<T>&)>& fn);
    void for_each_tensor(const std::function<void(const std::string&, const Tensor<T>&)>& fn) const;

    void zero_grad();

    template <typename U>
    ModelParams<U> cast() const;

    TensorArchive to_archive() const;
    /// Throws VersionError if the archive does not describe a model of this layout.
    static ModelParams from_archive(const TensorArchive& archive);

    void save(const std::filesystem::path& path) const;
    static ModelParams load(const std::filesystem::path& path);
};

extern template struct ModelParams<float>;
extern template struct ModelParams<double>;

template <typename T>
struct ForwardResult {
    Var<T> probabilities;  ///< [B, L, 1], zero at masked positions
    AttentionOutput<T> attention;
};

/// a trous stack -> self-attention -> (+ skip) -> batch norm -> classifier.
template <typename T>
ForwardResult<T> fast_parapred_forward(Graph<T>& graph, ModelParams<T>& params, const Batch<T>& batch, Mode mode,
                                       std::mt19937_64& rng);

/// Independent antibody and antigen stacks -> cross-modal attention over
/// the neighborhoods -> (+ antibody skip) -> batch norm -> classifier.
template <typename T>
ForwardResult<T> ag_fast_parapred_forward(Graph<T>& graph, ModelParams<T>& params, const Batch<T>& batch, Mode mode,
                                          std::mt19937_64& rng);

/// Dispatches on params.kind().
template <typename T>
ForwardResult<T> forward(Graph<T>& graph, ModelParams<T>& params, const Batch<T>& batch, Mode mode,
                         std::mt19937_64& rng);

/// Per-residue binding probabilities in infer mode.
struct ResiduePrediction {
    std::string complex_id;
    ChainId chain = ChainId::H1;
    std::size_t residue = 0;
    AminoAcid aa = AminoAcid::UNK;
    double probability = 0;
    std::uint8_t label = 0;
};

std::vector<ResiduePrediction> predict(ModelParams<float>& params, std::span<const Complex> complexes,
                                       std::span<const SampleRef> samples, std::size_t batch_size = 32);

/// Normalised antigen attention of one antibody residue.
struct AttentionRecord {
    std::string complex_id;
    ChainId chain = ChainId::H1;
    std::size_t residue = 0;
    /// (original antigen index, coefficient), ascending by index.
    std::vector<std::pair<std::uint32_t, double>> weights;
};

/// Cross-modal coefficients for every CDR residue of the given complexes.
/// Throws ValidationError for antibody-only models.
std::vector<AttentionRecord> export_attention(ModelParams<float>& params, std::span<const Complex> complexes);

/// One JSON object per line: {"complex", "chain", "residue", "attention": [[j, alpha], ...]}.
void write_attention(std::ostream& out, std::span<const AttentionRecord> records);
std::vector<AttentionRecord> read_attention(std::istream& in);

}  // namespace paratope
