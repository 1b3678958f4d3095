#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "paratope/model/model.hpp"

namespace paratope {

struct TrainConfig {
    double learning_rate = 0.01;
    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    double l2 = 0.01;
    double final_dropout = 0.5;
    double hidden_dropout = 0.15;
    std::uint64_t seed = 0;
    /// Weight the loss by inverse class frequency of the training residues.
    bool class_weighting = false;
    /// Rescale gradients to this global L2 norm when exceeded; off by default.
    std::optional<double> clip_norm;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    /// Throws ValidationError for non-positive sizes or rates, negative l2,
    /// or dropout outside [0, 1).
    void validate() const;
};

template <typename T>
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t step = 0;
    std::vector<Tensor<T>> first;
    std::vector<Tensor<T>> second;
};

/// Bias-corrected Adam update of every parameter from its accumulated grad.
/// Moments are allocated on the first step; later calls must pass the same
/// parameters in the same order. Throws ValidationError when params is empty
/// or a gradient is missing.
template <typename T>
void adam_step(const std::vector<Parameter<T>*>& params, AdamState<T>& state, double learning_rate);

struct ClassWeights {
    double negative = 1;
    double positive = 1;
};

/// n / (2 * n_class) for each class over the labelled CDR residues of samples.
ClassWeights inverse_frequency_weights(std::span<const Complex> complexes, std::span<const SampleRef> samples);

/// Mean over unmasked positions of -[w1 y log p + w0 (1 - y) log(1 - p)],
/// with p clamped away from 0 and 1. probs has one entry per mask entry.
/// Throws ValidationError when every position is masked.
template <typename T>
Var<T> masked_bce_loss(Var<T> probs, const Tensor<T>& labels, const Tensor<T>& mask, ClassWeights weights = {});

/// lambda * sum of squared entries over decayed parameters.
template <typename T>
Var<T> l2_penalty(Graph<T>& graph, const std::vector<Parameter<T>*>& params, double lambda);

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0;
    /// NaN without validation samples.
    double val_loss = 0;
    /// NaN without validation samples or when they hold a single class.
    double val_auc = 0;
    double wall_clock_seconds = 0;
};

struct TrainResult {
    ModelParams<float> params;
    std::vector<EpochLog> log;
};

/// Trains a freshly initialised model. Initialisation, batch order and
/// dropout masks are all drawn from config.seed. The dropout rates of
/// config override the ones in model.
///
/// Throws NumericError when the loss becomes non-finite.
TrainResult train(const ModelConfig& model, std::span<const Complex> complexes,
                  std::span<const SampleRef> train_samples, std::span<const SampleRef> val_samples,
                  const TrainConfig& config, const std::function<void(const EpochLog&)>& on_epoch = {});

/// Mean loss and predictions of a model over samples, infer mode.
struct Evaluation {
    double loss = 0;
    std::vector<double> scores;
    std::vector<std::uint8_t> labels;
};
Evaluation evaluate(ModelParams<float>& params, std::span<const Complex> complexes,
                    std::span<const SampleRef> samples, std::size_t batch_size = 32);

/// CSV: epoch,train_loss,val_loss,val_auc,wall_clock_seconds
void write_training_log(std::ostream& out, std::span<const EpochLog> log);
std::vector<EpochLog> read_training_log(std::istream& in);

}  // namespace paratope
