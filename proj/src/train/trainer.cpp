#include "paratope/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "paratope/errors.hpp"
#include "paratope/eval/metrics.hpp"

namespace paratope {

namespace {

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

// Consecutive batch_size chunks; a trailing single sample joins the previous
// chunk so batch norm always sees more than one sequence.
std::vector<std::span<const SampleRef>> chunk(std::span<const SampleRef> samples, std::size_t batch_size) {
    std::vector<std::span<const SampleRef>> out;
    std::size_t start = 0;
    while (start < samples.size()) {
        std::size_t n = std::min(batch_size, samples.size() - start);
        if (samples.size() - start - n == 1) ++n;
        out.push_back(samples.subspan(start, n));
        start += n;
    }
    return out;
}

template <typename T>
bool params_finite(const std::vector<Parameter<T>*>& params) {
    return std::all_of(params.begin(), params.end(), [](const Parameter<T>* p) { return p->value.all_finite(); });
}

void clip_gradients(std::span<Parameter<float>* const> params, double max_norm) {
    double sq = 0;
    for (const Parameter<float>* p : params) {
        for (float g : p->grad.data()) sq += static_cast<double>(g) * g;
    }
    const double norm = std::sqrt(sq);
    if (norm <= max_norm || norm == 0) return;
    const auto factor = static_cast<float>(max_norm / norm);
    for (Parameter<float>* p : params) {
        for (float& g : p->grad.data()) g *= factor;
    }
}

}  // namespace

void TrainConfig::validate() const {
    auto fail = [](const std::string& what) { throw ValidationError("training config: " + what); };
    if (!(learning_rate > 0) || !std::isfinite(learning_rate)) fail("learning rate must be positive");
    if (epochs == 0) fail("epochs must be positive");
    if (batch_size == 0) fail("batch size must be positive");
    if (!(l2 >= 0) || !std::isfinite(l2)) fail("l2 must be non-negative");
    if (!(final_dropout >= 0 && final_dropout < 1)) fail("final dropout must lie in [0, 1)");
    if (!(hidden_dropout >= 0 && hidden_dropout < 1)) fail("hidden dropout must lie in [0, 1)");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) fail("Adam betas must lie in [0, 1)");
    if (!(epsilon > 0)) fail("Adam epsilon must be positive");
    if (clip_norm && !(*clip_norm > 0)) fail("clip norm must be positive");
}

template <typename T>
void adam_step(const std::vector<Parameter<T>*>& params, AdamState<T>& state, double learning_rate) {
    if (params.empty()) throw ValidationError("adam_step: no parameters to update");
    if (state.first.empty()) {
        for (const Parameter<T>* p : params) {
            state.first.push_back(Tensor<T>::zeros_like(p->value));
            state.second.push_back(Tensor<T>::zeros_like(p->value));
        }
    }
    if (state.first.size() != params.size()) {
        throw ValidationError("adam_step: state holds " + std::to_string(state.first.size()) + " moments for " +
                              std::to_string(params.size()) + " parameters");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Parameter<T>& p = *params[i];
        if (p.grad.shape() != p.value.shape() || state.first[i].shape() != p.value.shape()) {
            throw ValidationError("adam_step: gradient or moment of '" + p.name + "' does not match its value");
        }
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1 - std::pow(state.beta1, t);
    const double c2 = 1 - std::pow(state.beta2, t);
    const auto b1 = static_cast<T>(state.beta1), b2 = static_cast<T>(state.beta2);
    const auto step_size = static_cast<T>(learning_rate / c1);
    const auto root_c2 = static_cast<T>(std::sqrt(c2));
    const auto eps = static_cast<T>(state.epsilon);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter<T>& p = *params[i];
        auto w = p.value.data();
        auto g = p.grad.data();
        auto m = state.first[i].data();
        auto v = state.second[i].data();
        for (std::size_t k = 0; k < w.size(); ++k) {
            m[k] = b1 * m[k] + (1 - b1) * g[k];
            v[k] = b2 * v[k] + (1 - b2) * g[k] * g[k];
            w[k] -= step_size * m[k] / (std::sqrt(v[k]) / root_c2 + eps);
        }
    }
}

ClassWeights inverse_frequency_weights(std::span<const Complex> complexes, std::span<const SampleRef> samples) {
    std::size_t pos = 0, total = 0;
    for (const SampleRef& s : samples) {
        for (std::uint8_t y : complexes[s.complex].cdrs[s.cdr].labels) pos += y != 0;
        total += complexes[s.complex].cdrs[s.cdr].size();
    }
    const std::size_t neg = total - pos;
    if (pos == 0 || neg == 0) return {};
    return {static_cast<double>(total) / (2.0 * static_cast<double>(neg)),
            static_cast<double>(total) / (2.0 * static_cast<double>(pos))};
}

template <typename T>
Var<T> masked_bce_loss(Var<T> probs, const Tensor<T>& labels, const Tensor<T>& mask, ClassWeights weights) {
    const Tensor<T>& p = probs.value();
    if (p.numel() != mask.numel() || labels.numel() != mask.numel()) {
        throw ShapeError("masked_bce_loss: probabilities " + shape_str(p.shape()) + ", labels " +
                         shape_str(labels.shape()) + " and mask " + shape_str(mask.shape()) + " differ in size");
    }
    const T eps = T(1e-7);
    double total = 0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < mask.numel(); ++k) {
        if (mask[k] == T{0}) continue;
        const double pk = std::clamp(p[k], eps, T(1) - eps);
        const double y = labels[k];
        total -= weights.positive * y * std::log(pk) + weights.negative * (1 - y) * std::log(1 - pk);
        ++count;
    }
    if (count == 0) throw ValidationError("masked_bce_loss: every position is masked");
    const double n = static_cast<double>(count);
    Graph<T>& g = *probs.graph;
    return g.record("masked_bce", Tensor<T>(Shape{}, static_cast<T>(total / n)), {probs},
                    [probs, labels, mask, weights, n, eps](Graph<T>& graph, const Tensor<T>& grad_out, const Tensor<T>&) {
                        Tensor<T>* gp = graph.grad_sink(probs);
                        if (!gp) return;
                        const Tensor<T>& pv = probs.value();
                        const double scale = static_cast<double>(grad_out[0]) / n;
                        for (std::size_t k = 0; k < mask.numel(); ++k) {
                            if (mask[k] == T{0} || pv[k] < eps || pv[k] > T(1) - eps) continue;
                            const double pk = pv[k];
                            const double y = labels[k];
                            (*gp)[k] += static_cast<T>(
                                scale * (-weights.positive * y / pk + weights.negative * (1 - y) / (1 - pk)));
                        }
                    });
}

template <typename T>
Var<T> l2_penalty(Graph<T>& graph, const std::vector<Parameter<T>*>& params, double lambda) {
    std::vector<Var<T>> terms;
    for (Parameter<T>* p : params) {
        if (p->decayed) terms.push_back(ops::sum_squares(graph.parameter(*p)));
    }
    if (terms.empty() || lambda == 0) return graph.constant(Tensor<T>(Shape{}));
    Var<T> total = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) total = ops::add(total, terms[i]);
    return ops::scale(total, static_cast<T>(lambda));
}

Evaluation evaluate(ModelParams<float>& params, std::span<const Complex> complexes,
                    std::span<const SampleRef> samples, std::size_t batch_size) {
    Evaluation out;
    if (samples.empty()) return out;
    std::mt19937_64 rng(0);
    const bool with_antigen = params.kind() == ModelKind::ag_fast;
    double loss = 0;
    std::size_t count = 0;
    for (std::size_t start = 0; start < samples.size(); start += batch_size) {
        const auto part = samples.subspan(start, std::min(batch_size, samples.size() - start));
        const Batch<float> batch = pad_and_mask<float>(complexes, part, with_antigen);
        Graph<float> graph;
        const ForwardResult<float> res = forward(graph, params, batch, Mode::infer, rng);
        const Var<float> l = masked_bce_loss(res.probabilities, batch.labels, batch.antibody_mask);
        const Tensor<float>& probs = res.probabilities.value();
        std::size_t n = 0;
        for (std::size_t k = 0; k < batch.antibody_mask.numel(); ++k) {
            if (batch.antibody_mask[k] == 0) continue;
            out.scores.push_back(probs[k]);
            out.labels.push_back(batch.labels[k] != 0);
            ++n;
        }
        loss += static_cast<double>(l.value()[0]) * static_cast<double>(n);
        count += n;
    }
    out.loss = loss / static_cast<double>(count);
    return out;
}

TrainResult train(const ModelConfig& model, std::span<const Complex> complexes,
                  std::span<const SampleRef> train_samples, std::span<const SampleRef> val_samples,
                  const TrainConfig& config, const std::function<void(const EpochLog&)>& on_epoch) {
    config.validate();
    if (train_samples.empty()) throw ValidationError("training set is empty");
    ModelConfig mc = model;
    mc.hidden_dropout = config.hidden_dropout;
    mc.final_dropout = config.final_dropout;

    TrainResult result{ModelParams<float>::initialize(mc, config.seed), {}};
    ModelParams<float>& params = result.params;
    std::mt19937_64 order_rng = stream_rng(config.seed, 1);
    std::mt19937_64 dropout_rng = stream_rng(config.seed, 2);
    const ClassWeights weights =
        config.class_weighting ? inverse_frequency_weights(complexes, train_samples) : ClassWeights{};
    const std::vector<Parameter<float>*> plist = params.parameters();
    AdamState<float> adam{config.beta1, config.beta2, config.epsilon, 0, {}, {}};
    const bool with_antigen = mc.kind == ModelKind::ag_fast;
    std::vector<SampleRef> order(train_samples.begin(), train_samples.end());

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        std::shuffle(order.begin(), order.end(), order_rng);
        double loss_sum = 0;
        std::size_t residues = 0;
        for (std::span<const SampleRef> part : chunk(order, config.batch_size)) {
            params.zero_grad();
            const Batch<float> batch = pad_and_mask<float>(complexes, part, with_antigen);
            Graph<float> graph;
            const ForwardResult<float> res = forward(graph, params, batch, Mode::train, dropout_rng);
            const Var<float> data_loss = masked_bce_loss(res.probabilities, batch.labels, batch.antibody_mask, weights);
            Var<float> objective = data_loss;
            if (config.l2 > 0) objective = ops::add(objective, l2_penalty(graph, plist, config.l2));
            if (!std::isfinite(objective.value()[0])) {
                throw NumericError("training loss became non-finite at epoch " + std::to_string(epoch));
            }
            graph.backward(objective);
            if (config.clip_norm) clip_gradients(plist, *config.clip_norm);
            adam_step(plist, adam, config.learning_rate);
            if (!params_finite(plist)) {
                throw NumericError("parameters became non-finite at epoch " + std::to_string(epoch));
            }
            std::size_t n = 0;
            for (float m : batch.antibody_mask.data()) n += m != 0;
            loss_sum += static_cast<double>(data_loss.value()[0]) * static_cast<double>(n);
            residues += n;
        }

        EpochLog entry;
        entry.epoch = epoch;
        entry.train_loss = loss_sum / static_cast<double>(residues);
        entry.val_loss = entry.val_auc = std::numeric_limits<double>::quiet_NaN();
        if (!val_samples.empty()) {
            const Evaluation ev = evaluate(params, complexes, val_samples, config.batch_size);
            entry.val_loss = ev.loss;
            try {
                entry.val_auc = roc_auc(ev.scores, ev.labels);
            } catch (const ValidationError&) {
            }
        }
        entry.wall_clock_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        result.log.push_back(entry);
        if (on_epoch) on_epoch(entry);
    }
    return result;
}

void write_training_log(std::ostream& out, std::span<const EpochLog> log) {
    const auto old = out.precision(std::numeric_limits<double>::max_digits10);
    out << "epoch,train_loss,val_loss,val_auc,wall_clock_seconds\n";
    for (const EpochLog& e : log) {
        out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.val_auc << ',' << e.wall_clock_seconds
            << '\n';
    }
    out.precision(old);
}

std::vector<EpochLog> read_training_log(std::istream& in) {
    std::vector<EpochLog> out;
    std::string line;
    if (!std::getline(in, line) || line.rfind("epoch,", 0) != 0) throw ParseError("training log: missing header");
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        if (cells.size() != 5) throw ParseError("training log line " + std::to_string(line_no) + ": expected 5 columns");
        try {
            out.push_back({std::stoul(cells[0]), std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3]),
                           std::stod(cells[4])});
        } catch (const std::logic_error&) {
            throw ParseError("training log line " + std::to_string(line_no) + ": bad number");
        }
    }
    return out;
}

#define PARATOPE_INSTANTIATE_TRAIN(T)                                                                   \
    template void adam_step<T>(const std::vector<Parameter<T>*>&, AdamState<T>&, double);                  \
    template Var<T> masked_bce_loss<T>(Var<T>, const Tensor<T>&, const Tensor<T>&, ClassWeights);       \
    template Var<T> l2_penalty<T>(Graph<T>&, const std::vector<Parameter<T>*>&, double);

PARATOPE_INSTANTIATE_TRAIN(float)
PARATOPE_INSTANTIATE_TRAIN(double)

#undef PARATOPE_INSTANTIATE_TRAIN

}  // namespace paratope
