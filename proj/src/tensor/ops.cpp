#include "paratope/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gemm.hpp"

namespace paratope {

namespace {

thread_local std::uint64_t g_pair_logit_evaluations = 0;

void require(bool ok, const std::string& message) {
    if (!ok) throw ShapeError(message);
}

std::string pair_str(const char* op, const Shape& a, const Shape& b) {
    return std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b);
}

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
    auto d = dst.data();
    auto s = src.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

// Product of dims [from, to).
std::size_t span_numel(const Shape& shape, std::size_t from, std::size_t to) {
    std::size_t n = 1;
    for (std::size_t i = from; i < to; ++i) n *= shape[i];
    return n;
}

template <typename T>
Var<T> unary(const char* op, Var<T> x, auto forward, auto derivative) {
    const Tensor<T>& in = x.value();
    Tensor<T> out(in.shape());
    for (std::size_t i = 0; i < in.numel(); ++i) out[i] = forward(in[i]);
    return x.graph->record(op, std::move(out), {x},
                           [x, derivative](Graph<T>& g, const Tensor<T>& gout, const Tensor<T>& y) {
                               Tensor<T>* gx = g.grad_sink(x);
                               if (!gx) return;
                               const Tensor<T>& in = g.value(x.id);
                               for (std::size_t i = 0; i < gout.numel(); ++i) {
                                   (*gx)[i] += gout[i] * derivative(in[i], y[i]);
                               }
                           });
}

}  // namespace

std::span<const std::uint32_t> AttentionPattern::row(std::size_t b, std::size_t i) const {
    const std::size_t lo = row_begin(b, i);
    const std::size_t hi = row_end(b, i);
    return std::span<const std::uint32_t>(index.data() + lo, hi - lo);
}

template <typename T>
AttentionPattern AttentionPattern::self(const Tensor<T>& mask) {
    if (mask.rank() != 2) throw ShapeError("self-attention mask must be [B, L], got " + shape_str(mask.shape()));
    AttentionPattern p;
    p.batch = mask.dim(0);
    p.queries = mask.dim(1);
    p.key_rows = p.batch;
    p.keys = p.queries;
    p.key_row.resize(p.batch);
    p.offsets.assign(1, 0);
    for (std::size_t b = 0; b < p.batch; ++b) {
        p.key_row[b] = b;
        std::vector<std::uint32_t> live;
        for (std::size_t j = 0; j < p.keys; ++j) {
            if (mask[b * p.keys + j] != T{0}) live.push_back(static_cast<std::uint32_t>(j));
        }
        for (std::size_t i = 0; i < p.queries; ++i) {
            if (mask[b * p.queries + i] != T{0}) p.index.insert(p.index.end(), live.begin(), live.end());
            p.offsets.push_back(p.index.size());
        }
    }
    return p;
}

template AttentionPattern AttentionPattern::self<float>(const Tensor<float>&);
template AttentionPattern AttentionPattern::self<double>(const Tensor<double>&);

void AttentionPattern::validate() const {
    if (key_row.size() != batch) throw ValidationError("attention pattern: key_row size does not match batch");
    if (offsets.size() != batch * queries + 1 || offsets.front() != 0 || offsets.back() != index.size()) {
        throw ValidationError("attention pattern: malformed row offsets");
    }
    for (std::size_t r = 0; r + 1 < offsets.size(); ++r) {
        if (offsets[r] > offsets[r + 1]) throw ValidationError("attention pattern: decreasing row offsets");
    }
    for (std::size_t kr : key_row) {
        if (kr >= key_rows) throw ValidationError("attention pattern: key row out of range");
    }
    for (std::uint32_t j : index) {
        if (j >= keys) throw ValidationError("attention pattern: key index " + std::to_string(j) + " out of range");
    }
}

namespace ops {

std::uint64_t pair_logit_evaluations() noexcept {
    return g_pair_logit_evaluations;
}

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    require(sa.size() == 2 && sb.size() == 2 && sa[1] == sb[0], pair_str("matmul", sa, sb));
    const std::size_t m = sa[0], k = sa[1], n = sb[1];
    Tensor<T> out(Shape{m, n});
    detail::gemm(false, false, m, n, k, a.value().raw(), b.value().raw(), out.raw(), false);
    return a.graph->record("matmul", std::move(out), {a, b},
                           [a, b, m, n, k](Graph<T>& g, const Tensor<T>& gout, const Tensor<T>&) {
                               if (Tensor<T>* ga = g.grad_sink(a)) {
                                   detail::gemm(false, true, m, k, n, gout.raw(), g.value(b.id).raw(), ga->raw(), true);
                               }
                               if (Tensor<T>* gb = g.grad_sink(b)) {
                                   detail::gemm(true, false, k, n, m, g.value(a.id).raw(), gout.raw(), gb->raw(), true);
                               }
                           });
}

template <typename T>
Var<T> linear(Var<T> x, Var<T> w) {
    const Shape& sx = x.shape();
    const Shape& sw = w.shape();
    require(!sx.empty() && sw.size() == 2 && sx.back() == sw[0], pair_str("linear", sx, sw));
    const std::size_t k = sw[0], n = sw[1];
    const std::size_t rows = x.numel() / k;
    Shape out_shape = sx;
    out_shape.back() = n;
    Tensor<T> out(out_shape);
    detail::gemm(false, false, rows, n, k, x.value().raw(), w.value().raw(), out.raw(), false);
    return x.graph->record("linear", std::move(out), {x, w},
                           [x, w, rows, n, k](Graph<T>& g, const Tensor<T>& gout, const Tensor<T>&) {
                               if (Tensor<T>* gx = g.grad_sink(x)) {
                                   detail::gemm(false, true, rows, k, n, gout.raw(), g.value(w.id).raw(), gx->raw(),
                                                true);
                               }
                               if (Tensor<T>* gw = g.grad_sink(w)) {
                                   detail::gemm(true, false, k, n, rows, g.value(x.id).raw(), gout.raw(), gw->raw(),
                                                true);
                               }
                           });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
    require(a.shape() == b.shape(), pair_str("add", a.shape(), b.shape()));
    Tensor<T> out = a.value();
    add_into(out, b.value());
    return a.graph->record("add", std::move(out), {a, b}, [a, b](Graph<T>& g, const Tensor<T>& gout, const Tensor<T>&) {
        if (Tensor<T>* ga = g.grad_sink(a)) add_into(*ga, gout);
        if (Tensor<T>* gb = g.grad_sink(b)) add_into(*gb, gout);
    });
}

template <typename T>
Var<T> add_bias(Var<T> x, Var<T> bias) {
    const Shape& sx = x.shape();
    require(!sx.empty() && bias.shape() == Shape{sx.back()}, pair_str("add_bias", sx, bias.shape()));
    const std::size_t n = sx.back();
    Tensor<T> out = x.value();
    const Tensor<T>& bv = bias.value();
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += bv[i % n];
    return x.graph->record("add_bias", std::move(out), {x, bias},
                           [x, bias, n](Graph<T>& g, const Tensor<T>& gout, const Tensor<T>&) {
                               if (Tensor<T>* gx = g.grad_sink(x)) add_into(*gx, gout);
                               if (Tensor<T>* gb = g.grad_sink(bias)) {
                                   for (std::size_t i = 0; i < gout.numel(); ++i) (*gb)[i % n] += gout[i];
                               }
                           });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
    require(a.shape() == b.shape(), pair_str("mul", a.shape(), b.shape()));
    Tensor<T> out = a.value();
    const Tensor<T>& bv = b.value();
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
    return a.graph->record("mul", std::move(out), {a, b}, [a, b](Graph<T>& g, const Tensor<T>& gout, const Tensor<T>&) {
        if (Tensor<T>* ga = g.grad_sink(a)) {
            const Tensor<T>& bv = g.value(b.id);
            for (std::size_t i = 0; i < gout.numel(); ++i) (*ga)[i] += gout[i] * bv[i];
        }
        if (Tensor<T>* gb = g.grad_sink(b)) {
            const Tensor<T>& av = g.value(a.id);
            for (std::size_t i = 0; i < gout.numel(); ++i) (*gb)[i] += gout[i] * av[i];
        }
    });
}

template <typename T>
Var<T> scale(Var<T> x, T factor) {
    Tensor<T> out = x.value();
    for (T& v : out.data()) v *= factor;
    return x.graph->record("scale", std::move(out), {x},
                           [x, factor](Graph<T>& g, const Tensor<T>& gout, const Tensor<T>&) {
                               if (Tensor<T>* gx = g.grad_sink(x)) {
                                   for (std::size_t i = 0; i < gout.numel(); ++i) (*gx)[i] += factor * gout[i];
                               }
                           });
}

template <typename T>
Var<T> mask_rows(Var<T> x, const Tensor<T>& mask) {
    const Shape& sx = x.shape();
    require(!sx.empty() && mask.numel() * sx.back() == x.numel() &&
                std::equal(mask.shape().begin(), mask.shape().end(), sx.begin()),
            pair_str("mask_rows", sx, mask.shape()));
    const std::size_t n = sx.back();
    Tensor<T> out = x.value();
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= mask[i / n];
    return x.graph->record("mask_rows", std::move(out), {x},
                           [x, mask, n](Graph<T>& g, const Tensor<T>& gout, const Tensor<T>&) {
                               if (Tensor<T>* gx = g.grad_sink(x)) {
                                   for (std::size_t i = 0; i < gout.numel(); ++i) (*gx)[i] += gout[i] * mask[i / n];
                               }
                           });
}

template <typename T>
Var<T> concat(std::span<const Var<T>> xs, std::size_t axis) {
    require(!xs.empty(), "concat: no inputs");
    const Shape& s0 = xs[0].shape();
    require(axis < s0.size(), "concat: axis " + std::to_string(axis) + " out of range for " + shape_str(s0));
    Shape out_shape = s0;
    out_shape[axis] = 0;
    std::vector<std::size_t> widths;
    for (const Var<T>& v : xs) {
        const Shape& s = v.shape();
        bool ok = s.size() == s0.size();
        for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == s0[d];
        require(ok, pair_str("concat", s0, s));
        out_shape[axis] += s[axis];
        widths.push_back(span_numel(s, axis, s.size()));
    }
    const std::size_t outer = span_numel(s0, 0, axis);
    const std::size_t total = span_numel(out_shape, axis, out_shape.size());
    Tensor<T> out(out_shape);
    std::size_t col = 0;
    for (std::size_t t = 0; t < xs.size(); ++t) {
        const Tensor<T>& v = xs[t].value();
        for (std::size_t o = 0; o < outer; ++o) {
            std::copy_n(v.raw() + o * widths[t], widths[t], out.raw() + o * total + col);
        }
        col += widths[t];
    }
    std::vector<Var<T>> inputs(xs.begin(), xs.end());
    return xs[0].graph->record(
        "concat", std::move(out), xs,
        [inputs, widths, outer, total](Graph<T>& g, const Tensor<T>& gout, const Tensor<T>&) {
            std::size_t col = 0;
            for (std::size_t t = 0; t < inputs.size(); ++t) {
                if (Tensor<T>* gx = g.grad_sink(inputs[t])) {
                    for (std::size_t o = 0; o < outer; ++o) {
                        const T* src = gout.raw() + o * total + col;
                        T* dst = gx->raw() + o * widths[t];
                        for (std::size_t i = 0; i < widths[t]; ++i) dst[i] += src[i];
                    }
                }
                col += widths[t];
            }
        });
}

template <typename T>
Var<T> slice(Var<T> x, std::size_t axis, std::size_t start, std::size_t length) {
    const Shape& sx = x.shape();
    require(axis < sx.size() && start + length <= sx[axis],
            "slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) + ") on axis " +
                std::to_string(axis) + " exceeds shape " + shape_str(sx));
    const std::size_t outer = span_numel(sx, 0, axis);
    const std::size_t inner = span_numel(sx, axis + 1, sx.size());
    const std::size_t src_stride = sx[axis] * inner;
    const std::size_t width = length * inner;
    const std::size_t skip = start * inner;
    Shape out_shape = sx;
    out_shape[axis] = length;
    Tensor<T> out(out_shape);
    const Tensor<T>& v = x.value();
    for (std::size_t o = 0; o < outer; ++o) std::copy_n(v.raw() + o * src_stride + skip, width, out.raw() + o * width);
    return x.graph->record("slice", std::move(out), {x},
                           [x, outer, src_stride, width, skip](Graph<T>& g, const Tensor<T>& gout, const Tensor<T>&) {
                               if (Tensor<T>* gx = g.grad_sink(x)) {
                                   for (std::size_t o = 0; o < outer; ++o) {
                                       for (std::size_t i = 0; i < width; ++i) {
                                           (*gx)[o * src_stride + skip + i] += gout[o * width + i];
                                       }
                                   }
                               }
                           });
}

template <typename T>
Var<T> transpose(Var<T> x) {
    const Shape& sx = x.shape();
    require(sx.size() == 2, "transpose: expected a matrix, got " + shape_str(sx));
    const std::size_t m = sx[0], n = sx[1];
    Tensor<T> out(Shape{n, m});
    const Tensor<T>& v = x.value();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = v[i * n + j];
    return x.graph->record("transpose", std::move(out), {x}, [x, m, n](Graph<T>& g, const Tensor<T>& gout, const Tensor<T>&) {
        if (Tensor<T>* gx = g.grad_sink(x)) {
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) (*gx)[i * n + j] += gout[j * m + i];
        }
    });
}

template <typename T>
Var<T> reshape(Var<T> x, Shape shape) {
    Tensor<T> out = x.value().reshaped(std::move(shape));
    return x.graph->record("reshape", std::move(out), {x}, [x](Graph<T>& g, const Tensor<T>& gout, const Tensor<T>&) {
        if (Tensor<T>* gx = g.grad_sink(x)) {
            for (std::size_t i = 0; i < gout.numel(); ++i) (*gx)[i] += gout[i];
        }
    });
}

template <typename T>
Var<T> sum(Var<T> x) {
    T total{0};
    for (T v : x.value().data()) total += v;
    return x.graph->record("sum", Tensor<T>(Shape{}, total), {x}, [x](Graph<T>& g, const Tensor<T>& gout, const Tensor<T>&) {
        if (Tensor<T>* gx = g.grad_sink(x)) {
            for (T& v : gx->data()) v += gout[0];
        }
    });
}

template <typename T>
Var<T> mean(Var<T> x) {
    require(x.numel() > 0, "mean: empty tensor");
    return scale(sum(x), T{1} / static_cast<T>(x.numel()));
}

template <typename T>
Var<T> sum_squares(Var<T> x) {
    T total{0};
    for (T v : x.value().data()) total += v * v;
    return x.graph->record("sum_squares", Tensor<T>(Shape{}, total), {x},
                           [x](Graph<T>& g, const Tensor<T>& gout, const Tensor<T>&) {
                               if (Tensor<T>* gx = g.grad_sink(x)) {
                                   const Tensor<T>& v = g.value(x.id);
                                   for (std::size_t i = 0; i < v.numel(); ++i) (*gx)[i] += T{2} * v[i] * gout[0];
                               }
                           });
}

template <typename T>
Var<T> conv1d_dilated(Var<T> x, Var<T> kernel, std::size_t dilation) {
    const Shape& sx = x.shape();
    const Shape& sk = kernel.shape();
    require(sx.size() == 3 && sk.size() == 3 && sx[2] == sk[1], pair_str("conv1d_dilated", sx, sk));
    const std::size_t taps = sk[0];
    if (taps % 2 == 0) throw ShapeError("conv1d_dilated: kernel size must be odd, got " + std::to_string(taps));
    if (dilation == 0) throw ShapeError("conv1d_dilated: dilation must be >= 1");
    const std::size_t batch = sx[0], len = sx[1], cin = sx[2], cout = sk[2];
    const std::size_t rows = batch * len;
    const std::size_t width = taps * cin;
    const auto half = static_cast<std::ptrdiff_t>((taps - 1) / 2);

    // im2col: row (b, t) holds the K dilated taps around t, zero outside [0, L).
    Tensor<T> cols(Shape{rows, width});
    const Tensor<T>& xv = x.value();
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < len; ++t) {
            T* dst = cols.raw() + (b * len + t) * width;
            for (std::size_t k = 0; k < taps; ++k) {
                const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) +
                                           (static_cast<std::ptrdiff_t>(k) - half) * static_cast<std::ptrdiff_t>(dilation);
                if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
                std::copy_n(xv.raw() + (b * len + static_cast<std::size_t>(src)) * cin, cin, dst + k * cin);
            }
        }
    }
    Tensor<T> out(Shape{batch, len, cout});
    detail::gemm(false, false, rows, cout, width, cols.raw(), kernel.value().raw(), out.raw(), false);

    return x.graph->record(
        "conv1d_dilated", std::move(out), {x, kernel},
        [x, kernel, cols = std::move(cols), batch, len, cin, cout, rows, width, taps, half,
         dilation](Graph<T>& g, const Tensor<T>& gout, const Tensor<T>&) {
            if (Tensor<T>* gk = g.grad_sink(kernel)) {
                detail::gemm(true, false, width, cout, rows, cols.raw(), gout.raw(), gk->raw(), true);
            }
            if (Tensor<T>* gx = g.grad_sink(x)) {
                Tensor<T> gcols(Shape{rows, width});
                detail::gemm(false, true, rows, width, cout, gout.raw(), g.value(kernel.id).raw(), gcols.raw(), false);
                for (std::size_t b = 0; b < batch; ++b) {
                    for (std::size_t t = 0; t < len; ++t) {
                        const T* src_row = gcols.raw() + (b * len + t) * width;
                        for (std::size_t k = 0; k < taps; ++k) {
                            const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) +
                                                       (static_cast<std::ptrdiff_t>(k) - half) *
                                                           static_cast<std::ptrdiff_t>(dilation);
                            if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
                            T* dst = gx->raw() + (b * len + static_cast<std::size_t>(src)) * cin;
                            for (std::size_t c = 0; c < cin; ++c) dst[c] += src_row[k * cin + c];
                        }
                    }
                }
            }
        });
}

template <typename T>
Var<T> elu(Var<T> x) {
    return unary<T>(
        "elu", x, [](T v) { return v > T{0} ? v : std::expm1(v); },
        [](T v, T y) { return v > T{0} ? T{1} : y + T{1}; });
}

template <typename T>
Var<T> leaky_relu(Var<T> x, T slope) {
    return unary<T>(
        "leaky_relu", x, [slope](T v) { return v > T{0} ? v : slope * v; },
        [slope](T v, T) { return v > T{0} ? T{1} : slope; });
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
    return unary<T>(
        "sigmoid", x,
        [](T v) {
            if (v >= T{0}) return T{1} / (T{1} + std::exp(-v));
            const T e = std::exp(v);
            return e / (T{1} + e);
        },
        [](T, T y) { return y * (T{1} - y); });
}

template <typename T>
Var<T> softmax_masked(Var<T> logits, const Tensor<T>& mask) {
    const Shape& s = logits.shape();
    require(!s.empty() && mask.shape() == s, pair_str("softmax_masked", s, mask.shape()));
    const std::size_t n = s.back();
    const std::size_t rows = n == 0 ? 0 : logits.numel() / n;
    const Tensor<T>& z = logits.value();
    Tensor<T> out(s);
    for (std::size_t r = 0; r < rows; ++r) {
        T top = -std::numeric_limits<T>::infinity();
        bool any = false;
        for (std::size_t j = 0; j < n; ++j) {
            if (mask[r * n + j] != T{0}) {
                top = std::max(top, z[r * n + j]);
                any = true;
            }
        }
        if (!any) throw ValidationError("softmax_masked: row " + std::to_string(r) + " is fully masked");
        T total{0};
        for (std::size_t j = 0; j < n; ++j) {
            if (mask[r * n + j] != T{0}) {
                out[r * n + j] = std::exp(z[r * n + j] - top);
                total += out[r * n + j];
            }
        }
        for (std::size_t j = 0; j < n; ++j) out[r * n + j] /= total;
    }
    return logits.graph->record("softmax_masked", std::move(out), {logits},
                                [logits, rows, n](Graph<T>& g, const Tensor<T>& gout, const Tensor<T>& y) {
                                    Tensor<T>* gz = g.grad_sink(logits);
                                    if (!gz) return;
                                    for (std::size_t r = 0; r < rows; ++r) {
                                        T dot{0};
                                        for (std::size_t j = 0; j < n; ++j) dot += y[r * n + j] * gout[r * n + j];
                                        for (std::size_t j = 0; j < n; ++j) {
                                            (*gz)[r * n + j] += y[r * n + j] * (gout[r * n + j] - dot);
                                        }
                                    }
                                });
}

template <typename T>
Var<T> batch_norm(Var<T> x, Var<T> gamma, Var<T> beta, BatchNormState<T>& state, Mode mode, const Tensor<T>* mask) {
    const Shape& sx = x.shape();
    require(sx.size() >= 2, "batch_norm: expected at least [B, C], got " + shape_str(sx));
    const std::size_t channels = sx.back();
    const std::size_t rows = x.numel() / channels;
    require(gamma.shape() == Shape{channels} && beta.shape() == Shape{channels},
            pair_str("batch_norm", sx, gamma.shape()));
    require(state.running_mean.shape() == Shape{channels} && state.running_var.shape() == Shape{channels},
            "batch_norm: running statistics do not match " + std::to_string(channels) + " channels");
    if (mask != nullptr) require(mask->numel() == rows, pair_str("batch_norm", sx, mask->shape()));
    auto live = [mask](std::size_t r) { return mask == nullptr || (*mask)[r] != T{0}; };

    const Tensor<T>& xv = x.value();
    Tensor<T> mu(Shape{channels});
    Tensor<T> inv_std(Shape{channels});
    std::size_t count = 0;

    if (mode == Mode::train) {
        for (std::size_t r = 0; r < rows; ++r) {
            if (!live(r)) continue;
            ++count;
            for (std::size_t c = 0; c < channels; ++c) mu[c] += xv[r * channels + c];
        }
        if (count < 2) {
            throw ShapeError("batch_norm: train mode needs at least 2 unmasked positions, got " + std::to_string(count));
        }
        for (T& m : mu.data()) m /= static_cast<T>(count);
        Tensor<T> var(Shape{channels});
        for (std::size_t r = 0; r < rows; ++r) {
            if (!live(r)) continue;
            for (std::size_t c = 0; c < channels; ++c) {
                const T d = xv[r * channels + c] - mu[c];
                var[c] += d * d;
            }
        }
        const T m = state.momentum;
        for (std::size_t c = 0; c < channels; ++c) {
            const T biased = var[c] / static_cast<T>(count);
            const T unbiased = count > 1 ? var[c] / static_cast<T>(count - 1) : biased;
            inv_std[c] = T{1} / std::sqrt(biased + state.eps);
            state.running_mean[c] = (T{1} - m) * state.running_mean[c] + m * mu[c];
            state.running_var[c] = (T{1} - m) * state.running_var[c] + m * unbiased;
        }
    } else {
        for (std::size_t c = 0; c < channels; ++c) {
            mu[c] = state.running_mean[c];
            inv_std[c] = T{1} / std::sqrt(state.running_var[c] + state.eps);
        }
    }

    Tensor<T> xhat(sx);
    Tensor<T> out(sx);
    const Tensor<T>& gv = gamma.value();
    const Tensor<T>& bv = beta.value();
    for (std::size_t r = 0; r < rows; ++r) {
        if (!live(r)) continue;
        for (std::size_t c = 0; c < channels; ++c) {
            const std::size_t i = r * channels + c;
            xhat[i] = (xv[i] - mu[c]) * inv_std[c];
            out[i] = gv[c] * xhat[i] + bv[c];
        }
    }

    std::vector<std::uint8_t> live_rows(rows);
    for (std::size_t r = 0; r < rows; ++r) live_rows[r] = live(r) ? 1 : 0;
    const bool batch_stats = mode == Mode::train;
    return x.graph->record(
        "batch_norm", std::move(out), {x, gamma, beta},
        [x, gamma, beta, xhat = std::move(xhat), inv_std, live_rows = std::move(live_rows), channels, rows, count,
         batch_stats](Graph<T>& g, const Tensor<T>& gout, const Tensor<T>&) {
            Tensor<T> dgamma(Shape{channels});
            Tensor<T> dbeta(Shape{channels});
            for (std::size_t r = 0; r < rows; ++r) {
                if (!live_rows[r]) continue;
                for (std::size_t c = 0; c < channels; ++c) {
                    const std::size_t i = r * channels + c;
                    dgamma[c] += gout[i] * xhat[i];
                    dbeta[c] += gout[i];
                }
            }
            if (Tensor<T>* gg = g.grad_sink(gamma)) add_into(*gg, dgamma);
            if (Tensor<T>* gb = g.grad_sink(beta)) add_into(*gb, dbeta);
            Tensor<T>* gx = g.grad_sink(x);
            if (!gx) return;
            const Tensor<T>& gv = g.value(gamma.id);
            for (std::size_t r = 0; r < rows; ++r) {
                if (!live_rows[r]) continue;
                for (std::size_t c = 0; c < channels; ++c) {
                    const std::size_t i = r * channels + c;
                    if (batch_stats) {
                        const T n = static_cast<T>(count);
                        (*gx)[i] += gv[c] * inv_std[c] * (gout[i] - dbeta[c] / n - xhat[i] * dgamma[c] / n);
                    } else {
                        (*gx)[i] += gv[c] * inv_std[c] * gout[i];
                    }
                }
            }
        });
}

template <typename T>
Var<T> dropout(Var<T> x, double p, Mode mode, std::mt19937_64& rng) {
    if (!(p >= 0.0 && p < 1.0)) throw ValidationError("dropout: rate must lie in [0, 1), got " + std::to_string(p));
    if (mode == Mode::infer || p == 0.0) return x;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
    Tensor<T> keep(x.shape());
    for (T& k : keep.data()) k = unit(rng) < p ? T{0} : keep_scale;
    Tensor<T> out = x.value();
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= keep[i];
    return x.graph->record("dropout", std::move(out), {x},
                           [x, keep = std::move(keep)](Graph<T>& g, const Tensor<T>& gout, const Tensor<T>&) {
                               if (Tensor<T>* gx = g.grad_sink(x)) {
                                   for (std::size_t i = 0; i < gout.numel(); ++i) (*gx)[i] += gout[i] * keep[i];
                               }
                           });
}

template <typename T>
Var<T> pair_logits(Var<T> query_scores, Var<T> key_scores, std::shared_ptr<const AttentionPattern> pattern) {
    const AttentionPattern& p = *pattern;
    require(query_scores.shape() == Shape{p.batch, p.queries}, pair_str("pair_logits", query_scores.shape(),
                                                                         Shape{p.batch, p.queries}));
    require(key_scores.shape() == Shape{p.key_rows, p.keys}, pair_str("pair_logits", key_scores.shape(),
                                                                       Shape{p.key_rows, p.keys}));
    const Tensor<T>& q = query_scores.value();
    const Tensor<T>& k = key_scores.value();
    Tensor<T> out(Shape{p.nnz()});
    for (std::size_t b = 0; b < p.batch; ++b) {
        const T* krow = k.raw() + p.key_row[b] * p.keys;
        for (std::size_t i = 0; i < p.queries; ++i) {
            const T qi = q[b * p.queries + i];
            for (std::size_t e = p.row_begin(b, i); e < p.row_end(b, i); ++e) out[e] = qi + krow[p.index[e]];
        }
    }
    g_pair_logit_evaluations += p.nnz();
    return query_scores.graph->record(
        "pair_logits", std::move(out), {query_scores, key_scores},
        [query_scores, key_scores, pattern](Graph<T>& g, const Tensor<T>& gout, const Tensor<T>&) {
            const AttentionPattern& p = *pattern;
            Tensor<T>* gq = g.grad_sink(query_scores);
            Tensor<T>* gk = g.grad_sink(key_scores);
            for (std::size_t b = 0; b < p.batch; ++b) {
                for (std::size_t i = 0; i < p.queries; ++i) {
                    for (std::size_t e = p.row_begin(b, i); e < p.row_end(b, i); ++e) {
                        if (gq) (*gq)[b * p.queries + i] += gout[e];
                        if (gk) (*gk)[p.key_row[b] * p.keys + p.index[e]] += gout[e];
                    }
                }
            }
        });
}

template <typename T>
Var<T> segment_softmax(Var<T> logits, std::shared_ptr<const AttentionPattern> pattern) {
    const AttentionPattern& p = *pattern;
    require(logits.shape() == Shape{p.nnz()}, pair_str("segment_softmax", logits.shape(), Shape{p.nnz()}));
    const Tensor<T>& z = logits.value();
    Tensor<T> out(Shape{p.nnz()});
    for (std::size_t r = 0; r + 1 < p.offsets.size(); ++r) {
        const std::size_t lo = p.offsets[r], hi = p.offsets[r + 1];
        if (lo == hi) continue;
        T top = z[lo];
        for (std::size_t e = lo; e < hi; ++e) top = std::max(top, z[e]);
        T total{0};
        for (std::size_t e = lo; e < hi; ++e) {
            out[e] = std::exp(z[e] - top);
            total += out[e];
        }
        for (std::size_t e = lo; e < hi; ++e) out[e] /= total;
    }
    return logits.graph->record("segment_softmax", std::move(out), {logits},
                                [logits, pattern](Graph<T>& g, const Tensor<T>& gout, const Tensor<T>& y) {
                                    Tensor<T>* gz = g.grad_sink(logits);
                                    if (!gz) return;
                                    const auto& off = pattern->offsets;
                                    for (std::size_t r = 0; r + 1 < off.size(); ++r) {
                                        T dot{0};
                                        for (std::size_t e = off[r]; e < off[r + 1]; ++e) dot += y[e] * gout[e];
                                        for (std::size_t e = off[r]; e < off[r + 1]; ++e) {
                                            (*gz)[e] += y[e] * (gout[e] - dot);
                                        }
                                    }
                                });
}

template <typename T>
Var<T> sparse_aggregate(Var<T> coeffs, Var<T> values, std::shared_ptr<const AttentionPattern> pattern) {
    const AttentionPattern& p = *pattern;
    require(coeffs.shape() == Shape{p.nnz()}, pair_str("sparse_aggregate", coeffs.shape(), Shape{p.nnz()}));
    const Shape& sv = values.shape();
    require(sv.size() == 3 && sv[0] == p.key_rows && sv[1] == p.keys,
            pair_str("sparse_aggregate", sv, Shape{p.key_rows, p.keys}));
    const std::size_t depth = sv[2];
    const Tensor<T>& a = coeffs.value();
    const Tensor<T>& v = values.value();
    Tensor<T> out(Shape{p.batch, p.queries, depth});
    for (std::size_t b = 0; b < p.batch; ++b) {
        const T* vrow = v.raw() + p.key_row[b] * p.keys * depth;
        for (std::size_t i = 0; i < p.queries; ++i) {
            T* dst = out.raw() + (b * p.queries + i) * depth;
            for (std::size_t e = p.row_begin(b, i); e < p.row_end(b, i); ++e) {
                const T w = a[e];
                const T* src = vrow + p.index[e] * depth;
                for (std::size_t d = 0; d < depth; ++d) dst[d] += w * src[d];
            }
        }
    }
    return coeffs.graph->record(
        "sparse_aggregate", std::move(out), {coeffs, values},
        [coeffs, values, pattern, depth](Graph<T>& g, const Tensor<T>& gout, const Tensor<T>&) {
            const AttentionPattern& p = *pattern;
            Tensor<T>* ga = g.grad_sink(coeffs);
            Tensor<T>* gv = g.grad_sink(values);
            const Tensor<T>& a = g.value(coeffs.id);
            const Tensor<T>& v = g.value(values.id);
            for (std::size_t b = 0; b < p.batch; ++b) {
                const std::size_t vbase = p.key_row[b] * p.keys * depth;
                for (std::size_t i = 0; i < p.queries; ++i) {
                    const T* go = gout.raw() + (b * p.queries + i) * depth;
                    for (std::size_t e = p.row_begin(b, i); e < p.row_end(b, i); ++e) {
                        const std::size_t off = vbase + p.index[e] * depth;
                        if (ga) {
                            T dot{0};
                            for (std::size_t d = 0; d < depth; ++d) dot += go[d] * v[off + d];
                            (*ga)[e] += dot;
                        }
                        if (gv) {
                            T* dst = gv->raw() + off;
                            for (std::size_t d = 0; d < depth; ++d) dst[d] += a[e] * go[d];
                        }
                    }
                }
            }
        });
}

#define PARATOPE_INSTANTIATE_OPS(T)                                                                             \
    template Var<T> matmul<T>(Var<T>, Var<T>);                                                                  \
    template Var<T> linear<T>(Var<T>, Var<T>);                                                                  \
    template Var<T> add<T>(Var<T>, Var<T>);                                                                     \
    template Var<T> add_bias<T>(Var<T>, Var<T>);                                                                \
    template Var<T> mul<T>(Var<T>, Var<T>);                                                                     \
    template Var<T> scale<T>(Var<T>, T);                                                                        \
    template Var<T> mask_rows<T>(Var<T>, const Tensor<T>&);                                                     \
    template Var<T> concat<T>(std::span<const Var<T>>, std::size_t);                                            \
    template Var<T> slice<T>(Var<T>, std::size_t, std::size_t, std::size_t);                                    \
    template Var<T> transpose<T>(Var<T>);                                                                       \
    template Var<T> reshape<T>(Var<T>, Shape);                                                                  \
    template Var<T> sum<T>(Var<T>);                                                                             \
    template Var<T> mean<T>(Var<T>);                                                                            \
    template Var<T> sum_squares<T>(Var<T>);                                                                     \
    template Var<T> conv1d_dilated<T>(Var<T>, Var<T>, std::size_t);                                             \
    template Var<T> elu<T>(Var<T>);                                                                             \
    template Var<T> leaky_relu<T>(Var<T>, T);                                                                   \
    template Var<T> sigmoid<T>(Var<T>);                                                                         \
    template Var<T> softmax_masked<T>(Var<T>, const Tensor<T>&);                                                \
    template Var<T> batch_norm<T>(Var<T>, Var<T>, Var<T>, BatchNormState<T>&, Mode, const Tensor<T>*);         \
    template Var<T> dropout<T>(Var<T>, double, Mode, std::mt19937_64&);                                         \
    template Var<T> pair_logits<T>(Var<T>, Var<T>, std::shared_ptr<const AttentionPattern>);                    \
    template Var<T> segment_softmax<T>(Var<T>, std::shared_ptr<const AttentionPattern>);                        \
    template Var<T> sparse_aggregate<T>(Var<T>, Var<T>, std::shared_ptr<const AttentionPattern>);

PARATOPE_INSTANTIATE_OPS(float)
PARATOPE_INSTANTIATE_OPS(double)

#undef PARATOPE_INSTANTIATE_OPS

}  // namespace ops
}  // namespace paratope
