#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "crowdlab/error.hpp"
#include "crowdlab/rng.hpp"
#include "crowdlab/tensor.hpp"

namespace crowdlab::nn {

using crowdlab::Rng;
using crowdlab::Tensor;

template <typename T>
struct Param {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    bool trainable = true;

    explicit Param(std::string n = {}) : name(std::move(n)) {}

    void init_shape(std::vector<std::size_t> shape) {
        value = Tensor<T>(shape);
        grad = Tensor<T>(std::move(shape));
    }
};

template <typename T>
void he_uniform(Tensor<T>& t, std::size_t fan_in, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < t.size(); ++i)
        t[i] = static_cast<T>(rng.uniform(-limit, limit));
}

// ---------------------------------------------------------------------------
// Conv2d: NHWC, stride 1, same padding (zero). Weight [kh, kw, cin, cout].
// ---------------------------------------------------------------------------

template <typename T>
struct Conv2d {
    std::size_t kernel = 3, in_channels = 0, out_channels = 0;
    Param<T> weight, bias;

    Tensor<T> cached_input; // kept for backward

    Conv2d() = default;
    Conv2d(std::size_t k, std::size_t cin, std::size_t cout, Rng& rng,
           const std::string& name_prefix = {}) {
        kernel = k;
        in_channels = cin;
        out_channels = cout;
        weight.name = name_prefix + "weight";
        bias.name = name_prefix + "bias";
        weight.init_shape({k, k, cin, cout});
        bias.init_shape({cout});
        he_uniform(weight.value, k * k * cin, rng);
    }

    Tensor<T> forward(const Tensor<T>& x) {
        require(x.rank() == 4 && x.dim(3) == in_channels, "ShapeError",
                "conv2d: bad input shape");
        cached_input = x;
        const std::size_t b = x.dim(0), h = x.dim(1), w = x.dim(2);
        const long pad = static_cast<long>(kernel / 2);
        Tensor<T> y({b, h, w, out_channels});
        for (std::size_t n = 0; n < b; ++n) {
            for (std::size_t r = 0; r < h; ++r) {
                for (std::size_t c = 0; c < w; ++c) {
                    T* out = &y.at(n, r, c, 0);
                    for (std::size_t oc = 0; oc < out_channels; ++oc)
                        out[oc] = bias.value[oc];
                    for (std::size_t kr = 0; kr < kernel; ++kr) {
                        const long ir = static_cast<long>(r + kr) - pad;
                        if (ir < 0 || ir >= static_cast<long>(h)) continue;
                        for (std::size_t kc = 0; kc < kernel; ++kc) {
                            const long ic = static_cast<long>(c + kc) - pad;
                            if (ic < 0 || ic >= static_cast<long>(w)) continue;
                            const T* in = &x.at(n, static_cast<std::size_t>(ir),
                                                static_cast<std::size_t>(ic), 0);
                            const T* wk = &weight.value.at(kr, kc, 0, 0);
                            for (std::size_t icn = 0; icn < in_channels; ++icn) {
                                const T xv = in[icn];
                                const T* wrow = wk + icn * out_channels;
                                for (std::size_t oc = 0; oc < out_channels; ++oc)
                                    out[oc] += xv * wrow[oc];
                            }
                        }
                    }
                }
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const Tensor<T>& x = cached_input;
        const std::size_t b = x.dim(0), h = x.dim(1), w = x.dim(2);
        const long pad = static_cast<long>(kernel / 2);
        Tensor<T> dx(x.shape());
        for (std::size_t n = 0; n < b; ++n) {
            for (std::size_t r = 0; r < h; ++r) {
                for (std::size_t c = 0; c < w; ++c) {
                    const T* g = &dy.at(n, r, c, 0);
                    for (std::size_t oc = 0; oc < out_channels; ++oc)
                        bias.grad[oc] += g[oc];
                    for (std::size_t kr = 0; kr < kernel; ++kr) {
                        const long ir = static_cast<long>(r + kr) - pad;
                        if (ir < 0 || ir >= static_cast<long>(h)) continue;
                        for (std::size_t kc = 0; kc < kernel; ++kc) {
                            const long ic = static_cast<long>(c + kc) - pad;
                            if (ic < 0 || ic >= static_cast<long>(w)) continue;
                            const T* in = &x.at(n, static_cast<std::size_t>(ir),
                                                static_cast<std::size_t>(ic), 0);
                            T* din = &dx.at(n, static_cast<std::size_t>(ir),
                                            static_cast<std::size_t>(ic), 0);
                            T* wg = &weight.grad.at(kr, kc, 0, 0);
                            const T* wv = &weight.value.at(kr, kc, 0, 0);
                            for (std::size_t icn = 0; icn < in_channels; ++icn) {
                                const T xv = in[icn];
                                T acc = T(0);
                                T* wgrow = wg + icn * out_channels;
                                const T* wvrow = wv + icn * out_channels;
                                for (std::size_t oc = 0; oc < out_channels; ++oc) {
                                    wgrow[oc] += xv * g[oc];
                                    acc += wvrow[oc] * g[oc];
                                }
                                din[icn] += acc;
                            }
                        }
                    }
                }
            }
        }
        return dx;
    }

    void collect(std::vector<Param<T>*>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }
};

// ---------------------------------------------------------------------------

template <typename T>
struct ReLU {
    Tensor<T> cached_input;

    Tensor<T> forward(const Tensor<T>& x) {
        cached_input = x;
        Tensor<T> y(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx(dy.shape());
        for (std::size_t i = 0; i < dy.size(); ++i)
            dx[i] = cached_input[i] > T(0) ? dy[i] : T(0);
        return dx;
    }
};

/// 2x2 max pool, stride 2. Requires even spatial dims.
template <typename T>
struct MaxPool2x2 {
    std::vector<std::size_t> argmax; // flat indices into the input
    std::vector<std::size_t> in_shape;

    Tensor<T> forward(const Tensor<T>& x) {
        require(x.rank() == 4 && x.dim(1) % 2 == 0 && x.dim(2) % 2 == 0, "ShapeError",
                "maxpool2x2 requires even spatial dims");
        const std::size_t b = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
        in_shape = x.shape();
        Tensor<T> y({b, h / 2, w / 2, c});
        argmax.assign(y.size(), 0);
        for (std::size_t n = 0; n < b; ++n) {
            for (std::size_t r = 0; r < h / 2; ++r) {
                for (std::size_t cc = 0; cc < w / 2; ++cc) {
                    for (std::size_t ch = 0; ch < c; ++ch) {
                        T best = x.at(n, 2 * r, 2 * cc, ch);
                        std::size_t best_idx =
                            ((n * h + 2 * r) * w + 2 * cc) * c + ch;
                        for (int dr = 0; dr < 2; ++dr) {
                            for (int dc = 0; dc < 2; ++dc) {
                                const T v = x.at(n, 2 * r + dr, 2 * cc + dc, ch);
                                if (v > best) {
                                    best = v;
                                    best_idx = ((n * h + 2 * r + dr) * w + 2 * cc + dc) * c + ch;
                                }
                            }
                        }
                        const std::size_t oi = ((n * (h / 2) + r) * (w / 2) + cc) * c + ch;
                        y[oi] = best;
                        argmax[oi] = best_idx;
                    }
                }
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx(in_shape);
        for (std::size_t i = 0; i < dy.size(); ++i) dx[argmax[i]] += dy[i];
        return dx;
    }
};

/// Fully connected layer: input B x in, output B x out.
template <typename T>
struct Affine {
    std::size_t in = 0, out = 0;
    Param<T> weight, bias; // weight [in, out]
    Tensor<T> cached_input;

    Affine() = default;
    Affine(std::size_t in_dim, std::size_t out_dim, Rng& rng,
           const std::string& name_prefix = {}) {
        in = in_dim;
        out = out_dim;
        weight.name = name_prefix + "weight";
        bias.name = name_prefix + "bias";
        weight.init_shape({in, out});
        bias.init_shape({out});
        he_uniform(weight.value, in, rng);
    }

    Tensor<T> forward(const Tensor<T>& x) {
        require(x.rank() == 2 && x.dim(1) == in, "ShapeError", "affine: bad input shape");
        cached_input = x;
        const std::size_t b = x.dim(0);
        Tensor<T> y({b, out});
        for (std::size_t n = 0; n < b; ++n) {
            for (std::size_t o = 0; o < out; ++o) y.at(n, o) = bias.value[o];
            for (std::size_t i = 0; i < in; ++i) {
                const T xv = x.at(n, i);
                for (std::size_t o = 0; o < out; ++o)
                    y.at(n, o) += xv * weight.value.at(i, o);
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const std::size_t b = cached_input.dim(0);
        Tensor<T> dx({b, in});
        for (std::size_t n = 0; n < b; ++n) {
            for (std::size_t o = 0; o < out; ++o) bias.grad[o] += dy.at(n, o);
            for (std::size_t i = 0; i < in; ++i) {
                const T xv = cached_input.at(n, i);
                T acc = T(0);
                for (std::size_t o = 0; o < out; ++o) {
                    weight.grad.at(i, o) += xv * dy.at(n, o);
                    acc += weight.value.at(i, o) * dy.at(n, o);
                }
                dx.at(n, i) = acc;
            }
        }
        return dx;
    }

    void collect(std::vector<Param<T>*>& out_params) {
        out_params.push_back(&weight);
        out_params.push_back(&bias);
    }
};

/// B x H x W x C -> B x C mean over the spatial grid.
template <typename T>
struct GlobalAvgPool {
    std::vector<std::size_t> in_shape;

    Tensor<T> forward(const Tensor<T>& x) {
        require(x.rank() == 4, "ShapeError", "gap expects B x H x W x C");
        in_shape = x.shape();
        const std::size_t b = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
        Tensor<T> y({b, c});
        for (std::size_t n = 0; n < b; ++n)
            for (std::size_t r = 0; r < h; ++r)
                for (std::size_t cc = 0; cc < w; ++cc)
                    for (std::size_t ch = 0; ch < c; ++ch)
                        y.at(n, ch) += x.at(n, r, cc, ch);
        const T scale = T(1) / static_cast<T>(h * w);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] *= scale;
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx(in_shape);
        const std::size_t b = in_shape[0], h = in_shape[1], w = in_shape[2], c = in_shape[3];
        const T scale = T(1) / static_cast<T>(h * w);
        for (std::size_t n = 0; n < b; ++n)
            for (std::size_t r = 0; r < h; ++r)
                for (std::size_t cc = 0; cc < w; ++cc)
                    for (std::size_t ch = 0; ch < c; ++ch)
                        dx.at(n, r, cc, ch) = dy.at(n, ch) * scale;
        return dx;
    }
};

/// Per-channel batch normalization over B,H,W. Biased variance; exact
/// backward through the batch statistics.
template <typename T>
struct BatchNorm2d {
    std::size_t channels = 0;
    T eps = T(1e-5);
    T momentum = T(0.1);
    Param<T> gamma, beta;
    Tensor<T> running_mean, running_var;
    bool training = true;

    // caches
    Tensor<T> xhat;
    std::vector<T> batch_mean, batch_inv_std;
    std::vector<std::size_t> in_shape;

    BatchNorm2d() = default;
    BatchNorm2d(std::size_t c, const std::string& name_prefix = {}) {
        channels = c;
        gamma.name = name_prefix + "gamma";
        beta.name = name_prefix + "beta";
        gamma.init_shape({c});
        beta.init_shape({c});
        gamma.value.fill(T(1));
        running_mean = Tensor<T>({c});
        running_var = Tensor<T>({c});
        running_var.fill(T(1));
    }

    Tensor<T> forward(const Tensor<T>& x) {
        require(x.rank() == 4 && x.dim(3) == channels, "ShapeError", "batchnorm: bad shape");
        in_shape = x.shape();
        const std::size_t b = x.dim(0), h = x.dim(1), w = x.dim(2);
        const std::size_t n_per_ch = b * h * w;
        xhat = Tensor<T>(x.shape());
        Tensor<T> y(x.shape());
        batch_mean.assign(channels, T(0));
        batch_inv_std.assign(channels, T(0));
        for (std::size_t ch = 0; ch < channels; ++ch) {
            T mean, var;
            if (training) {
                T sum = T(0);
                for (std::size_t i = ch; i < x.size(); i += channels) sum += x[i];
                mean = sum / static_cast<T>(n_per_ch);
                T sq = T(0);
                for (std::size_t i = ch; i < x.size(); i += channels) {
                    const T d = x[i] - mean;
                    sq += d * d;
                }
                var = sq / static_cast<T>(n_per_ch);
                running_mean[ch] = (T(1) - momentum) * running_mean[ch] + momentum * mean;
                running_var[ch] = (T(1) - momentum) * running_var[ch] + momentum * var;
            } else {
                mean = running_mean[ch];
                var = running_var[ch];
            }
            const T inv_std = T(1) / std::sqrt(var + eps);
            batch_mean[ch] = mean;
            batch_inv_std[ch] = inv_std;
            for (std::size_t i = ch; i < x.size(); i += channels) {
                xhat[i] = (x[i] - mean) * inv_std;
                y[i] = gamma.value[ch] * xhat[i] + beta.value[ch];
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const std::size_t n_per_ch = in_shape[0] * in_shape[1] * in_shape[2];
        Tensor<T> dx(in_shape);
        for (std::size_t ch = 0; ch < channels; ++ch) {
            T sum_dy = T(0), sum_dy_xhat = T(0);
            for (std::size_t i = ch; i < dy.size(); i += channels) {
                sum_dy += dy[i];
                sum_dy_xhat += dy[i] * xhat[i];
            }
            gamma.grad[ch] += sum_dy_xhat;
            beta.grad[ch] += sum_dy;
            if (training) {
                const T inv_n = T(1) / static_cast<T>(n_per_ch);
                const T k = gamma.value[ch] * batch_inv_std[ch];
                for (std::size_t i = ch; i < dy.size(); i += channels)
                    dx[i] = k * (dy[i] - sum_dy * inv_n - xhat[i] * sum_dy_xhat * inv_n);
            } else {
                const T k = gamma.value[ch] * batch_inv_std[ch];
                for (std::size_t i = ch; i < dy.size(); i += channels) dx[i] = k * dy[i];
            }
        }
        return dx;
    }

    void collect(std::vector<Param<T>*>& out) {
        out.push_back(&gamma);
        out.push_back(&beta);
    }
};

// ---------------------------------------------------------------------------
// Softmax cross-entropy, stabilized by max-subtraction.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
    require(logits.rank() == 2, "ShapeError", "softmax expects B x K");
    const std::size_t b = logits.dim(0), k = logits.dim(1);
    Tensor<T> p(logits.shape());
    for (std::size_t n = 0; n < b; ++n) {
        T mx = logits.at(n, 0);
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, logits.at(n, j));
        T z = T(0);
        for (std::size_t j = 0; j < k; ++j) {
            p.at(n, j) = std::exp(logits.at(n, j) - mx);
            z += p.at(n, j);
        }
        for (std::size_t j = 0; j < k; ++j) p.at(n, j) /= z;
    }
    return p;
}

/// Returns (mean loss in nats, dloss/dlogits).
template <typename T>
std::pair<T, Tensor<T>> cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels) {
    require(logits.rank() == 2 && logits.dim(0) == labels.size(), "ShapeError",
            "cross_entropy: batch size mismatch");
    const std::size_t b = logits.dim(0), k = logits.dim(1);
    Tensor<T> p = softmax(logits);
    T loss = T(0);
    Tensor<T> dlogits(logits.shape());
    const T inv_b = T(1) / static_cast<T>(b);
    for (std::size_t n = 0; n < b; ++n) {
        const int y = labels[n];
        require(y >= 0 && static_cast<std::size_t>(y) < k, "ShapeError",
                "cross_entropy: label out of range");
        // -log softmax, recomputed stably.
        T mx = logits.at(n, 0);
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, logits.at(n, j));
        T lse = T(0);
        for (std::size_t j = 0; j < k; ++j) lse += std::exp(logits.at(n, j) - mx);
        loss += (std::log(lse) + mx - logits.at(n, static_cast<std::size_t>(y))) * inv_b;
        for (std::size_t j = 0; j < k; ++j)
            dlogits.at(n, j) =
                (p.at(n, j) - (static_cast<std::size_t>(y) == j ? T(1) : T(0))) * inv_b;
    }
    return {loss, dlogits};
}

// ---------------------------------------------------------------------------
// LSTM over a feature sequence, gates ordered i, f, g, o.
// ---------------------------------------------------------------------------

template <typename T>
struct Lstm {
    std::size_t input_dim = 0, hidden = 0;
    Param<T> w_x, w_h, b; // w_x [in, 4H], w_h [H, 4H], b [4H]
    double dropout_p = 0.0;
    bool training = false;

    struct StepCache {
        Tensor<T> x, h_prev, c_prev;
        std::vector<T> gates; // post-activation [i f g o], length 4H
        Tensor<T> c, h;
        std::vector<T> drop_mask; // applied to x when training
    };
    std::vector<StepCache> steps;

    Lstm() = default;
    Lstm(std::size_t in_dim, std::size_t hidden_dim, Rng& rng,
         const std::string& name_prefix = {}) {
        input_dim = in_dim;
        hidden = hidden_dim;
        w_x.name = name_prefix + "w_x";
        w_h.name = name_prefix + "w_h";
        b.name = name_prefix + "b";
        w_x.init_shape({in_dim, 4 * hidden_dim});
        w_h.init_shape({hidden_dim, 4 * hidden_dim});
        b.init_shape({4 * hidden_dim});
        he_uniform(w_x.value, in_dim, rng);
        he_uniform(w_h.value, hidden_dim, rng);
    }

    static T sigmoid(T v) { return T(1) / (T(1) + std::exp(-v)); }

    /// One step for a single sequence element (vectors, not batches).
    /// x: [input_dim], h/c: [hidden].
    void step(const Tensor<T>& x_in, Tensor<T>& h, Tensor<T>& c, Rng* drop_rng) {
        StepCache cache;
        cache.h_prev = h;
        cache.c_prev = c;
        Tensor<T> x = x_in;
        if (training && dropout_p > 0.0) {
            require(drop_rng != nullptr, "InvalidSpec", "dropout requires an rng");
            cache.drop_mask.resize(x.size());
            const T scale = T(1) / static_cast<T>(1.0 - dropout_p);
            for (std::size_t i = 0; i < x.size(); ++i) {
                const bool keep = drop_rng->uniform() >= dropout_p;
                cache.drop_mask[i] = keep ? scale : T(0);
                x[i] *= cache.drop_mask[i];
            }
        }
        cache.x = x;
        std::vector<T> pre(4 * hidden, T(0));
        for (std::size_t j = 0; j < 4 * hidden; ++j) pre[j] = b.value[j];
        for (std::size_t i = 0; i < input_dim; ++i) {
            const T xv = x[i];
            for (std::size_t j = 0; j < 4 * hidden; ++j) pre[j] += xv * w_x.value.at(i, j);
        }
        for (std::size_t i = 0; i < hidden; ++i) {
            const T hv = h[i];
            for (std::size_t j = 0; j < 4 * hidden; ++j) pre[j] += hv * w_h.value.at(i, j);
        }
        cache.gates.resize(4 * hidden);
        Tensor<T> c_new({hidden}), h_new({hidden});
        for (std::size_t u = 0; u < hidden; ++u) {
            const T ig = sigmoid(pre[u]);
            const T fg = sigmoid(pre[hidden + u]);
            const T gg = std::tanh(pre[2 * hidden + u]);
            const T og = sigmoid(pre[3 * hidden + u]);
            cache.gates[u] = ig;
            cache.gates[hidden + u] = fg;
            cache.gates[2 * hidden + u] = gg;
            cache.gates[3 * hidden + u] = og;
            c_new[u] = fg * c[u] + ig * gg;
            h_new[u] = og * std::tanh(c_new[u]);
        }
        cache.c = c_new;
        cache.h = h_new;
        h = h_new;
        c = c_new;
        steps.push_back(std::move(cache));
    }

    /// Backward through all recorded steps (most recent last).
    /// dh_last: gradient w.r.t. the final hidden state.
    /// Returns per-step input gradients, aligned with the forward order.
    std::vector<Tensor<T>> backward(const Tensor<T>& dh_last) {
        std::vector<Tensor<T>> dx_seq(steps.size());
        Tensor<T> dh = dh_last;
        Tensor<T> dc({hidden});
        for (std::size_t s = steps.size(); s-- > 0;) {
            const StepCache& cache = steps[s];
            std::vector<T> dpre(4 * hidden, T(0));
            Tensor<T> dc_prev({hidden});
            for (std::size_t u = 0; u < hidden; ++u) {
                const T ig = cache.gates[u];
                const T fg = cache.gates[hidden + u];
                const T gg = cache.gates[2 * hidden + u];
                const T og = cache.gates[3 * hidden + u];
                const T tc = std::tanh(cache.c[u]);
                const T dct = dc[u] + dh[u] * og * (T(1) - tc * tc);
                dpre[3 * hidden + u] = dh[u] * tc * og * (T(1) - og);
                dpre[u] = dct * gg * ig * (T(1) - ig);
                dpre[hidden + u] = dct * cache.c_prev[u] * fg * (T(1) - fg);
                dpre[2 * hidden + u] = dct * ig * (T(1) - gg * gg);
                dc_prev[u] = dct * fg;
            }
            Tensor<T> dx({input_dim});
            for (std::size_t i = 0; i < input_dim; ++i) {
                T acc = T(0);
                const T xv = cache.x[i];
                for (std::size_t j = 0; j < 4 * hidden; ++j) {
                    w_x.grad.at(i, j) += xv * dpre[j];
                    acc += w_x.value.at(i, j) * dpre[j];
                }
                dx[i] = acc;
            }
            if (!cache.drop_mask.empty())
                for (std::size_t i = 0; i < input_dim; ++i) dx[i] *= cache.drop_mask[i];
            dx_seq[s] = std::move(dx);
            Tensor<T> dh_prev({hidden});
            for (std::size_t i = 0; i < hidden; ++i) {
                T acc = T(0);
                const T hv = cache.h_prev[i];
                for (std::size_t j = 0; j < 4 * hidden; ++j) {
                    w_h.grad.at(i, j) += hv * dpre[j];
                    acc += w_h.value.at(i, j) * dpre[j];
                }
                dh_prev[i] = acc;
            }
            for (std::size_t j = 0; j < 4 * hidden; ++j) b.grad[j] += dpre[j];
            dh = dh_prev;
            dc = dc_prev;
        }
        steps.clear();
        return dx_seq;
    }

    void collect(std::vector<Param<T>*>& out) {
        out.push_back(&w_x);
        out.push_back(&w_h);
        out.push_back(&b);
    }
};

// ---------------------------------------------------------------------------
// Adam.
// ---------------------------------------------------------------------------

template <typename T>
class Adam {
  public:
    explicit Adam(std::vector<Param<T>*> params, double lr = 1e-3, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (auto* p : params_) {
            m_.emplace_back(p->value.shape());
            v_.emplace_back(p->value.shape());
        }
    }

    void zero_grad() {
        for (auto* p : params_) p->grad.fill(T(0));
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t k = 0; k < params_.size(); ++k) {
            Param<T>* p = params_[k];
            if (!p->trainable) continue;
            for (std::size_t i = 0; i < p->value.size(); ++i) {
                const double g = static_cast<double>(p->grad[i]);
                double m = beta1_ * static_cast<double>(m_[k][i]) + (1.0 - beta1_) * g;
                double v = beta2_ * static_cast<double>(v_[k][i]) + (1.0 - beta2_) * g * g;
                m_[k][i] = static_cast<T>(m);
                v_[k][i] = static_cast<T>(v);
                const double update = lr_ * (m / bc1) / (std::sqrt(v / bc2) + eps_);
                p->value[i] = static_cast<T>(static_cast<double>(p->value[i]) - update);
            }
        }
    }

    double learning_rate() const { return lr_; }

  private:
    std::vector<Param<T>*> params_;
    std::vector<Tensor<T>> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
};

} // namespace crowdlab::nn
