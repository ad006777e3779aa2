#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "crowdlab/dataset_io.hpp"
#include "crowdlab/metrics.hpp"
#include "crowdlab/nn.hpp"
#include "crowdlab/param_io.hpp"
#include "crowdlab/stage1.hpp"
#include "crowdlab/video.hpp"

namespace crowdlab {

struct Vgg19Spec {
    std::array<std::size_t, 5> block_convs = {2, 2, 4, 4, 4};
    std::array<std::size_t, 5> widths = {64, 128, 256, 512, 512};
    std::size_t in_channels = 3;

    void validate() const {
        std::size_t total = 0;
        for (auto n : block_convs) {
            require(n >= 1, "InvalidSpec", "each block needs at least one conv");
            total += n;
        }
        require(total >= 1, "InvalidSpec", "empty backbone");
        for (auto w : widths) require(w >= 1, "InvalidSpec", "block width must be >= 1");
    }

    std::size_t tap_channels() const { return widths.back(); }
};

struct WdrbSpec {
    std::size_t layers = 2;
    std::size_t widen_factor = 2;

    void validate() const {
        require(layers >= 1, "InvalidSpec", "WDRB needs at least one layer");
        require(widen_factor >= 1, "InvalidSpec", "widen factor must be >= 1");
    }
};

struct LstmSpec {
    std::size_t hidden = 256;
    double dropout = 0.2;

    void validate() const {
        require(hidden >= 1, "InvalidSpec", "LSTM hidden size must be >= 1");
        require(dropout >= 0.0 && dropout < 1.0, "InvalidSpec", "dropout must be in [0,1)");
    }
};

struct AnomalyTrainConfig {
    double learning_rate = 0.001;
    std::size_t epochs = 50;
    std::size_t batch_size = 8;
    bool share_streams = false;
};

namespace detail {

template <typename T>
nn::Tensor<T> concat_channels(const std::vector<const nn::Tensor<T>*>& parts) {
    const std::size_t b = parts[0]->dim(0), h = parts[0]->dim(1), w = parts[0]->dim(2);
    std::size_t c_total = 0;
    for (const auto* p : parts) c_total += p->dim(3);
    nn::Tensor<T> out({b, h, w, c_total});
    std::size_t off = 0;
    for (const auto* p : parts) {
        const std::size_t c = p->dim(3);
        for (std::size_t n = 0; n < b; ++n)
            for (std::size_t r = 0; r < h; ++r)
                for (std::size_t cc = 0; cc < w; ++cc)
                    for (std::size_t ch = 0; ch < c; ++ch)
                        out.at(n, r, cc, off + ch) = p->at(n, r, cc, ch);
        off += c;
    }
    return out;
}

template <typename T>
nn::Tensor<T> slice_channels(const nn::Tensor<T>& x, std::size_t from, std::size_t count) {
    const std::size_t b = x.dim(0), h = x.dim(1), w = x.dim(2);
    nn::Tensor<T> out({b, h, w, count});
    for (std::size_t n = 0; n < b; ++n)
        for (std::size_t r = 0; r < h; ++r)
            for (std::size_t cc = 0; cc < w; ++cc)
                for (std::size_t ch = 0; ch < count; ++ch)
                    out.at(n, r, cc, ch) = x.at(n, r, cc, from + ch);
    return out;
}

} // namespace detail

/// VGG-19-style conv backbone. Pools after blocks 1-4; the tap point is the
/// output of the last conv of block 5 before its pool (8 x 8 x 512 for
/// 128 x 128 input at default widths).
template <typename T>
class VggBackbone {
  public:
    VggBackbone(const Vgg19Spec& spec, Rng& rng, const std::string& name_prefix)
        : spec_(spec) {
        spec_.validate();
        std::size_t cin = spec_.in_channels;
        for (std::size_t blk = 0; blk < 5; ++blk) {
            for (std::size_t l = 0; l < spec_.block_convs[blk]; ++l) {
                const std::string prefix = name_prefix + "block" + std::to_string(blk + 1) +
                                           "/conv" + std::to_string(l + 1) + "/";
                convs_.emplace_back(3, cin, spec_.widths[blk], rng, prefix);
                cin = spec_.widths[blk];
            }
        }
        relus_.resize(convs_.size());
        pools_.resize(4);
    }

    nn::Tensor<T> forward(const nn::Tensor<T>& x) {
        nn::Tensor<T> y = x;
        std::size_t conv_idx = 0;
        for (std::size_t blk = 0; blk < 5; ++blk) {
            for (std::size_t l = 0; l < spec_.block_convs[blk]; ++l) {
                y = convs_[conv_idx].forward(y);
                y = relus_[conv_idx].forward(y);
                ++conv_idx;
            }
            if (blk < 4) y = pools_[blk].forward(y);
        }
        return y;
    }

    nn::Tensor<T> backward(const nn::Tensor<T>& dy) {
        nn::Tensor<T> g = dy;
        std::size_t conv_idx = convs_.size();
        for (std::size_t blk = 5; blk-- > 0;) {
            if (blk < 4) g = pools_[blk].backward(g);
            for (std::size_t l = spec_.block_convs[blk]; l-- > 0;) {
                --conv_idx;
                g = relus_[conv_idx].backward(g);
                g = convs_[conv_idx].backward(g);
            }
        }
        return g;
    }

    void collect(std::vector<nn::Param<T>*>& out) {
        for (auto& c : convs_) c.collect(out);
    }

    const Vgg19Spec& spec() const { return spec_; }
    std::vector<nn::Conv2d<T>>& convs() { return convs_; }

  private:
    Vgg19Spec spec_;
    std::vector<nn::Conv2d<T>> convs_;
    std::vector<nn::ReLU<T>> relus_;
    std::vector<nn::MaxPool2x2<T>> pools_;
};

/// Wide Dense Residual Block: widened 3x3 convs with conv->BN->ReLU, dense
/// concatenative connectivity, a 1x1-projected additive skip from the block
/// input, then global average pooling to a fixed-length vector.
template <typename T>
class Wdrb {
  public:
    Wdrb(const WdrbSpec& spec, std::size_t in_channels, Rng& rng,
         const std::string& name_prefix)
        : spec_(spec), in_channels_(in_channels) {
        spec_.validate();
        wide_ = spec_.widen_factor * in_channels;
        for (std::size_t i = 0; i < spec_.layers; ++i) {
            const std::size_t cin = in_channels + i * wide_;
            const std::string prefix = name_prefix + "layer" + std::to_string(i + 1) + "/";
            convs_.emplace_back(3, cin, wide_, rng, prefix + "conv/");
            bns_.emplace_back(wide_, prefix + "bn/");
        }
        relus_.resize(spec_.layers);
        proj_ = nn::Conv2d<T>(1, in_channels, wide_, rng, name_prefix + "proj/");
    }

    std::size_t output_dim() const { return wide_; }

    void set_training(bool training) {
        for (auto& bn : bns_) bn.training = training;
    }

    /// B x H x W x C -> B x wide feature vectors.
    nn::Tensor<T> forward(const nn::Tensor<T>& x) {
        require(x.rank() == 4 && x.dim(3) == in_channels_, "ShapeError", "wdrb: bad input");
        outputs_.clear();
        outputs_.push_back(x);
        for (std::size_t i = 0; i < spec_.layers; ++i) {
            std::vector<const nn::Tensor<T>*> parts;
            for (const auto& o : outputs_) parts.push_back(&o);
            nn::Tensor<T> xin = detail::concat_channels(parts);
            nn::Tensor<T> y = convs_[i].forward(xin);
            y = bns_[i].forward(y);
            y = relus_[i].forward(y);
            outputs_.push_back(std::move(y));
        }
        nn::Tensor<T> skip = proj_.forward(x);
        nn::Tensor<T> sum = outputs_.back();
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += skip[i];
        return gap_.forward(sum);
    }

    nn::Tensor<T> backward(const nn::Tensor<T>& dy) {
        nn::Tensor<T> dsum = gap_.backward(dy);
        nn::Tensor<T> dx = proj_.backward(dsum);
        // douts[i] = gradient w.r.t. outputs_[i] (0 = block input).
        std::vector<nn::Tensor<T>> douts;
        for (const auto& o : outputs_) douts.emplace_back(o.shape());
        douts.back() = dsum;
        for (std::size_t i = spec_.layers; i-- > 0;) {
            nn::Tensor<T> g = relus_[i].backward(douts[i + 1]);
            g = bns_[i].backward(g);
            g = convs_[i].backward(g);
            // Split the concat gradient back to the contributing tensors.
            std::size_t off = 0;
            for (std::size_t j = 0; j <= i; ++j) {
                const std::size_t c = douts[j].dim(3);
                nn::Tensor<T> part = detail::slice_channels(g, off, c);
                for (std::size_t k = 0; k < part.size(); ++k) douts[j][k] += part[k];
                off += c;
            }
        }
        for (std::size_t k = 0; k < dx.size(); ++k) dx[k] += douts[0][k];
        return dx;
    }

    void collect(std::vector<nn::Param<T>*>& out) {
        for (auto& c : convs_) c.collect(out);
        for (auto& b : bns_) b.collect(out);
        proj_.collect(out);
    }

    std::vector<nn::BatchNorm2d<T>>& batch_norms() { return bns_; }

    /// Closed-form trainable parameter count (convs + BN + projection).
    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (std::size_t i = 0; i < spec_.layers; ++i) {
            const std::size_t cin = in_channels_ + i * wide_;
            n += 3 * 3 * cin * wide_ + wide_; // conv
            n += 2 * wide_;                   // BN gamma/beta
        }
        n += in_channels_ * wide_ + wide_; // 1x1 projection
        return n;
    }

  private:
    WdrbSpec spec_;
    std::size_t in_channels_ = 0, wide_ = 0;
    std::vector<nn::Conv2d<T>> convs_;
    std::vector<nn::BatchNorm2d<T>> bns_;
    std::vector<nn::ReLU<T>> relus_;
    nn::Conv2d<T> proj_;
    nn::GlobalAvgPool<T> gap_;
    std::vector<nn::Tensor<T>> outputs_;
};

/// One spatial stream: VGG backbone feeding the WDRB.
template <typename T>
class SpatialStream {
  public:
    SpatialStream(const Vgg19Spec& vgg_spec, const WdrbSpec& wdrb_spec, Rng& rng,
                  const std::string& suffix)
        : vgg_(vgg_spec, rng, "vgg/" + suffix + "/"),
          wdrb_(wdrb_spec, vgg_spec.tap_channels(), rng, "wdrb/" + suffix + "/") {}

    nn::Tensor<T> forward(const nn::Tensor<T>& frames) {
        return wdrb_.forward(vgg_.forward(frames));
    }

    nn::Tensor<T> backward(const nn::Tensor<T>& dfeat) {
        return vgg_.backward(wdrb_.backward(dfeat));
    }

    std::size_t feature_dim() const { return wdrb_.output_dim(); }
    void set_training(bool t) { wdrb_.set_training(t); }

    VggBackbone<T>& vgg() { return vgg_; }
    Wdrb<T>& wdrb() { return wdrb_; }

  private:
    VggBackbone<T> vgg_;
    Wdrb<T> wdrb_;
};

/// Spatio-temporal violence classifier: per-frame-pair spatial features,
/// LSTM over time, softmax over {non-violent, violent}.
template <typename T>
class AnomalyModel {
  public:
    AnomalyModel(const Vgg19Spec& vgg_spec, const WdrbSpec& wdrb_spec, const LstmSpec& lstm_spec,
                 Rng& rng, bool share_streams = false,
                 const CheckpointArchive* pretrained = nullptr)
        : share_streams_(share_streams), lstm_spec_(lstm_spec) {
        lstm_spec_.validate();
        stream_a_ = std::make_unique<SpatialStream<T>>(vgg_spec, wdrb_spec, rng,
                                                       share_streams ? "shared" : "a");
        if (!share_streams)
            stream_b_ = std::make_unique<SpatialStream<T>>(vgg_spec, wdrb_spec, rng, "b");
        pair_dim_ = 2 * stream_a_->feature_dim();
        lstm_ = nn::Lstm<T>(pair_dim_, lstm_spec_.hidden, rng, "lstm/");
        lstm_.dropout_p = lstm_spec_.dropout;
        classifier_ = nn::Affine<T>(lstm_spec_.hidden, 2, rng, "classifier/");
        if (pretrained) load_pretrained_vgg(*pretrained);
    }

    bool vgg_frozen() const { return vgg_frozen_; }

    void set_training(bool training) {
        training_ = training;
        lstm_.training = training;
        stream_a_->set_training(training);
        if (stream_b_) stream_b_->set_training(training);
    }

    /// Concatenated stream features for one (t, t-1) frame pair.
    nn::Tensor<T> spatial_forward(const nn::Tensor<T>& frame_t,
                                  const nn::Tensor<T>& frame_tm1) {
        require(frame_t.rank() == 3 && frame_t.shape() == frame_tm1.shape(), "ShapeError",
                "spatial_forward expects two equally shaped H x W x C frames");
        nn::Tensor<T> batch_t = to_batch(frame_t);
        nn::Tensor<T> batch_p = to_batch(frame_tm1);
        nn::Tensor<T> fa, fb;
        if (share_streams_) {
            // One batched pass keeps the layer caches coherent.
            nn::Tensor<T> both({2, frame_t.dim(0), frame_t.dim(1), frame_t.dim(2)});
            std::copy(frame_t.vec().begin(), frame_t.vec().end(), both.data());
            std::copy(frame_tm1.vec().begin(), frame_tm1.vec().end(),
                      both.data() + frame_t.size());
            nn::Tensor<T> f = stream_a_->forward(both);
            fa = nn::Tensor<T>({1, f.dim(1)});
            fb = nn::Tensor<T>({1, f.dim(1)});
            for (std::size_t j = 0; j < f.dim(1); ++j) {
                fa.at(0, j) = f.at(0, j);
                fb.at(0, j) = f.at(1, j);
            }
        } else {
            fa = stream_a_->forward(batch_t);
            fb = stream_b_->forward(batch_p);
        }
        nn::Tensor<T> out({1, pair_dim_});
        for (std::size_t j = 0; j < pair_dim_ / 2; ++j) {
            out.at(0, j) = fa.at(0, j);
            out.at(0, pair_dim_ / 2 + j) = fb.at(0, j);
        }
        return out;
    }

    /// LSTM over valid steps only; returns the last valid hidden state.
    nn::Tensor<T> temporal_forward(const std::vector<nn::Tensor<T>>& pair_features,
                                   const std::vector<std::uint8_t>& valid, Rng* rng = nullptr) {
        require(!pair_features.empty(), "TooFewFrames", "need at least one frame pair");
        lstm_.steps.clear();
        nn::Tensor<T> h({lstm_spec_.hidden}), c({lstm_spec_.hidden});
        for (std::size_t s = 0; s < pair_features.size(); ++s) {
            if (s < valid.size() && !valid[s]) continue; // padded: state carried unchanged
            lstm_.step(pair_features[s], h, c, rng);
        }
        return h;
    }

    /// Probabilities over {non-violent, violent}.
    nn::Tensor<T> classify(const nn::Tensor<T>& hidden) {
        nn::Tensor<T> h({1, lstm_spec_.hidden});
        std::copy(hidden.vec().begin(), hidden.vec().end(), h.data());
        return nn::softmax(classifier_.forward(h));
    }

    /// Stateless per-step violent-class score (does not disturb caches).
    double violent_score(const nn::Tensor<T>& hidden) const {
        T z0 = classifier_.bias.value[0], z1 = classifier_.bias.value[1];
        for (std::size_t i = 0; i < lstm_spec_.hidden; ++i) {
            z0 += hidden[i] * classifier_.weight.value.at(i, 0);
            z1 += hidden[i] * classifier_.weight.value.at(i, 1);
        }
        const T mx = std::max(z0, z1);
        const T e0 = std::exp(z0 - mx), e1 = std::exp(z1 - mx);
        return static_cast<double>(e1 / (e0 + e1));
    }

    // -- Clip-level training path (batched spatial passes) -------------------

    struct ClipForward {
        double loss = 0.0;
        double violent_prob = 0.0;
        std::vector<double> score_trace; // per-step violent score
        nn::Tensor<T> dlogits;
        std::size_t pairs = 0;
    };

    /// Forward + loss for one clip; caches everything needed for clip_backward.
    ClipForward clip_forward(const FrameSequence& clip, int label, Rng* rng) {
        const std::size_t v = clip.valid_count();
        require(v >= 2, "TooFewFrames", "clip needs at least two valid frames");
        const std::size_t pairs = v - 1;
        const auto& f0 = clip.frames[0];
        const std::size_t h = f0.dim(0), w = f0.dim(1), c = f0.dim(2);

        // Batch frames 1..v-1 ("t") and 0..v-2 ("t-1") per stream.
        auto stack = [&](std::size_t from) {
            nn::Tensor<T> b({pairs, h, w, c});
            for (std::size_t p = 0; p < pairs; ++p) {
                const TensorF& fr = clip.frames[from + p];
                for (std::size_t i = 0; i < fr.size(); ++i)
                    b[p * fr.size() + i] = static_cast<T>(fr[i]);
            }
            return b;
        };

        nn::Tensor<T> feat_a, feat_b;
        if (share_streams_) {
            nn::Tensor<T> both({2 * pairs, h, w, c});
            nn::Tensor<T> bt = stack(1), bp = stack(0);
            std::copy(bt.vec().begin(), bt.vec().end(), both.data());
            std::copy(bp.vec().begin(), bp.vec().end(), both.data() + bt.size());
            nn::Tensor<T> f = stream_a_->forward(both);
            const std::size_t fd = f.dim(1);
            feat_a = nn::Tensor<T>({pairs, fd});
            feat_b = nn::Tensor<T>({pairs, fd});
            for (std::size_t p = 0; p < pairs; ++p)
                for (std::size_t j = 0; j < fd; ++j) {
                    feat_a.at(p, j) = f.at(p, j);
                    feat_b.at(p, j) = f.at(pairs + p, j);
                }
        } else {
            feat_a = stream_a_->forward(stack(1));
            feat_b = stream_b_->forward(stack(0));
        }

        // LSTM over the pair features.
        lstm_.steps.clear();
        nn::Tensor<T> hstate({lstm_spec_.hidden}), cstate({lstm_spec_.hidden});
        ClipForward out;
        const std::size_t fd = pair_dim_ / 2;
        for (std::size_t p = 0; p < pairs; ++p) {
            nn::Tensor<T> x({pair_dim_});
            for (std::size_t j = 0; j < fd; ++j) {
                x[j] = feat_a.at(p, j);
                x[fd + j] = feat_b.at(p, j);
            }
            lstm_.step(x, hstate, cstate, rng);
            out.score_trace.push_back(violent_score(hstate));
        }

        nn::Tensor<T> hb({1, lstm_spec_.hidden});
        std::copy(hstate.vec().begin(), hstate.vec().end(), hb.data());
        nn::Tensor<T> logits = classifier_.forward(hb);
        auto [loss, dlogits] = nn::cross_entropy(logits, std::vector<int>{label});
        nn::Tensor<T> probs = nn::softmax(logits);
        out.loss = static_cast<double>(loss);
        out.violent_prob = static_cast<double>(probs.at(0, 1));
        out.dlogits = std::move(dlogits);
        out.pairs = pairs;
        return out;
    }

    /// Backpropagate one clip; parameter gradients accumulate.
    void clip_backward(const ClipForward& fwd) {
        nn::Tensor<T> dh2 = classifier_.backward(fwd.dlogits); // 1 x hidden
        nn::Tensor<T> dh({lstm_spec_.hidden});
        std::copy(dh2.vec().begin(), dh2.vec().end(), dh.data());
        std::vector<nn::Tensor<T>> dx_seq = lstm_.backward(dh);

        const std::size_t pairs = fwd.pairs;
        const std::size_t fd = pair_dim_ / 2;
        nn::Tensor<T> dfeat_a({pairs, fd}), dfeat_b({pairs, fd});
        for (std::size_t p = 0; p < pairs; ++p)
            for (std::size_t j = 0; j < fd; ++j) {
                dfeat_a.at(p, j) = dx_seq[p][j];
                dfeat_b.at(p, j) = dx_seq[p][fd + j];
            }
        if (share_streams_) {
            nn::Tensor<T> dboth({2 * pairs, fd});
            for (std::size_t p = 0; p < pairs; ++p)
                for (std::size_t j = 0; j < fd; ++j) {
                    dboth.at(p, j) = dfeat_a.at(p, j);
                    dboth.at(pairs + p, j) = dfeat_b.at(p, j);
                }
            stream_a_->backward(dboth);
        } else {
            stream_a_->backward(dfeat_a);
            stream_b_->backward(dfeat_b);
        }
    }

    // -- Parameters -----------------------------------------------------------

    void collect_all(std::vector<nn::Param<T>*>& out) {
        stream_a_->vgg().collect(out);
        stream_a_->wdrb().collect(out);
        if (stream_b_) {
            stream_b_->vgg().collect(out);
            stream_b_->wdrb().collect(out);
        }
        lstm_.collect(out);
        classifier_.collect(out);
    }

    std::vector<nn::Param<T>*> trainable_params() {
        std::vector<nn::Param<T>*> all, out;
        collect_all(all);
        for (auto* p : all)
            if (p->trainable) out.push_back(p);
        return out;
    }

    void save(CheckpointArchive& archive) {
        std::vector<nn::Param<T>*> all;
        collect_all(all);
        nn::save_params(all, archive);
        save_bn_state(archive);
    }

    void load(const CheckpointArchive& archive) {
        std::vector<nn::Param<T>*> all;
        collect_all(all);
        nn::load_params(all, archive);
        load_bn_state(archive);
    }

    nn::Lstm<T>& lstm() { return lstm_; }
    SpatialStream<T>& stream_a() { return *stream_a_; }
    nn::Affine<T>& classifier() { return classifier_; }

  private:
    static nn::Tensor<T> to_batch(const nn::Tensor<T>& frame) {
        nn::Tensor<T> b({1, frame.dim(0), frame.dim(1), frame.dim(2)});
        std::copy(frame.vec().begin(), frame.vec().end(), b.data());
        return b;
    }

    /// Published VGG-19 weights use unprefixed names vgg/block{b}/conv{l}/*;
    /// they are copied into every stream and frozen.
    void load_pretrained_vgg(const CheckpointArchive& pretrained) {
        auto load_stream = [&](SpatialStream<T>& stream) {
            std::vector<nn::Param<T>*> ps;
            stream.vgg().collect(ps);
            for (auto* p : ps) {
                // Internal name: vgg/<suffix>/block../conv../{weight|bias}
                const std::string& full = p->name;
                const std::size_t second_slash = full.find('/', 4);
                const std::string external = "vgg/" + full.substr(second_slash + 1);
                const auto& e = pretrained.entry(external);
                std::vector<std::size_t> want(p->value.shape());
                std::vector<std::size_t> got(e.shape.begin(), e.shape.end());
                require(want == got, "ShapeMismatch",
                        "pretrained tensor '" + external + "' has the wrong shape");
                for (std::size_t i = 0; i < e.data.size(); ++i)
                    p->value[i] = static_cast<T>(e.data[i]);
                p->trainable = false;
            }
        };
        load_stream(*stream_a_);
        if (stream_b_) load_stream(*stream_b_);
        vgg_frozen_ = true;
    }

    void for_each_bn(const std::function<void(nn::BatchNorm2d<T>&, const std::string&)>& fn) {
        auto walk = [&](SpatialStream<T>& s, const std::string& suffix) {
            auto& bns = s.wdrb().batch_norms();
            for (std::size_t i = 0; i < bns.size(); ++i)
                fn(bns[i], "wdrb/" + suffix + "/layer" + std::to_string(i + 1) + "/bn/");
        };
        walk(*stream_a_, share_streams_ ? "shared" : "a");
        if (stream_b_) walk(*stream_b_, "b");
    }

    void save_bn_state(CheckpointArchive& archive) {
        for_each_bn([&](nn::BatchNorm2d<T>& bn, const std::string& prefix) {
            archive.add_tensor(prefix + "running_mean", bn.running_mean.template cast<float>());
            archive.add_tensor(prefix + "running_var", bn.running_var.template cast<float>());
        });
    }

    void load_bn_state(const CheckpointArchive& archive) {
        for_each_bn([&](nn::BatchNorm2d<T>& bn, const std::string& prefix) {
            if (!archive.has(prefix + "running_mean")) return;
            bn.running_mean = archive.tensor(prefix + "running_mean").template cast<T>();
            bn.running_var = archive.tensor(prefix + "running_var").template cast<T>();
        });
    }

    bool share_streams_ = false;
    bool training_ = false;
    bool vgg_frozen_ = false;
    LstmSpec lstm_spec_;
    std::size_t pair_dim_ = 0;
    std::unique_ptr<SpatialStream<T>> stream_a_, stream_b_;
    nn::Lstm<T> lstm_;
    nn::Affine<T> classifier_;
};

/// Per-epoch training loop over clips; Adam on the trainable parameters.
inline std::pair<CheckpointArchive, TrainLog> train_anomaly(AnomalyModel<float>& model,
                                                            const ClipDatasetArrays& dataset,
                                                            const AnomalyTrainConfig& config,
                                                            Rng& rng) {
    require(!dataset.clips.empty(), "EmptyDataset", "anomaly training needs clips");
    require(config.epochs >= 1, "InvalidSpec", "epochs must be >= 1");
    for (const auto& clip : dataset.clips)
        require(clip.valid_count() >= 2, "TooFewFrames",
                "every clip needs at least two valid frames");

    nn::Adam<float> opt(model.trainable_params(), config.learning_rate);
    model.set_training(true);

    TrainLog log;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        double epoch_loss = 0.0;
        std::size_t hits = 0;
        std::size_t in_batch = 0;
        opt.zero_grad();
        for (std::size_t ci = 0; ci < dataset.clips.size(); ++ci) {
            const auto& clip = dataset.clips[ci];
            auto fwd = model.clip_forward(clip, clip.label, &rng);
            require(std::isfinite(fwd.loss), "NonFiniteLoss",
                    "anomaly loss became non-finite in epoch " + std::to_string(epoch));
            model.clip_backward(fwd);
            epoch_loss += fwd.loss;
            const int pred = fwd.violent_prob >= 0.5 ? 1 : 0;
            if (pred == clip.label) ++hits;
            if (++in_batch == config.batch_size || ci + 1 == dataset.clips.size()) {
                opt.step();
                opt.zero_grad();
                in_batch = 0;
            }
        }
        log.records.push_back({epoch, epoch_loss / static_cast<double>(dataset.clips.size()),
                               static_cast<double>(hits) /
                                   static_cast<double>(dataset.clips.size())});
    }
    model.set_training(false);

    CheckpointArchive checkpoint;
    model.save(checkpoint);
    checkpoint.metadata()["stage"] = "anomaly";
    return {std::move(checkpoint), std::move(log)};
}

struct AnomalyEvaluation {
    ConfusionMatrix confusion;
    PrfResult metrics;
    std::vector<double> violent_probs;
};

/// Threshold 0.5 on the violent-class probability; positive = violent.
inline AnomalyEvaluation evaluate_anomaly(AnomalyModel<float>& model,
                                          const ClipDatasetArrays& dataset) {
    require(!dataset.clips.empty(), "EmptyDataset", "evaluation needs clips");
    model.set_training(false);
    AnomalyEvaluation eval;
    for (const auto& clip : dataset.clips) {
        auto fwd = model.clip_forward(clip, clip.label, nullptr);
        eval.violent_probs.push_back(fwd.violent_prob);
        const int pred = fwd.violent_prob >= 0.5 ? 1 : 0;
        if (clip.label == 1 && pred == 1) ++eval.confusion.tp;
        if (clip.label == 0 && pred == 1) ++eval.confusion.fp;
        if (clip.label == 0 && pred == 0) ++eval.confusion.tn;
        if (clip.label == 1 && pred == 0) ++eval.confusion.fn;
    }
    eval.metrics = precision_recall_f1(eval.confusion);
    return eval;
}

} // namespace crowdlab
