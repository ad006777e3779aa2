#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "crowdlab/augment.hpp"
#include "crowdlab/dataset_io.hpp"
#include "crowdlab/fen.hpp"
#include "crowdlab/nn.hpp"
#include "crowdlab/param_io.hpp"

namespace crowdlab {

struct RotationHeadConfig {
    std::array<std::size_t, 2> widths = {64, 128}; // VGG-style block widths
    std::size_t classes = 4;

    void validate() const {
        require(classes == 4, "InvalidConfig", "rotation pretext has exactly 4 classes");
        for (auto w : widths) require(w >= 1, "InvalidConfig", "block width must be >= 1");
    }
};

/// Two VGG-style blocks (2 x conv3x3 + ReLU, then 2x2 pool each) over the
/// FEN feature map, global average pool, affine layer to 4 logits.
template <typename T>
class RotationHead {
  public:
    RotationHead(const RotationHeadConfig& config, std::size_t in_channels, Rng& rng)
        : config_(config) {
        config_.validate();
        std::size_t cin = in_channels;
        for (std::size_t blk = 0; blk < 2; ++blk) {
            const std::size_t w = config_.widths[blk];
            for (std::size_t l = 0; l < 2; ++l) {
                const std::string prefix = "rot_head/block" + std::to_string(blk + 1) +
                                           "/conv" + std::to_string(l + 1) + "/";
                convs_.emplace_back(3, cin, w, rng, prefix);
                cin = w;
            }
        }
        relus_.resize(4);
        fc_ = nn::Affine<T>(config_.widths[1], config_.classes, rng, "rot_head/fc/");
    }

    nn::Tensor<T> forward(const nn::Tensor<T>& features) {
        nn::Tensor<T> x = features;
        for (std::size_t blk = 0; blk < 2; ++blk) {
            for (std::size_t l = 0; l < 2; ++l) {
                x = convs_[blk * 2 + l].forward(x);
                x = relus_[blk * 2 + l].forward(x);
            }
            x = pools_[blk].forward(x);
        }
        x = gap_.forward(x);
        return fc_.forward(x);
    }

    nn::Tensor<T> backward(const nn::Tensor<T>& dlogits) {
        nn::Tensor<T> g = fc_.backward(dlogits);
        g = gap_.backward(g);
        for (std::size_t blk = 2; blk-- > 0;) {
            g = pools_[blk].backward(g);
            for (std::size_t l = 2; l-- > 0;) {
                g = relus_[blk * 2 + l].backward(g);
                g = convs_[blk * 2 + l].backward(g);
            }
        }
        return g;
    }

    void collect(std::vector<nn::Param<T>*>& out) {
        for (auto& c : convs_) c.collect(out);
        fc_.collect(out);
    }

  private:
    RotationHeadConfig config_;
    std::vector<nn::Conv2d<T>> convs_;
    std::vector<nn::ReLU<T>> relus_;
    std::array<nn::MaxPool2x2<T>, 2> pools_;
    nn::GlobalAvgPool<T> gap_;
    nn::Affine<T> fc_;
};

struct TrainLogRecord {
    std::size_t step = 0;
    double loss = 0.0;     // nats
    double accuracy = 0.0; // fraction in [0,1]
};

struct TrainLog {
    std::vector<TrainLogRecord> records;

    void write_csv(const std::filesystem::path& path, const std::string& acc_column) const {
        std::ofstream out(path);
        require(out.good(), "MissingFile", "cannot open for write: " + path.string());
        out << "step,loss," << acc_column << "\n";
        for (const auto& r : records) {
            char buf[96];
            std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g\n", r.step, r.loss, r.accuracy);
            out << buf;
        }
    }
};

struct Stage1Config {
    std::size_t crop_size = 112;
    std::size_t steps = 1000;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
};

template <typename T>
std::pair<T, std::vector<int>> stage1_step_loss(Fen<T>& fen, RotationHead<T>& head,
                                                const nn::Tensor<T>& batch,
                                                const std::vector<int>& labels,
                                                bool do_backward) {
    nn::Tensor<T> feats = fen.forward(batch);
    nn::Tensor<T> logits = head.forward(feats);
    auto [loss, dlogits] = nn::cross_entropy(logits, labels);
    std::vector<int> predictions(labels.size());
    for (std::size_t n = 0; n < labels.size(); ++n) {
        int best = 0;
        for (std::size_t j = 1; j < logits.dim(1); ++j)
            if (logits.at(n, j) > logits.at(n, best)) best = static_cast<int>(j);
        predictions[n] = best;
    }
    if (do_backward) {
        nn::Tensor<T> dfeats = head.backward(dlogits);
        fen.backward(dfeats, batch.shape());
    }
    return {loss, predictions};
}

/// Forward through FEN + rotation head; returns B x 4 logits.
template <typename T>
nn::Tensor<T> stage1_forward(Fen<T>& fen, RotationHead<T>& head, const nn::Tensor<T>& batch) {
    return head.forward(fen.forward(batch));
}

/// Stage-1 completely self-supervised loop: crop, rotate with a pseudo-label
/// drawn from the rng, predict the rotation, gradient step. Annotations are
/// never read.
inline std::pair<CheckpointArchive, TrainLog> train_stage1(
    const std::vector<TensorF>& images, const FenConfig& fen_config,
    const RotationHeadConfig& head_config, const Stage1Config& train_config, Rng& rng) {
    require(!images.empty(), "EmptyDataset", "stage 1 needs at least one image");
    for (const auto& img : images)
        require(img.dim(0) >= train_config.crop_size && img.dim(1) >= train_config.crop_size,
                "ImageTooSmall", "image smaller than the crop size");

    Fen<float> fen(fen_config, rng);
    RotationHead<float> head(head_config, fen_config.output_channels(), rng);

    std::vector<nn::Param<float>*> params;
    fen.collect(params);
    head.collect(params);
    nn::Adam<float> opt(params, train_config.learning_rate);

    TrainLog log;
    const std::size_t b = train_config.batch_size;
    const std::size_t c = fen_config.input_channels;
    for (std::size_t step = 0; step < train_config.steps; ++step) {
        nn::Tensor<float> batch({b, train_config.crop_size, train_config.crop_size, c});
        std::vector<int> labels(b);
        for (std::size_t n = 0; n < b; ++n) {
            const auto& img = images[rng.uniform_index(images.size())];
            require(img.dim(2) == c, "ShapeError", "image channel count mismatch");
            TensorF crop = crop_random(img, train_config.crop_size, rng);
            auto [rotated, label] = make_rotation_example(crop, rng);
            labels[n] = label.value;
            std::copy(rotated.vec().begin(), rotated.vec().end(),
                      batch.data() + n * rotated.size());
        }
        opt.zero_grad();
        auto [loss, predictions] = stage1_step_loss(fen, head, batch, labels, true);
        require(std::isfinite(static_cast<double>(loss)), "NonFiniteLoss",
                "stage 1 loss became non-finite at step " + std::to_string(step));
        opt.step();
        std::size_t hits = 0;
        for (std::size_t n = 0; n < b; ++n)
            if (predictions[n] == labels[n]) ++hits;
        log.records.push_back({step, static_cast<double>(loss),
                               static_cast<double>(hits) / static_cast<double>(b)});
    }

    CheckpointArchive checkpoint;
    fen.save(checkpoint);
    {
        std::vector<nn::Param<float>*> head_params;
        head.collect(head_params);
        nn::save_params(head_params, checkpoint);
    }
    checkpoint.metadata()["stage"] = "1";
    checkpoint.metadata()["steps"] = std::to_string(train_config.steps);
    return {std::move(checkpoint), std::move(log)};
}

} // namespace crowdlab
