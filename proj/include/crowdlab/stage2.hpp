#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "crowdlab/augment.hpp"
#include "crowdlab/density.hpp"
#include "crowdlab/fen.hpp"
#include "crowdlab/nn.hpp"
#include "crowdlab/param_io.hpp"
#include "crowdlab/prior.hpp"
#include "crowdlab/sinkhorn.hpp"
#include "crowdlab/stage1.hpp"

namespace crowdlab {

struct SinkhornConfig {
    double eps = 0.01;
    std::size_t max_iter = 500;
    double tol = 1e-6;

    static SinkhornConfig from_json(const nlohmann::json& j) {
        SinkhornConfig c;
        if (j.contains("eps")) c.eps = j.at("eps").get<double>();
        if (j.contains("max_iter")) c.max_iter = j.at("max_iter").get<std::size_t>();
        if (j.contains("tol")) c.tol = j.at("tol").get<double>();
        require(c.eps > 0.0, "BadSpec", "sinkhorn eps must be > 0");
        return c;
    }

    nlohmann::json to_json() const {
        return {{"eps", eps}, {"max_iter", max_iter}, {"tol", tol}};
    }
};

struct DensityHeadConfig {
    std::array<std::size_t, 2> widths = {64, 128};

    void validate() const {
        for (auto w : widths) require(w >= 1, "InvalidConfig", "block width must be >= 1");
    }
};

/// Density regression head over frozen FEN features: two conv blocks
/// (2 x conv3x3 + ReLU each, no pooling so stride stays 4), then a 1x1 conv
/// to one channel with ReLU to keep the density non-negative.
template <typename T>
class DensityHead {
  public:
    DensityHead(const DensityHeadConfig& config, std::size_t in_channels, Rng& rng)
        : config_(config) {
        config_.validate();
        std::size_t cin = in_channels;
        for (std::size_t blk = 0; blk < 2; ++blk) {
            const std::size_t w = config_.widths[blk];
            for (std::size_t l = 0; l < 2; ++l) {
                const std::string prefix = "density_head/block" + std::to_string(blk + 1) +
                                           "/conv" + std::to_string(l + 1) + "/";
                convs_.emplace_back(3, cin, w, rng, prefix);
                cin = w;
            }
        }
        out_conv_ = nn::Conv2d<T>(1, cin, 1, rng, "density_head/out/");
        // Small positive output bias so the final ReLU starts open; a head
        // that initialises all-zero gets no gradient and can never train.
        out_conv_.bias.value.fill(static_cast<T>(0.05));
        relus_.resize(5);
    }

    /// B x h x w x K features -> B x h x w x 1 non-negative density.
    nn::Tensor<T> forward(const nn::Tensor<T>& features) {
        nn::Tensor<T> x = features;
        for (std::size_t l = 0; l < 4; ++l) {
            x = convs_[l].forward(x);
            x = relus_[l].forward(x);
        }
        x = out_conv_.forward(x);
        return relus_[4].forward(x);
    }

    nn::Tensor<T> backward(const nn::Tensor<T>& dy) {
        nn::Tensor<T> g = relus_[4].backward(dy);
        g = out_conv_.backward(g);
        for (std::size_t l = 4; l-- > 0;) {
            g = relus_[l].backward(g);
            g = convs_[l].backward(g);
        }
        return g;
    }

    void collect(std::vector<nn::Param<T>*>& out) {
        for (auto& c : convs_) c.collect(out);
        out_conv_.collect(out);
    }

  private:
    DensityHeadConfig config_;
    std::vector<nn::Conv2d<T>> convs_;
    std::vector<nn::ReLU<T>> relus_;
    nn::Conv2d<T> out_conv_;
};

struct MatchingLossResult {
    double loss = 0.0;
    std::vector<double> grad; // d loss / d prediction, aligned with the input order
    bool converged = true;
};

/// Sinkhorn distance between the batch of predicted crop sums and a fresh
/// prior sample, both as uniform discrete distributions with squared cost.
/// The gradient holds the converged plan constant (envelope form):
/// d loss / d x_i = sum_j P[i][j] * 2 (x_i - y_j).
inline MatchingLossResult matching_loss(const std::vector<double>& pred_crop_sums,
                                        const PriorSpec& prior, const SinkhornConfig& cfg,
                                        Rng& rng) {
    const std::size_t b = pred_crop_sums.size();
    require(b >= 2, "DegenerateBatch", "matching_loss needs a batch of at least 2");

    std::vector<std::size_t> order(b);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return pred_crop_sums[i] < pred_crop_sums[j];
    });
    std::vector<double> x_sorted(b);
    for (std::size_t k = 0; k < b; ++k) x_sorted[k] = pred_crop_sums[order[k]];

    const std::vector<double> y = sample_prior(prior, b, rng);
    const DiscreteDistribution a = DiscreteDistribution::uniform_on(x_sorted);
    const DiscreteDistribution bb = DiscreteDistribution::uniform_on(y);
    const Tensor<double> cost = squared_cost(x_sorted, y);

    SinkhornResult sk = sinkhorn(a, bb, cost, cfg.eps, cfg.max_iter, cfg.tol);

    MatchingLossResult result;
    result.loss = sk.distance;
    result.converged = sk.converged;
    result.grad.assign(b, 0.0);
    for (std::size_t k = 0; k < b; ++k) {
        double g = 0.0;
        for (std::size_t j = 0; j < b; ++j)
            g += sk.plan.at(k, j) * 2.0 * (x_sorted[k] - y[j]);
        result.grad[order[k]] = g;
    }
    return result;
}

struct Stage2Config {
    std::size_t crop_size = 112;
    std::size_t steps = 1000;
    std::size_t batch_size = 16;
    double learning_rate = 1e-3;
    PriorSpec prior;
    SinkhornConfig sinkhorn;
};

/// Stage-2 trainer: FEN loaded from the stage-1 checkpoint and frozen, the
/// density head trained by distribution matching on per-crop sums. The
/// rotation head entries in the checkpoint are ignored (discarded).
inline std::pair<CheckpointArchive, TrainLog> train_stage2(
    const CheckpointArchive& stage1_checkpoint, const std::vector<TensorF>& images,
    const FenConfig& fen_config, const DensityHeadConfig& head_config,
    const Stage2Config& cfg, Rng& rng) {
    require(!images.empty(), "EmptyDataset", "stage 2 needs at least one image");
    require(cfg.batch_size >= 2, "DegenerateBatch", "stage 2 batch size must be >= 2");

    Fen<float> fen(fen_config, rng);
    fen.load(stage1_checkpoint);
    DensityHead<float> head(head_config, fen_config.output_channels(), rng);

    std::vector<nn::Param<float>*> head_params;
    head.collect(head_params);
    nn::Adam<float> opt(head_params, cfg.learning_rate); // FEN excluded: frozen

    TrainLog log;
    const std::size_t b = cfg.batch_size;
    const std::size_t c = fen_config.input_channels;
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        nn::Tensor<float> batch({b, cfg.crop_size, cfg.crop_size, c});
        for (std::size_t n = 0; n < b; ++n) {
            const auto& img = images[rng.uniform_index(images.size())];
            TensorF crop = crop_random(img, cfg.crop_size, rng);
            std::copy(crop.vec().begin(), crop.vec().end(), batch.data() + n * crop.size());
        }
        nn::Tensor<float> feats = fen.forward(batch);
        nn::Tensor<float> maps = head.forward(feats); // B x h x w x 1
        const std::size_t cells = maps.dim(1) * maps.dim(2);
        std::vector<double> sums(b, 0.0);
        for (std::size_t n = 0; n < b; ++n)
            for (std::size_t i = 0; i < cells; ++i)
                sums[n] += static_cast<double>(maps[n * cells + i]);

        MatchingLossResult ml = matching_loss(sums, cfg.prior, cfg.sinkhorn, rng);
        require(std::isfinite(ml.loss), "NonFiniteLoss",
                "stage 2 loss became non-finite at step " + std::to_string(step));

        // d loss / d map pixel = per-crop sum gradient, broadcast.
        nn::Tensor<float> dmaps(maps.shape());
        for (std::size_t n = 0; n < b; ++n)
            for (std::size_t i = 0; i < cells; ++i)
                dmaps[n * cells + i] = static_cast<float>(ml.grad[n]);

        opt.zero_grad();
        head.backward(dmaps);
        opt.step();
        log.records.push_back({step, ml.loss, 0.0});
    }

    CheckpointArchive checkpoint;
    fen.save(checkpoint);
    nn::save_params(head_params, checkpoint);
    checkpoint.metadata()["stage"] = "2";
    return {std::move(checkpoint), std::move(log)};
}

/// Full-image density prediction with a count scale.
inline std::pair<DensityMap, double> predict_count(Fen<float>& fen, DensityHead<float>& head,
                                                   const TensorF& image, double scale) {
    const std::size_t s = fen.config().stride();
    require(image.rank() == 3 && image.dim(0) % s == 0 && image.dim(1) % s == 0, "ShapeError",
            "image dims must be divisible by the FEN stride");
    nn::Tensor<float> batch({1, image.dim(0), image.dim(1), image.dim(2)});
    std::copy(image.vec().begin(), image.vec().end(), batch.data());
    nn::Tensor<float> maps = head.forward(fen.forward(batch));
    DensityMap dm;
    dm.height = maps.dim(1);
    dm.width = maps.dim(2);
    dm.values.resize(dm.height * dm.width);
    double count = 0.0;
    for (std::size_t i = 0; i < dm.values.size(); ++i) {
        dm.values[i] = scale * static_cast<double>(maps[i]);
        count += dm.values[i];
    }
    return {std::move(dm), count};
}

/// Scale from one labeled reference image: true_count / raw_sum.
inline double calibrate_scale_labeled(double true_count, double raw_sum) {
    require(true_count > 0.0, "ZeroPrediction", "reference count must be > 0");
    require(raw_sum > 0.0, "ZeroPrediction", "raw predicted sum must be > 0");
    return true_count / raw_sum;
}

/// Label-free scale: prior mean over the mean raw crop sum of a calibration pass.
inline double calibrate_scale_prior(const PriorSpec& prior, const std::vector<double>& raw_sums) {
    require(!raw_sums.empty(), "ZeroPrediction", "calibration pass produced no sums");
    const double mean_raw =
        std::accumulate(raw_sums.begin(), raw_sums.end(), 0.0) / raw_sums.size();
    require(mean_raw > 0.0, "ZeroPrediction", "mean raw predicted sum must be > 0");
    return prior.mean() / mean_raw;
}

} // namespace crowdlab
