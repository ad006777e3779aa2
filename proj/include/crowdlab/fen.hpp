#pragma once

#include <array>
#include <set>
#include <string>
#include <vector>

#include "crowdlab/dataset_io.hpp"
#include "crowdlab/nn.hpp"
#include "crowdlab/param_io.hpp"

namespace crowdlab {

struct ColumnSpec {
    std::size_t kernel = 3; // odd, in {3,5,7,9,11}
    std::array<std::size_t, 4> widths = {16, 32, 16, 8};
    std::set<std::size_t> pool_after = {1, 2}; // 1-based conv indices

    void validate() const {
        require(kernel % 2 == 1, "InvalidConfig", "column kernel must be odd");
        for (auto w : widths) require(w >= 1, "InvalidConfig", "column width must be >= 1");
        for (auto p : pool_after)
            require(p >= 1 && p <= 4, "InvalidConfig", "pool_after indices must be in 1..4");
    }
};

struct FenConfig {
    std::vector<ColumnSpec> columns;
    std::size_t input_channels = 1;

    static FenConfig defaults(std::size_t input_channels = 1) {
        FenConfig cfg;
        cfg.input_channels = input_channels;
        for (std::size_t k : {3u, 5u, 7u, 9u, 11u}) {
            ColumnSpec col;
            col.kernel = k;
            cfg.columns.push_back(col);
        }
        return cfg;
    }

    void validate() const {
        require(columns.size() == 5, "InvalidConfig", "FEN requires exactly five columns");
        require(input_channels == 1 || input_channels == 3, "InvalidConfig",
                "input_channels must be 1 or 3");
        for (const auto& c : columns) c.validate();
        for (const auto& c : columns)
            require(c.pool_after == columns.front().pool_after, "InvalidConfig",
                    "all columns must share the same pool placement");
    }

    /// Per-dimension downsampling of the concatenated feature map.
    std::size_t stride() const { return std::size_t(1) << columns.front().pool_after.size(); }

    std::size_t output_channels() const {
        std::size_t k = 0;
        for (const auto& c : columns) k += c.widths.back();
        return k;
    }

    /// Closed-form parameter count: sum over columns of k^2*cin*cout + cout.
    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& c : columns) {
            std::size_t cin = input_channels;
            for (auto cout : c.widths) {
                n += c.kernel * c.kernel * cin * cout + cout;
                cin = cout;
            }
        }
        return n;
    }
};

/// Five-column multi-scale feature extractor. Each column runs four
/// same-padding stride-1 convs with ReLU, max-pooling after the configured
/// layers; column outputs are concatenated channel-wise in column order.
template <typename T>
class Fen {
  public:
    Fen(const FenConfig& config, Rng& rng) : config_(config) {
        config_.validate();
        for (std::size_t i = 0; i < config_.columns.size(); ++i) {
            const auto& spec = config_.columns[i];
            Column col;
            std::size_t cin = config_.input_channels;
            for (std::size_t l = 0; l < 4; ++l) {
                const std::string prefix =
                    "fen/col" + std::to_string(i) + "/conv" + std::to_string(l + 1) + "/";
                col.convs.emplace_back(spec.kernel, cin, spec.widths[l], rng, prefix);
                cin = spec.widths[l];
            }
            col.relus.resize(4);
            col.pools.resize(spec.pool_after.size());
            columns_.push_back(std::move(col));
        }
    }

    const FenConfig& config() const { return config_; }

    nn::Tensor<T> forward(const nn::Tensor<T>& batch) {
        require(batch.rank() == 4 && batch.dim(3) == config_.input_channels, "ShapeError",
                "fen: expected B x H x W x C input");
        const std::size_t s = config_.stride();
        require(batch.dim(1) % s == 0 && batch.dim(2) % s == 0, "ShapeError",
                "fen: spatial dims must be divisible by the output stride");
        const std::size_t b = batch.dim(0);
        const std::size_t oh = batch.dim(1) / s, ow = batch.dim(2) / s;
        nn::Tensor<T> out({b, oh, ow, config_.output_channels()});
        std::size_t ch_offset = 0;
        col_channels_.clear();
        for (std::size_t i = 0; i < columns_.size(); ++i) {
            nn::Tensor<T> x = column_forward(i, batch);
            const std::size_t cc = x.dim(3);
            for (std::size_t n = 0; n < b; ++n)
                for (std::size_t r = 0; r < oh; ++r)
                    for (std::size_t c = 0; c < ow; ++c)
                        for (std::size_t ch = 0; ch < cc; ++ch)
                            out.at(n, r, c, ch_offset + ch) = x.at(n, r, c, ch);
            col_channels_.push_back(cc);
            ch_offset += cc;
        }
        return out;
    }

    /// Returns gradient w.r.t. the input batch; parameter grads accumulate.
    nn::Tensor<T> backward(const nn::Tensor<T>& dy, const std::vector<std::size_t>& in_shape) {
        nn::Tensor<T> dx(in_shape);
        const std::size_t b = dy.dim(0), oh = dy.dim(1), ow = dy.dim(2);
        std::size_t ch_offset = 0;
        for (std::size_t i = 0; i < columns_.size(); ++i) {
            const std::size_t cc = col_channels_[i];
            nn::Tensor<T> dcol({b, oh, ow, cc});
            for (std::size_t n = 0; n < b; ++n)
                for (std::size_t r = 0; r < oh; ++r)
                    for (std::size_t c = 0; c < ow; ++c)
                        for (std::size_t ch = 0; ch < cc; ++ch)
                            dcol.at(n, r, c, ch) = dy.at(n, r, c, ch_offset + ch);
            nn::Tensor<T> dxi = column_backward(i, dcol);
            for (std::size_t j = 0; j < dx.size(); ++j) dx[j] += dxi[j];
            ch_offset += cc;
        }
        return dx;
    }

    void collect(std::vector<nn::Param<T>*>& out) {
        for (auto& col : columns_)
            for (auto& conv : col.convs) conv.collect(out);
    }

    void save(CheckpointArchive& archive) {
        std::vector<nn::Param<T>*> ps;
        collect(ps);
        nn::save_params(ps, archive);
    }

    void load(const CheckpointArchive& archive) {
        std::vector<nn::Param<T>*> ps;
        collect(ps);
        nn::load_params(ps, archive);
    }

  private:
    struct Column {
        std::vector<nn::Conv2d<T>> convs;
        std::vector<nn::ReLU<T>> relus;
        std::vector<nn::MaxPool2x2<T>> pools;
    };

    nn::Tensor<T> column_forward(std::size_t i, const nn::Tensor<T>& batch) {
        Column& col = columns_[i];
        const auto& spec = config_.columns[i];
        nn::Tensor<T> x = batch;
        std::size_t pool_idx = 0;
        for (std::size_t l = 0; l < 4; ++l) {
            x = col.convs[l].forward(x);
            x = col.relus[l].forward(x);
            if (spec.pool_after.count(l + 1)) x = col.pools[pool_idx++].forward(x);
        }
        return x;
    }

    nn::Tensor<T> column_backward(std::size_t i, const nn::Tensor<T>& dy) {
        Column& col = columns_[i];
        const auto& spec = config_.columns[i];
        nn::Tensor<T> g = dy;
        std::size_t pool_idx = col.pools.size();
        for (std::size_t l = 4; l-- > 0;) {
            if (spec.pool_after.count(l + 1)) g = col.pools[--pool_idx].backward(g);
            g = col.relus[l].backward(g);
            g = col.convs[l].backward(g);
        }
        return g;
    }

    FenConfig config_;
    std::vector<Column> columns_;
    std::vector<std::size_t> col_channels_;
};

} // namespace crowdlab
