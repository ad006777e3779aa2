#pragma once

#include <vector>

#include "crowdlab/dataset_io.hpp"
#include "crowdlab/nn.hpp"

namespace crowdlab::nn {

template <typename T>
void save_params(const std::vector<Param<T>*>& params, CheckpointArchive& archive) {
    for (const auto* p : params) {
        std::vector<std::uint32_t> shape(p->value.shape().begin(), p->value.shape().end());
        std::vector<float> data(p->value.size());
        for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(p->value[i]);
        archive.add(p->name, std::move(shape), std::move(data));
    }
}

template <typename T>
void load_params(const std::vector<Param<T>*>& params, const CheckpointArchive& archive) {
    for (auto* p : params) {
        const auto& e = archive.entry(p->name);
        require(e.data.size() == p->value.size(), "ShapeMismatch",
                "checkpoint tensor size mismatch for '" + p->name + "'");
        for (std::size_t i = 0; i < e.data.size(); ++i) p->value[i] = static_cast<T>(e.data[i]);
    }
}

} // namespace crowdlab::nn
