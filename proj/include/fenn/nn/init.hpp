// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0
//
// Weight initialization: uniform [-1,1] draws scaled per the activation
// family (1/sqrt(fan_in) for sigmoid/tanh layers, the He variance rule for
// smooth-ReLU layers). Deterministic under the seed.

#pragma once

#include "fenn/nn/spec.hpp"

namespace fenn::nn {

inline std::vector<packing::Matrix> init_weights_plain(const NetworkSpec& spec, u64 seed) {
    spec.validate();
    auto h = packing::padded_dims(spec.widths());
    Rng rng(seed);
    std::vector<packing::Matrix> weights;
    std::size_t j = 0;
    for (const auto& l : spec.layers) {
        if (l.kind != LayerSpec::Kind::Fc) continue;
        ++j;
        u64 fan_in = h[j - 1];
        double scale;
        if (l.activation == "smooth_relu" || l.activation == "relu" || l.activation == "softplus") {
            // He variance: std = sqrt(2 / fan_in); uniform [-1,1] has std
            // 1/sqrt(3), hence the sqrt(6 / fan_in) half-width.
            scale = std::sqrt(6.0 / static_cast<double>(fan_in));
        } else {
            scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
        }
        packing::Matrix w(h[j - 1], h[j]);
        for (auto& x : w.data) x = rng.uniform_real(-1.0, 1.0) * scale;
        weights.push_back(std::move(w));
    }
    return weights;
}

} // namespace fenn::nn
