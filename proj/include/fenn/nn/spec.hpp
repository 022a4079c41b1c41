// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "fenn/approx/poly.hpp"
#include "fenn/packing/pack.hpp"

namespace fenn::nn {

struct LayerSpec {
    enum class Kind { Fc, Conv, AvgPool };
    Kind kind = Kind::Fc;
    u64 out_dim = 0;                      // Fc
    u64 kernel = 0, stride = 0;           // Conv / AvgPool
    std::string activation = "sigmoid";
    u64 degree = 3;
    double act_lo = -8.0, act_hi = 8.0;
};

struct NetworkSpec {
    u64 input_dim = 0;
    u64 image_side = 0; // nonzero when the input is a square image (conv nets)
    std::vector<LayerSpec> layers;
    double learning_rate = 0.1;
    u64 local_batch = 1;   // b
    u64 global_iters = 10; // m

    /// Widths d, h_1..h_l of the FC-lowered network (conv layers appear as
    /// their flattened kernel width; pooling has no width entry).
    std::vector<u64> widths() const {
        std::vector<u64> h{input_dim};
        for (const auto& l : layers) {
            if (l.kind == LayerSpec::Kind::Fc) h.push_back(l.out_dim);
        }
        return h;
    }

    std::size_t fc_count() const {
        std::size_t n = 0;
        for (const auto& l : layers)
            if (l.kind == LayerSpec::Kind::Fc) ++n;
        return n;
    }

    void validate() const {
        FENN_REQUIRE(input_dim > 0, "input dimension required");
        FENN_REQUIRE(!layers.empty(), "at least one layer required");
        FENN_REQUIRE(learning_rate > 0, "positive learning rate required");
        FENN_REQUIRE(local_batch >= 1, "local batch must be positive");
        for (const auto& l : layers) {
            if (l.kind == LayerSpec::Kind::Fc)
                FENN_REQUIRE(l.out_dim > 0, "layer width required");
            else
                FENN_REQUIRE(l.kernel > 0 && l.stride > 0, "kernel and stride required");
        }
    }
};

} // namespace fenn::nn
