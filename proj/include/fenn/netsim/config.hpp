// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: one JSON file covering the topology, network model,
// dataset, network architecture, and cryptographic parameters.

#pragma once

#include <fstream>

#include <json.hpp>

#include "fenn/core/params.hpp"
#include "fenn/nn/spec.hpp"

namespace fenn::netsim {

struct RunConfig {
    u64 seed = 1;
    std::string backend = "reference"; // or "real"
    bool toy = true;

    std::size_t n_parties = 3;
    std::string topology = "star"; // star | tree | full
    double delay_ms = 0.17;
    double bandwidth_gbps = 1.0;

    std::string csv_path;            // empty: use synthetic
    std::string synthetic = "separable"; // separable | surrogate9
    u64 synthetic_dim = 4;
    std::size_t synthetic_count = 240;
    double holdout_fraction = 0.2;

    nn::NetworkSpec model;

    u64 ring_dim = 64;
    u32 levels = 5;
    u32 scale_bits = 32;
    u32 security = 128;
    double mask_lambda = 16;
    double delta_bits = 40;

    core::RingParams ring_params() const {
        auto p = core::make_toy_params(ring_dim, levels, scale_bits);
        p.security_level = security;
        return p;
    }
};

inline RunConfig parse_config(const nlohmann::json& j) {
    RunConfig cfg;
    cfg.seed = j.value("seed", cfg.seed);
    cfg.backend = j.value("backend", cfg.backend);
    cfg.toy = j.value("toy", cfg.toy);
    if (j.contains("parties")) {
        cfg.n_parties = j["parties"].value("count", cfg.n_parties);
        cfg.topology = j["parties"].value("topology", cfg.topology);
    }
    if (j.contains("network")) {
        cfg.delay_ms = j["network"].value("delay_ms", cfg.delay_ms);
        cfg.bandwidth_gbps = j["network"].value("bandwidth_gbps", cfg.bandwidth_gbps);
    }
    if (j.contains("data")) {
        const auto& d = j["data"];
        cfg.csv_path = d.value("csv", cfg.csv_path);
        cfg.synthetic = d.value("synthetic", cfg.synthetic);
        cfg.synthetic_dim = d.value("dim", cfg.synthetic_dim);
        cfg.synthetic_count = d.value("count", cfg.synthetic_count);
        cfg.holdout_fraction = d.value("holdout_fraction", cfg.holdout_fraction);
    }
    FENN_REQUIRE(j.contains("model"), "config: missing model section");
    {
        const auto& m = j["model"];
        FENN_REQUIRE(m.contains("input_dim") && m.contains("layers"),
                     "config: model needs input_dim and layers");
        cfg.model.input_dim = m["input_dim"].get<u64>();
        for (const auto& l : m["layers"]) {
            nn::LayerSpec ls;
            std::string type = l.value("type", std::string("fc"));
            if (type == "fc") {
                ls.kind = nn::LayerSpec::Kind::Fc;
                FENN_REQUIRE(l.contains("width"), "config: fc layer needs width");
                ls.out_dim = l["width"].get<u64>();
            } else if (type == "conv") {
                ls.kind = nn::LayerSpec::Kind::Conv;
                ls.kernel = l.value("kernel", 2);
                ls.stride = l.value("stride", ls.kernel);
            } else if (type == "avg_pool") {
                ls.kind = nn::LayerSpec::Kind::AvgPool;
                ls.kernel = l.value("kernel", 2);
                ls.stride = l.value("stride", ls.kernel);
            } else {
                throw Error("config: unknown layer type '" + type + "'");
            }
            ls.activation = l.value("activation", ls.activation);
            ls.degree = l.value("degree", ls.degree);
            ls.act_lo = l.value("act_lo", ls.act_lo);
            ls.act_hi = l.value("act_hi", ls.act_hi);
            cfg.model.layers.push_back(ls);
        }
        cfg.model.learning_rate = m.value("learning_rate", cfg.model.learning_rate);
        cfg.model.local_batch = m.value("local_batch", cfg.model.local_batch);
        cfg.model.global_iters = m.value("global_iters", cfg.model.global_iters);
        cfg.model.image_side = m.value("image_side", cfg.model.image_side);
    }
    if (j.contains("crypto")) {
        const auto& c = j["crypto"];
        cfg.ring_dim = c.value("ring_dim", cfg.ring_dim);
        cfg.levels = c.value("levels", cfg.levels);
        cfg.scale_bits = c.value("scale_bits", cfg.scale_bits);
        cfg.security = c.value("security", cfg.security);
        cfg.mask_lambda = c.value("mask_lambda", cfg.mask_lambda);
        cfg.delta_bits = c.value("delta_bits", cfg.delta_bits);
    }
    cfg.model.validate();
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    FENN_REQUIRE(in.good(), "cannot open config: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(std::string("config parse error: ") + e.what());
    }
    return parse_config(j);
}

} // namespace fenn::netsim
