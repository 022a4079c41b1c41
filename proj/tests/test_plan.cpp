// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include "fenn/plan/optimizer.hpp"

using namespace fenn;
using namespace fenn::plan;

namespace {

nn::NetworkSpec bcw_spec() {
    nn::NetworkSpec spec;
    spec.input_dim = 16;
    for (u64 w : {64ULL, 64ULL, 2ULL}) {
        nn::LayerSpec l;
        l.kind = nn::LayerSpec::Kind::Fc;
        l.out_dim = w;
        l.activation = "sigmoid";
        l.degree = 3;
        spec.layers.push_back(l);
    }
    spec.learning_rate = 1.0;
    return spec;
}

nn::NetworkSpec small_spec() {
    nn::NetworkSpec spec;
    spec.input_dim = 4;
    for (u64 w : {4ULL, 2ULL}) {
        nn::LayerSpec l;
        l.kind = nn::LayerSpec::Kind::Fc;
        l.out_dim = w;
        l.activation = "sigmoid";
        l.degree = 3;
        spec.layers.push_back(l);
    }
    spec.learning_rate = 0.5;
    return spec;
}

} // namespace

TEST_CASE("bootstrap count formula") {
    SECTION("l=2, da=3, L=7, tau=1, r=3 gives exactly one") {
        REQUIRE(bootstrap_count(2, 3, 7, 1, 3) == Catch::Approx(1.0));
    }
    SECTION("zero layers need zero bootstraps") {
        REQUIRE(bootstrap_count(0, 3, 7, 1, 3) == 0.0);
    }
    SECTION("doubling the usable levels halves the count") {
        double b1 = bootstrap_count(2, 3, 5, 1, 1);
        double b2 = bootstrap_count(2, 3, 9, 1, 1);
        REQUIRE(b1 == Catch::Approx(2.0 * b2));
    }
    SECTION("L <= tau is rejected") {
        REQUIRE_THROWS_AS(bootstrap_count(2, 3, 3, 3, 1), Error);
    }
}

TEST_CASE("cost function") {
    CostModel cm{8192, 6, 1};

    SECTION("m = 0 costs nothing") {
        REQUIRE(cost_eval(cm, {16, 64, 2}, 3, 0, 1, 1) == 0.0);
    }

    SECTION("monotone nondecreasing in ring size and iteration count") {
        double prev = 0;
        for (u64 ring : {4096ULL, 8192ULL, 16384ULL, 32768ULL}) {
            CostModel c{ring, 6, 1};
            double v = cost_eval(c, {16, 64, 2}, 3, 10, 1, 1);
            REQUIRE(v >= prev);
            prev = v;
        }
        prev = 0;
        for (u64 m : {1ULL, 5ULL, 25ULL, 125ULL}) {
            double v = cost_eval(cm, {16, 64, 2}, 3, m, 1, 1);
            REQUIRE(v >= prev);
            prev = v;
        }
    }

    SECTION("hand-expanded single-layer cost matches") {
        // One layer, h = {64, 64}: rotations 2log2(64) + log2(h_1) = 18
        // (boundary h_2 := h_1), 3 Mul_ct + 2 Mul_pt, activation and its
        // derivative at degree 3, minus 2log2(h_l), plus B DB.
        u64 da = 3;
        u32 L = 6, tau = 1;
        double r = 1;
        u32 lc = L;
        double ks = cm.ks(lc);
        double expected = (2 * 6 + 6) * ks + 3 * cm.mul_ct(lc) + 2 * cm.mul_pt(lc) +
                          2 * cm.mul_ct(lc) /* act: da=3 -> x^2 and one combine */ +
                          2 * cm.mul_ct(lc) /* act': da=2 -> x^2 and one combine */ -
                          2 * 6 * ks + bootstrap_count(1, da, L, tau, r) * cm.db(lc);
        double got = cost_eval(cm, {64, 64}, da, 1, tau, r);
        REQUIRE(got == Catch::Approx(expected));
    }
}

TEST_CASE("security table") {
    SECTION("monotone: larger modulus never yields a smaller ring") {
        u64 prev = 0;
        for (double logq : {20.0, 50.0, 100.0, 200.0, 400.0, 800.0}) {
            u64 ring = core::post_q_sec(logq, 128);
            REQUIRE(ring >= prev);
            prev = ring;
        }
    }

    SECTION("table endpoints round-trip the fixture exactly") {
        for (const auto& row : core::kSecurityTable) {
            REQUIRE(core::post_q_sec(row.max_logq_128, 128) == row.ring_dim);
            REQUIRE(core::post_q_sec(row.max_logq_192, 192) == row.ring_dim);
            REQUIRE(core::post_q_sec(row.max_logq_256, 256) == row.ring_dim);
        }
    }

    SECTION("unsupported security level is rejected") {
        REQUIRE_THROWS_AS(core::post_q_sec(100, 96), Error);
    }

    SECTION("the 2^13 budget admits an L=6 chain at 32-bit scale") {
        auto bits = build_chain_bits(6, 32, core::max_logq_for(8192, 128));
        REQUIRE(!bits.empty());
        double total = 0;
        for (u32 b : bits) total += b;
        REQUIRE(total <= 218.0);
    }
}

TEST_CASE("parameter selection") {
    SECTION("the reference operating point is feasible for the 2x64 class") {
        CryptoPlan p;
        p.ring_dim = 8192;
        p.levels = 6;
        p.chain_bits = build_chain_bits(6, 32, core::max_logq_for(8192, 128));
        REQUIRE(!p.chain_bits.empty());
        p.scale_bits = 32;
        p.security = 128;
        p.mask_lambda = 30;
        p.delta_bits = 40;
        p.value_bits = 8;
        // Call level from the refresh bound.
        double need = std::log2(11.0) + p.delta_bits + p.mask_lambda;
        double acc = 0;
        for (u32 l = 0; l <= p.levels; ++l) {
            acc += p.chain_bits[l];
            if (acc > need) {
                p.tau = std::max<u32>(l, 1);
                break;
            }
        }
        p.r = 1;
        auto rep = check_plan(p, 10, /*toy=*/false);
        for (const auto& v : rep.violations) INFO(v);
        REQUIRE(rep.feasible);
    }

    SECTION("selected plans always pass the independent checker") {
        for (std::size_t n : {2, 10}) {
            SelectOptions opt;
            opt.toy = false;
            auto plan = select_params(bcw_spec(), n, opt);
            auto rep = check_plan(plan, n, false);
            REQUIRE(rep.feasible);
            REQUIRE(plan.bootstrap_per_pass > 0);
        }
    }

    SECTION("toy mode relaxes security and picks the smallest ring") {
        SelectOptions opt;
        opt.toy = true;
        auto plan = select_params(small_spec(), 3, opt);
        REQUIRE(plan.ring_dim == 4096);
        REQUIRE(check_plan(plan, 3, true).feasible);
    }

    SECTION("multi-cipher split of 1024x64 at 4096 slots is 16") {
        REQUIRE(packing::multi_cipher_split(1024 * 64, 4096) == 16);
        nn::NetworkSpec spec;
        spec.input_dim = 1024;
        nn::LayerSpec l;
        l.kind = nn::LayerSpec::Kind::Fc;
        l.out_dim = 64;
        spec.layers.push_back(l);
        SelectOptions opt;
        opt.toy = false;
        auto plan = select_params(spec, 10, opt);
        if (plan.ring_dim == 8192) REQUIRE(plan.cipher_counts[0] == 16);
    }

    SECTION("plan serialization carries every selection field") {
        SelectOptions opt;
        opt.toy = true;
        auto plan = select_params(small_spec(), 2, opt);
        auto j = plan.to_json();
        REQUIRE(j["ring_dim"] == plan.ring_dim);
        REQUIRE(j["levels"] == plan.levels);
        REQUIRE(j["tau"] == plan.tau);
    }
}

TEST_CASE("exact operation-count prediction matches an instrumented run") {
    auto spec = small_spec();
    auto params = core::make_toy_params(32, 5);
    core::BootstrapParams bp{40, 16, 3};

    // Model prediction.
    auto predicted = predict_iteration(spec, params, bp, /*b=*/2, /*parties=*/3);

    // Instrumented run on the reference backend through the federation.
    auto sim = netsim::NetSim(0.17e-3, 1e9);
    core::RefContext ctx(params);
    auto data = netsim::synthetic_separable(4, 6, 3);
    auto shards = netsim::shard_evenly(data, 3, 4);
    fed::Federation<core::RefContext> fed(ctx, spec, sim,
                                          fed::Topology::make(fed::Topology::Kind::Star, 3),
                                          std::move(shards), bp, 9);
    auto result = fed.train(1, 2, 5);
    const auto& measured = result.metrics[0].counters;

    REQUIRE(measured.rotations == predicted.per_iteration.rotations);
    REQUIRE(measured.mul_ct == predicted.per_iteration.mul_ct);
    REQUIRE(measured.mul_pt == predicted.per_iteration.mul_pt);
    REQUIRE(measured.bootstraps == predicted.per_iteration.bootstraps);
}

TEST_CASE("traffic estimate tracks the measured bytes") {
    auto spec = small_spec();
    auto params = core::make_toy_params(32, 5);
    core::BootstrapParams bp{40, 16, 4};

    u64 estimate = comm_estimate(spec, params, bp, 2, 4);

    auto sim = netsim::NetSim(0.17e-3, 1e9);
    core::RefContext ctx(params);
    auto data = netsim::synthetic_separable(4, 8, 3);
    auto shards = netsim::shard_evenly(data, 4, 4);
    fed::Federation<core::RefContext> fed(ctx, spec, sim,
                                          fed::Topology::make(fed::Topology::Kind::Star, 4),
                                          std::move(shards), bp, 9);
    auto result = fed.train(1, 2, 5);
    u64 measured = result.metrics[0].wire_bytes;
    REQUIRE(measured > 0);
    double ratio = static_cast<double>(estimate) / static_cast<double>(measured);
    REQUIRE(ratio > 0.9);
    REQUIRE(ratio < 1.1);

    SECTION("zero traffic for a single party") {
        REQUIRE(comm_estimate(spec, params, bp, 2, 1) == 0);
    }
}
