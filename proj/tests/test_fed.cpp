// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include "fenn/fed/protocol.hpp"
#include "oracle.hpp"

using namespace fenn;
using namespace fenn::fed;
using core::make_toy_params;
using core::RealContext;
using core::RefContext;

namespace {

nn::NetworkSpec spec_442() {
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

netsim::NetSim make_sim() { return netsim::NetSim(0.17e-3, 1e9); }

template <class Ctx>
Federation<Ctx> make_fed(Ctx& ctx, const nn::NetworkSpec& spec, netsim::NetSim& sim,
                         std::size_t n, u64 seed, std::size_t per_party = 4,
                         Topology::Kind kind = Topology::Kind::Star) {
    auto data = netsim::synthetic_separable(spec.input_dim, per_party * n, seed + 1);
    auto shards = netsim::shard_evenly(data, n, seed + 2);
    return Federation<Ctx>(ctx, spec, sim, Topology::make(kind, n), std::move(shards),
                           core::BootstrapParams{40, 16, n}, seed);
}

} // namespace

TEST_CASE("prepare phase") {
    auto spec = spec_442();
    auto sim = make_sim();
    RealContext ctx(make_toy_params(32, 5));
    auto fed = make_fed(ctx, spec, sim, 3, 7);
    auto model = fed.prepare_phase(5);

    SECTION("completes with encrypted weights at the root") {
        REQUIRE(model.weights.size() == 2);
        REQUIRE(ctx.has_keys());
        for (const auto& w : model.weights)
            for (const auto& ct : w.ciphers) REQUIRE(ct.level == ctx.top_level());
    }

    SECTION("collective normalization matches pooled plaintext statistics") {
        // Pool all shards and compute the same moments directly.
        std::vector<std::vector<double>> all;
        for (const auto& p : fed.parties())
            for (const auto& r : p.shard.features) all.push_back(r);
        for (u64 i = 0; i < spec.input_dim; ++i) {
            double sum = 0, sumsq = 0;
            for (const auto& r : all) {
                sum += r[i];
                sumsq += r[i] * r[i];
            }
            double mean = sum / all.size();
            double stdev = 2.0 * std::sqrt(std::max(sumsq / all.size() - mean * mean, 1e-9));
            REQUIRE(fed.stats().mean[i] == Catch::Approx(mean).margin(1e-5));
            REQUIRE(fed.stats().stdev[i] == Catch::Approx(stdev).margin(1e-5));
        }
    }

    SECTION("wire log carries only admissible types") {
        for (const auto& [phase, kind] : sim.stats().log) REQUIRE(netsim::whitelisted(kind));
    }
}

TEST_CASE("map / combine / reduce rounds") {
    auto spec = spec_442();
    auto sim = make_sim();
    RefContext ctx(make_toy_params(32, 5));
    auto fed = make_fed(ctx, spec, sim, 3, 11, 2);
    fed.set_local_batch(2);
    auto model = fed.prepare_phase(5);
    Counters c;

    SECTION("broadcast bytes equal z(N-1)|c| and gradients aggregate") {
        u64 before = sim.stats().total_bytes;
        sim.reset_stats();
        auto grads = fed.map_phase(model, 0, c);
        (void)before;
        u64 z = 0;
        for (const auto& w : model.weights) z += w.ciphers.size();
        u64 expected = z * 2 * core::ciphertext_wire_bytes(32, ctx.top_level());
        REQUIRE(sim.stats().per_phase.at("MAP").bytes == expected);

        auto agg = fed.combine_phase(grads, c);
        REQUIRE(agg.grads.size() == 2);
        auto up_bytes = sim.stats().per_phase.at("COMBINE").bytes;
        REQUIRE(up_bytes > 0);

        auto updated = fed.reduce_phase(model, agg, 2, c);
        for (const auto& w : updated.weights)
            for (const auto& ct : w.ciphers) {
                REQUIRE(ct.level == ctx.top_level());
                REQUIRE(ct.scale == ctx.scale());
            }
    }

    SECTION("sum of identical gradients is N times one") {
        auto grads = fed.map_phase(model, 0, c);
        // Overwrite everyone's gradient with party 0's.
        for (std::size_t i = 1; i < 3; ++i) grads[i] = grads[0];
        auto copy = grads[0];
        auto agg = fed.combine_phase(grads, c);
        for (std::size_t j = 0; j < agg.grads.size(); ++j)
            for (std::size_t k = 0; k < agg.grads[j].ciphers.size(); ++k)
                for (std::size_t s = 0; s < ctx.slots(); ++s)
                    REQUIRE(agg.grads[j].ciphers[k].slots[s] ==
                            Catch::Approx(3.0 * copy.grads[j].ciphers[k].slots[s]).margin(1e-12));
    }

    SECTION("missing party aborts the synchronous round") {
        std::vector<bool> participating{true, false, true};
        auto grads = fed.map_phase(model, 0, c, &participating);
        REQUIRE_THROWS_AS(fed.combine_phase(grads, c, &participating), Error);
    }
}

TEST_CASE("aggregation order is decrypt-equal across topologies") {
    auto spec = spec_442();
    nn::EncryptedModel<RefContext> m_star, m_tree;
    for (auto kind : {Topology::Kind::Star, Topology::Kind::Tree}) {
        auto sim = make_sim();
        RefContext ctx(make_toy_params(32, 5));
        auto fed = make_fed(ctx, spec, sim, 4, 13, 2, kind);
        auto result = fed.train(2, 2, 5);
        if (kind == Topology::Kind::Star) m_star = result.model;
        else m_tree = result.model;
    }
    for (std::size_t j = 0; j < m_star.weights.size(); ++j)
        for (std::size_t k = 0; k < m_star.weights[j].ciphers.size(); ++k)
            for (std::size_t s = 0; s < m_star.weights[j].ciphers[k].slots.size(); ++s)
                REQUIRE(m_star.weights[j].ciphers[k].slots[s] ==
                        Catch::Approx(m_tree.weights[j].ciphers[k].slots[s]).margin(1e-9));
}

TEST_CASE("federated averaging equals pooled batch descent (reference, bitwise)") {
    auto spec = spec_442();
    auto sim = make_sim();
    RefContext ctx(make_toy_params(32, 5));
    std::size_t n = 3;
    u64 b = 2;
    auto fed = make_fed(ctx, spec, sim, n, 17, b);
    fed.set_local_batch(b);
    auto model = fed.prepare_phase(5);

    // Oracle: pooled plaintext trainer over the same samples in party order.
    auto onet = oracle::from_spec(spec);
    auto ow = nn::init_weights_plain(spec, 5);
    std::vector<std::vector<double>> xs, ys;
    for (const auto& p : fed.parties())
        for (std::size_t i = 0; i < p.shard.size(); ++i) {
            xs.push_back(fed.stats().apply(p.shard.features[i]));
            ys.push_back(p.shard.labels[i]);
        }

    Counters c;
    for (int iter = 0; iter < 20; ++iter) {
        auto grads = fed.map_phase(model, iter, c);
        auto agg = fed.combine_phase(grads, c);
        model = fed.reduce_phase(model, agg, b, c);
        oracle::train_iteration(onet, ow, xs, ys, b * n, b);
    }
    auto weights = fed.unpack_model(model);
    for (std::size_t j = 0; j < weights.size(); ++j)
        for (std::size_t i = 0; i < weights[j].data.size(); ++i) {
            INFO("layer " << j << " entry " << i);
            REQUIRE(weights[j].data[i] == ow[j].data[i]);
        }
}

TEST_CASE("training descends and separates") {
    auto spec = spec_442();
    spec.learning_rate = 2.0;
    auto sim = make_sim();
    RefContext ctx(make_toy_params(32, 5));
    std::size_t n = 3;
    auto all = netsim::synthetic_separable(4, 60, 21);
    netsim::Dataset train_set, holdout;
    for (std::size_t i = 0; i < all.size(); ++i) {
        auto& dst = i < 48 ? train_set : holdout;
        dst.features.push_back(all.features[i]);
        dst.labels.push_back(all.labels[i]);
    }
    auto shards = netsim::shard_evenly(train_set, n, 23);
    Federation<RefContext> fed(ctx, spec, sim, Topology::make(Topology::Kind::Star, n),
                               std::move(shards), core::BootstrapParams{40, 16, n}, 29);
    auto result = fed.train(50, 4, 5, &holdout);

    REQUIRE(result.metrics.back().holdout_loss < result.metrics.front().holdout_loss);
    REQUIRE(result.metrics.back().holdout_accuracy >= 0.90);

    SECTION("synchronous determinism: identical seeds give identical runs") {
        auto sim2 = make_sim();
        RefContext ctx2(make_toy_params(32, 5));
        auto shards2 = netsim::shard_evenly(train_set, n, 23);
        Federation<RefContext> fed2(ctx2, spec, sim2, Topology::make(Topology::Kind::Star, n),
                                    std::move(shards2), core::BootstrapParams{40, 16, n}, 29);
        auto result2 = fed2.train(50, 4, 5, &holdout);
        REQUIRE(result2.metrics.size() == result.metrics.size());
        for (std::size_t i = 0; i < result.metrics.size(); ++i) {
            REQUIRE(result2.metrics[i].to_line() == result.metrics[i].to_line());
        }
        REQUIRE(sim2.stats().total_bytes == sim.stats().total_bytes);
    }
}

TEST_CASE("m = 0 returns the initial model") {
    auto spec = spec_442();
    auto sim = make_sim();
    RefContext ctx(make_toy_params(32, 5));
    auto fed = make_fed(ctx, spec, sim, 2, 31, 2);
    auto result = fed.train(0, 2, 5);
    REQUIRE(result.metrics.empty());
    REQUIRE(result.model.weights.size() == 2);
    REQUIRE(result.model.iteration == 0);
}

TEST_CASE("oblivious prediction hands the result to the querier only") {
    auto spec = spec_442();
    auto sim = make_sim();
    RealContext ctx(make_toy_params(32, 5));
    std::size_t n = 3;
    auto fed = make_fed(ctx, spec, sim, n, 37, 2);
    fed.set_local_batch(2);
    auto result = fed.train(2, 2, 5);

    // Querier with an independent key pair over the same ring.
    auto qshare = core::sec_key_gen(ctx.ring(), 1, 999);
    auto qkeys = core::d_key_gen(ctx.ring(), qshare, {}, 41, 43);

    std::vector<double> x{0.3, -0.4, 0.5, 0.2};
    Counters c;
    auto switched = fed.predict_oblivious(result.model, x, qkeys.pk, /*run party=*/1, c);

    RealContext qctx(make_toy_params(32, 5));
    qctx.set_keys(qkeys);
    auto qplain = qctx.decode(qctx.d_decrypt(switched, qshare, 3));

    // Plaintext pipeline prediction from the decrypted model.
    auto weights = fed.unpack_model(result.model);
    auto expect = fed.plain_forward(weights, fed.stats().apply(x));
    u64 stride = fed.engine().net().label_stride;
    for (std::size_t k = 0; k < 2; ++k)
        REQUIRE(std::abs(qplain[k * stride] - expect[k]) < 2e-3);

    // The parties' own shares no longer decrypt it.
    auto wrong = ctx.decode(ctx.d_decrypt(switched, fed.shares(), 5));
    double diff = 0;
    for (std::size_t k = 0; k < 2; ++k) diff = std::max(diff, std::abs(wrong[k * stride] - expect[k]));
    REQUIRE(diff > 1.0);

    // Key-switch traffic was tagged as such.
    REQUIRE(sim.stats().per_phase.count("key-switch") == 1);
}
