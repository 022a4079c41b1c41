// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include "fenn/nn/services.hpp"
#include "fenn/nn/conv.hpp"
#include "oracle.hpp"

using namespace fenn;
using namespace fenn::nn;
using core::make_toy_params;
using core::RealContext;
using core::RefContext;
using packing::Matrix;

namespace {

NetworkSpec small_spec(std::vector<u64> dims, const std::string& act = "sigmoid",
                       double eta = 0.5) {
    NetworkSpec spec;
    spec.input_dim = dims[0];
    for (std::size_t i = 1; i < dims.size(); ++i) {
        LayerSpec l;
        l.kind = LayerSpec::Kind::Fc;
        l.out_dim = dims[i];
        l.activation = act;
        l.degree = 3;
        spec.layers.push_back(l);
    }
    spec.learning_rate = eta;
    return spec;
}

std::vector<double> random_vec(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform_real(lo, hi);
    return v;
}

struct RefRig {
    RefContext ctx;
    Engine<RefContext> engine;
    EncryptedModel<RefContext> model;
    std::vector<Matrix> weights;
    Rng rng{33};

    RefRig(const NetworkSpec& spec, u64 ring, u32 levels, u64 wseed = 5)
        : ctx(make_toy_params(ring, levels)),
          engine(ctx, compile_fc(spec, ring / 2),
                 local_services(ctx, 3, core::BootstrapParams{40, 16, 3})),
          weights(init_weights_plain(spec, wseed)) {
        model = engine.encrypt_model(weights, rng);
    }
};

} // namespace

TEST_CASE("weight initialization") {
    SECTION("deterministic under seed") {
        auto spec = small_spec({4, 4, 2});
        auto a = init_weights_plain(spec, 42);
        auto b = init_weights_plain(spec, 42);
        REQUIRE(a[0].data == b[0].data);
        REQUIRE(a[1].data == b[1].data);
        auto c = init_weights_plain(spec, 43);
        REQUIRE(a[0].data != c[0].data);
    }

    SECTION("uniform [-1,1]/sqrt(h) magnitude for sigmoid layers") {
        auto spec = small_spec({64, 64, 2});
        double expect_std = 1.0 / std::sqrt(3.0) / std::sqrt(64.0);
        double acc = 0;
        int n = 0;
        for (u64 seed = 0; seed < 30; ++seed) {
            auto w = init_weights_plain(spec, seed);
            for (double x : w[0].data) {
                acc += x * x;
                ++n;
                REQUIRE(std::abs(x) <= 1.0 / 8.0 + 1e-12); // |r| <= 1 scaled
            }
        }
        double sample_std = std::sqrt(acc / n);
        REQUIRE(sample_std > 0.8 * expect_std);
        REQUIRE(sample_std < 1.2 * expect_std);
    }

    SECTION("He scaling for smooth-relu layers") {
        auto spec = small_spec({64, 64, 2}, "smooth_relu");
        double expect_std = std::sqrt(2.0 / 64.0);
        double acc = 0;
        int n = 0;
        for (u64 seed = 0; seed < 30; ++seed) {
            auto w = init_weights_plain(spec, seed);
            for (double x : w[0].data) {
                acc += x * x;
                ++n;
            }
        }
        double sample_std = std::sqrt(acc / n);
        REQUIRE(sample_std > 0.8 * expect_std);
        REQUIRE(sample_std < 1.2 * expect_std);
    }
}

TEST_CASE("forward pass") {
    SECTION("identity weights and linear activation reproduce the input") {
        auto spec = small_spec({4, 4, 2}, "identity");
        RefRig rig(spec, 32, 6);
        // Overwrite with identity-like weights: W1 = I, W2 = first 2 rows of I.
        Matrix w1(4, 4), w2(4, 2);
        for (u64 i = 0; i < 4; ++i) w1.at(i, i) = 1.0;
        w2.at(0, 0) = 1.0;
        w2.at(1, 1) = 1.0;
        rig.model = rig.engine.encrypt_model({w1, w2}, rig.rng);

        std::vector<double> x{0.25, -0.5, 0.75, -1.0};
        Counters c;
        auto input = rig.engine.pack_input(x);
        auto trace = rig.engine.forward(&input, nullptr, rig.model, c);
        const auto& out = trace.output.ciphers[0].slots;
        REQUIRE(out[0] == Catch::Approx(0.25));
        REQUIRE(out[1] == Catch::Approx(-0.5));
    }

    SECTION("encrypted forward equals the plaintext pipeline within 2^-15") {
        auto spec = small_spec({4, 4, 2});
        RealContext ctx(make_toy_params(32, 6));
        auto shares = core::sec_key_gen(ctx.ring(), 3, 7);
        auto net = compile_fc(spec, ctx.slots());
        ctx.set_keys(core::d_key_gen(ctx.ring(), shares, rotation_offsets_for(net), 11, 13));
        Engine<RealContext> eng(ctx, net,
                                local_services(ctx, shares, core::BootstrapParams{40, 16, 3}, 77));
        auto weights = init_weights_plain(spec, 5);
        Rng rng(9);
        auto model = eng.encrypt_model(weights, rng);

        auto onet = oracle::from_spec(spec);
        std::vector<double> x{0.4, -0.3, 0.9, 0.1};
        auto otrace = oracle::forward(onet, weights, x);

        Counters c;
        auto input = eng.pack_input(x);
        auto trace = eng.forward(&input, nullptr, model, c);
        auto out = ctx.decode(ctx.d_decrypt(trace.output.ciphers[0], shares, 3));
        for (u64 k = 0; k < 2; ++k)
            REQUIRE(std::abs(out[k * net.label_stride] - otrace.l.back()[k]) <
                    std::ldexp(1.0, -15));
    }
}

TEST_CASE("backward pass") {
    SECTION("zero error yields zero gradients (reference backend)") {
        auto spec = small_spec({4, 4, 2});
        RefRig rig(spec, 32, 6);
        std::vector<double> x{0.2, 0.4, -0.1, 0.3};
        Counters c;
        auto input = rig.engine.pack_input(x);
        auto trace = rig.engine.forward(&input, nullptr, rig.model, c);
        // Labels exactly equal to the network output: E_l = 0.
        std::vector<double> y(2);
        const auto& out = trace.output.ciphers[0].slots;
        y[0] = out[0];
        y[1] = out[1];
        auto grads = rig.engine.backward(&input, nullptr, rig.model, trace,
                                         rig.engine.pack_labels(y), c);
        for (const auto& g : grads.grads)
            for (const auto& ct : g.ciphers)
                for (double s : ct.slots) REQUIRE(s == 0.0);
    }

    SECTION("encrypted gradients match the plaintext oracle within 2^-12 (4-4-2, b=2)") {
        auto spec = small_spec({4, 4, 2});
        spec.local_batch = 2;
        RealContext ctx(make_toy_params(32, 6));
        auto shares = core::sec_key_gen(ctx.ring(), 3, 7);
        auto net = compile_fc(spec, ctx.slots());
        ctx.set_keys(core::d_key_gen(ctx.ring(), shares, rotation_offsets_for(net), 11, 13));
        Engine<RealContext> eng(ctx, net,
                                local_services(ctx, shares, core::BootstrapParams{40, 16, 3}, 99));
        auto weights = init_weights_plain(spec, 5);
        Rng rng(21);
        auto model = eng.encrypt_model(weights, rng);
        auto onet = oracle::from_spec(spec);

        std::vector<std::vector<double>> xs{{0.4, -0.3, 0.9, 0.1}, {-0.2, 0.6, -0.5, 0.8}};
        std::vector<std::vector<double>> ys{{1, 0}, {0, 1}};
        std::vector<packing::PackedSlots> inputs;
        std::vector<std::vector<double>> labels;
        for (std::size_t t = 0; t < xs.size(); ++t) {
            inputs.push_back(eng.pack_input(xs[t]));
            labels.push_back(eng.pack_labels(ys[t]));
        }
        Counters c;
        auto grads = eng.lgd_compute(inputs, labels, model, c);

        // Oracle: per-sample forward/backward, summed.
        oracle::Weights acc;
        for (std::size_t t = 0; t < xs.size(); ++t) {
            auto tr = oracle::forward(onet, weights, xs[t]);
            std::vector<double> ypad = ys[t];
            auto g = oracle::backward(onet, weights, xs[t], tr, ypad);
            if (t == 0) acc = g;
            else
                for (std::size_t j = 0; j < acc.size(); ++j)
                    for (std::size_t i = 0; i < acc[j].data.size(); ++i)
                        acc[j].data[i] += g[j].data[i];
        }
        for (std::size_t j = 0; j < grads.grads.size(); ++j) {
            auto dec = packing::decrypt_packed<RealContext>(
                ctx, grads.grads[j],
                [&](const core::Ciphertext& ct) { return ctx.decode(ctx.d_decrypt(ct, shares, 4)); });
            auto got = packing::unpack_weights(dec);
            for (u64 i = 0; i < got.rows; ++i)
                for (u64 k = 0; k < got.cols; ++k)
                    REQUIRE(std::abs(got.at(i, k) - acc[j].at(i, k)) < std::ldexp(1.0, -12));
        }
    }

    SECTION("gradient additivity over the local batch (reference, exact)") {
        auto spec = small_spec({4, 4, 2});
        RefRig rig(spec, 32, 6);
        std::vector<std::vector<double>> xs{{0.3, 0.1, -0.4, 0.6},
                                            {0.9, -0.8, 0.2, -0.1},
                                            {-0.6, 0.4, 0.5, 0.7},
                                            {0.05, -0.2, 0.35, -0.9}};
        std::vector<std::vector<double>> ys{{1, 0}, {0, 1}, {1, 0}, {0, 1}};
        std::vector<packing::PackedSlots> inputs;
        std::vector<std::vector<double>> labels;
        for (std::size_t t = 0; t < xs.size(); ++t) {
            inputs.push_back(rig.engine.pack_input(xs[t]));
            labels.push_back(rig.engine.pack_labels(ys[t]));
        }
        Counters c;
        auto batch = rig.engine.lgd_compute(inputs, labels, rig.model, c);
        // Sum of singles, in the same order.
        GradientSet<RefContext> acc;
        for (std::size_t t = 0; t < xs.size(); ++t) {
            Counters c2;
            auto one = rig.engine.lgd_compute({inputs[t]}, {labels[t]}, rig.model, c2);
            if (t == 0) acc = one;
            else
                for (std::size_t j = 0; j < acc.grads.size(); ++j)
                    for (std::size_t k = 0; k < acc.grads[j].ciphers.size(); ++k)
                        acc.grads[j].ciphers[k] =
                            rig.ctx.add_ct(acc.grads[j].ciphers[k], one.grads[j].ciphers[k]);
        }
        for (std::size_t j = 0; j < acc.grads.size(); ++j)
            for (std::size_t k = 0; k < acc.grads[j].ciphers.size(); ++k)
                REQUIRE(batch.grads[j].ciphers[k].slots == acc.grads[j].ciphers[k].slots);
    }
}

TEST_CASE("rotation budgets") {
    auto count_rots = [](std::vector<u64> dims) {
        auto spec = small_spec(dims);
        RefRig rig(spec, 128, 6);
        std::vector<double> x = random_vec(dims[0], rig.rng);
        std::vector<double> y(dims.back(), 0.0);
        y[0] = 1.0;
        auto input = rig.engine.pack_input(x);
        Counters fw, bw;
        auto trace = rig.engine.forward(&input, nullptr, rig.model, fw);
        rig.engine.backward(&input, nullptr, rig.model, trace, rig.engine.pack_labels(y), bw);
        return std::pair<Counters, Counters>(fw, bw);
    };

    SECTION("per-layer forward rotations: log2(h_{i-1}) + log2(h_{i+1}), last saves log2(h_l)") {
        for (auto dims : {std::vector<u64>{4, 4, 2}, {8, 4, 2}, {4, 8, 2}}) {
            auto [fw, bw] = count_rots(dims);
            u64 l0 = log2_exact(dims[0]), l1 = log2_exact(dims[1]), l2 = log2_exact(dims[2]);
            REQUIRE(fw.rotations == (l0 + l2) + l1);      // FP_1 + FP_2 (last layer: RIS only)
            REQUIRE(bw.rotations == (l1 + l2) + l0);      // BP_2 + BP_1
            // Per-iteration MAP total = l(FP+BP) - 2 log2(h_l), h_{l+1} := h_l.
            u64 map_total = fw.rotations + bw.rotations;
            u64 formula = ((l0 + l2) + (l1 + l2)) * 2 - 2 * l2;
            REQUIRE(map_total == formula);
        }
    }

    SECTION("three-layer rotation count matches the per-layer pipeline") {
        auto [fw, bw] = count_rots({4, 4, 4, 2});
        u64 l0 = 2, l1 = 2, l2 = 2, l3 = 1;
        REQUIRE(fw.rotations == (l0 + l2) + (l1 + l3) + l2);
        REQUIRE(bw.rotations == (l2 + l3) + (l1 + l2) + l0);
    }
}

TEST_CASE("model update") {
    auto spec = small_spec({4, 4, 2});
    RefRig rig(spec, 32, 6);
    Counters c;

    SECTION("zero aggregated gradient leaves the weights unchanged") {
        GradientSet<RefContext> zero;
        for (const auto& w : rig.model.weights) {
            packing::PackedTensor<RefContext> g = w;
            for (auto& ct : g.ciphers)
                ct = rig.ctx.encrypt(rig.ctx.encode(std::vector<double>(rig.ctx.slots(), 0.0)),
                                     rig.rng);
            zero.grads.push_back(g);
        }
        auto updated = rig.engine.apply_update(rig.model, zero, 0.5, 2, 3, c);
        for (std::size_t j = 0; j < updated.weights.size(); ++j)
            for (std::size_t k = 0; k < updated.weights[j].ciphers.size(); ++k)
                REQUIRE(updated.weights[j].ciphers[k].slots ==
                        rig.model.weights[j].ciphers[k].slots);
    }

    SECTION("post-update weights return to level L and scale S") {
        GradientSet<RefContext> g;
        for (const auto& w : rig.model.weights) g.grads.push_back(w);
        auto updated = rig.engine.apply_update(rig.model, g, 1.0, 1, 1, c);
        for (const auto& w : updated.weights)
            for (const auto& ct : w.ciphers) {
                REQUIRE(ct.level == rig.ctx.top_level());
                REQUIRE(ct.scale == rig.ctx.scale());
            }
    }

    SECTION("eta=1, bN=1: weights shift by exactly the signed gradient") {
        GradientSet<RefContext> g;
        for (const auto& w : rig.model.weights) {
            auto t = w;
            for (auto& ct : t.ciphers) {
                std::vector<double> v(rig.ctx.slots(), 0.25);
                ct = rig.ctx.encrypt(rig.ctx.encode(v), rig.rng);
            }
            g.grads.push_back(t);
        }
        auto updated = rig.engine.apply_update(rig.model, g, 1.0, 1, 1, c);
        for (std::size_t j = 0; j < updated.weights.size(); ++j)
            for (std::size_t k = 0; k < updated.weights[j].ciphers.size(); ++k)
                for (std::size_t s = 0; s < rig.ctx.slots(); ++s)
                    REQUIRE(updated.weights[j].ciphers[k].slots[s] ==
                            rig.model.weights[j].ciphers[k].slots[s] + 0.25);
    }
}

TEST_CASE("reference training matches the pooled plaintext trainer bitwise") {
    auto spec = small_spec({4, 4, 2});
    spec.local_batch = 2;
    RefRig rig(spec, 32, 6);
    auto onet = oracle::from_spec(spec);
    auto ow = rig.weights;

    Rng drng(55);
    std::vector<std::vector<double>> xs, ys;
    for (int t = 0; t < 6; ++t) {
        xs.push_back(random_vec(4, drng));
        ys.push_back(t % 2 == 0 ? std::vector<double>{1, 0} : std::vector<double>{0, 1});
    }

    auto model = rig.model;
    for (int iter = 0; iter < 3; ++iter) {
        Counters c;
        GradientSet<RefContext> agg;
        // Pooled batch of all six samples (B = b*N = 6), accumulated in order.
        std::vector<packing::PackedSlots> inputs;
        std::vector<std::vector<double>> labels;
        for (std::size_t t = 0; t < xs.size(); ++t) {
            inputs.push_back(rig.engine.pack_input(xs[t]));
            labels.push_back(rig.engine.pack_labels(ys[t]));
        }
        agg = rig.engine.lgd_compute(inputs, labels, model, c);
        model = rig.engine.apply_update(model, agg, spec.learning_rate, 6, 1, c);

        oracle::train_iteration(onet, ow, xs, ys, 6);

        for (std::size_t j = 0; j < model.weights.size(); ++j) {
            auto dec = packing::decrypt_packed<RefContext>(
                rig.ctx, model.weights[j],
                [&](const core::RefCipher& ct) { return rig.ctx.decode(rig.ctx.d_decrypt(ct, 3, 3)); });
            auto got = packing::unpack_weights(dec);
            for (u64 i = 0; i < got.rows; ++i)
                for (u64 k = 0; k < got.cols; ++k) {
                    INFO("iter " << iter << " layer " << j << " w[" << i << "," << k << "]");
                    REQUIRE(got.at(i, k) == ow[j].at(i, k));
                }
        }
    }
}

// ---------------------------------------------------------------------------
// Convolutional front end.
// ---------------------------------------------------------------------------

namespace {

struct ConvOracle {
    // Plain conv(+pool)+fc forward/backward with the same approximations.
    static std::vector<double> patches_of(const Matrix& img, u64 f, u64 s) {
        std::vector<double> out;
        for (u64 oy = 0; oy + f <= img.rows; oy += s)
            for (u64 ox = 0; ox + f <= img.cols; ox += s)
                for (u64 ky = 0; ky < f; ++ky)
                    for (u64 kx = 0; kx < f; ++kx) out.push_back(img.at(oy + ky, ox + kx));
        return out;
    }
};

} // namespace

TEST_CASE("average pooling rides the bootstrap") {
    // A 1x1 kernel makes the conv an identity: pooling the image directly.
    RefContext ctx(make_toy_params(64, 6));
    ConvConfig cfg;
    cfg.image_side = 4;
    cfg.f = 1;
    cfg.stride_px = 1;
    cfg.pooled = true;
    cfg.pf = 2;
    cfg.pstride = 2;
    cfg.act = approx::activation("identity", approx::ActivationMode::Value, 1, -8, 8);
    cfg.act_d = approx::activation("identity", approx::ActivationMode::Derivative, 1, -8, 8);
    auto plan = compile_conv(cfg, ctx.slots(), /*tail width=*/0, /*tail stride=*/0);
    auto svc = local_services(ctx, 3, core::BootstrapParams{40, 16, 3});
    Rng rng(3);

    SECTION("constant image pools to the same constant") {
        std::vector<double> v(ctx.slots(), 0.0);
        for (u64 i = 0; i < 16; ++i) v[i] = 0.7;
        packing::PackedTensor<RefContext> t;
        t.ciphers = {ctx.encrypt(ctx.encode(v), rng)};
        Counters c;
        auto [pooled, bwd] = avg_pool_via_bootstrap(plan, t, svc, c);
        for (u64 q = 0; q < 4; ++q)
            REQUIRE(pooled.ciphers[0].slots[q] == Catch::Approx(0.7).margin(1e-12));
    }

    SECTION("4x4 ramp with a 2x2 stride-2 kernel pools to quadrant means") {
        std::vector<double> v(ctx.slots(), 0.0);
        for (u64 i = 0; i < 16; ++i) v[i] = static_cast<double>(i);
        packing::PackedTensor<RefContext> t;
        t.ciphers = {ctx.encrypt(ctx.encode(v), rng)};
        Counters c;
        auto [pooled, bwd] = avg_pool_via_bootstrap(plan, t, svc, c);
        // Quadrants of the row-major ramp: means of {0,1,4,5}, {2,3,6,7}, ...
        REQUIRE(pooled.ciphers[0].slots[0] == Catch::Approx(2.5));
        REQUIRE(pooled.ciphers[0].slots[1] == Catch::Approx(4.5));
        REQUIRE(pooled.ciphers[0].slots[2] == Catch::Approx(10.5));
        REQUIRE(pooled.ciphers[0].slots[3] == Catch::Approx(12.5));
        // Refresh restored the ledger.
        REQUIRE(pooled.ciphers[0].level == ctx.top_level());
        REQUIRE(pooled.ciphers[0].scale == ctx.scale());
    }

    SECTION("pooling inside the refresh saves log2(window) rotations") {
        std::vector<double> v(ctx.slots(), 0.5);
        packing::PackedTensor<RefContext> t;
        t.ciphers = {ctx.encrypt(ctx.encode(v), rng)};
        Counters c;
        avg_pool_via_bootstrap(plan, t, svc, c);
        REQUIRE(c.rotations == 0); // the inner sum would otherwise cost these:
        REQUIRE(log2_exact(cfg.pf * cfg.pf) == 2);
    }
}

TEST_CASE("conv + pool + fc training against the plaintext oracle") {
    // 6x6 image, 2x2/stride-2 conv (3x3 patch grid), 2x2/stride-1 pooling
    // (2x2 pooled grid), then a 4-4-2 FC tail.
    RefContext ctx(make_toy_params(256, 6));
    nn::NetworkSpec tail_spec;
    tail_spec.input_dim = 4;
    for (u64 w : {4ULL, 2ULL}) {
        LayerSpec l;
        l.kind = LayerSpec::Kind::Fc;
        l.out_dim = w;
        l.activation = "sigmoid";
        l.degree = 3;
        tail_spec.layers.push_back(l);
    }
    tail_spec.learning_rate = 1.0;
    auto tail_net = compile_fc(tail_spec, ctx.slots(), /*parity offset=*/1);

    ConvConfig cfg;
    cfg.image_side = 6;
    cfg.f = 2;
    cfg.stride_px = 2;
    cfg.pooled = true;
    cfg.pf = 2;
    cfg.pstride = 1;
    cfg.act = approx::activation("sigmoid", approx::ActivationMode::Value, 3, -8, 8);
    cfg.act_d = approx::activation("sigmoid", approx::ActivationMode::Derivative, 3, -8, 8);
    auto plan = compile_conv(cfg, ctx.slots(), tail_net.layer(1).out_w,
                             tail_net.layer(1).stride);
    auto svc = local_services(ctx, 3, core::BootstrapParams{40, 16, 3});
    ConvFcEngine<RefContext> eng(ctx, plan, tail_net, svc);

    Rng rng(5);
    std::vector<double> kernel{0.5, -0.25, 0.125, 0.375};
    auto tail_w = init_weights_plain(tail_spec, 7);
    auto model = eng.encrypt_model(kernel, tail_w, rng);

    Matrix img(6, 6);
    Rng drng(9);
    for (auto& x : img.data) x = drng.uniform_real(-1.0, 1.0);
    std::vector<double> y{1, 0};

    // Plain oracle.
    auto patches = ConvOracle::patches_of(img, 2, 2); // 9 patches x 4
    std::vector<double> conv_u(9), conv_a(9);
    for (u64 p = 0; p < 9; ++p) {
        double acc = 0;
        for (u64 i = 0; i < 4; ++i) acc += kernel[i] * patches[p * 4 + i];
        conv_u[p] = acc;
        conv_a[p] = cfg.act.eval(acc);
    }
    std::vector<double> pooled(4);
    for (u64 qy = 0; qy < 2; ++qy)
        for (u64 qx = 0; qx < 2; ++qx) {
            double acc = 0;
            for (u64 ky = 0; ky < 2; ++ky)
                for (u64 kx = 0; kx < 2; ++kx) acc += conv_a[(qy + ky) * 3 + (qx + kx)];
            pooled[qy * 2 + qx] = acc / 4.0;
        }

    Counters c;
    auto packed = eng.pack_image(img);
    auto tr = eng.forward(packed, model, c);

    SECTION("forward matches") {
        // FC input carries the pooled values replicated at the tail stride.
        u64 rs = tail_net.layer(1).stride;
        for (u64 q = 0; q < 4; ++q)
            REQUIRE(tr.fc_input.ciphers[0].slots[q * rs] ==
                    Catch::Approx(pooled[q]).margin(1e-9));
        // Full prediction agrees with the plain pipeline.
        std::vector<double> cur = pooled;
        for (std::size_t j = 1; j < tail_net.h.size(); ++j) {
            std::vector<double> u(tail_net.h[j], 0.0);
            for (u64 k = 0; k < tail_net.h[j]; ++k)
                for (u64 i = 0; i < tail_net.h[j - 1]; ++i)
                    u[k] += tail_w[j - 1].at(i, k) * cur[i];
            for (auto& uv : u) uv = tail_net.layer(j).act.eval(uv);
            cur = u;
        }
        u64 stride = tail_net.label_stride;
        for (u64 k = 0; k < 2; ++k)
            REQUIRE(tr.tail_trace.output.ciphers[0].slots[k * stride] ==
                    Catch::Approx(cur[k]).margin(1e-9));
    }

    SECTION("kernel gradient matches finite differences") {
        auto labels = eng.tail().pack_labels(y);
        auto grads = eng.backward(packed, model, tr, labels, c);
        // Loss as the engine defines it: 0.5-free L2 with E = y - out; the
        // gradient step maximizes <W, E>, i.e. dL/dk with L = -0.5|y-out|^2.
        auto loss_of = [&](const std::vector<double>& kvec) {
            std::vector<double> cu(9), ca(9);
            for (u64 p = 0; p < 9; ++p) {
                double acc = 0;
                for (u64 i = 0; i < 4; ++i) acc += kvec[i] * patches[p * 4 + i];
                ca[p] = cfg.act.eval(acc);
            }
            std::vector<double> pl(4);
            for (u64 qy = 0; qy < 2; ++qy)
                for (u64 qx = 0; qx < 2; ++qx) {
                    double acc = 0;
                    for (u64 ky = 0; ky < 2; ++ky)
                        for (u64 kx = 0; kx < 2; ++kx) acc += ca[(qy + ky) * 3 + (qx + kx)];
                    pl[qy * 2 + qx] = acc / 4.0;
                }
            std::vector<double> cur = pl;
            for (std::size_t j = 1; j < tail_net.h.size(); ++j) {
                std::vector<double> u(tail_net.h[j], 0.0);
                for (u64 k = 0; k < tail_net.h[j]; ++k)
                    for (u64 i = 0; i < tail_net.h[j - 1]; ++i)
                        u[k] += tail_w[j - 1].at(i, k) * cur[i];
                for (auto& uv : u) uv = tail_net.layer(j).act.eval(uv);
                cur = u;
            }
            double l = 0;
            for (u64 k = 0; k < 2; ++k) l += -0.5 * (y[k] - cur[k]) * (y[k] - cur[k]);
            return l;
        };
        double h = 1e-6;
        for (u64 i = 0; i < 4; ++i) {
            auto kp = kernel, km = kernel;
            kp[i] += h;
            km[i] -= h;
            double expect = (loss_of(kp) - loss_of(km)) / (2 * h);
            double got = grads.kernel.ciphers[0].slots[i];
            REQUIRE(got == Catch::Approx(expect).margin(1e-4));
        }
    }

    SECTION("one update step moves every weight tensor and restores the ledger") {
        auto labels = eng.tail().pack_labels(y);
        auto grads = eng.backward(packed, model, tr, labels, c);
        auto updated = eng.apply_update(model, grads, 1.0, 1, 1, c);
        REQUIRE(updated.kernel.ciphers[0].level == ctx.top_level());
        REQUIRE(updated.kernel.ciphers[0].scale == ctx.scale());
        bool moved = false;
        for (u64 i = 0; i < 4; ++i)
            if (updated.kernel.ciphers[0].slots[i] != model.kernel.ciphers[0].slots[i])
                moved = true;
        REQUIRE(moved);
    }
}
