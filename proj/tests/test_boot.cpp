// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include "fenn/core/backend_real.hpp"
#include "fenn/core/backend_ref.hpp"

using namespace fenn;
using namespace fenn::core;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform_real(-1.0, 1.0);
    return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace

TEST_CASE("appendix sizing calculator") {
    auto s = bootstrap_sizing(10, 55, 128);
    REQUIRE(s.mask_bound_log2 == 183.0);
    // Q_l > 11 * 2^183
    REQUIRE(s.min_logq == Catch::Approx(std::log2(11.0) + 183.0));
    REQUIRE(bootstrap_constraint_holds(190.0, 10, 55, 128));
    REQUIRE(!bootstrap_constraint_holds(186.0, 10, 55, 128));
}

TEST_CASE("distributed bootstrapping") {
    RealContext ctx(make_toy_params(32, 3));
    auto shares = sec_key_gen(ctx.ring(), 3, 7);
    ctx.set_keys(d_key_gen(ctx.ring(), shares, {1, 2}, 11, 13));
    Rng rng(17);
    BootstrapParams bp{/*delta_bits=*/40, /*lambda_bits=*/20, /*n_parties=*/3};
    double tol = std::ldexp(1.0, -15);

    auto v = random_vec(ctx.slots(), rng);
    auto fresh = ctx.encrypt(ctx.encode(v), rng);
    // Burn levels to simulate a mid-circuit ciphertext.
    auto ones = ctx.encode(std::vector<double>(ctx.slots(), 1.0), fresh.level, ctx.scale());
    auto low = ctx.res(ctx.mul_pt(fresh, ones));
    low = ctx.res(ctx.mul_pt(
        low, ctx.encode(std::vector<double>(ctx.slots(), 1.0), low.level, ctx.scale())));
    REQUIRE(low.level == 1);

    SECTION("identity refresh restores (L, S) and the message") {
        auto boosted = d_bootstrap(ctx, low, shares, bp, 19);
        REQUIRE(boosted.level == ctx.top_level());
        REQUIRE(boosted.scale == ctx.scale());
        auto out = ctx.decode(ctx.d_decrypt(boosted, shares, 23));
        REQUIRE(max_abs_diff(out, v) < tol);
    }

    SECTION("rotation-composite transform equals rotation after refresh") {
        auto phi = LinearTransform::rotation_composite({1, 2});
        auto boosted = d_bootstrap_alt(ctx, low, phi, shares, bp, 29);
        auto out = ctx.decode(ctx.d_decrypt(boosted, shares, 31));
        auto expected = LinearTransform::rotate_left(v, static_cast<i64>(3));
        REQUIRE(max_abs_diff(out, expected) < tol);

        // Same result as refreshing then rotating.
        auto via_rot = ctx.rot_l(ctx.rot_l(d_bootstrap(ctx, low, shares, bp, 37), 1), 2);
        auto out2 = ctx.decode(ctx.d_decrypt(via_rot, shares, 41));
        REQUIRE(max_abs_diff(out2, expected) < tol);
    }

    SECTION("general slot-linear transform (2x2 average pool)") {
        // Flattened 4x4 image in slots 0..15; 2x2/stride-2 pooling onto 4 slots.
        u64 slots = ctx.slots();
        std::vector<LinearTransform::Term> terms;
        for (u64 py = 0; py < 2; ++py) {
            for (u64 px = 0; px < 2; ++px) {
                u64 out_idx = py * 2 + px;
                u64 in_base = (2 * py) * 4 + 2 * px;
                for (u64 ky = 0; ky < 2; ++ky) {
                    for (u64 kx = 0; kx < 2; ++kx) {
                        u64 in_idx = in_base + ky * 4 + kx;
                        std::vector<double> mask(slots, 0.0);
                        mask[out_idx] = 0.25;
                        terms.push_back({static_cast<i64>(in_idx) - static_cast<i64>(out_idx),
                                         std::move(mask)});
                    }
                }
            }
        }
        auto phi = LinearTransform::slot_linear(std::move(terms));

        auto boosted = d_bootstrap_alt(ctx, low, phi, shares, bp, 43);
        REQUIRE(boosted.level == ctx.top_level());
        REQUIRE(boosted.scale == ctx.scale());
        auto out = ctx.decode(ctx.d_decrypt(boosted, shares, 47));
        auto expected = phi.apply(v);
        REQUIRE(max_abs_diff(out, expected) < tol);
    }

    SECTION("constraint rejection at an exhausted modulus") {
        // log2(Q_0) ~ 45 bits < log2(4) + 40 + 20 = 62: refused at level 0,
        // accepted at level 1 where log2(Q_1) ~ 77.
        auto bottom = ctx.at_level(fresh, 0);
        REQUIRE_THROWS_AS(d_bootstrap(ctx, bottom, shares, bp, 53), Error);
        REQUIRE_NOTHROW(d_bootstrap(ctx, low, shares, bp, 59));
        // Masks beyond the sampling word are refused outright.
        BootstrapParams huge{/*delta_bits=*/55, /*lambda_bits=*/30, /*n_parties=*/3};
        REQUIRE_THROWS_AS(d_bootstrap(ctx, low, shares, huge, 61), Error);
    }

    SECTION("linearity of declared transforms") {
        Rng prng(61);
        auto phi = LinearTransform::slot_linear({{2, std::vector<double>(ctx.slots(), 0.5)},
                                                 {-1, std::vector<double>(ctx.slots(), 1.5)}});
        auto a = random_vec(ctx.slots(), prng);
        auto b = random_vec(ctx.slots(), prng);
        double alpha = 1.75;
        std::vector<double> combo(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) combo[i] = a[i] + alpha * b[i];
        auto lhs = phi.apply(combo);
        auto pa = phi.apply(a);
        auto pb = phi.apply(b);
        for (std::size_t i = 0; i < a.size(); ++i)
            REQUIRE(lhs[i] == Catch::Approx(pa[i] + alpha * pb[i]).margin(1e-12));
    }
}

TEST_CASE("reference-backend bootstrap obeys the same gate") {
    RefContext ref(make_toy_params(32, 3));
    Rng rng(3);
    auto v = random_vec(ref.slots(), rng);
    auto ct = ref.encrypt(ref.encode(v), rng);
    auto low = ref.at_level(ct, 1);
    BootstrapParams ok{40, 20, 3};
    auto boosted = ref.d_bootstrap_alt(low, LinearTransform::identity(), ok);
    REQUIRE(boosted.level == ref.top_level());
    REQUIRE(boosted.scale == ref.scale());
    REQUIRE(max_abs_diff(boosted.slots, ref.encode(v).slots) == 0.0);

    BootstrapParams tight{60, 18, 3};
    REQUIRE_THROWS_AS(ref.d_bootstrap_alt(low, LinearTransform::identity(), tight), Error);
}
