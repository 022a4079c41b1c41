// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include "fenn/core/backend_real.hpp"
#include "fenn/core/backend_ref.hpp"

using namespace fenn;
using namespace fenn::core;

namespace {

RealContext make_ctx(u64 ring_dim = 32, u32 levels = 3, std::size_t n_parties = 3,
                     std::vector<i64> rots = {1, 2, 4, 8, -1, -2, -4, -8}) {
    RealContext ctx(make_toy_params(ring_dim, levels));
    auto shares = sec_key_gen(ctx.ring(), n_parties, 7);
    ctx.set_keys(d_key_gen(ctx.ring(), shares, rots, 11, 13));
    return ctx;
}

std::vector<SecretShare> shares_for(const RealContext& ctx, std::size_t n_parties = 3) {
    return sec_key_gen(ctx.ring(), n_parties, 7);
}

std::vector<double> random_vec(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform_real(lo, hi);
    return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace

TEST_CASE("negacyclic NTT round-trips and multiplies") {
    u64 n = 32;
    auto primes = nt::find_ntt_primes(45, 2 * n, 1);
    NttTable t(primes[0], n);
    Rng rng(1);
    std::vector<u64> a(n), b(n);
    for (auto& x : a) x = rng.uniform(primes[0]);
    auto saved = a;
    t.forward(a);
    t.inverse(a);
    REQUIRE(a == saved);

    // X * X^{n-1} = X^n = -1 in the negacyclic ring.
    std::fill(a.begin(), a.end(), 0ULL);
    std::fill(b.begin(), b.end(), 0ULL);
    a[1] = 1;
    b[n - 1] = 1;
    t.forward(a);
    t.forward(b);
    for (u64 i = 0; i < n; ++i) a[i] = nt::mul_mod(a[i], b[i], primes[0]);
    t.inverse(a);
    REQUIRE(a[0] == primes[0] - 1);
    for (u64 i = 1; i < n; ++i) REQUIRE(a[i] == 0);
}

TEST_CASE("encode/decode round trip") {
    RealContext ctx(make_toy_params(32, 2));
    Rng rng(3);

    SECTION("zeros decode to zeros exactly") {
        auto p = ctx.encode(std::vector<double>(ctx.slots(), 0.0));
        for (double x : ctx.decode(p)) REQUIRE(x == 0.0);
    }

    SECTION("random vector round trips within 2^-20 relative") {
        auto v = random_vec(ctx.slots(), rng);
        auto out = ctx.decode(ctx.encode(v));
        REQUIRE(max_abs_diff(out, v) < std::ldexp(1.0, -20));
    }

    SECTION("short vectors are zero padded") {
        auto out = ctx.decode(ctx.encode({1.0, 2.0, 3.0, 4.0}));
        REQUIRE(out.size() == ctx.slots());
        REQUIRE(std::abs(out[1] - 2.0) < 1e-6);
        REQUIRE(std::abs(out[7]) < 1e-6);
    }

    SECTION("slot capacity equals ring_dim / 2") {
        REQUIRE(RingParams{.ring_dim = 8192}.slot_count() == 4096);
        REQUIRE(ctx.slots() == 16);
        REQUIRE_THROWS_AS(ctx.encode(std::vector<double>(ctx.slots() + 1, 0.0)), Error);
    }
}

TEST_CASE("secret sharing and collective keys") {
    RealContext ctx = make_ctx();
    auto shares = shares_for(ctx);
    Rng rng(5);

    SECTION("shares are distinct under independent sampling") {
        REQUIRE(shares.size() == 3);
        REQUIRE(!(shares[0].s.limbs[0] == shares[1].s.limbs[0]));
        REQUIRE(!(shares[1].s.limbs[0] == shares[2].s.limbs[0]));
    }

    SECTION("deterministic under seed") {
        auto again = sec_key_gen(ctx.ring(), 3, 7);
        REQUIRE(shares[2].s.limbs[0] == again[2].s.limbs[0]);
    }

    SECTION("full-share decryption round trip") {
        auto v = random_vec(ctx.slots(), rng);
        auto ct = ctx.encrypt(ctx.encode(v), rng);
        REQUIRE(ct.level == ctx.top_level());
        REQUIRE(ct.scale == ctx.scale());
        auto out = ctx.decode(ctx.d_decrypt(ct, shares, 99));
        REQUIRE(max_abs_diff(out, v) < std::ldexp(1.0, -20));
    }

    SECTION("partial decryption fails by a wide statistical margin") {
        double tolerance = std::ldexp(1.0, -20);
        int far = 0;
        for (int trial = 0; trial < 100; ++trial) {
            Rng trng(1000 + trial);
            auto v = random_vec(ctx.slots(), trng);
            auto ct = ctx.encrypt(ctx.encode(v), trng);
            std::vector<SecretShare> subset{shares[0], shares[1]};
            auto out = ctx.decode(ctx.d_decrypt(ct, subset, trial));
            if (max_abs_diff(out, v) > 1e6 * tolerance) ++far;
        }
        REQUIRE(far == 100);
    }

    SECTION("single party collapses to a single-key scheme") {
        RealContext solo(make_toy_params(32, 3));
        auto share1 = sec_key_gen(solo.ring(), 1, 21);
        solo.set_keys(d_key_gen(solo.ring(), share1, {1}, 11, 13));
        auto v = random_vec(solo.slots(), rng);
        auto ct = solo.encrypt(solo.encode(v), rng);
        auto out = solo.decode(solo.d_decrypt(ct, share1, 1));
        REQUIRE(max_abs_diff(out, v) < std::ldexp(1.0, -20));
    }

    SECTION("mismatched ring params are rejected") {
        RealContext other(make_toy_params(64, 3));
        auto bad = sec_key_gen(other.ring(), 2, 3);
        REQUIRE_THROWS_AS(d_key_gen(ctx.ring(), bad, {}, 1, 2), Error);
    }
}

TEST_CASE("homomorphic operations against the plaintext oracle") {
    RealContext ctx = make_ctx();
    auto shares = shares_for(ctx);
    Rng rng(17);
    double tol = std::ldexp(1.0, -20);

    auto v1 = random_vec(ctx.slots(), rng);
    auto v2 = random_vec(ctx.slots(), rng);
    auto c1 = ctx.encrypt(ctx.encode(v1), rng);
    auto c2 = ctx.encrypt(ctx.encode(v2), rng);

    SECTION("add / sub") {
        auto sum = ctx.decode(ctx.d_decrypt(ctx.add_ct(c1, c2), shares, 1));
        auto dif = ctx.decode(ctx.d_decrypt(ctx.sub_ct(c1, c2), shares, 2));
        for (std::size_t i = 0; i < ctx.slots(); ++i) {
            REQUIRE(std::abs(sum[i] - (v1[i] + v2[i])) < tol);
            REQUIRE(std::abs(dif[i] - (v1[i] - v2[i])) < tol);
        }
        // a - a decrypts to (noise bounded) zero
        auto z = ctx.decode(ctx.d_decrypt(ctx.sub_ct(c1, c1), shares, 3));
        for (double x : z) REQUIRE(std::abs(x) < tol);
        // additive identity
        auto zero = ctx.encrypt(ctx.encode(std::vector<double>(ctx.slots(), 0.0)), rng);
        auto same = ctx.decode(ctx.d_decrypt(ctx.add_ct(c1, zero), shares, 4));
        REQUIRE(max_abs_diff(same, v1) < tol);
    }

    SECTION("add level ledger: min of operands") {
        auto low = ctx.at_level(c2, 1);
        auto out = ctx.add_ct(c1, low);
        REQUIRE(out.level == 1);
    }

    SECTION("mul_pt: identity by ones, scale multiplies") {
        auto ones = ctx.encode(std::vector<double>(ctx.slots(), 1.0));
        auto prod = ctx.mul_pt(c1, ones);
        REQUIRE(prod.scale == ctx.scale() * ctx.scale());
        auto out = ctx.decode(ctx.d_decrypt(ctx.res(prod), shares, 5));
        REQUIRE(max_abs_diff(out, v1) < tol);
    }

    SECTION("mul_ct: slotwise product, relinearized") {
        auto prod = ctx.mul_ct(c1, c2);
        REQUIRE(prod.is_relinearized());
        REQUIRE(prod.scale == ctx.scale() * ctx.scale());
        auto out = ctx.decode(ctx.d_decrypt(ctx.res(prod), shares, 6));
        for (std::size_t i = 0; i < ctx.slots(); ++i)
            REQUIRE(std::abs(out[i] - v1[i] * v2[i]) < tol);
    }

    SECTION("mul_ct_raw then local key switch equals mul_ct") {
        auto raw = ctx.mul_ct_raw(c1, c2);
        REQUIRE(!raw.is_relinearized());
        auto out = ctx.decode(ctx.d_decrypt(ctx.res(ctx.key_switch_local(raw)), shares, 7));
        for (std::size_t i = 0; i < ctx.slots(); ++i)
            REQUIRE(std::abs(out[i] - v1[i] * v2[i]) < tol);
    }

    SECTION("rotations") {
        auto r0 = ctx.decode(ctx.d_decrypt(ctx.rot_l(c1, 0), shares, 8));
        REQUIRE(max_abs_diff(r0, v1) < tol);

        auto r1 = ctx.decode(ctx.d_decrypt(ctx.rot_l(c1, 1), shares, 9));
        for (std::size_t i = 0; i < ctx.slots(); ++i)
            REQUIRE(std::abs(r1[i] - v1[(i + 1) % ctx.slots()]) < tol);

        auto back = ctx.decode(ctx.d_decrypt(ctx.rot_r(ctx.rot_l(c1, 2), 2), shares, 10));
        REQUIRE(max_abs_diff(back, v1) < tol);

        auto rot = ctx.rot_l(c1, 4);
        REQUIRE(rot.level == c1.level);
        REQUIRE(rot.scale == c1.scale);

        REQUIRE_THROWS_AS(ctx.rot_l(c1, 3), Error); // no key declared for 3
    }

    SECTION("res ledger: scale / q, level - 1") {
        auto prod = ctx.mul_ct(c1, c2);
        u64 q = ctx.ring().prime(prod.level);
        auto r = ctx.res(prod);
        REQUIRE(r.level == prod.level - 1);
        REQUIRE(r.scale == prod.scale / static_cast<double>(q));
    }

    SECTION("set_scale divides the decoded value") {
        auto scaled = ctx.set_scale(c1, ctx.scale() * 100.0);
        REQUIRE(scaled.level == c1.level - 1);
        REQUIRE(scaled.scale == ctx.scale() * 100.0);
        auto out = ctx.decode(ctx.d_decrypt(scaled, shares, 11));
        for (std::size_t i = 0; i < ctx.slots(); ++i)
            REQUIRE(std::abs(out[i] - v1[i] / 100.0) < tol);
    }

    SECTION("res of fresh ciphertext then q-scale constant multiply recovers magnitude") {
        // Needs scale >> rescale prime so the rescale rounding stays small.
        RingParams p;
        p.ring_dim = 32;
        p.toy_mode = true;
        p.initial_level = 2;
        p.initial_scale = std::ldexp(1.0, 45);
        auto base = nt::find_ntt_primes(45, 64, 1);
        auto rescale = nt::find_ntt_primes(30, 64, 2);
        p.modulus_chain = {base[0], rescale[0], rescale[1]};
        p.special_prime = nt::find_ntt_primes(59, 64, 1)[0];
        RealContext wide(p);
        auto wshares = sec_key_gen(wide.ring(), 2, 5);
        wide.set_keys(d_key_gen(wide.ring(), wshares, {}, 1, 2));
        Rng wrng(7);
        auto v = random_vec(wide.slots(), wrng);
        auto ct = wide.encrypt(wide.encode(v), wrng);

        auto dropped = wide.res(ct); // scale S / q_L, value preserved
        u64 q = wide.ring().prime(ct.level);
        REQUIRE(dropped.scale == wide.scale() / static_cast<double>(q));
        auto ones = wide.encode(std::vector<double>(wide.slots(), 1.0), dropped.level,
                                static_cast<double>(q));
        auto restored = wide.mul_pt(dropped, ones);
        REQUIRE(restored.scale == wide.scale());
        auto out = wide.decode(wide.d_decrypt(restored, wshares, 12));
        REQUIRE(max_abs_diff(out, v) < std::ldexp(1.0, -8));
    }

    SECTION("depth exhaustion raises") {
        auto bottom = ctx.at_level(c1, 0);
        REQUIRE_THROWS_AS(ctx.res(bottom), Error);
        REQUIRE_THROWS_AS(ctx.mul_ct(bottom, bottom), Error);
    }
}

TEST_CASE("collective key switch re-targets the querier") {
    RealContext ctx = make_ctx();
    auto shares = shares_for(ctx);
    Rng rng(23);

    // Querier: independent single-party key over the same ring.
    auto qshare = sec_key_gen(ctx.ring(), 1, 777);
    auto qkeys = d_key_gen(ctx.ring(), qshare, {}, 31, 37);

    auto v = random_vec(ctx.slots(), rng);
    auto ct = ctx.encrypt(ctx.encode(v), rng);
    auto switched = ctx.d_key_switch(ct, qkeys.pk, shares, 41);

    RealContext qctx(make_toy_params(32, 3));
    qctx.set_keys(qkeys);
    auto out = qctx.decode(qctx.d_decrypt(switched, qshare, 43));
    REQUIRE(max_abs_diff(out, v) < std::ldexp(1.0, -18));

    // The original parties can no longer decrypt it.
    auto wrong = ctx.decode(ctx.d_decrypt(switched, shares, 44));
    REQUIRE(max_abs_diff(wrong, v) > 1.0);

    // Identity switch back to the collective key decrypts identically.
    auto same = ctx.d_key_switch(ct, ctx.keys().pk, shares, 45);
    auto out2 = ctx.decode(ctx.d_decrypt(same, shares, 46));
    REQUIRE(max_abs_diff(out2, v) < std::ldexp(1.0, -18));
}

TEST_CASE("reference backend mirrors the ledger and the values") {
    RingParams params = make_toy_params(32, 3);
    RealContext real(params);
    RefContext ref(params);
    auto shares = shares_for(real);
    real.set_keys(d_key_gen(real.ring(), shares, {1, 2, 4, 8, -1, -2, -4, -8}, 11, 13));
    Rng rng(29);
    double tol = std::ldexp(1.0, -20);

    auto v1 = random_vec(real.slots(), rng);
    auto v2 = random_vec(real.slots(), rng);
    auto rc1 = real.encrypt(real.encode(v1), rng);
    auto rc2 = real.encrypt(real.encode(v2), rng);
    auto fc1 = ref.encrypt(ref.encode(v1), rng);
    auto fc2 = ref.encrypt(ref.encode(v2), rng);

    // One straight-line program on both backends.
    auto r = real.res(real.mul_ct(real.add_ct(rc1, rc2), rc2));
    r = real.rot_l(r, 2);
    auto f = ref.res(ref.mul_ct(ref.add_ct(fc1, fc2), fc2));
    f = ref.rot_l(f, 2);

    REQUIRE(r.level == f.level);
    REQUIRE(r.scale == f.scale);
    auto rv = real.decode(real.d_decrypt(r, shares, 1));
    auto fv = ref.decode(ref.d_decrypt(f, shares.size(), shares.size()));
    REQUIRE(max_abs_diff(rv, fv) < tol);
}
