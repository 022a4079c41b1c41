// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0
//
// The lattice backend: leveled arithmetic over RNS-CKKS ciphertexts with
// hybrid key switching through one auxiliary prime.

#pragma once

#include "fenn/core/keys.hpp"

namespace fenn::core {

inline RnsPoly restrict_with_special(const RnsPoly& p, std::size_t nprimes) {
    FENN_REQUIRE(p.has_special(), "restrict: missing auxiliary limb");
    RnsPoly out;
    out.domain = p.domain;
    out.limbs.assign(p.limbs.begin(), p.limbs.begin() + nprimes);
    out.special = p.special;
    return out;
}

class RealContext {
public:
    using Ct = Ciphertext;
    using Pt = Plaintext;

    explicit RealContext(RingParams params)
        : params_(std::move(params)), ring_(make_ring(params_)), encoder_(params_.ring_dim) {
        params_.validate();
    }

    const RingParams& params() const { return params_; }
    const Ring& ring() const { return ring_; }
    const Encoder& encoder() const { return encoder_; }
    u64 slots() const { return ring_.slots(); }
    u32 top_level() const { return params_.initial_level; }
    double scale() const { return params_.initial_scale; }

    void set_keys(CollectiveKeys keys) {
        auto fill = [this](SwitchKey& k) {
            for (auto& d : k.digits) {
                d.b_shoup = make_shoup(ring_, d.b);
                d.a_shoup = make_shoup(ring_, d.a);
            }
        };
        fill(keys.relin);
        for (auto& [g, k] : keys.galois) fill(k);
        keys_ = std::move(keys);
    }
    const CollectiveKeys& keys() const {
        FENN_REQUIRE(keys_.has_value(), "collective keys not installed");
        return *keys_;
    }
    bool has_keys() const { return keys_.has_value(); }

    // -- encode / decode ----------------------------------------------------

    Plaintext encode(const std::vector<double>& v, u32 level, double scale) const {
        FENN_REQUIRE(v.size() <= slots(), "vector too long");
        FENN_REQUIRE(level <= top_level(), "encode above top level");
        check_capacity(v, level, scale);
        auto coeffs = encoder_.encode(v, scale);
        RnsPoly p = poly_from_signed(ring_, coeffs, level + 1, false);
        to_eval(ring_, p);
        return {std::move(p), level, scale};
    }

    Plaintext encode(const std::vector<double>& v) const {
        return encode(v, top_level(), scale());
    }

    std::vector<double> decode(const Plaintext& p) const {
        RnsPoly poly = p.poly;
        to_coeff(ring_, poly);
        // Valid plaintexts have small coefficients; two primes reconstruct
        // them exactly. Oversized coefficients (e.g. a partial decryption)
        // decode to garbage, as they must.
        std::size_t k = std::min<std::size_t>(poly.nprimes(), 2);
        auto coeffs128 = lift_centered(ring_, poly, k, -1);
        std::vector<double> coeffs(coeffs128.size());
        for (std::size_t i = 0; i < coeffs.size(); ++i)
            coeffs[i] = static_cast<double>(coeffs128[i]);
        return encoder_.decode_raw(coeffs, p.scale);
    }

    // -- encryption ---------------------------------------------------------

    Ciphertext encrypt(const Plaintext& pt, Rng& rng) const {
        const auto& pk = keys().pk;
        std::size_t np = pt.level + 1;
        RnsPoly u = sample::ternary(ring_, rng, false);
        u = drop_to_level(u, np);
        RnsPoly pk0 = drop_to_level(pk.b, np);
        RnsPoly pk1 = drop_to_level(pk.a, np);
        RnsPoly c0 = add(ring_, mul(ring_, pk0, u), sample::gaussian(ring_, rng, np, false));
        c0 = add(ring_, c0, pt.poly);
        RnsPoly c1 = add(ring_, mul(ring_, pk1, u), sample::gaussian(ring_, rng, np, false));
        return {std::move(c0), std::move(c1), std::nullopt, pt.level, pt.scale};
    }

    /// Per-party decryption share: s_i * c1 + e_smudge.
    RnsPoly decryption_share(const Ciphertext& c, const SecretShare& sk, Rng& rng) const {
        RnsPoly s = drop_to_level(sk.s, c.nprimes());
        RnsPoly h = mul(ring_, s, c.c1);
        return add(ring_, h, sample::gaussian(ring_, rng, c.nprimes(), false));
    }

    Plaintext combine_decryption(const Ciphertext& c, const std::vector<RnsPoly>& shares) const {
        RnsPoly m = c.c0;
        for (const auto& sh : shares) m = add(ring_, m, sh);
        if (c.c2.has_value()) throw Error("decrypting a non-relinearized ciphertext");
        return {std::move(m), c.level, c.scale};
    }

    Plaintext d_decrypt(const Ciphertext& c, const std::vector<SecretShare>& sks, u64 seed) const {
        Rng rng(seed);
        std::vector<RnsPoly> shares;
        shares.reserve(sks.size());
        for (const auto& sk : sks) {
            Rng child = rng.fork();
            shares.push_back(decryption_share(c, sk, child));
        }
        return combine_decryption(c, shares);
    }

    // -- leveled arithmetic -------------------------------------------------

    /// Aligns operand levels (modulus switch, no value change).
    static Ciphertext at_level(const Ciphertext& c, u32 level) {
        FENN_REQUIRE(level <= c.level, "cannot raise level");
        if (level == c.level) return c;
        Ciphertext out = c;
        out.c0 = drop_to_level(c.c0, level + 1);
        out.c1 = drop_to_level(c.c1, level + 1);
        if (c.c2) out.c2 = drop_to_level(*c.c2, level + 1);
        out.level = level;
        return out;
    }

    /// Value-preserving scale alignment: multiplies by an encoded constant
    /// and rescales, landing exactly on `target` in the ledger. Costs one
    /// level on the adjusted operand.
    Ciphertext align_scale(const Ciphertext& c, double target) const {
        if (c.scale == target) return c;
        FENN_REQUIRE(c.level >= 1, "level exhausted during scale alignment");
        FENN_REQUIRE(target > c.scale, "align_scale only raises the scale");
        u64 q = ring_.prime(c.level);
        double factor = target * static_cast<double>(q) / c.scale;
        FENN_REQUIRE(factor >= 1.0 && factor < 9.0e18, "scale alignment factor out of range");
        u64 f = static_cast<u64>(std::llround(factor));
        Ciphertext out = c;
        mul_scalar_inplace(ring_, out.c0, f);
        mul_scalar_inplace(ring_, out.c1, f);
        out.scale = c.scale * factor; // = target * q, exact by construction
        out = res(out);
        out.scale = target;
        return out;
    }

    std::pair<Ciphertext, Ciphertext> align_pair(const Ciphertext& a, const Ciphertext& b) const {
        Ciphertext x = a, y = b;
        if (!ledger::scales_close(x.scale, y.scale)) {
            if (x.scale < y.scale) x = align_scale(x, y.scale);
            if (y.scale < x.scale) y = align_scale(y, x.scale);
        }
        u32 lvl = std::min(x.level, y.level);
        return {at_level(x, lvl), at_level(y, lvl)};
    }

    /// Pure bookkeeping: re-declares the scale label, leaving the raw
    /// polynomials untouched. Divides the decoded value by new/old.
    Ciphertext relabel_scale(const Ciphertext& c, double new_scale) const {
        Ciphertext out = c;
        out.scale = new_scale;
        return out;
    }

    /// Division by a public constant via scale retargeting (no level cost
    /// here; the caller drops the stated level afterwards).
    Ciphertext div_by_const(const Ciphertext& c, double k) const {
        return relabel_scale(c, c.scale * k);
    }

    Ciphertext add_ct(const Ciphertext& a, const Ciphertext& b) const {
        auto [x, y] = align_pair(a, b);
        return {add(ring_, x.c0, y.c0), add(ring_, x.c1, y.c1), std::nullopt, x.level,
                ledger::add_scale(a.scale, b.scale)};
    }

    Ciphertext sub_ct(const Ciphertext& a, const Ciphertext& b) const {
        auto [x, y] = align_pair(a, b);
        return {sub(ring_, x.c0, y.c0), sub(ring_, x.c1, y.c1), std::nullopt, x.level,
                ledger::add_scale(a.scale, b.scale)};
    }

    Ciphertext negate_ct(const Ciphertext& c) const {
        Ciphertext out = c;
        out.c0 = negate(ring_, c.c0);
        out.c1 = negate(ring_, c.c1);
        return out;
    }

    /// c + p with the plaintext re-encoded at the ciphertext's level/scale.
    Ciphertext add_pt(const Ciphertext& c, const std::vector<double>& v) const {
        Plaintext p = encode(v, c.level, c.scale);
        Ciphertext out = c;
        out.c0 = add(ring_, c.c0, p.poly);
        return out;
    }

    Ciphertext sub_from_pt(const std::vector<double>& v, const Ciphertext& c) const {
        return add_pt(negate_ct(c), v);
    }

    Ciphertext mul_pt(const Ciphertext& c, const Plaintext& p) const {
        u32 lvl = ledger::mul_level(c.level, p.level);
        FENN_REQUIRE(lvl >= 1, "depth exhausted");
        Ciphertext x = at_level(c, lvl);
        RnsPoly pp = drop_to_level(p.poly, lvl + 1);
        return {mul(ring_, x.c0, pp), mul(ring_, x.c1, pp), std::nullopt, lvl,
                ledger::mul_scale(c.scale, p.scale)};
    }

    /// Tensor product without relinearization (three-part result).
    Ciphertext mul_ct_raw(const Ciphertext& a, const Ciphertext& b) const {
        FENN_REQUIRE(a.is_relinearized() && b.is_relinearized(),
                     "operands must be relinearized");
        u32 lvl = ledger::mul_level(a.level, b.level);
        FENN_REQUIRE(lvl >= 1, "depth exhausted");
        Ciphertext x = at_level(a, lvl), y = at_level(b, lvl);
        RnsPoly d0 = mul(ring_, x.c0, y.c0);
        RnsPoly d1 = add(ring_, mul(ring_, x.c0, y.c1), mul(ring_, x.c1, y.c0));
        RnsPoly d2 = mul(ring_, x.c1, y.c1);
        Ciphertext out;
        out.c0 = std::move(d0);
        out.c1 = std::move(d1);
        out.c2 = std::move(d2);
        out.level = lvl;
        out.scale = ledger::mul_scale(a.scale, b.scale);
        return out;
    }

    /// Relinearization: local key switch of the quadratic part.
    Ciphertext key_switch_local(const Ciphertext& c) const {
        FENN_REQUIRE(c.c2.has_value(), "nothing to relinearize");
        RnsPoly d2 = *c.c2;
        to_coeff(ring_, d2);
        auto [k0, k1] = apply_switch_key(d2, c.level, keys().relin);
        Ciphertext out;
        out.c0 = add(ring_, c.c0, k0);
        out.c1 = add(ring_, c.c1, k1);
        out.level = c.level;
        out.scale = c.scale;
        return out;
    }

    Ciphertext mul_ct(const Ciphertext& a, const Ciphertext& b) const {
        return key_switch_local(mul_ct_raw(a, b));
    }

    Ciphertext rot_l(const Ciphertext& c, i64 k) const {
        FENN_REQUIRE(c.is_relinearized(), "rotate requires a relinearized ciphertext");
        u64 nh = slots();
        i64 kk = ((k % static_cast<i64>(nh)) + static_cast<i64>(nh)) % static_cast<i64>(nh);
        if (kk == 0) return c;
        u64 g = galois_element_rot(ring_.n(), kk);
        auto it = keys().galois.find(g);
        FENN_REQUIRE(it != keys().galois.end(), "missing rotation key");
        RnsPoly c0 = c.c0, c1 = c.c1;
        to_coeff(ring_, c0);
        to_coeff(ring_, c1);
        RnsPoly t0 = automorphism(ring_, c0, g);
        RnsPoly t1 = automorphism(ring_, c1, g);
        auto [k0, k1] = apply_switch_key(t1, c.level, it->second);
        to_eval(ring_, t0);
        Ciphertext out;
        out.c0 = add(ring_, t0, k0);
        out.c1 = std::move(k1);
        out.level = c.level;
        out.scale = c.scale;
        return out;
    }

    Ciphertext rot_r(const Ciphertext& c, i64 k) const { return rot_l(c, -k); }

    Ciphertext res(const Ciphertext& c) const {
        FENN_REQUIRE(c.level >= 1, "level exhausted");
        FENN_REQUIRE(c.is_relinearized(), "rescale requires a relinearized ciphertext");
        u64 q = ring_.prime(c.level);
        RnsPoly c0 = c.c0, c1 = c.c1;
        to_coeff(ring_, c0);
        to_coeff(ring_, c1);
        c0 = rescale_by_top(ring_, c0);
        c1 = rescale_by_top(ring_, c1);
        to_eval(ring_, c0);
        to_eval(ring_, c1);
        return {std::move(c0), std::move(c1), std::nullopt, c.level - 1,
                ledger::res_scale(c.scale, q)};
    }

    /// Declares a new scale and drops one level; the decoded value is divided
    /// by S_target / S_c. Realizes constant division at the stated ledger cost.
    Ciphertext set_scale(const Ciphertext& c, double target) const {
        FENN_REQUIRE(c.level >= 1, "level exhausted");
        Ciphertext out = at_level(c, c.level - 1);
        out.scale = target;
        return out;
    }

    /// Collective re-encryption under a foreign public key.
    struct KeySwitchShare {
        RnsPoly h0, h1;
    };

    KeySwitchShare d_key_switch_share(const Ciphertext& c, const SecretShare& sk,
                                      const PublicKey& pk_target, Rng& rng) const {
        std::size_t np = c.nprimes();
        RnsPoly s = drop_to_level(sk.s, np);
        RnsPoly u = sample::ternary(ring_, rng, false);
        u = drop_to_level(u, np);
        RnsPoly p0 = drop_to_level(pk_target.b, np);
        RnsPoly p1 = drop_to_level(pk_target.a, np);
        RnsPoly h0 = add(ring_, mul(ring_, s, c.c1), mul(ring_, u, p0));
        h0 = add(ring_, h0, sample::gaussian(ring_, rng, np, false));
        RnsPoly h1 = add(ring_, mul(ring_, u, p1), sample::gaussian(ring_, rng, np, false));
        return {std::move(h0), std::move(h1)};
    }

    Ciphertext d_key_switch_finish(const Ciphertext& c,
                                   const std::vector<KeySwitchShare>& shares) const {
        RnsPoly c0 = c.c0;
        RnsPoly c1 = make_zero_poly(ring_, c.nprimes(), false, Domain::Eval);
        for (const auto& sh : shares) {
            c0 = add(ring_, c0, sh.h0);
            c1 = add(ring_, c1, sh.h1);
        }
        return {std::move(c0), std::move(c1), std::nullopt, c.level, c.scale};
    }

    Ciphertext d_key_switch(const Ciphertext& c, const PublicKey& pk_target,
                            const std::vector<SecretShare>& sks, u64 seed) const {
        Rng rng(seed);
        std::vector<KeySwitchShare> shares;
        for (const auto& sk : sks) {
            Rng child = rng.fork();
            shares.push_back(d_key_switch_share(c, sk, pk_target, child));
        }
        return d_key_switch_finish(c, shares);
    }

    /// Hybrid key switch of a coefficient-domain polynomial `d` at `level`
    /// from the key's source secret to the joint secret. Returns the additive
    /// correction pair in evaluation domain.
    std::pair<RnsPoly, RnsPoly> apply_switch_key(const RnsPoly& d, u32 level,
                                                 const SwitchKey& key) const {
        FENN_REQUIRE(d.domain == Domain::Coeff, "switch key input must be coefficient domain");
        FENN_REQUIRE(!key.empty(), "missing evaluation key");
        std::size_t np = static_cast<std::size_t>(level) + 1;
        RnsPoly acc0 = make_zero_poly(ring_, np, true, Domain::Eval);
        RnsPoly acc1 = make_zero_poly(ring_, np, true, Domain::Eval);
        auto fma = [this](std::vector<u64>& acc, const std::vector<u64>& dt,
                          const std::vector<u64>& k, const std::vector<u64>& ks, u64 q) {
            for (u64 i = 0; i < ring_.n(); ++i)
                acc[i] = nt::add_mod(acc[i], nt::shoup_mul(dt[i], k[i], ks[i], q), q);
        };
        for (std::size_t t = 0; t < np; ++t) {
            auto lifted = centered_lift_limb(d.limbs[t], ring_.prime(t));
            RnsPoly dt = poly_from_signed(ring_, lifted, np, true);
            to_eval(ring_, dt);
            const auto& dig = key.digits[t];
            FENN_REQUIRE(!dig.b_shoup.empty(), "switch key installed without Shoup form");
            for (std::size_t j = 0; j < np; ++j) {
                u64 q = ring_.prime(j);
                fma(acc0.limbs[j], dt.limbs[j], dig.b.limbs[j], dig.b_shoup.limbs[j], q);
                fma(acc1.limbs[j], dt.limbs[j], dig.a.limbs[j], dig.a_shoup.limbs[j], q);
            }
            u64 qs = ring_.special_prime();
            fma(acc0.special, dt.special, dig.b.special, dig.b_shoup.special, qs);
            fma(acc1.special, dt.special, dig.a.special, dig.a_shoup.special, qs);
        }
        to_coeff(ring_, acc0);
        to_coeff(ring_, acc1);
        RnsPoly r0 = mod_down_special(ring_, acc0);
        RnsPoly r1 = mod_down_special(ring_, acc1);
        to_eval(ring_, r0);
        to_eval(ring_, r1);
        return {std::move(r0), std::move(r1)};
    }

private:
    void check_capacity(const std::vector<double>& v, u32 level, double scale) const {
        double maxabs = 1.0;
        for (double x : v) maxabs = std::max(maxabs, std::abs(x));
        double logq = ring_.log2_q_at(level);
        FENN_REQUIRE(std::log2(maxabs) + std::log2(scale) + 1 < logq,
                     "scale overflow of the coefficient modulus");
    }

    RingParams params_;
    Ring ring_;
    Encoder encoder_;
    std::optional<CollectiveKeys> keys_;
};

} // namespace fenn::core
