// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0
//
// Secret-share sampling and the collective key-generation protocols: public
// key (1 round), relinearization key (2 rounds), galois keys (1 round).

#pragma once

#include <map>

#include "fenn/core/cipher.hpp"

namespace fenn::core {

struct SecretShare {
    RnsPoly s; // evaluation domain over the full chain plus auxiliary prime
    u64 ring_dim = 0;
};

/// Shoup-form image of an evaluation-domain polynomial: per-limb quotients
/// that accelerate products against a fixed operand.
struct ShoupPoly {
    std::vector<std::vector<u64>> limbs;
    std::vector<u64> special;
    bool empty() const { return limbs.empty(); }
};

inline u64 shoup_quotient(u64 w, u64 q) {
    return static_cast<u64>((static_cast<u128>(w) << 64) / q);
}

inline ShoupPoly make_shoup(const Ring& ring, const RnsPoly& p) {
    ShoupPoly out;
    out.limbs.resize(p.nprimes());
    for (std::size_t j = 0; j < p.nprimes(); ++j) {
        u64 q = ring.prime(j);
        out.limbs[j].resize(ring.n());
        for (u64 i = 0; i < ring.n(); ++i) out.limbs[j][i] = shoup_quotient(p.limbs[j][i], q);
    }
    if (p.has_special()) {
        u64 q = ring.special_prime();
        out.special.resize(ring.n());
        for (u64 i = 0; i < ring.n(); ++i) out.special[i] = shoup_quotient(p.special[i], q);
    }
    return out;
}

/// One digit of a switching key: (b_t, a_t) with b_t + s*a_t = P*crt_t*s' + e.
struct SwitchKeyDigit {
    RnsPoly b, a;
    ShoupPoly b_shoup, a_shoup; // filled when the key is installed
};

struct SwitchKey {
    std::vector<SwitchKeyDigit> digits; // one per chain prime
    bool empty() const { return digits.empty(); }
};

struct PublicKey {
    RnsPoly b, a; // evaluation domain over the chain primes
};

struct CollectiveKeys {
    PublicKey pk;
    SwitchKey relin;                 // switches s^2 -> s
    std::map<u64, SwitchKey> galois; // galois element -> key tau(s) -> s
    std::vector<i64> rotation_offsets; // declared offsets (positive = left)
};

// ---------------------------------------------------------------------------
// Sampling helpers.
// ---------------------------------------------------------------------------
namespace sample {

inline RnsPoly ternary(const Ring& ring, Rng& rng, bool with_special) {
    std::vector<i64> c(ring.n());
    for (auto& x : c) x = rng.ternary();
    RnsPoly p = poly_from_signed(ring, c, ring.chain_size(), with_special);
    to_eval(ring, p);
    return p;
}

inline RnsPoly gaussian(const Ring& ring, Rng& rng, std::size_t nprimes, bool with_special) {
    std::vector<i64> c(ring.n());
    for (auto& x : c) x = rng.gaussian();
    RnsPoly p = poly_from_signed(ring, c, nprimes, with_special);
    to_eval(ring, p);
    return p;
}

inline RnsPoly uniform(const Ring& ring, Rng& rng, std::size_t nprimes, bool with_special) {
    RnsPoly p = make_zero_poly(ring, nprimes, with_special, Domain::Eval);
    for (std::size_t j = 0; j < nprimes; ++j) {
        u64 q = ring.prime(j);
        for (u64 i = 0; i < ring.n(); ++i) p.limbs[j][i] = rng.uniform(q);
    }
    if (with_special) {
        u64 q = ring.special_prime();
        for (u64 i = 0; i < ring.n(); ++i) p.special[i] = rng.uniform(q);
    }
    return p;
}

} // namespace sample

/// Common reference polynomials, derived from a public seed shared by all
/// parties. Draws are positional: every party replays the same sequence.
class CommonReference {
public:
    explicit CommonReference(u64 seed) : rng_(seed) {}

    RnsPoly draw(const Ring& ring, std::size_t nprimes, bool with_special) {
        return sample::uniform(ring, rng_, nprimes, with_special);
    }

private:
    Rng rng_;
};

// ---------------------------------------------------------------------------
// SecKeyGen.
// ---------------------------------------------------------------------------
inline std::vector<SecretShare> sec_key_gen(const Ring& ring, std::size_t n_parties, u64 seed) {
    FENN_REQUIRE(n_parties >= 1, "need at least one party");
    Rng rng(seed);
    std::vector<SecretShare> shares;
    shares.reserve(n_parties);
    for (std::size_t i = 0; i < n_parties; ++i) {
        Rng child = rng.fork();
        shares.push_back({sample::ternary(ring, child, true), ring.n()});
    }
    return shares;
}

/// Joint secret sum(s_i); test-only helper (never crosses the wire).
inline RnsPoly joint_secret(const Ring& ring, const std::vector<SecretShare>& shares) {
    RnsPoly s = shares[0].s;
    for (std::size_t i = 1; i < shares.size(); ++i) s = add(ring, s, shares[i].s);
    return s;
}

// ---------------------------------------------------------------------------
// DKeyGen rounds.
// ---------------------------------------------------------------------------

/// P * crt_t mod q_j, the gadget factor of digit t on limb j (zero unless
/// j == t), and its value on the auxiliary limb (zero).
inline u64 gadget_factor(const Ring& ring, std::size_t digit, std::size_t limb) {
    if (digit != limb) return 0;
    u64 q = ring.prime(digit);
    return ring.special_prime() % q;
}

namespace keygen {

struct Round1 {
    RnsPoly pk_share;                      // -a*s_i + e
    std::vector<RnsPoly> rkg_h0;           // per digit
    std::vector<RnsPoly> rkg_h1;           // per digit
    std::map<u64, std::vector<RnsPoly>> galois_shares; // per element, per digit
};

struct Round2 {
    std::vector<RnsPoly> rkg_b; // per digit, s_i*h0_t + (u_i - s_i)*h1_t + e
};

struct CrsPolys {
    RnsPoly pk_a;
    std::vector<RnsPoly> ks_a;                     // per digit, full basis
    std::map<u64, std::vector<RnsPoly>> galois_a;  // per element, per digit
};

inline CrsPolys draw_crs(const Ring& ring, u64 crs_seed, const std::vector<u64>& galois_elems) {
    CommonReference crs(crs_seed);
    CrsPolys out;
    out.pk_a = crs.draw(ring, ring.chain_size(), false);
    std::size_t digits = ring.chain_size();
    out.ks_a.reserve(digits);
    for (std::size_t t = 0; t < digits; ++t) out.ks_a.push_back(crs.draw(ring, digits, true));
    for (u64 g : galois_elems) {
        std::vector<RnsPoly> as;
        for (std::size_t t = 0; t < digits; ++t) as.push_back(crs.draw(ring, digits, true));
        out.galois_a.emplace(g, std::move(as));
    }
    return out;
}

/// Adds the gadget term P*crt_t*w onto share limb t (w in eval domain).
inline void add_gadget(const Ring& ring, RnsPoly& share, const RnsPoly& w, std::size_t digit) {
    u64 q = ring.prime(digit);
    u64 f = gadget_factor(ring, digit, digit);
    for (u64 i = 0; i < ring.n(); ++i) {
        share.limbs[digit][i] =
            nt::add_mod(share.limbs[digit][i], nt::mul_mod(w.limbs[digit][i], f, q), q);
    }
}

struct PartyEphemeral {
    RnsPoly u; // ternary, used by the relinearization protocol
};

inline Round1 round1(const Ring& ring, const SecretShare& sk, const CrsPolys& crs,
                     PartyEphemeral& eph, Rng& rng) {
    Round1 out;
    std::size_t digits = ring.chain_size();

    // Public-key share: -a*s_i + e (chain primes only).
    {
        RnsPoly s_chain = drop_to_level(sk.s, digits);
        RnsPoly as = mul(ring, crs.pk_a, s_chain);
        RnsPoly e = sample::gaussian(ring, rng, digits, false);
        out.pk_share = add(ring, negate(ring, as), e);
    }

    eph.u = sample::ternary(ring, rng, true);

    out.rkg_h0.reserve(digits);
    out.rkg_h1.reserve(digits);
    for (std::size_t t = 0; t < digits; ++t) {
        // h0_t = -u_i*a_t + P*crt_t*s_i + e
        RnsPoly h0 = add(ring, negate(ring, mul(ring, eph.u, crs.ks_a[t])),
                         sample::gaussian(ring, rng, digits, true));
        add_gadget(ring, h0, sk.s, t);
        out.rkg_h0.push_back(std::move(h0));
        // h1_t = s_i*a_t + e
        out.rkg_h1.push_back(add(ring, mul(ring, sk.s, crs.ks_a[t]),
                                 sample::gaussian(ring, rng, digits, true)));
    }

    // Galois shares: -a_t*s_i + P*crt_t*tau(s_i) + e (single round).
    for (const auto& [g, as] : crs.galois_a) {
        RnsPoly s_coeff = sk.s;
        to_coeff(ring, s_coeff);
        RnsPoly tau_s = automorphism(ring, s_coeff, g);
        to_eval(ring, tau_s);
        std::vector<RnsPoly> shares;
        shares.reserve(digits);
        for (std::size_t t = 0; t < digits; ++t) {
            RnsPoly h = add(ring, negate(ring, mul(ring, sk.s, as[t])),
                            sample::gaussian(ring, rng, digits, true));
            add_gadget(ring, h, tau_s, t);
            shares.push_back(std::move(h));
        }
        out.galois_shares.emplace(g, std::move(shares));
    }
    return out;
}

inline Round1 aggregate_round1(const Ring& ring, const std::vector<Round1>& rs) {
    Round1 agg = rs[0];
    for (std::size_t i = 1; i < rs.size(); ++i) {
        agg.pk_share = add(ring, agg.pk_share, rs[i].pk_share);
        for (std::size_t t = 0; t < agg.rkg_h0.size(); ++t) {
            agg.rkg_h0[t] = add(ring, agg.rkg_h0[t], rs[i].rkg_h0[t]);
            agg.rkg_h1[t] = add(ring, agg.rkg_h1[t], rs[i].rkg_h1[t]);
        }
        for (auto& [g, shares] : agg.galois_shares) {
            const auto& other = rs[i].galois_shares.at(g);
            for (std::size_t t = 0; t < shares.size(); ++t)
                shares[t] = add(ring, shares[t], other[t]);
        }
    }
    return agg;
}

inline Round2 round2(const Ring& ring, const SecretShare& sk, const PartyEphemeral& eph,
                     const Round1& agg, Rng& rng) {
    Round2 out;
    std::size_t digits = ring.chain_size();
    RnsPoly u_minus_s = sub(ring, eph.u, sk.s);
    out.rkg_b.reserve(digits);
    for (std::size_t t = 0; t < digits; ++t) {
        RnsPoly part = add(ring, mul(ring, sk.s, agg.rkg_h0[t]),
                           mul(ring, u_minus_s, agg.rkg_h1[t]));
        part = add(ring, part, sample::gaussian(ring, rng, digits, true));
        out.rkg_b.push_back(std::move(part));
    }
    return out;
}

inline CollectiveKeys finish(const Ring& ring, const CrsPolys& crs, const Round1& agg1,
                             const std::vector<Round2>& r2s, std::vector<i64> rotation_offsets) {
    CollectiveKeys keys;
    keys.pk = {agg1.pk_share, crs.pk_a};
    keys.rotation_offsets = std::move(rotation_offsets);
    std::size_t digits = ring.chain_size();

    keys.relin.digits.resize(digits);
    for (std::size_t t = 0; t < digits; ++t) {
        RnsPoly b = r2s[0].rkg_b[t];
        for (std::size_t i = 1; i < r2s.size(); ++i) b = add(ring, b, r2s[i].rkg_b[t]);
        keys.relin.digits[t] = {std::move(b), agg1.rkg_h1[t]};
    }
    for (const auto& [g, shares] : agg1.galois_shares) {
        SwitchKey k;
        k.digits.resize(digits);
        for (std::size_t t = 0; t < digits; ++t) k.digits[t] = {shares[t], crs.galois_a.at(g)[t]};
        keys.galois.emplace(g, std::move(k));
    }
    return keys;
}

} // namespace keygen

/// Galois element for a left rotation by k slots.
inline u64 galois_element_rot(u64 ring_dim, i64 k) {
    u64 nh = ring_dim / 2;
    i64 kk = ((k % static_cast<i64>(nh)) + static_cast<i64>(nh)) % static_cast<i64>(nh);
    return nt::pow_mod(5, static_cast<u64>(kk), 2 * ring_dim);
}

/// One-call driver: runs both rounds locally over all shares.
inline CollectiveKeys d_key_gen(const Ring& ring, const std::vector<SecretShare>& shares,
                                const std::vector<i64>& rotation_offsets, u64 crs_seed,
                                u64 noise_seed) {
    FENN_REQUIRE(!shares.empty(), "d_key_gen: no shares");
    for (const auto& sh : shares)
        FENN_REQUIRE(sh.ring_dim == ring.n(), "d_key_gen: mismatched ring params across shares");
    std::vector<u64> elems;
    for (i64 k : rotation_offsets) elems.push_back(galois_element_rot(ring.n(), k));
    std::sort(elems.begin(), elems.end());
    elems.erase(std::unique(elems.begin(), elems.end()), elems.end());

    auto crs = keygen::draw_crs(ring, crs_seed, elems);
    Rng noise(noise_seed);
    std::vector<keygen::Round1> r1s;
    std::vector<keygen::PartyEphemeral> ephs(shares.size());
    for (std::size_t i = 0; i < shares.size(); ++i) {
        Rng prng = noise.fork();
        r1s.push_back(keygen::round1(ring, shares[i], crs, ephs[i], prng));
    }
    auto agg1 = keygen::aggregate_round1(ring, r1s);
    std::vector<keygen::Round2> r2s;
    for (std::size_t i = 0; i < shares.size(); ++i) {
        Rng prng = noise.fork();
        r2s.push_back(keygen::round2(ring, shares[i], ephs[i], agg1, prng));
    }
    return keygen::finish(ring, crs, agg1, r2s, rotation_offsets);
}

} // namespace fenn::core
