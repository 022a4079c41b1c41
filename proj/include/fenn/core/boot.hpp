// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0
//
// Collective bootstrapping: one-round mask-and-reencrypt refresh that can
// apply a declared linear slot transform while the message sits in the
// secret-shared domain.

#pragma once

#include "fenn/core/backend_real.hpp"

namespace fenn::core {

/// Declared linear map over slot vectors.
struct LinearTransform {
    enum class Kind { Identity, RotationComposite, SlotLinear };

    struct Term {
        i64 offset = 0;            // left-rotation amount
        std::vector<double> mask;  // slotwise factor applied after rotation
    };

    Kind kind = Kind::Identity;
    i64 rotation = 0;       // RotationComposite: net left-rotation
    std::vector<Term> terms; // SlotLinear: phi(v) = sum_k mask_k * rot_l(v, off_k)

    static LinearTransform identity() { return {}; }

    static LinearTransform rotation_composite(std::initializer_list<i64> offsets) {
        LinearTransform t;
        t.kind = Kind::RotationComposite;
        for (i64 k : offsets) t.rotation += k;
        return t;
    }

    static LinearTransform slot_linear(std::vector<Term> terms) {
        LinearTransform t;
        t.kind = Kind::SlotLinear;
        t.terms = std::move(terms);
        return t;
    }

    /// Permutation map: out[i] = in[perm[i]].
    static LinearTransform permutation(const std::vector<u64>& perm, u64 slots) {
        std::vector<Term> terms;
        for (u64 i = 0; i < perm.size(); ++i) {
            i64 off = static_cast<i64>(perm[i]) - static_cast<i64>(i);
            std::vector<double> mask(slots, 0.0);
            mask[i] = 1.0;
            terms.push_back({off, std::move(mask)});
        }
        return slot_linear(std::move(terms));
    }

    template <class T>
    static std::vector<T> rotate_left(const std::vector<T>& v, i64 k) {
        std::size_t n = v.size();
        std::vector<T> out(n);
        i64 kk = ((k % static_cast<i64>(n)) + static_cast<i64>(n)) % static_cast<i64>(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = v[(i + kk) % n];
        return out;
    }

    std::vector<double> apply(const std::vector<double>& v) const {
        switch (kind) {
            case Kind::Identity: return v;
            case Kind::RotationComposite: return rotate_left(v, rotation);
            case Kind::SlotLinear: {
                std::vector<double> out(v.size(), 0.0);
                for (const auto& t : terms) {
                    auto r = rotate_left(v, t.offset);
                    for (std::size_t i = 0; i < v.size(); ++i)
                        out[i] += (i < t.mask.size() ? t.mask[i] : 0.0) * r[i];
                }
                return out;
            }
        }
        throw Error("unreachable");
    }

    std::vector<CDD> apply_dd(const std::vector<CDD>& v) const {
        switch (kind) {
            case Kind::Identity: return v;
            case Kind::RotationComposite: return rotate_left(v, rotation);
            case Kind::SlotLinear: {
                std::vector<CDD> out(v.size());
                for (const auto& t : terms) {
                    auto r = rotate_left(v, t.offset);
                    for (std::size_t i = 0; i < v.size(); ++i) {
                        double m = i < t.mask.size() ? t.mask[i] : 0.0;
                        if (m == 0.0) continue;
                        CDD scaled{r[i].re * DD(m), r[i].im * DD(m)};
                        out[i] = out[i] + scaled;
                    }
                }
                return out;
            }
        }
        throw Error("unreachable");
    }
};

/// Appendix-style sizing: per-party mask bound and the modulus the protocol
/// requires at the call level.
struct BootstrapSizing {
    double mask_bound_log2; // ||M_i|| >= 2^(lambda+delta)
    double min_logq;        // Q_l > (N+1) * 2^(lambda+delta)
};

inline BootstrapSizing bootstrap_sizing(std::size_t n_parties, double delta_bits,
                                        double lambda_bits) {
    double mask = lambda_bits + delta_bits;
    double logq = std::log2(static_cast<double>(n_parties) + 1.0) + mask;
    return {mask, logq};
}

inline bool bootstrap_constraint_holds(double logq_at_level, std::size_t n_parties,
                                       double delta_bits, double lambda_bits) {
    return logq_at_level > bootstrap_sizing(n_parties, delta_bits, lambda_bits).min_logq;
}

/// Lowest level of the chain at which a refresh may be called for the given
/// mask parameters (tau, the bootstrap headroom).
inline u32 bootstrap_call_level(const std::vector<u64>& chain, std::size_t n_parties,
                                double delta_bits, double lambda_bits) {
    double logq = 0;
    for (u32 l = 0; l < chain.size(); ++l) {
        logq += std::log2(static_cast<double>(chain[l]));
        if (bootstrap_constraint_holds(logq, n_parties, delta_bits, lambda_bits)) return l;
    }
    throw Error("no level of this chain satisfies the refresh constraint");
}

/// Mask security parameters as declared by the caller. `delta_bits` bounds
/// the encoded message magnitude (scale included).
struct BootstrapParams {
    double delta_bits;
    double lambda_bits;
    std::size_t n_parties;
};

struct BootstrapShare {
    RnsPoly h0; // at the call level
    RnsPoly h1; // at the full level
};

namespace detail {

/// Integer-exact transform of raw coefficients for rotation composites.
inline std::vector<i128> automorphism_i128(const std::vector<i128>& coeffs, u64 n, u64 g) {
    std::vector<i128> out(n, 0);
    for (u64 i = 0; i < n; ++i) {
        u64 ig = static_cast<u64>((static_cast<u128>(i) * g) % (2 * n));
        u64 idx = ig & (n - 1);
        out[idx] = (ig >= n) ? -coeffs[i] : coeffs[i];
    }
    return out;
}

/// Encode(phi(Decode(raw))), including the scale retarget S_from -> S_to.
inline std::vector<i128> transform_raw(const Encoder& enc, u64 ring_dim,
                                       const std::vector<i128>& raw, const LinearTransform& phi,
                                       double scale_ratio) {
    std::vector<i128> out;
    if (phi.kind == LinearTransform::Kind::Identity ||
        phi.kind == LinearTransform::Kind::RotationComposite) {
        // Rotations act on coefficients as a Galois automorphism; re-encoding
        // is skipped (exact integer path).
        if (phi.kind == LinearTransform::Kind::Identity) {
            out = raw;
        } else {
            u64 g = galois_element_rot(ring_dim, phi.rotation);
            out = automorphism_i128(raw, ring_dim, g);
        }
        if (scale_ratio != 1.0) {
            for (auto& c : out) {
                DD v = Encoder::i128_to_dd(c) * DD(scale_ratio);
                c = Encoder::dd_to_i128(v);
            }
        }
        return out;
    }
    // General linear transform: extended-precision slot arithmetic.
    auto slots = enc.decode_raw_dd(raw);
    slots = phi.apply_dd(slots);
    if (scale_ratio != 1.0) {
        for (auto& s : slots) {
            s.re = s.re * DD(scale_ratio);
            s.im = s.im * DD(scale_ratio);
        }
    }
    return enc.encode_raw_dd(std::move(slots));
}

} // namespace detail

/// Per-party round of DBootstrapALT. `crs_a` must be the common reference
/// polynomial of this protocol instance (full chain, eval domain).
inline BootstrapShare d_bootstrap_share(const RealContext& ctx, const Ciphertext& c,
                                        const LinearTransform& phi, const RnsPoly& crs_a,
                                        const SecretShare& sk, const BootstrapParams& bp,
                                        Rng& rng) {
    const Ring& ring = ctx.ring();
    double logq = ring.log2_q_at(c.level);
    FENN_REQUIRE(bootstrap_constraint_holds(logq, bp.n_parties, bp.delta_bits, bp.lambda_bits),
                 "bootstrap refused: Q_l <= (N+1) * ||msg|| * 2^lambda at the call level");
    double mask_bits = bp.delta_bits + bp.lambda_bits;
    FENN_REQUIRE(mask_bits <= 62.0, "mask magnitude exceeds the sampling word size");

    std::size_t np = c.nprimes();
    u64 bound = 1ULL << static_cast<u32>(mask_bits);
    std::vector<i128> mask(ring.n());
    std::vector<i64> mask64(ring.n());
    for (u64 i = 0; i < ring.n(); ++i) {
        u64 m = rng.uniform(bound);
        mask[i] = static_cast<i128>(m);
        mask64[i] = static_cast<i64>(m);
    }

    // h0 = s*c1 + M + e0 (mod Q_l)
    RnsPoly s = drop_to_level(sk.s, np);
    RnsPoly m_poly = poly_from_signed(ring, mask64, np, false);
    to_eval(ring, m_poly);
    RnsPoly h0 = add(ring, mul(ring, s, c.c1), m_poly);
    h0 = add(ring, h0, sample::gaussian(ring, rng, np, false));

    // h1 = -s*a - Encode(phi(Decode(M))) + e1 (mod Q_L)
    double ratio = ctx.scale() / c.scale;
    auto mprime = detail::transform_raw(ctx.encoder(), ring.n(), mask, phi, ratio);
    RnsPoly mp = poly_from_i128(ring, mprime, ring.chain_size(), false);
    to_eval(ring, mp);
    RnsPoly s_full = drop_to_level(sk.s, ring.chain_size());
    RnsPoly h1 = negate(ring, add(ring, mul(ring, s_full, crs_a), mp));
    h1 = add(ring, h1, sample::gaussian(ring, rng, ring.chain_size(), false));
    return {std::move(h0), std::move(h1)};
}

/// Aggregation + re-encryption. Any party (or the simulator) may finish.
inline Ciphertext d_bootstrap_finish(const RealContext& ctx, const Ciphertext& c,
                                     const LinearTransform& phi, const RnsPoly& crs_a,
                                     const std::vector<BootstrapShare>& shares,
                                     const BootstrapParams& bp) {
    const Ring& ring = ctx.ring();
    RnsPoly h0 = shares[0].h0;
    RnsPoly h1 = shares[0].h1;
    for (std::size_t i = 1; i < shares.size(); ++i) {
        h0 = add(ring, h0, shares[i].h0);
        h1 = add(ring, h1, shares[i].h1);
    }
    RnsPoly masked = add(ring, c.c0, h0);
    to_coeff(ring, masked);
    // Lift exactly; residues within the small negative window wrap down.
    int window = static_cast<int>(bp.delta_bits) + 4;
    auto raw = lift_centered(ring, masked, masked.nprimes(), window);
    double ratio = ctx.scale() / c.scale;
    auto transformed = detail::transform_raw(ctx.encoder(), ring.n(), raw, phi, ratio);
    RnsPoly c0 = poly_from_i128(ring, transformed, ring.chain_size(), false);
    to_eval(ring, c0);
    c0 = add(ring, c0, h1);
    Ciphertext out;
    out.c0 = std::move(c0);
    out.c1 = crs_a;
    out.level = ctx.top_level();
    out.scale = ctx.scale();
    return out;
}

/// One-call driver over all shares (tests and single-process use).
inline Ciphertext d_bootstrap_alt(const RealContext& ctx, const Ciphertext& c,
                                  const LinearTransform& phi,
                                  const std::vector<SecretShare>& sks,
                                  const BootstrapParams& bp, u64 seed) {
    CommonReference crs(seed ^ 0xb00757a9ULL);
    RnsPoly a = crs.draw(ctx.ring(), ctx.ring().chain_size(), false);
    Rng rng(seed);
    std::vector<BootstrapShare> shares;
    for (const auto& sk : sks) {
        Rng child = rng.fork();
        shares.push_back(d_bootstrap_share(ctx, c, phi, a, sk, bp, child));
    }
    return d_bootstrap_finish(ctx, c, phi, a, shares, bp);
}

inline Ciphertext d_bootstrap(const RealContext& ctx, const Ciphertext& c,
                              const std::vector<SecretShare>& sks, const BootstrapParams& bp,
                              u64 seed) {
    return d_bootstrap_alt(ctx, c, LinearTransform::identity(), sks, bp, seed);
}

} // namespace fenn::core
