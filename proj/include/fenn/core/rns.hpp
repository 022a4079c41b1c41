// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0
//
// Residue-number-system polynomials over the prime chain q_0..q_L plus one
// auxiliary key-switching prime.

#pragma once

#include <algorithm>

#include "fenn/core/ntt.hpp"

namespace fenn::core {

enum class Domain { Coeff, Eval };

/// Fixed ring data shared by every polynomial: dimension, chain primes,
/// auxiliary prime, NTT tables.
class Ring {
public:
    Ring() = default;

    Ring(u64 n, std::vector<u64> chain, u64 special)
        : n_(n), chain_(std::move(chain)), special_(special) {
        FENN_REQUIRE(is_power_of_two(n_), "ring dimension must be a power of two");
        tables_.reserve(chain_.size() + 1);
        for (u64 q : chain_) tables_.emplace_back(q, n_);
        tables_.emplace_back(special_, n_);
    }

    u64 n() const { return n_; }
    u64 slots() const { return n_ / 2; }
    std::size_t chain_size() const { return chain_.size(); }
    u64 prime(std::size_t i) const { return chain_[i]; }
    u64 special_prime() const { return special_; }
    const std::vector<u64>& chain() const { return chain_; }

    const NttTable& table(std::size_t i) const { return tables_[i]; }
    const NttTable& special_table() const { return tables_.back(); }

    double log2_q_at(std::size_t level) const {
        double s = 0;
        for (std::size_t i = 0; i <= level; ++i) s += std::log2(static_cast<double>(chain_[i]));
        return s;
    }

private:
    u64 n_ = 0;
    std::vector<u64> chain_;
    u64 special_ = 0;
    std::vector<NttTable> tables_;
};

/// Polynomial in RNS form over chain primes [0, nprimes) and optionally the
/// auxiliary prime. Limb order matches the ring's chain order.
struct RnsPoly {
    std::vector<std::vector<u64>> limbs; // one residue vector per chain prime
    std::vector<u64> special;            // auxiliary-prime residues, may be empty
    Domain domain = Domain::Coeff;

    std::size_t nprimes() const { return limbs.size(); }
    bool has_special() const { return !special.empty(); }
};

inline RnsPoly make_zero_poly(const Ring& ring, std::size_t nprimes, bool with_special,
                              Domain domain) {
    RnsPoly p;
    p.domain = domain;
    p.limbs.assign(nprimes, std::vector<u64>(ring.n(), 0));
    if (with_special) p.special.assign(ring.n(), 0);
    return p;
}

/// Builds the RNS image of a small signed integer vector (coefficients).
inline RnsPoly poly_from_signed(const Ring& ring, const std::vector<i64>& coeffs,
                                std::size_t nprimes, bool with_special) {
    RnsPoly p = make_zero_poly(ring, nprimes, with_special, Domain::Coeff);
    constexpr i64 kSmall = 1LL << 52;
    auto reduce_limb = [&](std::vector<u64>& limb, u64 q) {
        double inv_q = 1.0 / static_cast<double>(q);
        for (u64 i = 0; i < ring.n(); ++i) {
            i64 c = coeffs[i];
            if (c > -kSmall && c < kSmall) {
                limb[i] = nt::small_mod_signed(c, q, inv_q);
            } else {
                u64 r = c >= 0 ? static_cast<u64>(c) % q : q - (static_cast<u64>(-c) % q);
                limb[i] = r == q ? 0 : r;
            }
        }
    };
    for (std::size_t j = 0; j < nprimes; ++j) reduce_limb(p.limbs[j], ring.prime(j));
    if (with_special) reduce_limb(p.special, ring.special_prime());
    return p;
}

inline void to_eval(const Ring& ring, RnsPoly& p) {
    if (p.domain == Domain::Eval) return;
    for (std::size_t j = 0; j < p.nprimes(); ++j) ring.table(j).forward(p.limbs[j]);
    if (p.has_special()) ring.special_table().forward(p.special);
    p.domain = Domain::Eval;
}

inline void to_coeff(const Ring& ring, RnsPoly& p) {
    if (p.domain == Domain::Coeff) return;
    for (std::size_t j = 0; j < p.nprimes(); ++j) ring.table(j).inverse(p.limbs[j]);
    if (p.has_special()) ring.special_table().inverse(p.special);
    p.domain = Domain::Coeff;
}

namespace detail {
inline void elementwise(const Ring& ring, const RnsPoly& a, const RnsPoly& b, RnsPoly& out,
                        u64 (*op)(u64, u64, u64)) {
    FENN_REQUIRE(a.domain == b.domain, "domain mismatch");
    FENN_REQUIRE(a.nprimes() == b.nprimes(), "prime-count mismatch");
    out.domain = a.domain;
    out.limbs.resize(a.nprimes());
    for (std::size_t j = 0; j < a.nprimes(); ++j) {
        u64 q = ring.prime(j);
        out.limbs[j].resize(ring.n());
        for (u64 i = 0; i < ring.n(); ++i) out.limbs[j][i] = op(a.limbs[j][i], b.limbs[j][i], q);
    }
    if (a.has_special() && b.has_special()) {
        u64 q = ring.special_prime();
        out.special.resize(ring.n());
        for (u64 i = 0; i < ring.n(); ++i) out.special[i] = op(a.special[i], b.special[i], q);
    } else {
        out.special.clear();
    }
}
} // namespace detail

inline RnsPoly add(const Ring& ring, const RnsPoly& a, const RnsPoly& b) {
    RnsPoly out;
    detail::elementwise(ring, a, b, out, nt::add_mod);
    return out;
}

inline RnsPoly sub(const Ring& ring, const RnsPoly& a, const RnsPoly& b) {
    RnsPoly out;
    detail::elementwise(ring, a, b, out, nt::sub_mod);
    return out;
}

inline RnsPoly mul(const Ring& ring, const RnsPoly& a, const RnsPoly& b) {
    FENN_REQUIRE(a.domain == Domain::Eval && b.domain == Domain::Eval,
                 "multiplication requires evaluation domain");
    RnsPoly out;
    detail::elementwise(ring, a, b, out, nt::mul_mod);
    return out;
}

inline RnsPoly negate(const Ring& ring, const RnsPoly& a) {
    RnsPoly out = a;
    for (std::size_t j = 0; j < a.nprimes(); ++j) {
        u64 q = ring.prime(j);
        for (u64 i = 0; i < ring.n(); ++i) out.limbs[j][i] = a.limbs[j][i] == 0 ? 0 : q - a.limbs[j][i];
    }
    if (a.has_special()) {
        u64 q = ring.special_prime();
        for (u64 i = 0; i < ring.n(); ++i) out.special[i] = a.special[i] == 0 ? 0 : q - a.special[i];
    }
    return out;
}

inline void mul_scalar_inplace(const Ring& ring, RnsPoly& a, u64 scalar) {
    for (std::size_t j = 0; j < a.nprimes(); ++j) {
        u64 q = ring.prime(j);
        u64 s = scalar % q;
        for (u64 i = 0; i < ring.n(); ++i) a.limbs[j][i] = nt::mul_mod(a.limbs[j][i], s, q);
    }
    if (a.has_special()) {
        u64 q = ring.special_prime();
        u64 s = scalar % q;
        for (u64 i = 0; i < ring.n(); ++i) a.special[i] = nt::mul_mod(a.special[i], s, q);
    }
}

/// Galois automorphism X -> X^g on a coefficient-domain polynomial.
inline RnsPoly automorphism(const Ring& ring, const RnsPoly& a, u64 g) {
    FENN_REQUIRE(a.domain == Domain::Coeff, "automorphism requires coefficient domain");
    FENN_REQUIRE((g & 1) == 1, "galois element must be odd");
    u64 n = ring.n();
    RnsPoly out = make_zero_poly(ring, a.nprimes(), a.has_special(), Domain::Coeff);
    for (u64 i = 0; i < n; ++i) {
        u64 ig = static_cast<u64>((static_cast<u128>(i) * g) % (2 * n));
        u64 idx = ig & (n - 1);
        bool flip = (ig >= n);
        for (std::size_t j = 0; j < a.nprimes(); ++j) {
            u64 q = ring.prime(j);
            u64 v = a.limbs[j][i];
            out.limbs[j][idx] = flip ? (v == 0 ? 0 : q - v) : v;
        }
        if (a.has_special()) {
            u64 q = ring.special_prime();
            u64 v = a.special[i];
            out.special[idx] = flip ? (v == 0 ? 0 : q - v) : v;
        }
    }
    return out;
}

/// Exact divide-and-round by the top chain prime: round(a / q_top).
/// Drops one level. Input and output in coefficient domain.
inline RnsPoly rescale_by_top(const Ring& ring, const RnsPoly& a) {
    FENN_REQUIRE(a.domain == Domain::Coeff, "rescale requires coefficient domain");
    FENN_REQUIRE(a.nprimes() >= 2, "rescale: level exhausted");
    FENN_REQUIRE(!a.has_special(), "rescale on key-extended polynomial");
    std::size_t top = a.nprimes() - 1;
    u64 qt = ring.prime(top);
    u64 half = qt >> 1;
    RnsPoly out = make_zero_poly(ring, top, false, Domain::Coeff);
    for (std::size_t j = 0; j < top; ++j) {
        u64 q = ring.prime(j);
        u64 qt_inv = nt::inv_mod(qt % q, q);
        for (u64 i = 0; i < ring.n(); ++i) {
            // Centered remainder of a mod q_top, for round-to-nearest.
            u64 r = a.limbs[top][i];
            u64 r_shifted = nt::add_mod(r, half, qt); // bias so floor == round
            u64 r_mod_q = r_shifted % q;
            u64 num = nt::sub_mod(nt::add_mod(a.limbs[j][i], half % q, q), r_mod_q, q);
            out.limbs[j][i] = nt::mul_mod(num, qt_inv, q);
        }
    }
    return out;
}

/// Drops the top chain prime without rounding (modulus switch to Q_{l-1}).
inline RnsPoly drop_to_level(const RnsPoly& a, std::size_t nprimes) {
    FENN_REQUIRE(nprimes >= 1 && nprimes <= a.nprimes(), "drop_to_level: bad target");
    RnsPoly out;
    out.domain = a.domain;
    out.limbs.assign(a.limbs.begin(), a.limbs.begin() + nprimes);
    return out;
}

/// Exact divide-and-round by the auxiliary prime after key switching:
/// round(a / P) over the chain primes. Coefficient domain.
inline RnsPoly mod_down_special(const Ring& ring, const RnsPoly& a) {
    FENN_REQUIRE(a.domain == Domain::Coeff && a.has_special(), "mod_down: bad input");
    u64 P = ring.special_prime();
    u64 half = P >> 1;
    RnsPoly out = make_zero_poly(ring, a.nprimes(), false, Domain::Coeff);
    for (std::size_t j = 0; j < a.nprimes(); ++j) {
        u64 q = ring.prime(j);
        u64 p_inv = nt::inv_mod(P % q, q);
        for (u64 i = 0; i < ring.n(); ++i) {
            u64 r_shifted = nt::add_mod(a.special[i], half, P);
            u64 r_mod_q = r_shifted % q;
            u64 num = nt::sub_mod(nt::add_mod(a.limbs[j][i], half % q, q), r_mod_q, q);
            out.limbs[j][i] = nt::mul_mod(num, p_inv, q);
        }
    }
    return out;
}

/// Centered lift of one residue limb into signed 64-bit integers.
inline std::vector<i64> centered_lift_limb(const std::vector<u64>& limb, u64 q) {
    std::vector<i64> out(limb.size());
    u64 half = q >> 1;
    for (std::size_t i = 0; i < limb.size(); ++i) {
        out[i] = limb[i] > half ? static_cast<i64>(limb[i]) - static_cast<i64>(q)
                                : static_cast<i64>(limb[i]);
    }
    return out;
}

/// Spreads a signed small polynomial across all limbs of `target` shape.
inline RnsPoly spread_signed(const Ring& ring, const std::vector<i64>& coeffs,
                             std::size_t nprimes, bool with_special) {
    return poly_from_signed(ring, coeffs, nprimes, with_special);
}

} // namespace fenn::core
