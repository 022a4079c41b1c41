// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0
//
// Modular arithmetic over word-sized primes and NTT-friendly prime search.

#pragma once

#include <array>

#include "fenn/common.hpp"

namespace fenn::nt {

inline u64 add_mod(u64 a, u64 b, u64 q) {
    u64 s = a + b;
    return s >= q ? s - q : s;
}

inline u64 sub_mod(u64 a, u64 b, u64 q) { return a >= b ? a - b : a + q - b; }

inline u64 mul_mod(u64 a, u64 b, u64 q) {
    return static_cast<u64>((static_cast<u128>(a) * b) % q);
}

inline u64 pow_mod(u64 base, u64 exp, u64 q) {
    u64 r = 1;
    base %= q;
    while (exp > 0) {
        if (exp & 1) r = mul_mod(r, base, q);
        base = mul_mod(base, base, q);
        exp >>= 1;
    }
    return r;
}

inline u64 inv_mod(u64 a, u64 q) { return pow_mod(a, q - 2, q); } // q prime

/// a * w mod q with the precomputed quotient ws = floor(w 2^64 / q).
inline u64 shoup_mul(u64 a, u64 w, u64 ws, u64 q) {
    u64 hi = static_cast<u64>((static_cast<u128>(a) * ws) >> 64);
    u64 r = a * w - hi * q;
    return r >= q ? r - q : r;
}

/// Signed value with |c| < 2^52 reduced mod q via the double reciprocal.
inline u64 small_mod_signed(i64 c, u64 q, double inv_q) {
    i64 r = c - static_cast<i64>(q) *
                    static_cast<i64>(static_cast<double>(c) * inv_q);
    while (r < 0) r += static_cast<i64>(q);
    while (r >= static_cast<i64>(q)) r -= static_cast<i64>(q);
    return static_cast<u64>(r);
}

/// Deterministic Miller-Rabin, valid for all 64-bit integers.
inline bool is_prime(u64 n) {
    if (n < 2) return false;
    for (u64 p : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
        if (n % p == 0) return n == p;
    }
    u64 d = n - 1;
    int s = 0;
    while ((d & 1) == 0) {
        d >>= 1;
        ++s;
    }
    for (u64 a : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
        u64 x = pow_mod(a % n, d, n);
        if (x == 1 || x == n - 1) continue;
        bool witness = true;
        for (int i = 1; i < s; ++i) {
            x = mul_mod(x, x, n);
            if (x == n - 1) {
                witness = false;
                break;
            }
        }
        if (witness) return false;
    }
    return true;
}

/// Smallest generator-derived primitive 2n-th root of unity mod q.
/// Requires q = 1 (mod 2n).
inline u64 primitive_root_2n(u64 q, u64 two_n) {
    FENN_REQUIRE((q - 1) % two_n == 0, "modulus does not support negacyclic NTT");
    u64 cofactor = (q - 1) / two_n;
    for (u64 g = 2;; ++g) {
        u64 cand = pow_mod(g, cofactor, q);
        if (pow_mod(cand, two_n / 2, q) == q - 1) return cand; // order exactly 2n
    }
}

/// Finds `count` distinct primes congruent to 1 mod 2n, nearest to 2^bits
/// first (both directions), skipping any prime already in `taken`. Nearest
/// ordering keeps the rescale drift between chain primes minimal.
inline std::vector<u64> find_ntt_primes(u32 bits, u64 two_n, std::size_t count,
                                        std::vector<u64> taken = {}) {
    FENN_REQUIRE(bits >= 20 && bits <= 61, "prime size out of supported range");
    std::vector<u64> out;
    u64 center = (1ULL << bits) + 1;
    center -= (center - 1) % two_n; // 1 mod 2n, at or below 2^bits
    auto try_candidate = [&](u64 cand) {
        if (out.size() >= count) return;
        if (!is_prime(cand)) return;
        for (u64 t : taken)
            if (t == cand) return;
        for (u64 t : out)
            if (t == cand) return;
        out.push_back(cand);
    };
    for (u64 k = 0; out.size() < count; ++k) {
        FENN_REQUIRE(k * two_n < (1ULL << (bits - 1)), "prime search exhausted");
        try_candidate(center + k * two_n);
        if (k > 0) try_candidate(center - k * two_n);
    }
    return out;
}

} // namespace fenn::nt
