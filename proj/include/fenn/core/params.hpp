// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0
//
// Ring parameters, the homomorphic-encryption standard security table,
// and modulus-chain construction.

#pragma once

#include <cmath>

#include "fenn/core/rns.hpp"

namespace fenn::core {

/// Maximum log2(Q) admitted by the HE standard for classical security at
/// lambda in {128, 192, 256} bits (uniform ternary secret).
struct SecurityRow {
    u64 ring_dim;
    u32 max_logq_128;
    u32 max_logq_192;
    u32 max_logq_256;
};

inline constexpr SecurityRow kSecurityTable[] = {
    {1024, 27, 19, 14},    {2048, 54, 37, 29},    {4096, 109, 75, 58},
    {8192, 218, 152, 118}, {16384, 438, 305, 237}, {32768, 881, 611, 476},
};

inline u32 max_logq_for(u64 ring_dim, u32 lambda) {
    for (const auto& row : kSecurityTable) {
        if (row.ring_dim == ring_dim) {
            switch (lambda) {
                case 128: return row.max_logq_128;
                case 192: return row.max_logq_192;
                case 256: return row.max_logq_256;
                default: throw Error("unsupported security level");
            }
        }
    }
    throw Error("ring dimension not covered by the security table");
}

/// Minimal ring dimension admitting logq bits of ciphertext modulus at the
/// requested security level.
inline u64 post_q_sec(double logq, u32 lambda) {
    for (const auto& row : kSecurityTable) {
        u32 cap = lambda == 128 ? row.max_logq_128
                  : lambda == 192 ? row.max_logq_192
                  : lambda == 256 ? row.max_logq_256
                                  : throw Error("unsupported security level");
        if (static_cast<double>(cap) >= logq) return row.ring_dim;
    }
    throw Error("modulus too large for any tabulated ring dimension");
}

struct RingParams {
    u64 ring_dim = 0;
    std::vector<u64> modulus_chain; // q_0 .. q_L
    u64 special_prime = 0;          // auxiliary key-switching modulus
    u32 initial_level = 0;          // L
    double initial_scale = 0;       // S
    u32 security_level = 128;       // lambda
    bool toy_mode = false;

    u64 slot_count() const { return ring_dim / 2; }

    double log2_q_total() const {
        double s = 0;
        for (u64 q : modulus_chain) s += std::log2(static_cast<double>(q));
        return s;
    }

    void validate() const {
        FENN_REQUIRE(is_power_of_two(ring_dim), "ring_dim must be a power of two");
        FENN_REQUIRE(modulus_chain.size() == static_cast<std::size_t>(initial_level) + 1,
                     "modulus chain must have initial_level + 1 primes");
        for (std::size_t i = 0; i < modulus_chain.size(); ++i) {
            u64 q = modulus_chain[i];
            FENN_REQUIRE(nt::is_prime(q), "chain entry not prime");
            FENN_REQUIRE((q - 1) % (2 * ring_dim) == 0, "prime unsupported by negacyclic NTT");
            for (std::size_t j = i + 1; j < modulus_chain.size(); ++j)
                FENN_REQUIRE(modulus_chain[j] != q, "chain primes must be pairwise distinct");
        }
        FENN_REQUIRE(nt::is_prime(special_prime) && (special_prime - 1) % (2 * ring_dim) == 0,
                     "bad auxiliary prime");
        FENN_REQUIRE(initial_scale > 1, "initial scale must exceed 1");
        if (!toy_mode) {
            FENN_REQUIRE(ring_dim >= 4096, "insecure ring dimension outside toy mode");
            FENN_REQUIRE(log2_q_total() <= max_logq_for(ring_dim, security_level),
                         "modulus chain exceeds the security budget");
        } else {
            FENN_REQUIRE(ring_dim >= 16, "ring dimension below the testable minimum");
        }
    }
};

/// Builds a toy-mode parameter set: base prime ~2^55, scale-sized rescaling
/// primes, one ~2^59 auxiliary prime.
inline RingParams make_toy_params(u64 ring_dim, u32 levels, u32 scale_bits = 32) {
    FENN_REQUIRE(levels >= 1, "need at least one level");
    RingParams p;
    p.ring_dim = ring_dim;
    p.toy_mode = true;
    p.initial_level = levels;
    p.initial_scale = std::ldexp(1.0, static_cast<int>(scale_bits));
    u64 two_n = 2 * ring_dim;
    // 45-bit base keeps the dominant key-switch digit small relative to the
    // auxiliary prime, so rotation noise stays far below the 2^-20 budget.
    auto base = nt::find_ntt_primes(45, two_n, 1);
    auto rescale = nt::find_ntt_primes(scale_bits, two_n, levels, base);
    auto taken = rescale;
    taken.push_back(base[0]);
    auto special = nt::find_ntt_primes(59, two_n, 1, taken);
    p.modulus_chain = {base[0]};
    p.modulus_chain.insert(p.modulus_chain.end(), rescale.begin(), rescale.end());
    p.special_prime = special[0];
    p.validate();
    return p;
}

inline Ring make_ring(const RingParams& p) {
    return Ring(p.ring_dim, p.modulus_chain, p.special_prime);
}

} // namespace fenn::core
