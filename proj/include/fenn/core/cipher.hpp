// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>

#include "fenn/core/encoding.hpp"
#include "fenn/core/params.hpp"

namespace fenn::core {

struct Plaintext {
    RnsPoly poly; // evaluation domain
    u32 level = 0;
    double scale = 0;
};

struct Ciphertext {
    RnsPoly c0, c1;             // evaluation domain
    std::optional<RnsPoly> c2;  // present only before relinearization
    u32 level = 0;
    double scale = 0;

    bool is_relinearized() const { return !c2.has_value(); }
    std::size_t nprimes() const { return static_cast<std::size_t>(level) + 1; }
};

// Shared ledger rules (the §-contract both backends must obey).
namespace ledger {

/// Scales within this relative distance are one drifted scale class:
/// additions proceed directly with the max label. Wider gaps are genuine
/// mismatches and require alignment.
inline constexpr double kScaleDriftTol = 0x1p-10;

inline bool scales_close(double a, double b) {
    double hi = std::max(a, b), lo = std::min(a, b);
    return (hi - lo) <= kScaleDriftTol * hi;
}

inline u32 add_level(u32 a, u32 b) { return std::min(a, b); }
inline double add_scale(double a, double b) { return std::max(a, b); }
inline u32 mul_level(u32 a, u32 b) { return std::min(a, b); }
inline double mul_scale(double a, double b) { return a * b; }

inline u32 res_level(u32 l) {
    FENN_REQUIRE(l >= 1, "level exhausted");
    return l - 1;
}

inline double res_scale(double s, u64 dropped_prime) {
    return s / static_cast<double>(dropped_prime);
}

} // namespace ledger

} // namespace fenn::core
