// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace fenn {

using u64 = std::uint64_t;
using u32 = std::uint32_t;
using i64 = std::int64_t;
using u128 = unsigned __int128;
using i128 = __int128;

/// Error type for contract violations (bad parameters, exhausted levels,
/// missing keys, wire-hygiene breaches).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define FENN_REQUIRE(cond, msg) \
    do {                        \
        if (!(cond)) throw ::fenn::Error(msg); \
    } while (0)

/// Deterministic RNG handle. All randomness flows through explicit seeds.
class Rng {
public:
    explicit Rng(u64 seed) : gen_(seed) {}

    u64 next_u64() { return gen_(); }

    /// Uniform integer in [0, bound).
    u64 uniform(u64 bound) {
        std::uniform_int_distribution<u64> d(0, bound - 1);
        return d(gen_);
    }

    /// Uniform real in [lo, hi).
    double uniform_real(double lo, double hi) {
        std::uniform_real_distribution<double> d(lo, hi);
        return d(gen_);
    }

    /// Ternary secret coefficient in {-1, 0, 1}.
    int ternary() { return static_cast<int>(uniform(3)) - 1; }

    /// Discrete Gaussian, sigma = 3.2, truncated at floor(6*sigma) = 19.
    i64 gaussian() {
        std::normal_distribution<double> d(0.0, 3.2);
        for (;;) {
            double x = d(gen_);
            i64 r = static_cast<i64>(std::llround(x));
            if (r >= -19 && r <= 19) return r;
        }
    }

    /// Derive an independent child stream.
    Rng fork() { return Rng(next_u64() ^ 0x9e3779b97f4a7c15ULL); }

private:
    std::mt19937_64 gen_;
};

/// Instrumentation counters threaded through the macro operations.
struct Counters {
    u64 rotations = 0;   // slot rotations (each one key-switch)
    u64 key_switches = 0;
    u64 mul_ct = 0;
    u64 mul_pt = 0;
    u64 additions = 0;
    u64 rescales = 0;
    u64 bootstraps = 0;

    Counters& operator+=(const Counters& o) {
        rotations += o.rotations;
        key_switches += o.key_switches;
        mul_ct += o.mul_ct;
        mul_pt += o.mul_pt;
        additions += o.additions;
        rescales += o.rescales;
        bootstraps += o.bootstraps;
        return *this;
    }
};

inline bool is_power_of_two(u64 x) { return x != 0 && (x & (x - 1)) == 0; }

inline u32 log2_exact(u64 x) {
    FENN_REQUIRE(is_power_of_two(x), "log2_exact: not a power of two");
    u32 r = 0;
    while (x > 1) {
        x >>= 1;
        ++r;
    }
    return r;
}

inline u64 next_power_of_two(u64 x) {
    u64 p = 1;
    while (p < x) p <<= 1;
    return p;
}

inline u64 ceil_div(u64 a, u64 b) { return (a + b - 1) / b; }

} // namespace fenn
