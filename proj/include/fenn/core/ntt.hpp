// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0
//
// Negacyclic number-theoretic transform over Z_q[X]/(X^n + 1), with
// precomputed Shoup multipliers for the twiddle products.

#pragma once

#include "fenn/core/nt.hpp"

namespace fenn::core {

/// Precomputed NTT tables for one prime modulus (q < 2^62).
class NttTable {
public:
    NttTable() = default;

    NttTable(u64 q, u64 n) : q_(q), n_(n) {
        u64 psi = nt::primitive_root_2n(q, 2 * n);
        u64 psi_inv = nt::inv_mod(psi, q);
        pow_.resize(n);
        ipow_.resize(n);
        pow_shoup_.resize(n);
        ipow_shoup_.resize(n);
        u32 logn = log2_exact(n);
        for (u64 i = 0; i < n; ++i) {
            u64 r = bit_reverse(i, logn);
            pow_[i] = nt::pow_mod(psi, r, q);
            ipow_[i] = nt::pow_mod(psi_inv, r, q);
            pow_shoup_[i] = shoup_precompute(pow_[i], q);
            ipow_shoup_[i] = shoup_precompute(ipow_[i], q);
        }
        n_inv_ = nt::inv_mod(n, q);
        n_inv_shoup_ = shoup_precompute(n_inv_, q);
    }

    u64 modulus() const { return q_; }
    u64 size() const { return n_; }

    /// Forward transform, coefficient order in, bit-reversed eval order out.
    void forward(std::vector<u64>& a) const {
        u64 t = n_;
        for (u64 m = 1; m < n_; m <<= 1) {
            t >>= 1;
            for (u64 i = 0; i < m; ++i) {
                u64 j1 = 2 * i * t;
                u64 w = pow_[m + i];
                u64 ws = pow_shoup_[m + i];
                for (u64 j = j1; j < j1 + t; ++j) {
                    u64 u = a[j];
                    u64 v = shoup_mul(a[j + t], w, ws);
                    a[j] = nt::add_mod(u, v, q_);
                    a[j + t] = nt::sub_mod(u, v, q_);
                }
            }
        }
    }

    /// Inverse transform back to coefficient order.
    void inverse(std::vector<u64>& a) const {
        u64 t = 1;
        for (u64 m = n_; m > 1; m >>= 1) {
            u64 j1 = 0;
            u64 h = m >> 1;
            for (u64 i = 0; i < h; ++i) {
                u64 w = ipow_[h + i];
                u64 ws = ipow_shoup_[h + i];
                for (u64 j = j1; j < j1 + t; ++j) {
                    u64 u = a[j];
                    u64 v = a[j + t];
                    a[j] = nt::add_mod(u, v, q_);
                    a[j + t] = shoup_mul(nt::sub_mod(u, v, q_), w, ws);
                }
                j1 += 2 * t;
            }
            t <<= 1;
        }
        for (u64 i = 0; i < n_; ++i) a[i] = shoup_mul(a[i], n_inv_, n_inv_shoup_);
    }

private:
    static u64 bit_reverse(u64 x, u32 bits) {
        u64 r = 0;
        for (u32 i = 0; i < bits; ++i) {
            r = (r << 1) | (x & 1);
            x >>= 1;
        }
        return r;
    }

    static u64 shoup_precompute(u64 w, u64 q) {
        return static_cast<u64>((static_cast<u128>(w) << 64) / q);
    }

    /// a * w mod q via the precomputed 64-bit quotient of w.
    u64 shoup_mul(u64 a, u64 w, u64 w_shoup) const {
        u64 hi = static_cast<u64>((static_cast<u128>(a) * w_shoup) >> 64);
        u64 r = a * w - hi * q_;
        return r >= q_ ? r - q_ : r;
    }

    u64 q_ = 0;
    u64 n_ = 0;
    u64 n_inv_ = 0;
    u64 n_inv_shoup_ = 0;
    std::vector<u64> pow_, ipow_;
    std::vector<u64> pow_shoup_, ipow_shoup_;
};

} // namespace fenn::core
