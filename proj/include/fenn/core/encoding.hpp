// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0
//
// Canonical-embedding encoder: slot vectors <-> ring polynomials.
// A compensated double-double path serves the bootstrap protocol, which
// must decode and re-encode polynomials whose coefficients carry large
// statistical masks without losing the message in the low bits.

#pragma once

#include <cmath>
#include <complex>

#include "fenn/core/rns.hpp"

namespace fenn::core {

// ---------------------------------------------------------------------------
// Double-double scalar (~106-bit mantissa).
// ---------------------------------------------------------------------------
struct DD {
    double hi = 0.0;
    double lo = 0.0;

    DD() = default;
    DD(double h) : hi(h) {}
    DD(double h, double l) : hi(h), lo(l) {}

    static DD two_sum(double a, double b) {
        double s = a + b;
        double bb = s - a;
        double err = (a - (s - bb)) + (b - bb);
        return {s, err};
    }

    static DD two_prod(double a, double b) {
        double p = a * b;
        double err = std::fma(a, b, -p);
        return {p, err};
    }

    static DD renorm(double h, double l) {
        double s = h + l;
        double err = l - (s - h);
        return {s, err};
    }

    friend DD operator+(DD a, DD b) {
        DD s = two_sum(a.hi, b.hi);
        return renorm(s.hi, s.lo + a.lo + b.lo);
    }
    friend DD operator-(DD a, DD b) { return a + DD{-b.hi, -b.lo}; }
    friend DD operator*(DD a, DD b) {
        DD p = two_prod(a.hi, b.hi);
        return renorm(p.hi, p.lo + a.hi * b.lo + a.lo * b.hi);
    }
    friend DD operator/(DD a, double d) {
        double q1 = a.hi / d;
        DD r = two_prod(q1, d);
        double q2 = ((a.hi - r.hi) + (a.lo - r.lo)) / d;
        return renorm(q1, q2);
    }
    double value() const { return hi + lo; }
};

struct CDD {
    DD re, im;
    friend CDD operator+(CDD a, CDD b) { return {a.re + b.re, a.im + b.im}; }
    friend CDD operator-(CDD a, CDD b) { return {a.re - b.re, a.im - b.im}; }
    friend CDD operator*(CDD a, CDD b) {
        return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
    }
};

// ---------------------------------------------------------------------------
// Special FFT over the 5^j root ordering.
// ---------------------------------------------------------------------------
class Encoder {
public:
    Encoder() = default;

    explicit Encoder(u64 ring_dim) : n_(ring_dim), m_(2 * ring_dim), nh_(ring_dim / 2) {
        rot_group_.resize(nh_);
        u64 five = 1;
        for (u64 i = 0; i < nh_; ++i) {
            rot_group_[i] = five;
            five = (five * 5) % m_;
        }
        ksi_.resize(m_ + 1);
        ksi_dd_.resize(m_ + 1);
        const long double pi = 3.14159265358979323846264338327950288L;
        for (u64 j = 0; j <= m_; ++j) {
            long double ang = 2.0L * pi * static_cast<long double>(j) / static_cast<long double>(m_);
            long double c = std::cos(ang);
            long double s = std::sin(ang);
            ksi_[j] = {static_cast<double>(c), static_cast<double>(s)};
            double chi = static_cast<double>(c);
            double shi = static_cast<double>(s);
            ksi_dd_[j] = {DD(chi, static_cast<double>(c - static_cast<long double>(chi))),
                          DD(shi, static_cast<double>(s - static_cast<long double>(shi)))};
        }
    }

    u64 slots() const { return nh_; }
    u64 ring_dim() const { return n_; }

    /// slots -> coefficient vector (times scale, rounded). Values beyond the
    /// input length are zero-padded.
    std::vector<i64> encode(const std::vector<double>& values, double scale) const {
        FENN_REQUIRE(values.size() <= nh_, "vector too long for slot capacity");
        std::vector<std::complex<double>> w(nh_, {0.0, 0.0});
        for (std::size_t i = 0; i < values.size(); ++i) w[i] = {values[i], 0.0};
        emb_inv(w);
        std::vector<i64> coeffs(n_);
        for (u64 i = 0; i < nh_; ++i) {
            coeffs[i] = llround_checked(w[i].real() * scale);
            coeffs[i + nh_] = llround_checked(w[i].imag() * scale);
        }
        return coeffs;
    }

    /// coefficient vector -> slots (divided by scale).
    std::vector<double> decode(const std::vector<i64>& coeffs, double scale) const {
        std::vector<double> raw(coeffs.size());
        for (std::size_t i = 0; i < coeffs.size(); ++i) raw[i] = static_cast<double>(coeffs[i]);
        return decode_raw(raw, scale);
    }

    std::vector<double> decode_raw(const std::vector<double>& coeffs, double scale) const {
        std::vector<std::complex<double>> w(nh_);
        for (u64 i = 0; i < nh_; ++i) w[i] = {coeffs[i] / scale, coeffs[i + nh_] / scale};
        emb(w);
        std::vector<double> out(nh_);
        for (u64 i = 0; i < nh_; ++i) out[i] = w[i].real();
        return out;
    }

    /// Extended-precision decode of raw (unscaled) coefficients into slots.
    std::vector<CDD> decode_raw_dd(const std::vector<i128>& coeffs) const {
        std::vector<CDD> w(nh_);
        for (u64 i = 0; i < nh_; ++i) {
            w[i] = {i128_to_dd(coeffs[i]), i128_to_dd(coeffs[i + nh_])};
        }
        emb_dd(w);
        return w;
    }

    /// Extended-precision encode of slots into raw coefficients.
    std::vector<i128> encode_raw_dd(std::vector<CDD> w) const {
        FENN_REQUIRE(w.size() == nh_, "slot count mismatch");
        emb_inv_dd(w);
        std::vector<i128> coeffs(n_);
        for (u64 i = 0; i < nh_; ++i) {
            coeffs[i] = dd_to_i128(w[i].re);
            coeffs[i + nh_] = dd_to_i128(w[i].im);
        }
        return coeffs;
    }

    static DD i128_to_dd(i128 v) {
        double hi = static_cast<double>(v);
        double lo = static_cast<double>(v - static_cast<i128>(hi));
        return DD::renorm(hi, lo);
    }

    static i128 dd_to_i128(DD v) {
        // v.hi is exactly representable; for |v.hi| >= 2^53 it is integral,
        // so the truncation below loses nothing either way.
        i128 hi = static_cast<i128>(v.hi);
        double frac = (v.hi - static_cast<double>(hi)) + v.lo;
        return hi + static_cast<i128>(std::llround(frac));
    }

private:
    static i64 llround_checked(double x) {
        FENN_REQUIRE(std::abs(x) < 9.0e18, "scale overflow of the coefficient modulus");
        return std::llround(x);
    }

    template <class C>
    static void bit_reverse(std::vector<C>& v) {
        std::size_t n = v.size();
        for (std::size_t i = 1, j = 0; i < n; ++i) {
            std::size_t bit = n >> 1;
            for (; j & bit; bit >>= 1) j ^= bit;
            j ^= bit;
            if (i < j) std::swap(v[i], v[j]);
        }
    }

    void emb(std::vector<std::complex<double>>& vals) const {
        bit_reverse(vals);
        for (u64 len = 2; len <= nh_; len <<= 1) {
            for (u64 i = 0; i < nh_; i += len) {
                u64 lenh = len >> 1;
                u64 lenq = len << 2;
                u64 gap = m_ / lenq;
                for (u64 j = 0; j < lenh; ++j) {
                    u64 idx = (rot_group_[j] % lenq) * gap;
                    auto u = vals[i + j];
                    auto v = vals[i + j + lenh] * ksi_[idx];
                    vals[i + j] = u + v;
                    vals[i + j + lenh] = u - v;
                }
            }
        }
    }

    void emb_inv(std::vector<std::complex<double>>& vals) const {
        for (u64 len = nh_; len >= 2; len >>= 1) {
            for (u64 i = 0; i < nh_; i += len) {
                u64 lenh = len >> 1;
                u64 lenq = len << 2;
                u64 gap = m_ / lenq;
                for (u64 j = 0; j < lenh; ++j) {
                    u64 idx = (lenq - (rot_group_[j] % lenq)) * gap;
                    auto u = vals[i + j] + vals[i + j + lenh];
                    auto v = (vals[i + j] - vals[i + j + lenh]) * ksi_[idx];
                    vals[i + j] = u;
                    vals[i + j + lenh] = v;
                }
            }
        }
        bit_reverse(vals);
        for (auto& v : vals) v /= static_cast<double>(nh_);
    }

    void emb_dd(std::vector<CDD>& vals) const {
        bit_reverse(vals);
        for (u64 len = 2; len <= nh_; len <<= 1) {
            for (u64 i = 0; i < nh_; i += len) {
                u64 lenh = len >> 1;
                u64 lenq = len << 2;
                u64 gap = m_ / lenq;
                for (u64 j = 0; j < lenh; ++j) {
                    u64 idx = (rot_group_[j] % lenq) * gap;
                    CDD u = vals[i + j];
                    CDD v = vals[i + j + lenh] * ksi_dd_[idx];
                    vals[i + j] = u + v;
                    vals[i + j + lenh] = u - v;
                }
            }
        }
    }

    void emb_inv_dd(std::vector<CDD>& vals) const {
        for (u64 len = nh_; len >= 2; len >>= 1) {
            for (u64 i = 0; i < nh_; i += len) {
                u64 lenh = len >> 1;
                u64 lenq = len << 2;
                u64 gap = m_ / lenq;
                for (u64 j = 0; j < lenh; ++j) {
                    u64 idx = (lenq - (rot_group_[j] % lenq)) * gap;
                    CDD u = vals[i + j] + vals[i + j + lenh];
                    CDD v = (vals[i + j] - vals[i + j + lenh]) * ksi_dd_[idx];
                    vals[i + j] = u;
                    vals[i + j + lenh] = v;
                }
            }
        }
        bit_reverse(vals);
        double inv = 1.0 / static_cast<double>(nh_);
        for (auto& v : vals) {
            v.re = v.re * DD(inv);
            v.im = v.im * DD(inv);
        }
    }

    u64 n_ = 0, m_ = 0, nh_ = 0;
    std::vector<u64> rot_group_;
    std::vector<std::complex<double>> ksi_;
    std::vector<CDD> ksi_dd_;
};

// ---------------------------------------------------------------------------
// Exact small-CRT lifts. Both paths reduce to at most ~126 bits of modulus
// and reconstruct coefficients exactly in 128-bit integers.
// ---------------------------------------------------------------------------

/// Reconstructs centered coefficients of `p` using the bottom `k` chain
/// primes (the integer value must be small relative to their product).
/// `neg_window_bits`: residues within 2^neg_window_bits of the modulus are
/// interpreted as negative.
inline std::vector<i128> lift_centered(const Ring& ring, const RnsPoly& p, std::size_t k,
                                       int neg_window_bits) {
    FENN_REQUIRE(p.domain == Domain::Coeff, "lift requires coefficient domain");
    FENN_REQUIRE(k >= 1 && k <= p.nprimes(), "lift: bad prime count");
    double logq = 0;
    for (std::size_t j = 0; j < k; ++j) logq += std::log2(static_cast<double>(ring.prime(j)));
    FENN_REQUIRE(logq < 126.0, "lift: modulus too large for exact reconstruction");

    u128 Q = 1;
    for (std::size_t j = 0; j < k; ++j) Q *= ring.prime(j);
    std::vector<u128> M(k);      // Q / q_j
    std::vector<u64> Minv(k);    // (Q/q_j)^{-1} mod q_j
    for (std::size_t j = 0; j < k; ++j) {
        u64 q = ring.prime(j);
        M[j] = Q / q;
        Minv[j] = nt::inv_mod(static_cast<u64>(M[j] % q), q);
    }

    u128 neg_thresh;
    if (neg_window_bits < 0) {
        neg_thresh = Q >> 1; // classic centered lift
    } else {
        FENN_REQUIRE(neg_window_bits < 126, "lift: bad window");
        u128 w = static_cast<u128>(1) << neg_window_bits;
        FENN_REQUIRE(w < Q, "lift: negative window exceeds modulus");
        neg_thresh = w;
    }

    std::vector<i128> out(ring.n());
    for (u64 i = 0; i < ring.n(); ++i) {
        u128 acc = 0;
        for (std::size_t j = 0; j < k; ++j) {
            u64 xj = nt::mul_mod(p.limbs[j][i], Minv[j], ring.prime(j));
            acc += M[j] * xj; // may exceed Q, bounded by k*Q
            while (acc >= Q) acc -= Q;
        }
        if (neg_window_bits < 0) {
            out[i] = acc > neg_thresh ? static_cast<i128>(acc) - static_cast<i128>(Q)
                                      : static_cast<i128>(acc);
        } else {
            out[i] = acc >= Q - neg_thresh ? static_cast<i128>(acc) - static_cast<i128>(Q)
                                           : static_cast<i128>(acc);
        }
    }
    return out;
}

/// RNS image of exact 128-bit signed coefficients.
inline RnsPoly poly_from_i128(const Ring& ring, const std::vector<i128>& coeffs,
                              std::size_t nprimes, bool with_special) {
    RnsPoly p = make_zero_poly(ring, nprimes, with_special, Domain::Coeff);
    auto reduce = [](i128 c, u64 q) -> u64 {
        i128 r = c % static_cast<i128>(q);
        if (r < 0) r += q;
        return static_cast<u64>(r);
    };
    for (std::size_t j = 0; j < nprimes; ++j) {
        u64 q = ring.prime(j);
        for (u64 i = 0; i < ring.n(); ++i) p.limbs[j][i] = reduce(coeffs[i], q);
    }
    if (with_special) {
        u64 q = ring.special_prime();
        for (u64 i = 0; i < ring.n(); ++i) p.special[i] = reduce(coeffs[i], q);
    }
    return p;
}

} // namespace fenn::core
