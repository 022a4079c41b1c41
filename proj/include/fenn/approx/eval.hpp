// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0
//
// Encrypted polynomial evaluation: baby-step/giant-step with exact level
// consumption ceil(log2(d+1)) and the ciphertext-multiplication count
// 2^k + m - k - 3 + ceil((d+1)/2^k), m = ceil(log2(d+1)), k = floor(m/2).

#pragma once

#include <optional>

#include "fenn/approx/poly.hpp"

namespace fenn::approx {

namespace detail {

/// Chebyshev-basis division by T_g using T_a T_g = (T_{a+g} + T_{|a-g|}) / 2:
/// returns (Q, R) with P = Q * T_g + R, deg R < g.
inline std::pair<std::vector<double>, std::vector<double>> cheb_divide(
    std::vector<double> c, std::size_t g) {
    FENN_REQUIRE(c.size() > g, "nothing to divide");
    std::vector<double> q(c.size() - g, 0.0);
    for (std::size_t k = c.size() - 1; k > g; --k) {
        double ck = c[k];
        if (ck == 0.0) continue;
        q[k - g] = 2.0 * ck;
        c[k] = 0.0;
        std::size_t mirror = k >= 2 * g ? k - 2 * g : 2 * g - k;
        c[mirror] -= ck;
    }
    q[0] = c[g];
    c[g] = 0.0;
    c.resize(g);
    return {std::move(q), std::move(c)};
}

template <class Ctx>
struct BsgsState {
    Ctx& ctx;
    Counters& counters;
    Basis basis;
    std::vector<std::optional<typename Ctx::Ct>> powers; // powers[j] = x^j or T_j
    u32 chunk_level; // common level of chunk outputs

    typename Ctx::Ct mul_and_res(const typename Ctx::Ct& a, const typename Ctx::Ct& b) {
        auto prod = ctx.mul_ct(a, b);
        ++counters.mul_ct;
        auto out = ctx.res(prod);
        ++counters.rescales;
        return out;
    }

    /// T_{2k} = 2 T_k^2 - 1 (Chebyshev) or x^{2k} = (x^k)^2 (power).
    typename Ctx::Ct square_step(const typename Ctx::Ct& tk) {
        auto sq = mul_and_res(tk, tk);
        if (basis == Basis::Power) return sq;
        auto doubled = ctx.add_ct(sq, sq);
        return ctx.add_pt(doubled, std::vector<double>(ctx.slots(), -1.0));
    }

    /// T_{j} = 2 T_1 T_{j-1} - T_{j-2} (Chebyshev) or x^j = x * x^{j-1}.
    typename Ctx::Ct baby_step(const typename Ctx::Ct& t1, const typename Ctx::Ct& prev,
                               const typename Ctx::Ct& prev2) {
        auto prod = mul_and_res(t1, prev);
        if (basis == Basis::Power) return prod;
        auto doubled = ctx.add_ct(prod, prod);
        auto aligned = ctx.at_level(prev2, doubled.level);
        return ctx.sub_ct(doubled, aligned);
    }

    /// Chunk: sum_j c_j * basis_j + c_0, one plaintext multiply per nonzero
    /// coefficient. Coefficient scales are chosen per term so every term
    /// lands at (chunk_level, target).
    typename Ctx::Ct chunk(const std::vector<double>& c, double target) {
        std::optional<typename Ctx::Ct> acc;
        for (std::size_t j = 1; j < c.size(); ++j) {
            if (c[j] == 0.0) continue;
            auto base = ctx.at_level(*powers[j], chunk_level + 1);
            u64 q = ctx.params().modulus_chain[base.level];
            double f = target * static_cast<double>(q) / base.scale;
            auto coeff = ctx.encode(std::vector<double>(ctx.slots(), c[j]), base.level, f);
            auto term = ctx.res(ctx.mul_pt(base, coeff));
            term.scale = target; // exact by construction of f
            ++counters.mul_pt;
            ++counters.rescales;
            acc = acc ? ctx.add_ct(*acc, term) : term;
        }
        if (!acc) {
            auto base = ctx.at_level(*powers[1], chunk_level + 1);
            u64 q = ctx.params().modulus_chain[base.level];
            double f = target * static_cast<double>(q) / base.scale;
            auto coeff = ctx.encode(std::vector<double>(ctx.slots(), 0.0), base.level, f);
            acc = ctx.res(ctx.mul_pt(base, coeff));
            acc->scale = target;
        }
        if (c[0] != 0.0) *acc = ctx.add_pt(*acc, std::vector<double>(ctx.slots(), c[0]));
        return *acc;
    }

    /// Output level of the product node with giant degree g; the recursion's
    /// levels are fully determined by the structure.
    u32 node_level(u64 bs, u64 giant_degree) const {
        u32 layers = log2_exact(giant_degree) - log2_exact(bs) + 1;
        return chunk_level - layers;
    }

    typename Ctx::Ct eval(const std::vector<double>& c, u64 bs, u64 giant_degree,
                          double target) {
        if (c.size() <= bs) return chunk(c, target);
        std::vector<double> qc, rc;
        if (basis == Basis::Power) {
            qc.assign(c.begin() + static_cast<long>(giant_degree), c.end());
            rc.assign(c.begin(), c.begin() + static_cast<long>(giant_degree));
        } else {
            std::tie(qc, rc) = cheb_divide(c, giant_degree);
        }
        // res of this node's product eats the prime at one level above the
        // node's output; pick the child target so the product lands on T.
        u64 divisor = ctx.params().modulus_chain[node_level(bs, giant_degree) + 1];
        double t_q = target * static_cast<double>(divisor) / powers[giant_degree]->scale;
        auto q_eval = eval(qc, bs, giant_degree / 2, t_q);
        auto prod = mul_and_res(q_eval, *powers[giant_degree]);
        prod.scale = target; // exact by the divisor choice
        auto r_eval = eval(rc, bs, giant_degree / 2, target);
        auto r_aligned = ctx.at_level(r_eval, prod.level);
        return ctx.add_ct(prod, r_aligned);
    }
};

} // namespace detail

/// Affine slot map y = alpha * x + beta with alpha a (possibly negative)
/// power of two: realized with additions and a scale relabel, no level cost.
template <class Ctx>
typename Ctx::Ct affine_pow2(Ctx& ctx, const typename Ctx::Ct& x, double alpha, double beta) {
    FENN_REQUIRE(alpha != 0.0, "degenerate affine map");
    double mag = std::abs(alpha);
    double l = std::log2(mag);
    FENN_REQUIRE(l == std::floor(l), "affine map requires a power-of-two slope");
    typename Ctx::Ct y = alpha < 0 ? ctx.negate_ct(x) : x;
    if (mag > 1.0) {
        for (double m = 1.0; m < mag; m *= 2.0) y = ctx.add_ct(y, y);
    } else if (mag < 1.0) {
        y = ctx.relabel_scale(y, y.scale / mag); // divides the value by 1/mag
    }
    if (beta != 0.0) y = ctx.add_pt(y, std::vector<double>(ctx.slots(), beta));
    return y;
}

/// Evaluates `poly` on the encrypted input. Consumes exactly
/// ceil(log2(d+1)) levels; a caller below that level gets an error telling
/// it to bootstrap first.
template <class Ctx>
typename Ctx::Ct eval_poly_encrypted(Ctx& ctx, const typename Ctx::Ct& x_in,
                                     const ApproxPoly& poly, Counters& counters) {
    u64 d = poly.degree();
    u32 m = poly.table_levels();
    u32 depth = poly.eval_levels();
    FENN_REQUIRE(x_in.level >= depth,
                 "insufficient level for polynomial evaluation: bootstrap first");

    typename Ctx::Ct x = x_in;
    if (poly.basis == Basis::Chebyshev) {
        double alpha = 2.0 / (poly.hi - poly.lo);
        double beta = -(poly.hi + poly.lo) / (poly.hi - poly.lo);
        x = affine_pow2(ctx, x, alpha, beta);
    }

    if (d == 0) {
        auto out = ctx.res(ctx.mul_pt(
            x, ctx.encode(std::vector<double>(ctx.slots(), 0.0), x.level,
                          static_cast<double>(ctx.params().modulus_chain[x.level]))));
        return ctx.add_pt(out, std::vector<double>(ctx.slots(), poly.coeffs[0]));
    }
    if (d == 1) {
        u64 q = ctx.params().modulus_chain[x.level];
        auto coeff = ctx.encode(std::vector<double>(ctx.slots(), poly.coeffs[1]), x.level,
                                static_cast<double>(q));
        auto out = ctx.res(ctx.mul_pt(x, coeff));
        ++counters.mul_pt;
        ++counters.rescales;
        if (poly.coeffs[0] != 0.0)
            out = ctx.add_pt(out, std::vector<double>(ctx.slots(), poly.coeffs[0]));
        return out;
    }

    u32 kappa = m / 2;
    u64 bs = 1ULL << kappa;
    // Deepest baby power: x alone for bs = 2, x^{bs-1} (depth kappa) beyond.
    u32 max_baby_depth = bs == 2 ? 0 : kappa;
    FENN_REQUIRE(d <= 31, "evaluation supports degrees up to 31");

    detail::BsgsState<Ctx> st{ctx, counters, poly.basis, {}, 0};
    st.powers.resize((1ULL << (m - 1)) + 1);
    st.powers[1] = x;
    // x^2 (or T_2), then chained babies 3..bs-1: bs - 2 multiplications
    // beyond x^2 itself.
    st.powers[2] = st.square_step(x);
    for (u64 j = 3; j < bs; ++j)
        st.powers[j] = st.baby_step(x, *st.powers[j - 1], *st.powers[j - 2]);
    // Giants bs, 2bs, .., 2^{m-1} by repeated squaring.
    for (u64 g = bs; g <= (1ULL << (m - 1)); g <<= 1)
        if (!st.powers[g]) st.powers[g] = st.square_step(*st.powers[g / 2]);
    st.chunk_level = x.level - max_baby_depth - 1;

    std::vector<double> coeffs = poly.coeffs;
    auto out = st.eval(coeffs, bs, 1ULL << (m - 1), ctx.scale());
    FENN_REQUIRE(out.level == x_in.level - depth, "internal: unexpected evaluation depth");
    return out;
}

/// max(a, b) = (a + b + sqrt((a - b)^2)) / 2 with an approximated square
/// root. Inputs must already sit inside the square root's fit interval.
template <class Ctx>
typename Ctx::Ct approx_max(Ctx& ctx, const typename Ctx::Ct& a, const typename Ctx::Ct& b,
                            const ApproxPoly& sqrt_poly, Counters& counters) {
    auto d = ctx.sub_ct(a, b);
    auto d2 = ctx.res(ctx.mul_ct(d, d));
    ++counters.mul_ct;
    ++counters.rescales;
    auto root = eval_poly_encrypted(ctx, d2, sqrt_poly, counters);
    auto sum = ctx.add_ct(ctx.at_level(a, root.level), ctx.at_level(b, root.level));
    // Halve by relabeling the scale (division by two, no level).
    auto total = ctx.add_ct(ctx.relabel_scale(sum, sum.scale * 2.0),
                            ctx.relabel_scale(root, root.scale * 2.0));
    return total;
}

/// Plaintext mirror of approx_max for oracle comparisons; reports inputs
/// outside the square root's interval through `warnings`.
inline double approx_max_plain(double a, double b, const ApproxPoly& sqrt_poly,
                               std::vector<std::string>* warnings = nullptr) {
    double d2 = (a - b) * (a - b);
    if (warnings && (d2 < sqrt_poly.lo || d2 > sqrt_poly.hi))
        warnings->push_back("approx_max input outside the fitted interval");
    return 0.5 * (a + b + sqrt_poly.eval(d2));
}

} // namespace fenn::approx
