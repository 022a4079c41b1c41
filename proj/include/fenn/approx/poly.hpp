// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0
//
// Polynomial approximation of activation functions: least-squares fits,
// Chebyshev interpolants, and formal derivatives.

#pragma once

#include <cmath>
#include <functional>

#include "fenn/common.hpp"

namespace fenn::approx {

enum class Target {
    Identity,
    Sigmoid,
    SmoothRelu, // softplus ln(1 + e^x)
    Tanh,
    SoftmaxComponent,
    Sqrt,
    Square,
};

inline double target_value(Target t, double x) {
    switch (t) {
        case Target::Identity: return x;
        case Target::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
        case Target::SmoothRelu: return x > 30 ? x : std::log1p(std::exp(x));
        case Target::Tanh: return std::tanh(x);
        // Componentwise softmax surrogate: a sigmoid-style squashing of each
        // logit (the paper names ASoftmax without a construction).
        case Target::SoftmaxComponent: return 1.0 / (1.0 + std::exp(-x));
        case Target::Sqrt: return std::sqrt(std::max(0.0, x));
        case Target::Square: return x * x;
    }
    throw Error("unknown target");
}

enum class Basis { Power, Chebyshev };

struct ApproxPoly {
    Basis basis = Basis::Power;
    std::vector<double> coeffs; // basis-dependent, degree = coeffs.size()-1
    double lo = -1.0, hi = 1.0; // fit interval
    Target target = Target::Identity;
    double fit_error = 0.0;     // max |poly - target| on the fit grid

    u64 degree() const { return coeffs.empty() ? 0 : coeffs.size() - 1; }

    /// ceil(log2(d+1)), the depth figure the complexity table quotes.
    u32 table_levels() const {
        u64 d = degree();
        if (d <= 1) return 1;
        u32 m = 0;
        while ((1ULL << m) < d + 1) ++m;
        return m;
    }

    /// Actual multiplicative depth of the evaluator. The giant-step chunk
    /// width that realizes the table's multiplication count keeps a
    /// depth-(ceil(m/2)) baby inside each chunk, which costs one extra level
    /// once m exceeds 3; below that the two figures coincide.
    u32 eval_levels() const {
        u32 m = table_levels();
        return m >= 4 ? m + 1 : m;
    }

    double eval(double x) const {
        if (basis == Basis::Power) {
            double acc = 0;
            for (std::size_t i = coeffs.size(); i-- > 0;) acc = acc * x + coeffs[i];
            return acc;
        }
        // Clenshaw over the mapped variable.
        double y = (2 * x - lo - hi) / (hi - lo);
        double b1 = 0, b2 = 0;
        for (std::size_t i = coeffs.size(); i-- > 1;) {
            double b0 = 2 * y * b1 - b2 + coeffs[i];
            b2 = b1;
            b1 = b0;
        }
        return y * b1 - b2 + coeffs[0];
    }

    /// Formal derivative in the same basis (degree drops by one).
    ApproxPoly derivative() const {
        ApproxPoly out = *this;
        if (coeffs.size() <= 1) {
            out.coeffs = {0.0};
            return out;
        }
        if (basis == Basis::Power) {
            out.coeffs.resize(coeffs.size() - 1);
            for (std::size_t i = 1; i < coeffs.size(); ++i)
                out.coeffs[i - 1] = coeffs[i] * static_cast<double>(i);
        } else {
            std::size_t n = coeffs.size() - 1;
            std::vector<double> d(n + 1, 0.0);
            // dT recurrence: d_{k-1} = d_{k+1} + 2k c_k, then chain rule.
            for (std::size_t k = n; k >= 1; --k) {
                d[k - 1] = (k + 1 < n + 1 ? d[k + 1] : 0.0) + 2.0 * static_cast<double>(k) * coeffs[k];
            }
            d[0] /= 2.0;
            d.resize(n);
            double chain = 2.0 / (hi - lo);
            for (auto& c : d) c *= chain;
            out.coeffs = std::move(d);
        }
        return out;
    }
};

inline constexpr int kFitGrid = 1000;

/// Max |poly - f| over the reporting grid.
inline double grid_max_error(const ApproxPoly& p, const std::function<double(double)>& f) {
    double worst = 0;
    for (int i = 0; i < kFitGrid; ++i) {
        double x = p.lo + (p.hi - p.lo) * i / (kFitGrid - 1);
        worst = std::max(worst, std::abs(p.eval(x) - f(x)));
    }
    return worst;
}

/// Discretized least squares in the power basis (normal equations).
inline ApproxPoly fit_least_squares(Target target, double lo, double hi, u64 degree) {
    FENN_REQUIRE(degree >= 1, "degree must be positive");
    FENN_REQUIRE(hi > lo, "empty interval");
    const std::size_t n = degree + 1;
    // Normal equations in a scaled variable to tame conditioning.
    double mid = (lo + hi) / 2, half = (hi - lo) / 2;
    std::vector<long double> ata(n * n, 0.0L), atb(n, 0.0L);
    for (int g = 0; g < kFitGrid; ++g) {
        double x = lo + (hi - lo) * g / (kFitGrid - 1);
        long double u = (x - mid) / half;
        long double f = target_value(target, x);
        std::vector<long double> pow(n);
        pow[0] = 1.0L;
        for (std::size_t i = 1; i < n; ++i) pow[i] = pow[i - 1] * u;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) ata[i * n + j] += pow[i] * pow[j];
            atb[i] += pow[i] * f;
        }
    }
    // Gauss elimination with partial pivoting.
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(static_cast<double>(ata[r * n + col])) >
                std::abs(static_cast<double>(ata[piv * n + col])))
                piv = r;
        if (piv != col) {
            for (std::size_t k = 0; k < n; ++k) std::swap(ata[col * n + k], ata[piv * n + k]);
            std::swap(atb[col], atb[piv]);
        }
        long double p = ata[col * n + col];
        FENN_REQUIRE(std::abs(static_cast<double>(p)) > 1e-18,
                     "ill-conditioned normal equations: degree too high for the interval");
        for (std::size_t r = col + 1; r < n; ++r) {
            long double f = ata[r * n + col] / p;
            for (std::size_t k = col; k < n; ++k) ata[r * n + k] -= f * ata[col * n + k];
            atb[r] -= f * atb[col];
        }
    }
    std::vector<long double> sol(n);
    for (std::size_t i = n; i-- > 0;) {
        long double acc = atb[i];
        for (std::size_t k = i + 1; k < n; ++k) acc -= ata[i * n + k] * sol[k];
        sol[i] = acc / ata[i * n + i];
    }
    // Expand from the scaled variable u = (x-mid)/half back to x.
    std::vector<long double> cx(n, 0.0L);
    std::vector<long double> base{1.0L}; // ((x-mid)/half)^i coefficients in x
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < base.size(); ++k) cx[k] += sol[i] * base[k];
        if (i + 1 < n) {
            std::vector<long double> next(base.size() + 1, 0.0L);
            for (std::size_t k = 0; k < base.size(); ++k) {
                next[k + 1] += base[k] / half;
                next[k] -= base[k] * mid / half;
            }
            base = std::move(next);
        }
    }
    ApproxPoly out;
    out.basis = Basis::Power;
    out.coeffs.assign(cx.begin(), cx.end());
    for (double c : out.coeffs)
        FENN_REQUIRE(std::isfinite(c),
                     "ill-conditioned normal equations: degree too high for the interval");
    out.lo = lo;
    out.hi = hi;
    out.target = target;
    out.fit_error = grid_max_error(out, [&](double x) { return target_value(target, x); });
    return out;
}

/// Chebyshev interpolation at the degree+1 Chebyshev-Lobatto points of
/// [lo, hi]. Endpoint nodes pin functions with endpoint singularities
/// (notably sqrt at zero) exactly.
inline ApproxPoly fit_chebyshev(Target target, double lo, double hi, u64 degree) {
    FENN_REQUIRE(hi > lo, "empty interval");
    ApproxPoly out;
    out.basis = Basis::Chebyshev;
    out.lo = lo;
    out.hi = hi;
    out.target = target;
    const long double pi = 3.14159265358979323846264338327950288L;
    if (degree == 0) {
        out.coeffs = {target_value(target, (lo + hi) / 2)};
        out.fit_error = grid_max_error(out, [&](double x) { return target_value(target, x); });
        return out;
    }
    const std::size_t n = degree; // nodes t_k = cos(k*pi/n), k = 0..n
    std::vector<long double> fx(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
        long double t = std::cos(pi * static_cast<long double>(k) / n);
        double x = static_cast<double>((static_cast<long double>(hi - lo) * t +
                                        static_cast<long double>(hi + lo)) /
                                       2.0L);
        fx[k] = target_value(target, x);
    }
    out.coeffs.resize(n + 1);
    for (std::size_t j = 0; j <= n; ++j) {
        long double acc = 0;
        for (std::size_t k = 0; k <= n; ++k) {
            long double w = (k == 0 || k == n) ? 0.5L : 1.0L;
            acc += w * fx[k] * std::cos(pi * j * static_cast<long double>(k) / n);
        }
        out.coeffs[j] = static_cast<double>(acc * 2.0L / n);
    }
    out.coeffs[0] /= 2.0;
    out.coeffs[n] /= 2.0;
    out.fit_error = grid_max_error(out, [&](double x) { return target_value(target, x); });
    return out;
}

/// Named activation constructor. Value mode fits the function itself;
/// derivative mode returns a degree d_a - 1 polynomial. SmoothRelu's
/// derivative is fitted directly as a sigmoid.
enum class ActivationMode { Value, Derivative };

inline ApproxPoly activation(const std::string& name, ActivationMode mode, u64 degree,
                             double lo, double hi) {
    auto to_target = [&]() -> Target {
        if (name == "sigmoid") return Target::Sigmoid;
        if (name == "smooth_relu" || name == "softplus" || name == "relu") return Target::SmoothRelu;
        if (name == "tanh") return Target::Tanh;
        if (name == "softmax") return Target::SoftmaxComponent;
        if (name == "square") return Target::Square;
        if (name == "identity" || name == "linear") return Target::Identity;
        throw Error("unknown activation: " + name);
    };
    Target t = to_target();
    if (t == Target::Square) {
        ApproxPoly p;
        p.basis = Basis::Power;
        p.lo = lo;
        p.hi = hi;
        p.target = t;
        p.coeffs = mode == ActivationMode::Value ? std::vector<double>{0, 0, 1}
                                                 : std::vector<double>{0, 2};
        return p;
    }
    if (t == Target::Identity) {
        ApproxPoly p;
        p.basis = Basis::Power;
        p.lo = lo;
        p.hi = hi;
        p.target = t;
        p.coeffs = mode == ActivationMode::Value ? std::vector<double>{0, 1}
                                                 : std::vector<double>{1, 0};
        return p;
    }
    if (mode == ActivationMode::Value) return fit_least_squares(t, lo, hi, degree);
    if (t == Target::SmoothRelu) {
        // softplus' = sigmoid; fit it directly at the reduced degree.
        auto p = fit_least_squares(Target::Sigmoid, lo, hi, degree >= 2 ? degree - 1 : 1);
        return p;
    }
    return fit_least_squares(t, lo, hi, degree).derivative();
}

} // namespace fenn::approx
