// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0
//
// The complexity model: per-operation cost rows, the bootstrap-count and
// whole-training cost formulas, and an exact per-iteration operation-count
// predictor realized as an abstract (ledger-only) run of the pipeline.

#pragma once

#include "fenn/fed/protocol.hpp"
#include "fenn/nn/services.hpp"

namespace fenn::plan {

// ---------------------------------------------------------------------------
// Table rows. `ring` is the cyclotomic dimension; `alpha` the number of
// auxiliary moduli used by key switching; beta = ceil((lc+1)/alpha).
// ---------------------------------------------------------------------------
struct CostModel {
    u64 ring_dim = 8192;
    u32 levels = 6;     // L
    u32 alpha = 1;

    double beta(u32 lc) const { return std::ceil((lc + 1.0) / alpha); }

    double ks(u32 lc) const {
        double n = static_cast<double>(ring_dim);
        return n * std::log2(n) * lc * beta(lc);
    }

    double mul_pt(u32 lc) const { return 2.0 * ring_dim * (lc + 1.0); }
    double mul_ct(u32 lc) const { return 4.0 * ring_dim * (lc + 1.0) + ks(lc); }

    double db(u32 lc) const {
        double n = static_cast<double>(ring_dim);
        return n * std::log2(n) * (levels + 1.0) + n * std::log2(n) * (lc + 1.0);
    }

    /// Approximated activation: (2^k + m - k - 3 + ceil((da+1)/2^k)) Mul_ct.
    double activation(u64 da, u32 lc) const {
        return static_cast<double>(table_mul_count(da)) * mul_ct(lc);
    }

    static u64 table_mul_count(u64 da) {
        if (da <= 1) return 0;
        u32 m = 0;
        while ((1ULL << m) < da + 1) ++m;
        u32 kappa = m / 2;
        return (1ULL << kappa) + m - kappa - 3 + ceil_div(da + 1, 1ULL << kappa);
    }

    static u32 table_levels(u64 da) {
        if (da <= 1) return 1;
        u32 m = 0;
        while ((1ULL << m) < da + 1) ++m;
        return m;
    }
};

/// Bootstrap operations per forward+backward pass:
/// B = l (5 + ceil(log2(da+1)) + ceil(log2(da))) / ((L - tau) r).
inline double bootstrap_count(std::size_t l, u64 da, u32 levels, u32 tau, double r) {
    FENN_REQUIRE(levels > tau, "no usable levels above the call level");
    FENN_REQUIRE(r >= 1.0, "rescale ratio must be at least one");
    if (l == 0) return 0.0;
    double m1 = std::ceil(std::log2(static_cast<double>(da) + 1.0));
    double m2 = std::ceil(std::log2(static_cast<double>(da)));
    return static_cast<double>(l) * (5.0 + m1 + m2) /
           ((static_cast<double>(levels) - tau) * r);
}

/// Whole-training cost: m (sum_i {(2log2(h_{i-1}) + log2(h_{i+1})) KS +
/// 3Mul_ct + 2Mul_pt + act + act'} - 2log2(h_l) KS + B DB), with the
/// convention h_{l+1} = h_l at the boundary.
inline double cost_eval(const CostModel& cm, const std::vector<u64>& widths, u64 da, u64 m,
                        u32 tau, double r) {
    std::size_t l = widths.size() - 1;
    if (m == 0 || l == 0) return 0.0;
    auto h = packing::padded_dims(widths);
    u32 lc = cm.levels;
    double per_iter = 0;
    for (std::size_t i = 1; i <= l; ++i) {
        double rot = 2.0 * std::log2(static_cast<double>(h[i - 1])) +
                     std::log2(static_cast<double>(i + 1 <= l ? h[i + 1] : h[l]));
        per_iter += rot * cm.ks(lc);
        per_iter += 3.0 * cm.mul_ct(lc) + 2.0 * cm.mul_pt(lc);
        per_iter += cm.activation(da, lc);
        per_iter += cm.activation(da >= 1 ? da - 1 : 0, lc);
    }
    per_iter -= 2.0 * std::log2(static_cast<double>(h[l])) * cm.ks(lc);
    double b = bootstrap_count(l, da, cm.levels, tau, r);
    per_iter += b * cm.db(lc);
    return static_cast<double>(m) * per_iter;
}

// ---------------------------------------------------------------------------
// Exact operation-count prediction: a ledger-only backend drives the very
// pipeline the engine executes, so the predicted rotations, multiplications,
// and refresh placements match an instrumented run exactly.
// ---------------------------------------------------------------------------
struct CountCipher {
    u32 level = 0;
    double scale = 0;
    bool relinearized = true;
    bool is_relinearized() const { return relinearized; }
};

struct CountPlain {
    u32 level = 0;
    double scale = 0;
};

class CountingContext {
public:
    using Ct = CountCipher;
    using Pt = CountPlain;

    explicit CountingContext(core::RingParams params) : params_(std::move(params)) {}

    const core::RingParams& params() const { return params_; }
    u64 slots() const { return params_.ring_dim / 2; }
    u32 top_level() const { return params_.initial_level; }
    double scale() const { return params_.initial_scale; }

    Pt encode(const std::vector<double>&, u32 level, double scale) const {
        return {level, scale};
    }
    Pt encode(const std::vector<double>&) const { return {top_level(), scale()}; }
    Ct encrypt(const Pt& p, Rng&) const { return {p.level, p.scale, true}; }

    static Ct at_level(const Ct& c, u32 level) {
        FENN_REQUIRE(level <= c.level, "cannot raise level");
        Ct out = c;
        out.level = level;
        return out;
    }

    Ct align_scale(const Ct& c, double target) const {
        if (c.scale == target) return c;
        FENN_REQUIRE(c.level >= 1, "level exhausted during scale alignment");
        Ct out = c;
        out.level -= 1;
        out.scale = target;
        return out;
    }

    std::pair<Ct, Ct> align_pair(const Ct& a, const Ct& b) const {
        Ct x = a, y = b;
        if (!core::ledger::scales_close(x.scale, y.scale)) {
            if (x.scale < y.scale) x = align_scale(x, y.scale);
            if (y.scale < x.scale) y = align_scale(y, x.scale);
        }
        u32 lvl = std::min(x.level, y.level);
        return {at_level(x, lvl), at_level(y, lvl)};
    }

    Ct add_ct(const Ct& a, const Ct& b) const {
        auto [x, y] = align_pair(a, b);
        x.scale = core::ledger::add_scale(a.scale, b.scale);
        return x;
    }
    Ct sub_ct(const Ct& a, const Ct& b) const { return add_ct(a, b); }
    Ct negate_ct(const Ct& c) const { return c; }
    Ct add_pt(const Ct& c, const std::vector<double>&) const { return c; }
    Ct sub_from_pt(const std::vector<double>&, const Ct& c) const { return c; }

    Ct mul_pt(const Ct& c, const Pt& p) const {
        u32 lvl = core::ledger::mul_level(c.level, p.level);
        FENN_REQUIRE(lvl >= 1, "depth exhausted");
        return {lvl, core::ledger::mul_scale(c.scale, p.scale), c.relinearized};
    }

    Ct mul_ct(const Ct& a, const Ct& b) const {
        u32 lvl = core::ledger::mul_level(a.level, b.level);
        FENN_REQUIRE(lvl >= 1, "depth exhausted");
        return {lvl, core::ledger::mul_scale(a.scale, b.scale), true};
    }

    Ct rot_l(const Ct& c, i64) const { return c; }
    Ct rot_r(const Ct& c, i64) const { return c; }

    Ct res(const Ct& c) const {
        FENN_REQUIRE(c.level >= 1, "level exhausted");
        return {c.level - 1,
                core::ledger::res_scale(c.scale, params_.modulus_chain[c.level]), true};
    }

    Ct set_scale(const Ct& c, double target) const {
        FENN_REQUIRE(c.level >= 1, "level exhausted");
        return {c.level - 1, target, true};
    }

    Ct relabel_scale(const Ct& c, double new_scale) const {
        Ct out = c;
        out.scale = new_scale;
        return out;
    }

    Ct div_by_const(const Ct& c, double k) const { return relabel_scale(c, c.scale * k); }

private:
    core::RingParams params_;
};

struct IterationCounts {
    Counters per_iteration;                // N parties x b samples + update
    std::vector<u32> gradient_levels;      // per layer, for byte estimates
    std::vector<u64> gradient_ciphers;     // per layer
    u64 model_ciphers = 0;
    u32 call_level = 0;
};

/// Predicts one global iteration's operation counts for the given plan by
/// abstract interpretation of the compiled pipeline (levels and scales only).
inline IterationCounts predict_iteration(const nn::NetworkSpec& spec,
                                         const core::RingParams& params,
                                         core::BootstrapParams bp, u64 b, u64 n_parties) {
    CountingContext ctx(params);
    auto net = nn::compile_fc(spec, ctx.slots());
    nn::EngineServices<CountingContext> svc;
    bp.n_parties = n_parties;
    svc.boot_params = bp;
    svc.call_level = core::bootstrap_call_level(params.modulus_chain, n_parties, bp.delta_bits,
                                                bp.lambda_bits);
    svc.bootstrap = [&ctx](const CountCipher&, const nn::LinearTransform&) {
        return CountCipher{ctx.top_level(), ctx.scale(), true};
    };
    nn::Engine<CountingContext> eng(ctx, net, svc);

    auto weights = nn::init_weights_plain(spec, 1);
    Rng rng(1);
    auto model = eng.encrypt_model(weights, rng);

    std::vector<packing::PackedSlots> inputs;
    std::vector<std::vector<double>> labels;
    std::vector<double> x(spec.input_dim, 0.0);
    std::vector<double> y(net.h.back(), 0.0);
    for (u64 t = 0; t < b; ++t) {
        inputs.push_back(eng.pack_input(x));
        labels.push_back(eng.pack_labels(y));
    }

    IterationCounts out;
    out.call_level = svc.call_level;
    Counters one_party;
    auto grads = eng.lgd_compute(inputs, labels, model, one_party);
    for (const auto& g : grads.grads) {
        out.gradient_levels.push_back(g.ciphers[0].level);
        out.gradient_ciphers.push_back(g.ciphers.size());
    }
    for (const auto& w : model.weights) out.model_ciphers += w.ciphers.size();

    Counters total;
    for (u64 i = 0; i < n_parties; ++i) total += one_party;
    eng.apply_update(model, grads, spec.learning_rate, b, n_parties, total);
    out.per_iteration = total;
    return out;
}

/// Per-iteration traffic estimate: model broadcast and gradient aggregation
/// over the N-1 tree edges, plus the refresh rounds, using the serialized
/// sizes of the messages the protocol actually sends.
inline u64 comm_estimate(const nn::NetworkSpec& spec, const core::RingParams& params,
                         core::BootstrapParams bp, u64 b, std::size_t n_parties) {
    if (n_parties <= 1) return 0;
    auto counts = predict_iteration(spec, params, bp, b, n_parties);
    u64 ring = params.ring_dim;
    u64 down = counts.model_ciphers * (n_parties - 1) *
               core::ciphertext_wire_bytes(ring, params.initial_level);
    u64 up = 0;
    for (std::size_t j = 0; j < counts.gradient_levels.size(); ++j)
        up += counts.gradient_ciphers[j] * (n_parties - 1) *
              core::ciphertext_wire_bytes(ring, counts.gradient_levels[j]);
    u64 boot = counts.per_iteration.bootstraps * (n_parties - 1) *
               (core::ciphertext_wire_bytes(ring, counts.call_level) +
                core::bootstrap_share_wire_bytes(ring, counts.call_level, params.initial_level));
    return down + up + boot;
}

} // namespace fenn::plan
