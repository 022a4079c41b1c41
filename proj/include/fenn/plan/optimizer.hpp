// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0
//
// Constrained parameter selection: minimize the training cost over the
// discrete (ring size, level count) grid subject to the modulus-chain,
// scale, refresh-headroom, and security-table constraints.

#pragma once

#include <json.hpp>

#include "fenn/plan/cost.hpp"

namespace fenn::plan {

struct CryptoPlan {
    u64 ring_dim = 0;
    u32 levels = 0;             // L: rescaling levels; the chain has L+1 primes
    std::vector<u32> chain_bits; // q_0 .. q_L
    u32 scale_bits = 32;
    u32 security = 128;         // lambda for postQsec
    double mask_lambda = 30;    // statistical masking bits for the refresh
    double delta_bits = 40;     // declared encoded-message bound (scale included)
    double value_bits = 8;      // declared plaintext value bound, |pt| = 2^value_bits
    u32 tau = 1;                // refresh call level
    double r = 1;               // consecutive multiplications per level
    double bootstrap_per_pass = 0;    // B, the formula value
    double estimated_cost = 0;        // C(ring, L)
    u64 estimated_bytes_per_iter = 0;
    std::vector<u64> cipher_counts;   // multi-cipher split per weight matrix

    double log2_q() const {
        double s = 0;
        for (u32 b : chain_bits) s += b;
        return s;
    }

    double log2_q_at(u32 level) const {
        double s = 0;
        for (u32 i = 0; i <= level && i < chain_bits.size(); ++i) s += chain_bits[i];
        return s;
    }

    nlohmann::json to_json() const {
        return {{"ring_dim", ring_dim},
                {"levels", levels},
                {"chain_bits", chain_bits},
                {"scale_bits", scale_bits},
                {"security", security},
                {"mask_lambda", mask_lambda},
                {"delta_bits", delta_bits},
                {"value_bits", value_bits},
                {"tau", tau},
                {"r", r},
                {"bootstrap_per_pass", bootstrap_per_pass},
                {"estimated_cost", estimated_cost},
                {"estimated_bytes_per_iter", estimated_bytes_per_iter},
                {"cipher_counts", cipher_counts}};
    }
};

/// Builds chain bit-widths for (L, scale) under a total budget: scale-sized
/// rescaling primes and a base prime that absorbs the remaining headroom
/// (between scale-8 and 60 bits). Returns empty when infeasible.
inline std::vector<u32> build_chain_bits(u32 levels, u32 scale_bits, double budget) {
    double rescale_total = static_cast<double>(levels) * scale_bits;
    double q0 = std::min(60.0, static_cast<double>(scale_bits) + 23.0);
    if (q0 + rescale_total > budget) q0 = budget - rescale_total;
    if (q0 < scale_bits - 8.0) return {};
    std::vector<u32> bits{static_cast<u32>(q0)};
    for (u32 i = 0; i < levels; ++i) bits.push_back(scale_bits);
    return bits;
}

struct ConstraintReport {
    bool feasible = true;
    std::vector<std::string> violations;

    void fail(std::string why) {
        feasible = false;
        violations.push_back(std::move(why));
    }
};

/// Independent checker for the selection constraints; every returned plan
/// must pass it.
inline ConstraintReport check_plan(const CryptoPlan& p, std::size_t n_parties, bool toy) {
    ConstraintReport rep;
    if (p.chain_bits.size() != static_cast<std::size_t>(p.levels) + 1)
        rep.fail("chain must provide L+1 primes");
    if (p.log2_q() < p.scale_bits + 1)
        rep.fail("Q = kS needs k >= 2");
    // Refresh headroom: the call level must satisfy the masked-refresh bound
    // and leave at least one usable level.
    double need = std::log2(static_cast<double>(n_parties) + 1.0) + p.delta_bits + p.mask_lambda;
    if (p.log2_q_at(p.tau) <= need)
        rep.fail("refresh constraint unmet at the call level");
    if (p.tau >= p.levels) rep.fail("no usable levels above the call level");
    // Q_{L-tau} > 2^lambda |plaintext| N.
    double guard = p.security + p.value_bits + std::log2(static_cast<double>(n_parties));
    if (p.log2_q_at(p.levels - p.tau) <= guard)
        rep.fail("modulus at L - tau below the security-headroom bound");
    if (!toy) {
        u64 needed_ring = 0;
        try {
            needed_ring = core::post_q_sec(p.log2_q(), p.security);
        } catch (const Error&) {
            rep.fail("modulus too large for every tabulated ring");
            return rep;
        }
        if (p.ring_dim < needed_ring) rep.fail("ring below the security table requirement");
    }
    return rep;
}

struct SelectOptions {
    u32 scale_bits = 32;
    u32 security = 128;
    double mask_lambda = 30;
    double value_bits = 8;
    bool toy = false;
    u64 m = 100;   // global iterations (cost weighting)
    u64 b = 10;    // local batch (traffic estimate)
};

/// Exhaustive search over ring sizes 2^12..2^15 and L in 3..12 for the
/// feasible cost minimizer.
inline CryptoPlan select_params(const nn::NetworkSpec& spec, std::size_t n_parties,
                                const SelectOptions& opt) {
    auto widths = packing::padded_dims(spec.widths());
    u64 da = spec.layers.front().degree;
    std::optional<CryptoPlan> best;
    for (u64 ring = 1ULL << 12; ring <= 1ULL << 15; ring <<= 1) {
        double budget = opt.toy ? 1e9 : core::max_logq_for(ring, opt.security);
        for (u32 levels = 3; levels <= 12; ++levels) {
            auto bits = build_chain_bits(levels, opt.scale_bits, budget);
            if (bits.empty()) continue;
            CryptoPlan p;
            p.ring_dim = ring;
            p.levels = levels;
            p.chain_bits = bits;
            p.scale_bits = opt.scale_bits;
            p.security = opt.security;
            p.mask_lambda = opt.mask_lambda;
            p.value_bits = opt.value_bits;
            p.delta_bits = opt.scale_bits + 8.0;
            // Call level: first level satisfying the refresh bound.
            double need = std::log2(static_cast<double>(n_parties) + 1.0) + p.delta_bits +
                          p.mask_lambda;
            u32 tau = 0;
            double acc = 0;
            bool found = false;
            for (u32 l = 0; l <= levels; ++l) {
                acc += bits[l];
                if (acc > need) {
                    tau = l;
                    found = true;
                    break;
                }
            }
            if (!found || tau >= levels) continue;
            p.tau = std::max<u32>(tau, 1);
            p.r = std::max(1.0, std::floor(static_cast<double>(bits[levels]) / opt.scale_bits));
            if (!check_plan(p, n_parties, opt.toy).feasible) continue;
            std::size_t l = widths.size() - 1;
            p.bootstrap_per_pass = bootstrap_count(l, da, levels, p.tau, p.r);
            CostModel cm{ring, levels, 1};
            p.estimated_cost = cost_eval(cm, spec.widths(), da, opt.m, p.tau, p.r);
            for (std::size_t j = 1; j <= l; ++j) {
                auto lay = packing::weight_layout(widths, j, ring / 2);
                p.cipher_counts.push_back(lay.cipher_count);
            }
            if (!best || p.estimated_cost < best->estimated_cost) best = p;
        }
    }
    FENN_REQUIRE(best.has_value(),
                 "no feasible parameter set: the refresh or security constraint binds "
                 "everywhere in the search grid");
    return *best;
}

/// Materializes actual NTT-friendly primes for a plan (toy-scale rings).
inline core::RingParams realize_plan(const CryptoPlan& p) {
    core::RingParams params;
    params.ring_dim = p.ring_dim;
    params.initial_level = p.levels;
    params.initial_scale = std::ldexp(1.0, static_cast<int>(p.scale_bits));
    params.security_level = p.security;
    params.toy_mode = true;
    u64 two_n = 2 * p.ring_dim;
    std::vector<u64> taken;
    for (u32 bits : p.chain_bits) {
        auto q = nt::find_ntt_primes(bits, two_n, 1, taken);
        params.modulus_chain.push_back(q[0]);
        taken.push_back(q[0]);
    }
    params.special_prime = nt::find_ntt_primes(59, two_n, 1, taken)[0];
    return params;
}

} // namespace fenn::plan
