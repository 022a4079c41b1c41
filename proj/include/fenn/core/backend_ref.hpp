// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0
//
// Plaintext-backed reference backend: identical interface and ledger as the
// lattice backend, exact slot values, zero noise. Serves as the correctness
// oracle for every derived expectation.

#pragma once

#include "fenn/core/boot.hpp"

namespace fenn::core {

struct RefPlain {
    std::vector<double> slots;
    u32 level = 0;
    double scale = 0;
};

struct RefCipher {
    std::vector<double> slots;
    u32 level = 0;
    double scale = 0;
    bool relinearized = true;

    bool is_relinearized() const { return relinearized; }
};

class RefContext {
public:
    using Ct = RefCipher;
    using Pt = RefPlain;

    explicit RefContext(RingParams params) : params_(std::move(params)) {
        FENN_REQUIRE(is_power_of_two(params_.ring_dim), "bad ring dimension");
        FENN_REQUIRE(params_.modulus_chain.size() ==
                         static_cast<std::size_t>(params_.initial_level) + 1,
                     "modulus chain must have initial_level + 1 primes");
    }

    const RingParams& params() const { return params_; }
    u64 slots() const { return params_.ring_dim / 2; }
    u32 top_level() const { return params_.initial_level; }
    double scale() const { return params_.initial_scale; }

    // -- encode / decode ----------------------------------------------------

    RefPlain encode(const std::vector<double>& v, u32 level, double scale) const {
        FENN_REQUIRE(v.size() <= slots(), "vector too long");
        FENN_REQUIRE(level <= top_level(), "encode above top level");
        std::vector<double> s(slots(), 0.0);
        std::copy(v.begin(), v.end(), s.begin());
        return {std::move(s), level, scale};
    }

    RefPlain encode(const std::vector<double>& v) const {
        return encode(v, top_level(), scale());
    }

    std::vector<double> decode(const RefPlain& p) const { return p.slots; }

    RefCipher encrypt(const RefPlain& p, Rng&) const { return {p.slots, p.level, p.scale, true}; }

    RefPlain d_decrypt(const RefCipher& c, std::size_t n_shares_seen,
                       std::size_t n_parties) const {
        FENN_REQUIRE(n_shares_seen == n_parties, "reference decryption requires all shares");
        return {c.slots, c.level, c.scale};
    }

    // -- leveled arithmetic -------------------------------------------------

    static RefCipher at_level(const RefCipher& c, u32 level) {
        FENN_REQUIRE(level <= c.level, "cannot raise level");
        RefCipher out = c;
        out.level = level;
        return out;
    }

    RefCipher align_scale(const RefCipher& c, double target) const {
        if (c.scale == target) return c;
        FENN_REQUIRE(c.level >= 1, "level exhausted during scale alignment");
        FENN_REQUIRE(target > c.scale, "align_scale only raises the scale");
        RefCipher out = c;
        out.level = c.level - 1;
        out.scale = target;
        return out;
    }

    std::pair<RefCipher, RefCipher> align_pair(const RefCipher& a, const RefCipher& b) const {
        RefCipher x = a, y = b;
        if (!ledger::scales_close(x.scale, y.scale)) {
            if (x.scale < y.scale) x = align_scale(x, y.scale);
            if (y.scale < x.scale) y = align_scale(y, x.scale);
        }
        u32 lvl = std::min(x.level, y.level);
        return {at_level(x, lvl), at_level(y, lvl)};
    }

    /// Scale relabel: the reference value divides by new/old exactly.
    RefCipher relabel_scale(const RefCipher& c, double new_scale) const {
        RefCipher out = c;
        double ratio = c.scale / new_scale;
        for (auto& s : out.slots) s *= ratio;
        out.scale = new_scale;
        return out;
    }

    /// Division by a public constant: one exact slotwise division, matching
    /// the lattice backend's scale retarget.
    RefCipher div_by_const(const RefCipher& c, double k) const {
        RefCipher out = c;
        for (auto& s : out.slots) s /= k;
        out.scale = c.scale * k;
        return out;
    }

    RefCipher add_ct(const RefCipher& a, const RefCipher& b) const {
        auto [x, y] = align_pair(a, b);
        RefCipher out = x;
        for (std::size_t i = 0; i < out.slots.size(); ++i) out.slots[i] += y.slots[i];
        out.scale = ledger::add_scale(a.scale, b.scale);
        return out;
    }

    RefCipher sub_ct(const RefCipher& a, const RefCipher& b) const {
        auto [x, y] = align_pair(a, b);
        RefCipher out = x;
        for (std::size_t i = 0; i < out.slots.size(); ++i) out.slots[i] -= y.slots[i];
        out.scale = ledger::add_scale(a.scale, b.scale);
        return out;
    }

    RefCipher negate_ct(const RefCipher& c) const {
        RefCipher out = c;
        for (auto& s : out.slots) s = -s;
        return out;
    }

    RefCipher add_pt(const RefCipher& c, const std::vector<double>& v) const {
        RefCipher out = c;
        for (std::size_t i = 0; i < v.size(); ++i) out.slots[i] += v[i];
        return out;
    }

    RefCipher sub_from_pt(const std::vector<double>& v, const RefCipher& c) const {
        return add_pt(negate_ct(c), v);
    }

    RefCipher mul_pt(const RefCipher& c, const RefPlain& p) const {
        u32 lvl = ledger::mul_level(c.level, p.level);
        FENN_REQUIRE(lvl >= 1, "depth exhausted");
        RefCipher out = at_level(c, lvl);
        for (std::size_t i = 0; i < out.slots.size(); ++i) out.slots[i] *= p.slots[i];
        out.scale = ledger::mul_scale(c.scale, p.scale);
        return out;
    }

    RefCipher mul_ct_raw(const RefCipher& a, const RefCipher& b) const {
        FENN_REQUIRE(a.is_relinearized() && b.is_relinearized(),
                     "operands must be relinearized");
        u32 lvl = ledger::mul_level(a.level, b.level);
        FENN_REQUIRE(lvl >= 1, "depth exhausted");
        RefCipher out = at_level(a, lvl);
        const RefCipher y = at_level(b, lvl);
        for (std::size_t i = 0; i < out.slots.size(); ++i) out.slots[i] *= y.slots[i];
        out.scale = ledger::mul_scale(a.scale, b.scale);
        out.relinearized = false;
        return out;
    }

    RefCipher key_switch_local(const RefCipher& c) const {
        FENN_REQUIRE(!c.relinearized, "nothing to relinearize");
        RefCipher out = c;
        out.relinearized = true;
        return out;
    }

    RefCipher mul_ct(const RefCipher& a, const RefCipher& b) const {
        return key_switch_local(mul_ct_raw(a, b));
    }

    RefCipher rot_l(const RefCipher& c, i64 k) const {
        FENN_REQUIRE(c.is_relinearized(), "rotate requires a relinearized ciphertext");
        RefCipher out = c;
        out.slots = LinearTransform::rotate_left(c.slots, k);
        return out;
    }

    RefCipher rot_r(const RefCipher& c, i64 k) const { return rot_l(c, -k); }

    RefCipher res(const RefCipher& c) const {
        FENN_REQUIRE(c.level >= 1, "level exhausted");
        FENN_REQUIRE(c.is_relinearized(), "rescale requires a relinearized ciphertext");
        RefCipher out = c;
        out.level = c.level - 1;
        out.scale = ledger::res_scale(c.scale, params_.modulus_chain[c.level]);
        return out;
    }

    RefCipher set_scale(const RefCipher& c, double target) const {
        FENN_REQUIRE(c.level >= 1, "level exhausted");
        RefCipher out = c;
        double ratio = c.scale / target;
        for (auto& s : out.slots) s *= ratio;
        out.level = c.level - 1;
        out.scale = target;
        return out;
    }

    /// Collective bootstrap, reference semantics: exact transform, ledger
    /// reset, same modulus-size gate as the lattice backend.
    RefCipher d_bootstrap_alt(const RefCipher& c, const LinearTransform& phi,
                              const BootstrapParams& bp) const {
        double logq = 0;
        for (u32 i = 0; i <= c.level; ++i)
            logq += std::log2(static_cast<double>(params_.modulus_chain[i]));
        FENN_REQUIRE(bootstrap_constraint_holds(logq, bp.n_parties, bp.delta_bits, bp.lambda_bits),
                     "bootstrap refused: Q_l <= (N+1) * ||msg|| * 2^lambda at the call level");
        RefCipher out = c;
        out.slots = phi.apply(c.slots);
        out.level = top_level();
        out.scale = scale();
        return out;
    }

private:
    RingParams params_;
};

} // namespace fenn::core
