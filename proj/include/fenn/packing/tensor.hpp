// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0
//
// Encrypted packed tensors and the rotation macros RIS / RR.

#pragma once

#include "fenn/packing/pack.hpp"

namespace fenn::packing {

template <class Ctx>
struct PackedTensor {
    std::vector<typename Ctx::Ct> ciphers;
    PackingLayout layout;
    u64 logical_rows = 0, logical_cols = 0;
};

template <class Ctx>
PackedTensor<Ctx> encrypt_packed(Ctx& ctx, const PackedSlots& slots, Rng& rng) {
    PackedTensor<Ctx> out;
    out.layout = slots.layout;
    out.logical_rows = slots.logical_rows;
    out.logical_cols = slots.logical_cols;
    for (const auto& chunk : slots.chunks) out.ciphers.push_back(ctx.encrypt(ctx.encode(chunk), rng));
    return out;
}

template <class Ctx>
PackedSlots decrypt_packed(Ctx& ctx, const PackedTensor<Ctx>& t,
                           const std::function<std::vector<double>(const typename Ctx::Ct&)>& dec) {
    PackedSlots out;
    out.layout = t.layout;
    out.logical_rows = t.logical_rows;
    out.logical_cols = t.logical_cols;
    for (const auto& c : t.ciphers) out.chunks.push_back(dec(c));
    return out;
}

/// Rotate-for-inner-sum: log2(s) left rotations with doubling offsets, each
/// followed by an addition; the designated slot of every block receives the
/// block sum. The rotation counter advances by exactly log2(s) (model units);
/// key_switches records the per-cipher physical count.
template <class Ctx>
PackedTensor<Ctx> ris(Ctx& ctx, const PackedTensor<Ctx>& c, u64 p, u64 s, Counters& counters) {
    FENN_REQUIRE(is_power_of_two(s), "RIS span must be a power of two");
    PackedTensor<Ctx> out = c;
    u32 iters = log2_exact(s);
    for (u32 i = 0; i < iters; ++i) {
        i64 off = static_cast<i64>(p) << i;
        for (auto& ct : out.ciphers) ct = ctx.add_ct(ct, ctx.rot_l(ct, off));
    }
    counters.rotations += iters;
    counters.key_switches += static_cast<u64>(iters) * out.ciphers.size();
    counters.additions += static_cast<u64>(iters) * out.ciphers.size();
    return out;
}

/// Rotate-for-replication: log2(s) right rotations with doubling offsets.
/// Source blocks must be followed by enough zero slots for the copies.
template <class Ctx>
PackedTensor<Ctx> rr(Ctx& ctx, const PackedTensor<Ctx>& c, u64 p, u64 s, Counters& counters) {
    FENN_REQUIRE(is_power_of_two(s), "RR span must be a power of two");
    PackedTensor<Ctx> out = c;
    u32 iters = log2_exact(s);
    for (u32 i = 0; i < iters; ++i) {
        i64 off = static_cast<i64>(p) << i;
        for (auto& ct : out.ciphers) ct = ctx.add_ct(ct, ctx.rot_r(ct, off));
    }
    counters.rotations += iters;
    counters.key_switches += static_cast<u64>(iters) * out.ciphers.size();
    counters.additions += static_cast<u64>(iters) * out.ciphers.size();
    return out;
}

/// Sums all ciphers of a tensor into a single-cipher tensor (cross-cipher
/// part of an inner sum; plain additions, no rotations).
template <class Ctx>
PackedTensor<Ctx> fold_ciphers(Ctx& ctx, const PackedTensor<Ctx>& t, Counters& counters) {
    PackedTensor<Ctx> out = t;
    if (t.ciphers.size() <= 1) return out;
    auto acc = t.ciphers[0];
    for (std::size_t i = 1; i < t.ciphers.size(); ++i) acc = ctx.add_ct(acc, t.ciphers[i]);
    counters.additions += t.ciphers.size() - 1;
    out.ciphers = {std::move(acc)};
    out.layout.cipher_count = 1;
    return out;
}

/// Clones cipher 0 into `count` ciphers (replication across the multi-cipher
/// split; the per-cipher content is identical by construction).
template <class Ctx>
PackedTensor<Ctx> broadcast_cipher(const PackedTensor<Ctx>& t, u64 count) {
    FENN_REQUIRE(t.ciphers.size() == 1, "broadcast needs a single-cipher tensor");
    PackedTensor<Ctx> out = t;
    out.ciphers.assign(count, t.ciphers[0]);
    out.layout.cipher_count = count;
    return out;
}

} // namespace fenn::packing
