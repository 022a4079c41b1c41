// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0
//
// Approximate max pooling via max(a,b) = (a + b + sqrt((a-b)^2)) / 2,
// iterated log2(window) times. Every iteration drains the levels, so each
// is followed by a collective refresh.

#pragma once

#include <functional>

#include "fenn/approx/eval.hpp"

namespace fenn::approx {

/// Max over each aligned window of `window` consecutive slots; the result
/// lands in the window's first slot. `refresh` must restore a ciphertext to
/// full level (a bootstrap); it runs after every approx_max round.
template <class Ctx>
typename Ctx::Ct max_pool(Ctx& ctx, const typename Ctx::Ct& c, u64 window,
                          const ApproxPoly& sqrt_poly,
                          const std::function<typename Ctx::Ct(const typename Ctx::Ct&)>& refresh,
                          Counters& counters) {
    FENN_REQUIRE(is_power_of_two(window), "pool window must be a power of two");
    typename Ctx::Ct acc = c;
    for (u64 off = 1; off < window; off <<= 1) {
        auto rotated = ctx.rot_l(acc, static_cast<i64>(off));
        counters.rotations += 1;
        acc = approx_max(ctx, acc, rotated, sqrt_poly, counters);
        acc = refresh(acc);
        counters.bootstraps += 1;
    }
    return acc;
}

} // namespace fenn::approx
