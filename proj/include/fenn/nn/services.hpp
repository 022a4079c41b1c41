// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0
//
// In-process engine services: collective operations executed directly over
// the share set (single-process simulation and tests). The federation layer
// provides wire-accounted equivalents.

#pragma once

#include <memory>

#include "fenn/core/backend_ref.hpp"
#include "fenn/nn/engine.hpp"

namespace fenn::nn {

inline EngineServices<core::RealContext> local_services(core::RealContext& ctx,
                                                        const std::vector<core::SecretShare>& shares,
                                                        core::BootstrapParams bp, u64 seed) {
    EngineServices<core::RealContext> svc;
    bp.n_parties = shares.size();
    svc.boot_params = bp;
    svc.call_level = core::bootstrap_call_level(ctx.params().modulus_chain, shares.size(),
                                                bp.delta_bits, bp.lambda_bits);
    auto counter = std::make_shared<u64>(seed);
    u32 call = svc.call_level;
    svc.bootstrap = [&ctx, &shares, bp, counter, call](const core::Ciphertext& c,
                                                       const LinearTransform& phi) {
        auto at_call = core::RealContext::at_level(c, std::min<u32>(c.level, call));
        return core::d_bootstrap_alt(ctx, at_call, phi, shares, bp, (*counter)++);
    };
    return svc;
}

inline EngineServices<core::RefContext> local_services(core::RefContext& ctx,
                                                       std::size_t n_parties,
                                                       core::BootstrapParams bp) {
    EngineServices<core::RefContext> svc;
    bp.n_parties = n_parties;
    svc.boot_params = bp;
    svc.call_level = core::bootstrap_call_level(ctx.params().modulus_chain, n_parties,
                                                bp.delta_bits, bp.lambda_bits);
    u32 call = svc.call_level;
    svc.bootstrap = [&ctx, bp, call](const core::RefCipher& c, const LinearTransform& phi) {
        auto at_call = core::RefContext::at_level(c, std::min<u32>(c.level, call));
        return ctx.d_bootstrap_alt(at_call, phi, bp);
    };
    return svc;
}

} // namespace fenn::nn
