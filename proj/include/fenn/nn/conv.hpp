// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0
//
// Convolutional front end, lowered onto the FC pipeline: kernel-sized
// patches multiply a replicated kernel, the window inner-sum lands on patch
// starts, and average pooling rides the collective refresh as a linear slot
// transform together with the next layer's slot arrangement. The pooling
// derivative is recorded and applied inside the backward refresh.

#pragma once

#include "fenn/nn/engine.hpp"

namespace fenn::nn {

struct ConvConfig {
    u64 image_side = 0;
    u64 f = 0, stride_px = 0;     // kernel
    bool pooled = false;
    u64 pf = 0, pstride = 0;      // pooling kernel over the patch grid
    approx::ApproxPoly act, act_d;
};

struct ConvPlan {
    ConvConfig cfg;
    u64 out_h = 0, out_w = 0;       // patch grid
    u64 pool_h = 0, pool_w = 0;     // pooled grid
    u64 t = 0, tp = 0;              // patches, padded
    u64 pooled_n = 0, pooled_np = 0;
    packing::PackingLayout kernel_layout;
    std::vector<double> patch_mask;     // selects patch-start slots
    LinearTransform pool_forward;       // gather + next-layer arrangement
    LinearTransform pool_backward;      // adjoint scatter
    u64 fc_input_width = 0;             // padded width feeding the FC tail
};

/// Builds the conv plan and the pooling transforms for the given tail
/// arrangement (`tail_stride`, `tail_width` describe the next FC layer's
/// row packing; zero width means plain contiguous output).
inline ConvPlan compile_conv(const ConvConfig& cfg, u64 slot_capacity, u64 tail_width,
                             u64 tail_stride) {
    FENN_REQUIRE(cfg.image_side >= cfg.f, "kernel larger than the image");
    ConvPlan plan;
    plan.cfg = cfg;
    plan.out_h = (cfg.image_side - cfg.f) / cfg.stride_px + 1;
    plan.out_w = plan.out_h;
    plan.t = plan.out_h * plan.out_w;
    plan.tp = next_power_of_two(plan.t);
    u64 block = next_power_of_two(cfg.f * cfg.f);

    packing::Matrix probe(cfg.image_side, cfg.image_side);
    auto cp = packing::pack_conv(probe, cfg.f, cfg.stride_px, cfg.pooled ? 0 : tail_width,
                                 /*next_is_fc=*/!cfg.pooled, slot_capacity);
    plan.kernel_layout = cp.kernel_layout;
    u64 bs = plan.kernel_layout.block_stride();
    u64 total = plan.kernel_layout.cipher_count * slot_capacity;
    plan.patch_mask = packing::make_mask_block_starts(bs, plan.tp, total);
    (void)block;

    if (cfg.pooled) {
        FENN_REQUIRE((plan.out_h - cfg.pf) % cfg.pstride == 0,
                     "pool kernel/stride incompatible with the patch grid");
        plan.pool_h = (plan.out_h - cfg.pf) / cfg.pstride + 1;
        plan.pool_w = plan.pool_h;
        plan.pooled_n = plan.pool_h * plan.pool_w;
        plan.pooled_np = next_power_of_two(plan.pooled_n);
        plan.fc_input_width = plan.pooled_np;
        double inv = 1.0 / static_cast<double>(cfg.pf * cfg.pf);
        u64 rs = tail_stride == 0 ? 1 : tail_stride;
        u64 reps = tail_width == 0 ? 1 : tail_width;
        std::vector<LinearTransform::Term> fwd, bwd;
        for (u64 qy = 0; qy < plan.pool_h; ++qy) {
            for (u64 qx = 0; qx < plan.pool_w; ++qx) {
                u64 q = qy * plan.pool_w + qx;
                for (u64 ky = 0; ky < cfg.pf; ++ky) {
                    for (u64 kx = 0; kx < cfg.pf; ++kx) {
                        u64 p = (qy * cfg.pstride + ky) * plan.out_w + (qx * cfg.pstride + kx);
                        // forward: pooled value q, replicated for the tail.
                        for (u64 c = 0; c < reps; ++c) {
                            u64 out_slot = q * rs + c;
                            std::vector<double> mask(slot_capacity, 0.0);
                            mask[out_slot] = inv;
                            fwd.push_back({static_cast<i64>(p * bs) - static_cast<i64>(out_slot),
                                           std::move(mask)});
                        }
                        // backward: error fans back to the patch start.
                        std::vector<double> mask(slot_capacity, 0.0);
                        mask[p * bs] = inv;
                        bwd.push_back({static_cast<i64>(q * rs) - static_cast<i64>(p * bs),
                                       std::move(mask)});
                    }
                }
            }
        }
        plan.pool_forward = LinearTransform::slot_linear(std::move(fwd));
        plan.pool_backward = LinearTransform::slot_linear(std::move(bwd));
    } else {
        plan.fc_input_width = plan.tp;
    }
    return plan;
}

/// Standalone pooling operation: refreshes the conv output while computing
/// the window means (and any declared rearrangement), and returns the
/// recorded derivative transform for the backward pass.
template <class Ctx>
std::pair<packing::PackedTensor<Ctx>, LinearTransform> avg_pool_via_bootstrap(
    const ConvPlan& plan, const packing::PackedTensor<Ctx>& l_cv,
    const EngineServices<Ctx>& svc, Counters& counters) {
    FENN_REQUIRE(plan.cfg.pooled, "no pooling declared in this plan");
    packing::PackedTensor<Ctx> out = l_cv;
    for (auto& ct : out.ciphers) {
        ct = svc.bootstrap(ct, plan.pool_forward);
        ++counters.bootstraps;
    }
    return {out, plan.pool_backward};
}

template <class Ctx>
struct ConvFcModel {
    packing::PackedTensor<Ctx> kernel; // replicated per patch block
    EncryptedModel<Ctx> tail;
    u64 iteration = 0;
};

/// Driver for conv(+pool) -> FC networks: the tail runs on the standard
/// engine with shifted packing parity; the front end handles the patch
/// multiply and the pool-embedded refreshes.
template <class Ctx>
class ConvFcEngine {
public:
    ConvFcEngine(Ctx& ctx, ConvPlan plan, CompiledNet tail_net, EngineServices<Ctx> svc)
        : ctx_(ctx),
          plan_(std::move(plan)),
          tail_(ctx, std::move(tail_net), svc),
          svc_(std::move(svc)) {}

    Engine<Ctx>& tail() { return tail_; }
    const ConvPlan& plan() const { return plan_; }

    ConvFcModel<Ctx> encrypt_model(const std::vector<double>& kernel_flat,
                                   const std::vector<packing::Matrix>& tail_weights, Rng& rng) {
        ConvFcModel<Ctx> model;
        packing::ConvPacking cp;
        cp.kernel_layout = plan_.kernel_layout;
        cp.patch_count = plan_.t;
        auto packed = packing::replicate_kernel(kernel_flat, cp);
        model.kernel = packing::encrypt_packed(ctx_, packed, rng);
        model.tail = tail_.encrypt_model(tail_weights, rng);
        return model;
    }

    packing::PackedSlots pack_image(const packing::Matrix& image) const {
        packing::Matrix probe = image;
        auto cp = packing::pack_conv(probe, plan_.cfg.f, plan_.cfg.stride_px,
                                     plan_.cfg.pooled ? 0 : tail_.net().h[1],
                                     !plan_.cfg.pooled, tail_.net().slot_capacity);
        return cp.inputs;
    }

    struct Trace {
        packing::PackedTensor<Ctx> u_conv;   // masked pre-activation, patch starts
        packing::PackedTensor<Ctx> fc_input; // pooled/replicated activation
        typename Engine<Ctx>::ForwardTrace tail_trace;
    };

    Trace forward(const packing::PackedSlots& patches, const ConvFcModel<Ctx>& model,
                  Counters& counters) {
        Trace tr;
        // Kernel x patches, window inner sum, patch-start mask.
        auto u = mul_patches(model.kernel, patches, counters);
        tail_.ensure_levels(u, 0, counters);
        u = packing::ris(ctx_, u, 1, next_power_of_two(plan_.cfg.f * plan_.cfg.f), counters);
        u = mask_patches(u, counters);
        tr.u_conv = u;
        // Activation on the patch starts.
        auto act = u;
        tail_.ensure_levels(act, plan_.cfg.act.eval_levels(), counters);
        for (auto& ct : act.ciphers)
            ct = approx::eval_poly_encrypted(ctx_, ct, plan_.cfg.act, counters);
        if (plan_.cfg.pooled) {
            // Pooling and the tail arrangement ride the refresh.
            for (auto& ct : act.ciphers) {
                ct = svc_.bootstrap(ct, plan_.pool_forward);
                ++counters.bootstraps;
            }
        } else {
            // Direct FC handoff: replicate each patch value in place.
            tail_.ensure_levels(act, 0, counters);
            act = packing::rr(ctx_, act, 1, tail_.net().h[1], counters);
        }
        tr.fc_input = act;
        tr.tail_trace = tail_.forward(nullptr, &tr.fc_input, model.tail, counters);
        return tr;
    }

    struct Gradients {
        packing::PackedTensor<Ctx> kernel;
        GradientSet<Ctx> tail;
    };

    Gradients backward(const packing::PackedSlots& patches, const ConvFcModel<Ctx>& model,
                       const Trace& tr, const std::vector<double>& packed_labels,
                       Counters& counters) {
        Gradients g;
        packing::PackedTensor<Ctx> fc_input_err;
        g.tail = tail_.backward(nullptr, &tr.fc_input, model.tail, tr.tail_trace, packed_labels,
                                counters, &fc_input_err);
        // Error back to the conv activations.
        packing::PackedTensor<Ctx> e = fc_input_err;
        if (plan_.cfg.pooled) {
            for (auto& ct : e.ciphers) {
                ct = svc_.bootstrap(ct, plan_.pool_backward);
                ++counters.bootstraps;
            }
        }
        // Through the activation derivative (masked to patch starts).
        auto dphi = tr.u_conv;
        tail_.ensure_levels(dphi, plan_.cfg.act_d.eval_levels(), counters);
        for (auto& ct : dphi.ciphers)
            ct = approx::eval_poly_encrypted(ctx_, ct, plan_.cfg.act_d, counters);
        dphi = mask_patches(dphi, counters);
        tail_.ensure_levels(e, 1, counters);
        tail_.ensure_levels(dphi, 1, counters);
        for (std::size_t c = 0; c < e.ciphers.size(); ++c) {
            e.ciphers[c] = ctx_.res(ctx_.mul_ct(e.ciphers[c], dphi.ciphers[c]));
            ++counters.mul_ct;
            ++counters.rescales;
        }
        // Tied kernel gradient: replicate the error over the window entries,
        // multiply the plaintext patches, sum across patches, re-replicate.
        tail_.ensure_levels(e, 0, counters);
        u64 block = next_power_of_two(plan_.cfg.f * plan_.cfg.f);
        u64 bs = plan_.kernel_layout.block_stride();
        auto e_rep = packing::rr(ctx_, e, 1, block, counters);
        auto grad = mul_patches_tensor(e_rep, patches, counters);
        tail_.ensure_levels(grad, 0, counters);
        grad = packing::ris(ctx_, grad, bs, plan_.tp, counters);
        grad = mask_leading_block(grad, counters);
        tail_.ensure_levels(grad, 0, counters);
        grad = packing::rr(ctx_, grad, bs, plan_.tp, counters);
        grad.layout = plan_.kernel_layout;
        g.kernel = grad;
        return g;
    }

    ConvFcModel<Ctx> apply_update(const ConvFcModel<Ctx>& model, const Gradients& agg,
                                  double eta, u64 b, u64 n, Counters& counters) {
        // One combined tensor list runs through the standard update.
        EncryptedModel<Ctx> all;
        all.iteration = model.iteration;
        all.weights.push_back(model.kernel);
        for (const auto& w : model.tail.weights) all.weights.push_back(w);
        GradientSet<Ctx> grads;
        grads.grads.push_back(agg.kernel);
        for (const auto& gw : agg.tail.grads) grads.grads.push_back(gw);
        auto updated = tail_.apply_update(all, grads, eta, b, n, counters);
        ConvFcModel<Ctx> out;
        out.iteration = updated.iteration;
        out.kernel = updated.weights[0];
        out.tail.iteration = updated.iteration;
        for (std::size_t j = 1; j < updated.weights.size(); ++j)
            out.tail.weights.push_back(updated.weights[j]);
        return out;
    }

private:
    packing::PackedTensor<Ctx> mul_patches(const packing::PackedTensor<Ctx>& kernel,
                                           const packing::PackedSlots& patches,
                                           Counters& counters) {
        packing::PackedTensor<Ctx> out = kernel;
        tail_.ensure_levels(out, 1, counters);
        for (std::size_t c = 0; c < out.ciphers.size(); ++c) {
            auto pt = ctx_.encode(patches.chunks[c % patches.chunks.size()],
                                  out.ciphers[c].level, ctx_.scale());
            out.ciphers[c] = ctx_.res(ctx_.mul_pt(out.ciphers[c], pt));
            ++counters.mul_pt;
            ++counters.rescales;
        }
        return out;
    }

    packing::PackedTensor<Ctx> mul_patches_tensor(const packing::PackedTensor<Ctx>& t,
                                                  const packing::PackedSlots& patches,
                                                  Counters& counters) {
        packing::PackedTensor<Ctx> out = t;
        tail_.ensure_levels(out, 1, counters);
        for (std::size_t c = 0; c < out.ciphers.size(); ++c) {
            auto pt = ctx_.encode(patches.chunks[c % patches.chunks.size()],
                                  out.ciphers[c].level, ctx_.scale());
            out.ciphers[c] = ctx_.res(ctx_.mul_pt(out.ciphers[c], pt));
            ++counters.mul_pt;
            ++counters.rescales;
        }
        return out;
    }

    packing::PackedTensor<Ctx> mask_patches(packing::PackedTensor<Ctx> t, Counters& counters) {
        tail_.ensure_levels(t, 1, counters);
        for (std::size_t c = 0; c < t.ciphers.size(); ++c) {
            u64 cap = tail_.net().slot_capacity;
            std::vector<double> chunk(plan_.patch_mask.begin() + static_cast<long>(c * cap),
                                      plan_.patch_mask.begin() + static_cast<long>((c + 1) * cap));
            auto pt = ctx_.encode(chunk, t.ciphers[c].level,
                                  static_cast<double>(ctx_.params().modulus_chain[t.ciphers[c].level]));
            t.ciphers[c] = ctx_.res(ctx_.mul_pt(t.ciphers[c], pt));
            ++counters.mul_pt;
            ++counters.rescales;
        }
        return t;
    }

    packing::PackedTensor<Ctx> mask_leading_block(packing::PackedTensor<Ctx> t,
                                                  Counters& counters) {
        tail_.ensure_levels(t, 1, counters);
        u64 cap = tail_.net().slot_capacity;
        auto mask = packing::make_mask_leading(plan_.cfg.f * plan_.cfg.f, cap);
        for (auto& ct : t.ciphers) {
            auto pt = ctx_.encode(mask, ct.level,
                                  static_cast<double>(ctx_.params().modulus_chain[ct.level]));
            ct = ctx_.res(ctx_.mul_pt(ct, pt));
            ++counters.mul_pt;
            ++counters.rescales;
        }
        return t;
    }

    Ctx& ctx_;
    ConvPlan plan_;
    Engine<Ctx> tail_;
    EngineServices<Ctx> svc_;
};

} // namespace fenn::nn
