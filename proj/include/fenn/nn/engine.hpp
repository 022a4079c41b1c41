// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0
//
// The encrypted forward/backward pipeline over alternately packed weights:
// per-layer multiply, rotate-for-inner-sum, mask, rotate-for-replication,
// approximated activation; transpose-free backpropagation; the averaged
// model update with a final refresh.

#pragma once

#include <functional>

#include "fenn/approx/eval.hpp"
#include "fenn/core/boot.hpp"
#include "fenn/nn/init.hpp"
#include "fenn/packing/tensor.hpp"

namespace fenn::nn {

using core::LinearTransform;
using packing::PackedSlots;
using packing::PackedTensor;

template <class Ctx>
struct EncryptedModel {
    std::vector<PackedTensor<Ctx>> weights;
    u64 iteration = 0;
};

template <class Ctx>
struct GradientSet {
    std::vector<PackedTensor<Ctx>> grads;
};

struct CompiledLayer {
    bool odd = true;
    u64 in_w = 0, out_w = 0;  // padded widths
    u64 stride = 0;           // block stride of this layer's weight packing
    u64 next_stride = 0;      // block stride of the next layer (0 for last)
    u64 rr_s = 0;             // forward replication span (0: none)
    packing::PackingLayout w_layout;
    std::vector<double> value_mask; // selects value slots after the inner sum
    approx::ApproxPoly act, act_d;
};

struct CompiledNet {
    std::vector<CompiledLayer> layers;
    std::vector<u64> h; // padded widths, h[0] = d
    u64 slot_capacity = 0;
    u64 label_stride = 1; // output-value spacing expected by the labels
    double eta = 0.1;

    const CompiledLayer& layer(std::size_t j) const { return layers[j - 1]; } // 1-indexed
    std::size_t depth() const { return layers.size(); }
};

/// Compiles an FC network onto layouts, masks, and fitted activations.
/// `parity_offset` shifts the row/column alternation (a convolutional front
/// end occupies the first parities).
inline CompiledNet compile_fc(const NetworkSpec& spec, u64 slot_capacity,
                              std::size_t parity_offset = 0) {
    spec.validate();
    CompiledNet net;
    net.h = packing::padded_dims(spec.widths());
    net.slot_capacity = slot_capacity;
    net.eta = spec.learning_rate;
    std::size_t l = net.h.size() - 1;
    std::size_t fc_idx = 0;
    for (const auto& ls : spec.layers) {
        FENN_REQUIRE(ls.kind == LayerSpec::Kind::Fc, "compile_fc expects FC layers only");
        std::size_t j = ++fc_idx;
        CompiledLayer cl;
        cl.odd = ((j + parity_offset) % 2 == 1);
        cl.in_w = net.h[j - 1];
        cl.out_w = net.h[j];
        cl.w_layout = packing::weight_layout(net.h, j, slot_capacity, parity_offset);
        cl.stride = cl.w_layout.block_stride();
        cl.next_stride =
            j < l ? packing::weight_layout(net.h, j + 1, slot_capacity, parity_offset)
                        .block_stride()
                  : 0;
        cl.rr_s = j < l ? net.h[j + 1] : 0;
        u64 total = cl.w_layout.cipher_count * slot_capacity;
        cl.value_mask = cl.odd
                            ? packing::make_mask_block_starts(cl.stride, cl.out_w, total)
                            : packing::make_mask_leading(cl.out_w, total);
        cl.act = approx::activation(ls.activation, approx::ActivationMode::Value, ls.degree,
                                    ls.act_lo, ls.act_hi);
        cl.act_d = approx::activation(ls.activation, approx::ActivationMode::Derivative,
                                      ls.degree, ls.act_lo, ls.act_hi);
        net.layers.push_back(std::move(cl));
    }
    net.label_stride = net.layers.back().odd ? net.layers.back().stride : 1;
    return net;
}

/// Rotation-key offsets the compiled pipeline needs (powers of two, both
/// directions, bounded by the slot capacity).
inline std::vector<i64> rotation_offsets_for(const CompiledNet& net) {
    std::vector<i64> offs;
    for (u64 p = 1; p < net.slot_capacity; p <<= 1) {
        offs.push_back(static_cast<i64>(p));
        offs.push_back(-static_cast<i64>(p));
    }
    return offs;
}

/// Collective-service hooks the engine needs from its host (tests wire these
/// to the local protocol drivers; the federation routes them over the wire).
template <class Ctx>
struct EngineServices {
    std::function<typename Ctx::Ct(const typename Ctx::Ct&, const LinearTransform&)> bootstrap;
    core::BootstrapParams boot_params{40, 20, 1};
    /// Lowest level at which the refresh gate passes (call level tau).
    u32 call_level = 1;
};

template <class Ctx>
class Engine {
public:
    Engine(Ctx& ctx, CompiledNet net, EngineServices<Ctx> services)
        : ctx_(ctx), net_(std::move(net)), svc_(std::move(services)) {}

    const CompiledNet& net() const { return net_; }
    Ctx& ctx() { return ctx_; }

    // -- model construction --------------------------------------------------

    EncryptedModel<Ctx> encrypt_model(const std::vector<packing::Matrix>& weights, Rng& rng) {
        EncryptedModel<Ctx> model;
        for (std::size_t j = 1; j <= net_.depth(); ++j) {
            auto packed = packing::flatten_weights(weights[j - 1], net_.layer(j).w_layout);
            model.weights.push_back(packing::encrypt_packed(ctx_, packed, rng));
        }
        return model;
    }

    /// Input sample packed for the first layer: replicated h_1 times at the
    /// first layer's block stride.
    PackedSlots pack_input(const std::vector<double>& x) const {
        const auto& l1 = net_.layer(1);
        return packing::prepare_inputs_strided(x, l1.out_w == 0 ? 1 : l1.w_layout.block_count,
                                               l1.stride, net_.slot_capacity);
    }

    std::vector<double> pack_labels(const std::vector<double>& y) const {
        return packing::prepare_labels_strided(y, net_.label_stride, net_.slot_capacity);
    }

    // -- forward -------------------------------------------------------------

    struct LayerTrace {
        PackedTensor<Ctx> u;   // masked (and replicated) pre-activation
        PackedTensor<Ctx> act; // post-activation, next layer's input layout
    };

    struct ForwardTrace {
        std::vector<LayerTrace> layers;
        PackedTensor<Ctx> output; // activation of the last layer, value slots
    };

    /// One forward pass. `input` is the packed plaintext sample during
    /// training; `enc_input` the encrypted variant for oblivious inference.
    ForwardTrace forward(const PackedSlots* input, const PackedTensor<Ctx>* enc_input,
                         const EncryptedModel<Ctx>& model, Counters& counters) {
        ForwardTrace trace;
        PackedTensor<Ctx> cur; // activation flowing forward (undefined for j = 1)
        for (std::size_t j = 1; j <= net_.depth(); ++j) {
            const auto& lay = net_.layer(j);
            PackedTensor<Ctx> u;
            if (j == 1 && input != nullptr) {
                u = mul_plain(model.weights[0], *input, counters);
            } else {
                const PackedTensor<Ctx>& lhs = j == 1 ? *enc_input : cur;
                u = mul_cipher(model.weights[j - 1], lhs, counters);
            }
            u = inner_sum(u, lay, counters);
            u = apply_mask(u, lay.value_mask, counters);
            if (lay.rr_s > 0) u = replicate_next(u, lay, j, counters);
            auto act = activate(u, lay.act, counters);
            trace.layers.push_back({u, act});
            cur = trace.layers.back().act;
        }
        trace.output = cur;
        return trace;
    }

    // -- backward ------------------------------------------------------------

    /// Backpropagation for one sample; returns per-layer gradients in the
    /// weight layouts. `input`/`enc_input` mirror forward's first operand.
    /// When `input_error` is given, the error propagated through the first
    /// layer's weights is emitted there (a convolutional front end consumes
    /// it).
    GradientSet<Ctx> backward(const PackedSlots* input, const PackedTensor<Ctx>* enc_input,
                              const EncryptedModel<Ctx>& model, const ForwardTrace& trace,
                              const std::vector<double>& packed_labels, Counters& counters,
                              PackedTensor<Ctx>* input_error = nullptr) {
        std::size_t l = net_.depth();
        GradientSet<Ctx> grads;
        grads.grads.resize(l);

        // E_l = y - L_l, then elementwise phi'(U_l).
        PackedTensor<Ctx> err = trace.output;
        for (std::size_t c = 0; c < err.ciphers.size(); ++c) {
            auto chunk = std::vector<double>(
                packed_labels.begin() + static_cast<long>(c * net_.slot_capacity),
                packed_labels.begin() + static_cast<long>((c + 1) * net_.slot_capacity));
            err.ciphers[c] = ctx_.sub_from_pt(chunk, trace.output.ciphers[c]);
        }
        err = hadamard_deriv(err, l, trace, counters);

        for (std::size_t j = l; j >= 1; --j) {
            const auto& lay = net_.layer(j);
            // Replicate the error for the gradient product (transpose-free).
            PackedTensor<Ctx> err_rep = replicate_error(err, lay, counters);
            // Gradient of W_j.
            if (j == 1 && input != nullptr) {
                grads.grads[0] = mul_plain(err_rep, *input, counters);
            } else {
                const PackedTensor<Ctx>& prev =
                    j == 1 ? *enc_input : trace.layers[j - 2].act;
                grads.grads[j - 1] = mul_cipher(err_rep, prev, counters);
            }
            grads.grads[j - 1].layout = lay.w_layout;
            grads.grads[j - 1].logical_rows = lay.in_w;
            grads.grads[j - 1].logical_cols = lay.out_w;
            if (j == 1) {
                if (input_error) *input_error = propagate_error(err_rep, model, lay, counters);
                break;
            }
            // E_{j-1} = E_j x W_j^T, realized without a transpose.
            PackedTensor<Ctx> p = propagate_error(err_rep, model, lay, counters, j);
            err = hadamard_deriv(p, j - 1, trace, counters);
        }
        return grads;
    }

    /// Per-party local gradient descent: per-sample forward/backward over the
    /// local batch, gradients summed sample by sample.
    GradientSet<Ctx> lgd_compute(const std::vector<PackedSlots>& batch_inputs,
                                 const std::vector<std::vector<double>>& batch_labels,
                                 const EncryptedModel<Ctx>& model, Counters& counters) {
        FENN_REQUIRE(!batch_inputs.empty(), "empty batch");
        GradientSet<Ctx> acc;
        for (std::size_t t = 0; t < batch_inputs.size(); ++t) {
            auto trace = forward(&batch_inputs[t], nullptr, model, counters);
            auto g = backward(&batch_inputs[t], nullptr, model, trace, batch_labels[t], counters);
            if (t == 0) {
                acc = std::move(g);
            } else {
                for (std::size_t j = 0; j < acc.grads.size(); ++j)
                    for (std::size_t c = 0; c < acc.grads[j].ciphers.size(); ++c)
                        acc.grads[j].ciphers[c] =
                            ctx_.add_ct(acc.grads[j].ciphers[c], g.grads[j].ciphers[c]);
            }
        }
        return acc;
    }

    // -- update --------------------------------------------------------------

    /// W += eta * grad / (b N), averaging by scale retargeting (no extra
    /// level), one alignment multiply, and a refresh back to (L, S).
    EncryptedModel<Ctx> apply_update(const EncryptedModel<Ctx>& model,
                                     const GradientSet<Ctx>& agg, double eta, u64 b, u64 n,
                                     Counters& counters) {
        double divisor = static_cast<double>(b * n) / eta;
        EncryptedModel<Ctx> out;
        out.iteration = model.iteration + 1;
        for (std::size_t j = 0; j < model.weights.size(); ++j) {
            PackedTensor<Ctx> w = model.weights[j];
            PackedTensor<Ctx> g = agg.grads[j];
            ensure_levels(g, 1, counters);
            for (std::size_t c = 0; c < w.ciphers.size(); ++c) {
                auto delta = ctx_.div_by_const(g.ciphers[c], divisor);
                delta = ctx_.at_level(delta, delta.level - 1); // SetScale's stated level
                auto sum = ctx_.add_ct(w.ciphers[c], delta);
                ++counters.mul_pt; // the alignment multiply inside the add
                w.ciphers[c] = svc_.bootstrap(sum, LinearTransform::identity());
                ++counters.bootstraps;
            }
            out.weights.push_back(std::move(w));
        }
        return out;
    }

    // -- helpers -------------------------------------------------------------

    /// Refreshes every cipher whose remaining level cannot host `need` more
    /// consumed levels above the bootstrap call level.
    void ensure_levels(PackedTensor<Ctx>& t, u32 need, Counters& counters) {
        for (auto& ct : t.ciphers) {
            if (ct.level < svc_.call_level + need) {
                ct = svc_.bootstrap(ct, LinearTransform::identity());
                ++counters.bootstraps;
            }
        }
    }

private:
    PackedTensor<Ctx> mul_plain(const PackedTensor<Ctx>& w, const PackedSlots& x,
                                Counters& counters) {
        PackedTensor<Ctx> out = w;
        ensure_levels(out, 1, counters);
        for (std::size_t c = 0; c < out.ciphers.size(); ++c) {
            const auto& chunk = x.chunks[c % x.chunks.size()];
            auto pt = ctx_.encode(chunk, out.ciphers[c].level, ctx_.scale());
            out.ciphers[c] = ctx_.res(ctx_.mul_pt(out.ciphers[c], pt));
            ++counters.mul_pt;
            ++counters.rescales;
        }
        return out;
    }

    PackedTensor<Ctx> mul_cipher(const PackedTensor<Ctx>& a, const PackedTensor<Ctx>& b,
                                 Counters& counters) {
        PackedTensor<Ctx> out = a;
        ensure_levels(out, 1, counters);
        PackedTensor<Ctx> rhs = b;
        ensure_levels(rhs, 1, counters);
        for (std::size_t c = 0; c < out.ciphers.size(); ++c) {
            const auto& other = rhs.ciphers[c % rhs.ciphers.size()];
            out.ciphers[c] = ctx_.res(ctx_.mul_ct(out.ciphers[c], other));
            ++counters.mul_ct;
            ++counters.rescales;
        }
        return out;
    }

    PackedTensor<Ctx> inner_sum(PackedTensor<Ctx> u, const CompiledLayer& lay,
                                Counters& counters) {
        ensure_levels(u, 0, counters);
        if (lay.odd) return packing::ris(ctx_, u, 1, lay.in_w, counters);
        return fold_then_ris(u, lay.stride, lay.in_w, counters);
    }

    /// Across-block inner sum: multi-cipher tensors fold first, then rotate
    /// over the blocks of the remaining cipher.
    PackedTensor<Ctx> fold_then_ris(PackedTensor<Ctx> t, u64 stride, u64 span,
                                    Counters& counters) {
        u64 blocks_per_cipher = net_.slot_capacity / stride;
        if (t.ciphers.size() > 1) {
            t = packing::fold_ciphers(ctx_, t, counters);
            span = std::min<u64>(span, blocks_per_cipher);
        }
        return packing::ris(ctx_, t, stride, span, counters);
    }

    PackedTensor<Ctx> apply_mask(PackedTensor<Ctx> u, const std::vector<double>& mask,
                                 Counters& counters) {
        ensure_levels(u, 1, counters);
        for (std::size_t c = 0; c < u.ciphers.size(); ++c) {
            std::size_t base = (c * net_.slot_capacity) % mask.size();
            std::vector<double> chunk(mask.begin() + static_cast<long>(base),
                                      mask.begin() + static_cast<long>(base + net_.slot_capacity));
            auto pt = ctx_.encode(chunk, u.ciphers[c].level,
                                  static_cast<double>(ctx_.params().modulus_chain[u.ciphers[c].level]));
            u.ciphers[c] = ctx_.res(ctx_.mul_pt(u.ciphers[c], pt));
            ++counters.mul_pt;
            ++counters.rescales;
        }
        return u;
    }

    /// Forward replication: arranges this layer's masked sums as the next
    /// layer's input (value k replicated rr_s times).
    PackedTensor<Ctx> replicate_next(PackedTensor<Ctx> u, const CompiledLayer& lay,
                                     std::size_t j, Counters& counters) {
        ensure_levels(u, 0, counters);
        if (lay.odd) {
            // Values at block starts; copies fill the block in place.
            return packing::rr(ctx_, u, 1, lay.rr_s, counters);
        }
        // Contiguous leading block replicated at the next layer's stride,
        // possibly across several ciphers.
        const auto& next = net_.layer(j + 1);
        u64 blocks_per_cipher = net_.slot_capacity / next.stride;
        u64 within = std::min<u64>(lay.rr_s, blocks_per_cipher);
        auto rep = packing::rr(ctx_, u, next.stride, within, counters);
        u64 want = next.w_layout.cipher_count;
        if (want > 1) rep = packing::broadcast_cipher(rep, want);
        return rep;
    }

    PackedTensor<Ctx> activate(const PackedTensor<Ctx>& u, const approx::ApproxPoly& act,
                               Counters& counters) {
        PackedTensor<Ctx> out = u;
        ensure_levels(out, act.eval_levels(), counters);
        for (auto& ct : out.ciphers) ct = approx::eval_poly_encrypted(ctx_, ct, act, counters);
        return out;
    }

    /// E = E (.) phi'(U_j). The derivative is always masked to the layer's
    /// value slots: phi'(0) garbage in the gap and partial-sum slots would
    /// otherwise survive into the replication adds.
    PackedTensor<Ctx> hadamard_deriv(PackedTensor<Ctx> e, std::size_t j,
                                     const ForwardTrace& trace, Counters& counters) {
        const auto& lay = net_.layer(j);
        PackedTensor<Ctx> dphi = trace.layers[j - 1].u;
        ensure_levels(dphi, lay.act_d.eval_levels(), counters);
        for (auto& ct : dphi.ciphers)
            ct = approx::eval_poly_encrypted(ctx_, ct, lay.act_d, counters);
        dphi = apply_mask(dphi, lay.value_mask, counters);
        ensure_levels(e, 1, counters);
        ensure_levels(dphi, 1, counters);
        for (std::size_t c = 0; c < e.ciphers.size(); ++c) {
            e.ciphers[c] = ctx_.res(ctx_.mul_ct(e.ciphers[c],
                                                dphi.ciphers[c % dphi.ciphers.size()]));
            ++counters.mul_ct;
            ++counters.rescales;
        }
        return e;
    }

    /// E_{j-1} = E_j x W_j^T without a transpose: multiply the replicated
    /// error against the packed weights, then an inner sum over the output
    /// width.
    PackedTensor<Ctx> propagate_error(const PackedTensor<Ctx>& err_rep,
                                      const EncryptedModel<Ctx>& model, const CompiledLayer& lay,
                                      Counters& counters, std::size_t j = 1) {
        PackedTensor<Ctx> p =
            mul_cipher(err_rep, model.weights[j - 1], counters);
        if (lay.odd) {
            p = fold_then_ris(p, lay.stride, lay.out_w, counters);
        } else {
            ensure_levels(p, 0, counters);
            p = packing::ris(ctx_, p, 1, lay.out_w, counters);
        }
        return p;
    }

    /// Replication of the layer error for the gradient product.
    PackedTensor<Ctx> replicate_error(PackedTensor<Ctx> e, const CompiledLayer& lay,
                                      Counters& counters) {
        ensure_levels(e, 0, counters);
        if (lay.odd) {
            // Values at block starts; fill each block with in_w copies.
            return packing::rr(ctx_, e, 1, lay.in_w, counters);
        }
        // Contiguous error block: replicate at the row stride across blocks
        // (and ciphers) to meet the row-packed weights.
        u64 blocks_per_cipher = net_.slot_capacity / lay.stride;
        u64 within = std::min<u64>(lay.in_w, blocks_per_cipher);
        auto rep = packing::rr(ctx_, e, lay.stride, within, counters);
        u64 want = lay.w_layout.cipher_count;
        if (want > 1) rep = packing::broadcast_cipher(rep, want);
        return rep;
    }

    Ctx& ctx_;
    CompiledNet net_;
    EngineServices<Ctx> svc_;
};

} // namespace fenn::nn
