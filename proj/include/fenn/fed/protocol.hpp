// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0
//
// The collective training protocol: PREPARE (keys, collective normalization,
// packing, root weight initialization), then per-iteration MAP (model down
// the tree, local gradient descent), COMBINE (gradient aggregation up the
// tree), and REDUCE (averaged update plus refresh at the root).

#pragma once

#include <sstream>

#include "fenn/core/backend_ref.hpp"
#include "fenn/core/serialize.hpp"
#include "fenn/fed/topology.hpp"
#include "fenn/netsim/csv.hpp"
#include "fenn/netsim/net.hpp"
#include "fenn/nn/engine.hpp"

namespace fenn::fed {

using netsim::Dataset;
using netsim::Message;
using netsim::MsgKind;
using netsim::NetSim;

template <class Ctx>
struct PartyState {
    u64 id = 0;
    Dataset shard; // raw local rows; never serialized onto the wire
    std::vector<packing::PackedSlots> inputs;
    std::vector<std::vector<double>> labels;
};

struct IterationMetrics {
    u64 iteration = 0;
    double holdout_loss = 0;
    double holdout_accuracy = 0;
    Counters counters;
    u64 wire_bytes = 0;

    std::string to_line() const {
        std::ostringstream os;
        os << "{\"iter\":" << iteration << ",\"loss\":" << holdout_loss
           << ",\"accuracy\":" << holdout_accuracy << ",\"rotations\":" << counters.rotations
           << ",\"mul_ct\":" << counters.mul_ct << ",\"mul_pt\":" << counters.mul_pt
           << ",\"bootstraps\":" << counters.bootstraps << ",\"bytes\":" << wire_bytes << "}";
        return os.str();
    }
};

template <class Ctx>
struct TrainResult {
    nn::EncryptedModel<Ctx> model;
    std::vector<IterationMetrics> metrics;
    Counters counters; // whole-run totals
};

/// Normalization statistics agreed during PREPARE.
struct FeatureStats {
    std::vector<double> mean, stdev;

    std::vector<double> apply(const std::vector<double>& x) const {
        std::vector<double> out(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean[i]) / stdev[i];
        return out;
    }
};

template <class Ctx>
class Federation {
public:
    Federation(Ctx& ctx, const nn::NetworkSpec& spec, NetSim& sim, Topology topo,
               std::vector<Dataset> shards, core::BootstrapParams bp, u64 seed)
        : ctx_(ctx),
          spec_(spec),
          net_(nn::compile_fc(spec, ctx.slots())),
          sim_(sim),
          topo_(std::move(topo)),
          bp_(bp),
          seed_(seed),
          engine_(ctx_, net_, make_services()) {
        bp_.n_parties = topo_.n;
        boot_seed_ = seed ^ 0x0b007ULL;
        FENN_REQUIRE(shards.size() == topo_.n, "one shard per party required");
        for (u64 i = 0; i < topo_.n; ++i) {
            PartyState<Ctx> p;
            p.id = i;
            p.shard = std::move(shards[i]);
            FENN_REQUIRE(!p.shard.features.empty(), "empty shard");
            parties_.push_back(std::move(p));
        }
        if constexpr (std::is_same_v<Ctx, core::RealContext>) {
            shares_ = core::sec_key_gen(ctx_.ring(), topo_.n, seed_ ^ 0x5ecdefULL);
        }
    }

    nn::Engine<Ctx>& engine() { return engine_; }
    const std::vector<PartyState<Ctx>>& parties() const { return parties_; }
    const FeatureStats& stats() const { return stats_; }
    const std::vector<core::SecretShare>& shares() const { return shares_; }

    // ----------------------------------------------------------------------
    // PREPARE
    // ----------------------------------------------------------------------
    nn::EncryptedModel<Ctx> prepare_phase(u64 weight_seed) {
        sim_.set_phase("PREPARE");
        run_key_generation();
        collective_normalization();
        pack_local_data();
        // The root initializes and encrypts the starting weights.
        auto weights = nn::init_weights_plain(spec_, weight_seed);
        Rng rng(seed_ ^ 0xabcdULL);
        return engine_.encrypt_model(weights, rng);
    }

    // ----------------------------------------------------------------------
    // MAP: model down the tree, local gradient descent at each party.
    // ----------------------------------------------------------------------
    std::vector<nn::GradientSet<Ctx>> map_phase(const nn::EncryptedModel<Ctx>& model, u64 iter,
                                                Counters& counters,
                                                const std::vector<bool>* participating = nullptr) {
        sim_.set_phase("MAP");
        // Broadcast: every tree edge carries the z model ciphertexts once.
        for (u64 v : topo_.pre_order()) {
            if (v == 0) continue;
            for (const auto& w : model.weights)
                for (const auto& ct : w.ciphers)
                    sim_.deliver(topo_.parent[v], v,
                                 {MsgKind::Ciphertext, ct_bytes(ct), {}});
        }
        std::vector<nn::GradientSet<Ctx>> grads(topo_.n);
        for (u64 i = 0; i < topo_.n; ++i) {
            if (participating && !(*participating)[i]) continue;
            current_party_ = i;
            Rng batch_rng(seed_ ^ (0x1000 + iter * 131 + i));
            auto [inputs, labels] = local_batch(parties_[i], batch_rng);
            grads[i] = engine_.lgd_compute(inputs, labels, model, counters);
        }
        current_party_ = 0;
        return grads;
    }

    // ----------------------------------------------------------------------
    // COMBINE: homomorphic sums up the tree; the root holds the total.
    // ----------------------------------------------------------------------
    nn::GradientSet<Ctx> combine_phase(std::vector<nn::GradientSet<Ctx>>& grads,
                                       Counters& counters,
                                       const std::vector<bool>* participating = nullptr) {
        sim_.set_phase("COMBINE");
        for (u64 i = 0; i < topo_.n; ++i) {
            bool ok = !participating || (*participating)[i];
            FENN_REQUIRE(ok && !grads[i].grads.empty(),
                         "synchronous round aborted: party missing from COMBINE");
        }
        for (u64 v : topo_.post_order()) {
            if (v == 0) continue;
            u64 p = topo_.parent[v];
            for (std::size_t j = 0; j < grads[v].grads.size(); ++j)
                for (std::size_t c = 0; c < grads[v].grads[j].ciphers.size(); ++c) {
                    sim_.deliver(v, p,
                                 {MsgKind::Ciphertext, ct_bytes(grads[v].grads[j].ciphers[c]), {}});
                    grads[p].grads[j].ciphers[c] =
                        ctx_.add_ct(grads[p].grads[j].ciphers[c], grads[v].grads[j].ciphers[c]);
                    ++counters.additions;
                }
        }
        return std::move(grads[0]);
    }

    // ----------------------------------------------------------------------
    // REDUCE: averaged update at the root, refresh back to (L, S).
    // ----------------------------------------------------------------------
    nn::EncryptedModel<Ctx> reduce_phase(const nn::EncryptedModel<Ctx>& model,
                                         const nn::GradientSet<Ctx>& agg, u64 b,
                                         Counters& counters) {
        sim_.set_phase("REDUCE");
        current_party_ = 0;
        return engine_.apply_update(model, agg, net_.eta, b, topo_.n, counters);
    }

    // ----------------------------------------------------------------------
    // Full training loop.
    // ----------------------------------------------------------------------
    TrainResult<Ctx> train(u64 m, u64 b, u64 weight_seed, const Dataset* holdout = nullptr) {
        set_local_batch(b);
        TrainResult<Ctx> out;
        out.model = prepare_phase(weight_seed);
        for (u64 k = 0; k < m; ++k) {
            Counters iter_counters;
            u64 bytes_before = sim_.stats().total_bytes;
            auto grads = map_phase(out.model, k, iter_counters);
            auto agg = combine_phase(grads, iter_counters);
            out.model = reduce_phase(out.model, agg, b, iter_counters);
            IterationMetrics met;
            met.iteration = k + 1;
            met.counters = iter_counters;
            met.wire_bytes = sim_.stats().total_bytes - bytes_before;
            if (holdout) evaluate(out.model, *holdout, met);
            out.metrics.push_back(met);
            out.counters += iter_counters;
        }
        return out;
    }

    // ----------------------------------------------------------------------
    // Oblivious inference: forward with a ciphertext first multiply, then a
    // collective switch to the querier's key.
    // ----------------------------------------------------------------------
    core::Ciphertext predict_oblivious(const nn::EncryptedModel<core::RealContext>& model,
                                       const std::vector<double>& x_query,
                                       const core::PublicKey& querier_pk, u64 run_party,
                                       Counters& counters)
        requires std::is_same_v<Ctx, core::RealContext>
    {
        current_party_ = run_party;
        Rng rng(seed_ ^ 0xeefULL);
        auto normalized = stats_.mean.empty() ? x_query : stats_.apply(x_query);
        auto packed = engine_.pack_input(normalized);
        packing::PackedTensor<core::RealContext> enc;
        enc.layout = packed.layout;
        for (const auto& chunk : packed.chunks)
            enc.ciphers.push_back(ctx_.encrypt(ctx_.encode(chunk), rng));
        auto trace = engine_.forward(nullptr, &enc, model, counters);
        // Collective key switch of the prediction to the querier.
        sim_.set_phase("key-switch");
        const auto& ct = trace.output.ciphers[0];
        std::vector<core::RealContext::KeySwitchShare> shares;
        for (u64 i = 0; i < topo_.n; ++i) {
            if (i != run_party)
                sim_.deliver(run_party, i, {MsgKind::Ciphertext, ct_bytes(ct), {}});
            Rng prng(seed_ ^ (0x77000 + i));
            auto sh = ctx_.d_key_switch_share(ct, shares_[i], querier_pk, prng);
            if (i != run_party)
                sim_.deliver(i, run_party, {MsgKind::KeySwitchShare, ks_share_bytes(ct), {}});
            shares.push_back(std::move(sh));
        }
        return ctx_.d_key_switch_finish(ct, shares);
    }

    /// Simulator telemetry: decrypts the model outside the protocol.
    std::vector<packing::Matrix> unpack_model(const nn::EncryptedModel<Ctx>& model) {
        std::vector<packing::Matrix> out;
        for (const auto& w : model.weights) {
            auto dec = packing::decrypt_packed<Ctx>(ctx_, w, [&](const typename Ctx::Ct& ct) {
                return decrypt_slots(ct);
            });
            out.push_back(packing::unpack_weights(dec));
        }
        return out;
    }

    void evaluate(const nn::EncryptedModel<Ctx>& model, const Dataset& holdout,
                  IterationMetrics& met) {
        auto weights = unpack_model(model);
        double loss = 0;
        std::size_t correct = 0;
        for (std::size_t i = 0; i < holdout.size(); ++i) {
            auto x = stats_.mean.empty() ? holdout.features[i] : stats_.apply(holdout.features[i]);
            auto pred = plain_forward(weights, x);
            const auto& y = holdout.labels[i];
            std::size_t arg = 0, yarg = 0;
            for (std::size_t k = 0; k < y.size(); ++k) {
                loss += (pred[k] - y[k]) * (pred[k] - y[k]);
                if (pred[k] > pred[arg]) arg = k;
                if (y[k] > y[yarg]) yarg = k;
            }
            if (arg == yarg) ++correct;
        }
        met.holdout_loss = loss / static_cast<double>(holdout.size());
        met.holdout_accuracy = static_cast<double>(correct) / static_cast<double>(holdout.size());
    }

    /// Plain forward with the network's approximated activations (telemetry
    /// and baselines).
    std::vector<double> plain_forward(const std::vector<packing::Matrix>& weights,
                                      const std::vector<double>& x) const {
        std::vector<double> cur(x);
        cur.resize(net_.h[0], 0.0);
        for (std::size_t j = 1; j < net_.h.size(); ++j) {
            std::vector<double> u(net_.h[j], 0.0);
            for (u64 k = 0; k < net_.h[j]; ++k)
                for (u64 i = 0; i < net_.h[j - 1]; ++i) u[k] += weights[j - 1].at(i, k) * cur[i];
            for (u64 k = 0; k < net_.h[j]; ++k) u[k] = net_.layer(j).act.eval(u[k]);
            cur = u;
        }
        return cur;
    }

private:
    u64 ct_bytes(const typename Ctx::Ct& ct) const {
        return core::ciphertext_wire_bytes(ctx_.params().ring_dim, ct.level);
    }

    u64 boot_share_bytes(u32 call_level) const {
        return core::bootstrap_share_wire_bytes(ctx_.params().ring_dim, call_level,
                                                ctx_.top_level());
    }

    u64 ks_share_bytes(const typename Ctx::Ct& ct) const {
        return 10 + 2 * core::poly_wire_bytes(ctx_.params().ring_dim, ct.level + 1, false);
    }

    std::vector<double> decrypt_slots(const typename Ctx::Ct& ct) {
        if constexpr (std::is_same_v<Ctx, core::RealContext>) {
            return ctx_.decode(ctx_.d_decrypt(ct, shares_, seed_ ^ 0x9999ULL));
        } else {
            return ctx_.decode(ctx_.d_decrypt(ct, topo_.n, topo_.n));
        }
    }

    /// One collective refresh round over the wire: the holder circulates the
    /// ciphertext, every party returns a share.
    typename Ctx::Ct boot_round(const typename Ctx::Ct& c, const nn::LinearTransform& phi) {
        std::string saved = sim_.phase();
        sim_.set_phase("bootstrap");
        u64 holder = current_party_;
        u32 call = core::bootstrap_call_level(ctx_.params().modulus_chain, topo_.n,
                                              bp_.delta_bits, bp_.lambda_bits);
        auto at_call = Ctx::at_level(c, std::min<u32>(c.level, call));
        for (u64 i = 0; i < topo_.n; ++i) {
            if (i == holder) continue;
            sim_.deliver(holder, i, {MsgKind::Ciphertext, ct_bytes(at_call), {}});
            sim_.deliver(i, holder, {MsgKind::BootstrapShare, boot_share_bytes(at_call.level), {}});
        }
        typename Ctx::Ct out;
        if constexpr (std::is_same_v<Ctx, core::RealContext>) {
            out = core::d_bootstrap_alt(ctx_, at_call, phi, shares_, bp_, boot_seed_++);
        } else {
            out = ctx_.d_bootstrap_alt(at_call, phi, bp_);
        }
        sim_.set_phase(saved);
        return out;
    }

    nn::EngineServices<Ctx> make_services() {
        nn::EngineServices<Ctx> svc;
        svc.boot_params = bp_;
        svc.boot_params.n_parties = topo_.n;
        svc.call_level = core::bootstrap_call_level(ctx_.params().modulus_chain, topo_.n,
                                                    bp_.delta_bits, bp_.lambda_bits);
        svc.bootstrap = [this](const typename Ctx::Ct& c, const nn::LinearTransform& phi) {
            return boot_round(c, phi);
        };
        return svc;
    }

    void run_key_generation() {
        // Two keygen rounds through the root; sizes from the polynomial wire
        // format. The cryptographic outputs install into the shared context.
        u64 n = ctx_.params().ring_dim;
        std::size_t digits = ctx_.params().modulus_chain.size();
        std::size_t galois = 2 * log2_exact(ctx_.params().ring_dim / 2);
        u64 r1 = core::poly_wire_bytes(n, digits, false) +
                 2 * digits * core::poly_wire_bytes(n, digits, true) +
                 galois * digits * core::poly_wire_bytes(n, digits, true);
        u64 r2 = digits * core::poly_wire_bytes(n, digits, true);
        for (u64 i = 1; i < topo_.n; ++i) {
            sim_.deliver(i, 0, {MsgKind::PublicKeyMaterial, r1, {}});
            sim_.deliver(0, i, {MsgKind::PublicKeyMaterial, r1, {}});
            sim_.deliver(i, 0, {MsgKind::PublicKeyMaterial, r2, {}});
            sim_.deliver(0, i, {MsgKind::PublicKeyMaterial, r2, {}});
        }
        if constexpr (std::is_same_v<Ctx, core::RealContext>) {
            if (!ctx_.has_keys()) {
                nn::CompiledNet tmp = net_;
                ctx_.set_keys(core::d_key_gen(ctx_.ring(), shares_,
                                              nn::rotation_offsets_for(tmp), seed_ ^ 0xc25ULL,
                                              seed_ ^ 0xd00dULL));
            }
        }
    }

    void collective_normalization() {
        u64 d = parties_[0].shard.dim();
        FENN_REQUIRE(2 * d + 1 <= ctx_.slots() * 1ULL,
                     "feature moments exceed one ciphertext; split unsupported");
        // Each party encrypts [count, sums..., sums of squares...].
        Rng rng(seed_ ^ 0xfeedULL);
        std::vector<typename Ctx::Ct> cts;
        for (auto& p : parties_) {
            std::vector<double> m(2 * d + 1, 0.0);
            m[0] = static_cast<double>(p.shard.size());
            for (const auto& row : p.shard.features)
                for (u64 i = 0; i < d; ++i) {
                    m[1 + i] += row[i];
                    m[1 + d + i] += row[i] * row[i];
                }
            cts.push_back(ctx_.encrypt(ctx_.encode(m), rng));
        }
        // Sum up the tree.
        for (u64 v : topo_.post_order()) {
            if (v == 0) continue;
            sim_.deliver(v, topo_.parent[v], {MsgKind::Ciphertext, ct_bytes(cts[v]), {}});
            cts[topo_.parent[v]] = ctx_.add_ct(cts[topo_.parent[v]], cts[v]);
        }
        // Broadcast the aggregate, then a decryption-share round so every
        // party recovers the global statistics without plaintext on the wire.
        for (u64 v : topo_.pre_order())
            if (v != 0) sim_.deliver(topo_.parent[v], v, {MsgKind::Ciphertext, ct_bytes(cts[0]), {}});
        for (u64 i = 0; i < topo_.n; ++i)
            for (u64 jj = 0; jj < topo_.n; ++jj)
                if (i != jj)
                    sim_.deliver(i, jj,
                                 {MsgKind::DecryptionShare,
                                  core::poly_wire_bytes(ctx_.params().ring_dim,
                                                        cts[0].level + 1, false),
                                  {}});
        auto stats = decrypt_slots(cts[0]);
        double count = stats[0];
        stats_.mean.resize(d);
        stats_.stdev.resize(d);
        for (u64 i = 0; i < d; ++i) {
            double mean = stats[1 + i] / count;
            double var = stats[1 + d + i] / count - mean * mean;
            stats_.mean[i] = mean;
            stats_.stdev[i] = std::sqrt(std::max(var, 1e-9)) * 2.0; // keep |z| modest
        }
    }

    void pack_local_data() {
        for (auto& p : parties_) {
            p.inputs.clear();
            p.labels.clear();
            for (std::size_t i = 0; i < p.shard.size(); ++i) {
                p.inputs.push_back(engine_.pack_input(stats_.apply(p.shard.features[i])));
                p.labels.push_back(engine_.pack_labels(p.shard.labels[i]));
            }
        }
    }

    std::pair<std::vector<packing::PackedSlots>, std::vector<std::vector<double>>> local_batch(
        const PartyState<Ctx>& p, Rng& rng) {
        std::vector<packing::PackedSlots> xs;
        std::vector<std::vector<double>> ys;
        if (batch_size_ >= p.inputs.size()) {
            // Full local batch, fixed order (deterministic oracle runs).
            return {p.inputs, p.labels};
        }
        for (u64 t = 0; t < batch_size_; ++t) {
            u64 idx = rng.uniform(p.inputs.size());
            xs.push_back(p.inputs[idx]);
            ys.push_back(p.labels[idx]);
        }
        return {xs, ys};
    }

public:
    void set_local_batch(u64 b) { batch_size_ = b; }

private:
    Ctx& ctx_;
    nn::NetworkSpec spec_;
    nn::CompiledNet net_;
    NetSim& sim_;
    Topology topo_;
    core::BootstrapParams bp_;
    u64 seed_;
    nn::Engine<Ctx> engine_;
    std::vector<PartyState<Ctx>> parties_;
    std::vector<core::SecretShare> shares_;
    FeatureStats stats_;
    u64 current_party_ = 0;
    u64 boot_seed_ = 0;
    u64 batch_size_ = 1;
};

} // namespace fenn::fed
