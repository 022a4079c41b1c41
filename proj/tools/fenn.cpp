// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line entry points: train, predict, plan-params, bench.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fenn/fed/protocol.hpp"
#include "fenn/netsim/config.hpp"
#include "fenn/plan/optimizer.hpp"

using namespace fenn;
namespace fs = std::filesystem;

namespace {

struct CommonArgs {
    std::string config_path;
    u64 seed = 0;
    bool seed_set = false;
    std::string backend;
    bool toy = false;
    std::string out_dir = ".";
};

netsim::RunConfig load_and_override(const CommonArgs& args) {
    auto cfg = netsim::load_config(args.config_path);
    if (args.seed_set) cfg.seed = args.seed;
    if (!args.backend.empty()) cfg.backend = args.backend;
    if (args.toy) cfg.toy = true;
    return cfg;
}

netsim::Dataset load_dataset(const netsim::RunConfig& cfg) {
    if (!cfg.csv_path.empty()) return netsim::load_csv(cfg.csv_path);
    if (cfg.synthetic == "surrogate9")
        return netsim::synthetic_surrogate9(cfg.synthetic_count, cfg.seed + 1);
    return netsim::synthetic_separable(cfg.synthetic_dim, cfg.synthetic_count, cfg.seed + 1);
}

struct SplitData {
    netsim::Dataset train, holdout;
};

SplitData split_holdout(const netsim::Dataset& all, double fraction) {
    SplitData out;
    std::size_t holdout_n = static_cast<std::size_t>(all.size() * fraction);
    for (std::size_t i = 0; i < all.size(); ++i) {
        auto& dst = i + holdout_n < all.size() ? out.train : out.holdout;
        dst.features.push_back(all.features[i]);
        dst.labels.push_back(all.labels[i]);
    }
    return out;
}

template <class Ctx>
int run_train(const netsim::RunConfig& cfg, const std::string& out_dir) {
    Ctx ctx(cfg.ring_params());
    netsim::NetSim sim(cfg.delay_ms * 1e-3, cfg.bandwidth_gbps * 1e9);
    auto all = load_dataset(cfg);
    auto split = split_holdout(all, cfg.holdout_fraction);
    auto shards = netsim::shard_evenly(split.train, cfg.n_parties, cfg.seed + 2);
    fed::Federation<Ctx> fed(ctx, cfg.model, sim,
                             fed::Topology::make(fed::Topology::kind_from(cfg.topology),
                                                 cfg.n_parties),
                             std::move(shards),
                             core::BootstrapParams{cfg.delta_bits, cfg.mask_lambda, cfg.n_parties},
                             cfg.seed);
    auto result =
        fed.train(cfg.model.global_iters, cfg.model.local_batch, cfg.seed + 3, &split.holdout);

    fs::create_directories(out_dir);
    {
        std::ofstream metrics(out_dir + "/metrics.jsonl");
        for (const auto& m : result.metrics) metrics << m.to_line() << "\n";
    }
    {
        nlohmann::json st;
        st["total_bytes"] = sim.stats().total_bytes;
        st["total_messages"] = sim.stats().total_messages;
        st["total_seconds"] = sim.stats().total_seconds;
        for (const auto& [phase, es] : sim.stats().per_phase)
            st["per_phase"][phase] = {{"bytes", es.bytes},
                                      {"messages", es.messages},
                                      {"seconds", es.seconds}};
        std::ofstream stats(out_dir + "/wire_stats.json");
        stats << st.dump(2) << "\n";
    }
    {
        // Simulator telemetry: the plaintext matrices for inspection and
        // baselines. The protocol itself never decrypts the model.
        auto weights = fed.unpack_model(result.model);
        nlohmann::json jm;
        jm["iteration"] = result.model.iteration;
        for (const auto& w : weights)
            jm["weights"].push_back({{"rows", w.rows}, {"cols", w.cols}, {"data", w.data}});
        jm["normalization"] = {{"mean", fed.stats().mean}, {"stdev", fed.stats().stdev}};
        std::ofstream model(out_dir + "/model.json");
        model << jm.dump(2) << "\n";
    }
    if (!result.metrics.empty()) {
        const auto& last = result.metrics.back();
        std::cout << "trained " << cfg.model.global_iters << " iterations; holdout loss "
                  << last.holdout_loss << ", accuracy " << last.holdout_accuracy << "\n";
    } else {
        std::cout << "trained 0 iterations; initial model written\n";
    }
    std::cout << "wrote " << out_dir << "/metrics.jsonl, wire_stats.json, model.json\n";
    return 0;
}

int run_predict(const netsim::RunConfig& cfg, const std::string& query_csv, u64 querier_seed) {
    FENN_REQUIRE(cfg.backend == "real", "oblivious prediction needs the lattice backend");
    core::RealContext ctx(cfg.ring_params());
    netsim::NetSim sim(cfg.delay_ms * 1e-3, cfg.bandwidth_gbps * 1e9);
    auto all = load_dataset(cfg);
    auto split = split_holdout(all, cfg.holdout_fraction);
    auto shards = netsim::shard_evenly(split.train, cfg.n_parties, cfg.seed + 2);
    fed::Federation<core::RealContext> fed(
        ctx, cfg.model, sim,
        fed::Topology::make(fed::Topology::kind_from(cfg.topology), cfg.n_parties),
        std::move(shards),
        core::BootstrapParams{cfg.delta_bits, cfg.mask_lambda, cfg.n_parties}, cfg.seed);
    auto result = fed.train(cfg.model.global_iters, cfg.model.local_batch, cfg.seed + 3);

    std::vector<double> x;
    std::stringstream ss(query_csv);
    std::string cell;
    while (std::getline(ss, cell, ',')) x.push_back(std::stod(cell));

    auto qshare = core::sec_key_gen(ctx.ring(), 1, querier_seed);
    auto qkeys = core::d_key_gen(ctx.ring(), qshare, {}, querier_seed + 1, querier_seed + 2);
    Counters c;
    auto switched = fed.predict_oblivious(result.model, x, qkeys.pk, 0, c);

    core::RealContext qctx(cfg.ring_params());
    qctx.set_keys(qkeys);
    auto plain = qctx.decode(qctx.d_decrypt(switched, qshare, querier_seed + 3));
    u64 stride = fed.engine().net().label_stride;
    u64 classes = fed.engine().net().h.back();
    std::cout << "prediction:";
    for (u64 k = 0; k < classes; ++k) std::cout << " " << plain[k * stride];
    std::cout << "\n";
    return 0;
}

int run_plan(const netsim::RunConfig& cfg, const std::string& out_path) {
    plan::SelectOptions opt;
    opt.scale_bits = cfg.scale_bits;
    opt.security = cfg.security;
    opt.mask_lambda = cfg.mask_lambda;
    opt.toy = cfg.toy;
    opt.m = cfg.model.global_iters;
    opt.b = cfg.model.local_batch;
    auto plan = plan::select_params(cfg.model, cfg.n_parties, opt);
    plan.estimated_bytes_per_iter = plan::comm_estimate(
        cfg.model, cfg.ring_params(),
        core::BootstrapParams{plan.delta_bits, plan.mask_lambda, cfg.n_parties},
        cfg.model.local_batch, cfg.n_parties);
    auto rep = plan::check_plan(plan, cfg.n_parties, opt.toy);
    std::cout << "selected ring 2^" << log2_exact(plan.ring_dim) << ", levels " << plan.levels
              << ", scale 2^" << plan.scale_bits << ", call level " << plan.tau << "\n";
    std::cout << "bootstraps per pass " << plan.bootstrap_per_pass << ", estimated cost "
              << plan.estimated_cost << "\n";
    std::cout << "constraint check: " << (rep.feasible ? "feasible" : "INFEASIBLE") << "\n";
    for (const auto& v : rep.violations) std::cout << "  violation: " << v << "\n";
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        out << plan.to_json().dump(2) << "\n";
        std::cout << "wrote " << out_path << "\n";
    }
    return rep.feasible ? 0 : 1;
}

int run_bench(const netsim::RunConfig& cfg) {
    auto params = cfg.ring_params();
    core::BootstrapParams bp{cfg.delta_bits, cfg.mask_lambda, cfg.n_parties};
    auto counts =
        plan::predict_iteration(cfg.model, params, bp, cfg.model.local_batch, cfg.n_parties);
    u64 est = plan::comm_estimate(cfg.model, params, bp, cfg.model.local_batch, cfg.n_parties);
    auto h = packing::padded_dims(cfg.model.widths());
    std::cout << "operation counts per global iteration (N=" << cfg.n_parties
              << ", b=" << cfg.model.local_batch << ")\n";
    std::cout << "  rotations        " << counts.per_iteration.rotations << "\n";
    std::cout << "  key switches     " << counts.per_iteration.key_switches << "\n";
    std::cout << "  mul_ct           " << counts.per_iteration.mul_ct << "\n";
    std::cout << "  mul_pt           " << counts.per_iteration.mul_pt << "\n";
    std::cout << "  bootstraps       " << counts.per_iteration.bootstraps << "\n";
    std::cout << "  est. bytes/iter  " << est << "\n";
    std::cout << "per-layer forward rotation budget (log2 in + log2 next):\n";
    for (std::size_t i = 1; i + 1 < h.size(); ++i)
        std::cout << "  layer " << i << ": " << log2_exact(h[i - 1]) + log2_exact(h[i + 1])
                  << "\n";
    std::cout << "  layer " << h.size() - 1 << ": " << log2_exact(h[h.size() - 2])
              << " (labels pre-arranged)\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"federated encrypted neural-network training simulator"};
    app.require_subcommand(1);

    CommonArgs args;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", args.config_path, "run configuration (JSON)")->required();
        sub->add_option("--seed", args.seed, "override the config seed")
            ->each([&](const std::string&) { args.seed_set = true; });
        sub->add_option("--backend", args.backend, "real | reference");
        sub->add_flag("--toy", args.toy, "force toy-mode parameters");
    };

    auto* train = app.add_subcommand("train", "run the collective training protocol");
    add_common(train);
    train->add_option("--out-dir", args.out_dir, "output directory");

    std::string query;
    u64 querier_seed = 4242;
    auto* predict = app.add_subcommand("predict", "oblivious inference for a querier");
    add_common(predict);
    predict->add_option("--query", query, "comma-separated feature row")->required();
    predict->add_option("--querier-seed", querier_seed, "querier key seed");

    std::string plan_out;
    auto* planc = app.add_subcommand("plan-params", "select cryptographic parameters");
    add_common(planc);
    planc->add_option("--out", plan_out, "write the plan as JSON");

    auto* bench = app.add_subcommand("bench", "emit operation-count tables");
    add_common(bench);

    CLI11_PARSE(app, argc, argv);

    try {
        auto cfg = load_and_override(args);
        if (train->parsed()) {
            if (cfg.backend == "real") return run_train<core::RealContext>(cfg, args.out_dir);
            return run_train<core::RefContext>(cfg, args.out_dir);
        }
        if (predict->parsed()) return run_predict(cfg, query, querier_seed);
        if (planc->parsed()) return run_plan(cfg, plan_out);
        if (bench->parsed()) return run_bench(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
