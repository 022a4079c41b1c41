// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0
//
// In-process simulated network: FIFO edges, latency/bandwidth accounting,
// a typed whitelist that keeps raw data off the wire, and per-phase stats.

#pragma once

#include <any>
#include <deque>
#include <map>

#include "fenn/common.hpp"

namespace fenn::netsim {

enum class MsgKind {
    PublicKeyMaterial, // public keys, evaluation keys, keygen round shares
    Ciphertext,
    DecryptionShare,
    BootstrapShare,
    KeySwitchShare,
    Control,       // sizes, round markers: no payload data
    PlaintextData, // never admissible; exists so the breach is testable
};

inline bool whitelisted(MsgKind k) { return k != MsgKind::PlaintextData; }

inline const char* msg_kind_name(MsgKind k) {
    switch (k) {
        case MsgKind::PublicKeyMaterial: return "public_key_material";
        case MsgKind::Ciphertext: return "ciphertext";
        case MsgKind::DecryptionShare: return "decryption_share";
        case MsgKind::BootstrapShare: return "bootstrap_share";
        case MsgKind::KeySwitchShare: return "key_switch_share";
        case MsgKind::Control: return "control";
        case MsgKind::PlaintextData: return "plaintext_data";
    }
    return "?";
}

struct Message {
    MsgKind kind = MsgKind::Control;
    u64 bytes = 0;
    std::any payload;
};

struct EdgeStats {
    u64 messages = 0;
    u64 bytes = 0;
    double seconds = 0;
};

struct WireStats {
    u64 total_messages = 0;
    u64 total_bytes = 0;
    double total_seconds = 0;
    std::map<std::pair<u64, u64>, EdgeStats> per_edge;
    std::map<std::string, EdgeStats> per_phase;
    std::vector<std::pair<std::string, MsgKind>> log; // phase, kind

    void check_conservation() const {
        u64 edge_bytes = 0, phase_bytes = 0;
        for (const auto& [k, v] : per_edge) edge_bytes += v.bytes;
        for (const auto& [k, v] : per_phase) phase_bytes += v.bytes;
        FENN_REQUIRE(edge_bytes == total_bytes && phase_bytes == total_bytes,
                     "byte accounting out of balance");
    }
};

class NetSim {
public:
    NetSim(double delay_seconds, double bandwidth_bits_per_second)
        : delay_(delay_seconds), bandwidth_(bandwidth_bits_per_second) {}

    void set_phase(std::string phase) { phase_ = std::move(phase); }
    const std::string& phase() const { return phase_; }

    /// Queues a message on the (from -> to) edge; accounts bytes and the
    /// simulated transfer time. Non-whitelisted payloads are refused.
    double deliver(u64 from, u64 to, Message msg) {
        FENN_REQUIRE(whitelisted(msg.kind), "wire-hygiene breach: payload type not admissible");
        double seconds = delay_ + static_cast<double>(msg.bytes) * 8.0 / bandwidth_;
        auto key = std::make_pair(from, to);
        auto& e = stats_.per_edge[key];
        e.messages += 1;
        e.bytes += msg.bytes;
        e.seconds += seconds;
        auto& p = stats_.per_phase[phase_];
        p.messages += 1;
        p.bytes += msg.bytes;
        p.seconds += seconds;
        stats_.total_messages += 1;
        stats_.total_bytes += msg.bytes;
        stats_.total_seconds += seconds;
        stats_.log.emplace_back(phase_, msg.kind);
        queues_[key].push_back(std::move(msg));
        return seconds;
    }

    Message receive(u64 from, u64 to) {
        auto key = std::make_pair(from, to);
        auto it = queues_.find(key);
        FENN_REQUIRE(it != queues_.end() && !it->second.empty(), "no message queued on edge");
        Message m = std::move(it->second.front());
        it->second.pop_front();
        return m;
    }

    const WireStats& stats() const { return stats_; }
    void reset_stats() { stats_ = WireStats{}; }

private:
    double delay_;
    double bandwidth_;
    std::string phase_ = "PREPARE";
    std::map<std::pair<u64, u64>, std::deque<Message>> queues_;
    WireStats stats_;
};

} // namespace fenn::netsim
