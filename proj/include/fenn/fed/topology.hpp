// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "fenn/common.hpp"

namespace fenn::fed {

/// Aggregation/broadcast structure over the parties. Party 0 is the root.
struct Topology {
    enum class Kind { Star, Tree, Full };
    Kind kind = Kind::Star;
    std::size_t n = 1;
    std::vector<u64> parent;                 // parent[0] = 0 (unused)
    std::vector<std::vector<u64>> children;

    static Topology make(Kind kind, std::size_t n) {
        FENN_REQUIRE(n >= 1, "empty topology");
        Topology t;
        t.kind = kind;
        t.n = n;
        t.parent.assign(n, 0);
        t.children.assign(n, {});
        for (u64 i = 1; i < n; ++i) {
            // Binary heap order for trees; the star (and the fully connected
            // network's aggregation order) parents everyone on the root.
            u64 p = kind == Kind::Tree ? (i - 1) / 2 : 0;
            t.parent[i] = p;
            t.children[p].push_back(i);
        }
        return t;
    }

    static Kind kind_from(const std::string& s) {
        if (s == "star") return Kind::Star;
        if (s == "tree") return Kind::Tree;
        if (s == "full") return Kind::Full;
        throw Error("unknown topology: " + s);
    }

    /// Parties in leaf-to-root aggregation order (children before parents).
    std::vector<u64> post_order() const {
        std::vector<u64> out;
        std::function<void(u64)> walk = [&](u64 v) {
            for (u64 c : children[v]) walk(c);
            out.push_back(v);
        };
        walk(0);
        return out;
    }

    /// Parties in root-to-leaf broadcast order.
    std::vector<u64> pre_order() const {
        std::vector<u64> out;
        std::function<void(u64)> walk = [&](u64 v) {
            out.push_back(v);
            for (u64 c : children[v]) walk(c);
        };
        walk(0);
        return out;
    }
};

} // namespace fenn::fed
