// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0
//
// Dataset ingestion: rectangular numeric CSV with trailing label column,
// one-hot labels, seeded even sharding, and bundled synthetic generators.

#pragma once

#include <fstream>
#include <sstream>

#include "fenn/common.hpp"

namespace fenn::netsim {

struct Dataset {
    std::vector<std::vector<double>> features; // rows x d
    std::vector<std::vector<double>> labels;   // rows x classes, one-hot
    u64 dim() const { return features.empty() ? 0 : features[0].size(); }
    u64 classes() const { return labels.empty() ? 0 : labels[0].size(); }
    std::size_t size() const { return features.size(); }
};

/// Parses a rectangular numeric CSV whose last column is an integer class
/// label. Ragged rows and non-numeric cells are rejected.
inline Dataset load_csv(const std::string& path) {
    std::ifstream in(path);
    FENN_REQUIRE(in.good(), "cannot open dataset: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t width = 0;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                double v = std::stod(cell, &used);
                while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used])))
                    ++used;
                FENN_REQUIRE(used == cell.size(), "trailing junk");
                row.push_back(v);
            } catch (...) {
                throw Error("non-numeric cell at line " + std::to_string(lineno));
            }
        }
        if (width == 0) width = row.size();
        FENN_REQUIRE(row.size() == width,
                     "ragged row at line " + std::to_string(lineno));
        rows.push_back(std::move(row));
    }
    FENN_REQUIRE(width >= 2, "need at least one feature and one label column");
    int max_label = 0;
    for (const auto& r : rows) {
        int lb = static_cast<int>(std::llround(r.back()));
        FENN_REQUIRE(lb >= 0, "negative class label");
        max_label = std::max(max_label, lb);
    }
    Dataset ds;
    for (const auto& r : rows) {
        ds.features.emplace_back(r.begin(), r.end() - 1);
        std::vector<double> onehot(static_cast<std::size_t>(max_label) + 1, 0.0);
        onehot[static_cast<std::size_t>(std::llround(r.back()))] = 1.0;
        ds.labels.push_back(std::move(onehot));
    }
    return ds;
}

/// Seeded even split into n shards; sizes differ by at most one.
inline std::vector<Dataset> shard_evenly(const Dataset& ds, std::size_t n, u64 seed) {
    std::vector<std::size_t> idx(ds.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(seed);
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.uniform(i)]);
    std::vector<Dataset> shards(n);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        auto& s = shards[i % n];
        s.features.push_back(ds.features[idx[i]]);
        s.labels.push_back(ds.labels[idx[i]]);
    }
    return shards;
}

/// Linearly separable two-class blobs in `dim` dimensions.
inline Dataset synthetic_separable(u64 dim, std::size_t count, u64 seed) {
    Rng rng(seed);
    Dataset ds;
    for (std::size_t i = 0; i < count; ++i) {
        bool cls = (i % 2 == 1);
        std::vector<double> x(dim);
        for (auto& v : x) v = rng.uniform_real(-0.35, 0.35) + (cls ? 0.4 : -0.4);
        ds.features.push_back(std::move(x));
        ds.labels.push_back(cls ? std::vector<double>{0, 1} : std::vector<double>{1, 0});
    }
    return ds;
}

/// Bundled 9-feature two-class surrogate shaped like a small clinical
/// table: correlated integer-ish grades in [1,10], class-dependent shift.
inline Dataset synthetic_surrogate9(std::size_t count, u64 seed) {
    Rng rng(seed);
    Dataset ds;
    for (std::size_t i = 0; i < count; ++i) {
        bool malignant = (i % 2 == 1);
        double base = malignant ? 6.5 : 2.5;
        std::vector<double> x(9);
        double core = rng.uniform_real(-1.5, 1.5);
        for (auto& v : x) {
            double raw = base + core + rng.uniform_real(-2.0, 2.0);
            v = std::clamp(std::round(raw), 1.0, 10.0);
        }
        ds.features.push_back(std::move(x));
        ds.labels.push_back(malignant ? std::vector<double>{0, 1} : std::vector<double>{1, 0});
    }
    return ds;
}

} // namespace fenn::netsim
