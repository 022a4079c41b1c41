// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0
//
// Slot layouts for the alternating packing scheme: blocks of values
// separated by zero gaps, alternating row/column orientation per layer.

#pragma once

#include "fenn/common.hpp"

namespace fenn::packing {

enum class Orientation { Row, Column, Conv };

struct PackingLayout {
    Orientation orientation = Orientation::Column;
    u64 gap = 0;          // zero-run appended to each block
    u64 replication = 1;  // copies each logical value receives downstream
    u64 rows = 0, cols = 0; // padded logical dims (powers of two)
    u64 block_len = 0;    // values per block
    u64 block_count = 0;  // number of blocks
    u64 cipher_count = 1;
    u64 slots_per_cipher = 0;

    u64 block_stride() const { return block_len + gap; }
    u64 total_slots() const { return block_count * block_stride(); }
    u64 blocks_per_cipher() const { return cipher_count == 1 ? block_count
                                                             : slots_per_cipher / block_stride(); }

    void finalize(u64 slot_capacity) {
        slots_per_cipher = slot_capacity;
        u64 stride = block_stride();
        FENN_REQUIRE(stride <= slot_capacity,
                     "block stride exceeds ciphertext slot capacity");
        cipher_count = ceil_div(total_slots(), slot_capacity);
    }
};

/// ceil(elements / slots): number of ciphertexts a flattened tensor needs.
inline u64 multi_cipher_split(u64 matrix_elems, u64 slots) {
    FENN_REQUIRE(matrix_elems > 0 && slots > 0, "multi_cipher_split: positive args required");
    return ceil_div(matrix_elems, slots);
}

/// Slot data for a packed object, already split into cipher-sized chunks.
struct PackedSlots {
    std::vector<std::vector<double>> chunks; // cipher_count chunks of slot_capacity
    PackingLayout layout;
    u64 logical_rows = 0, logical_cols = 0; // unpadded shape

    static PackedSlots from_flat(std::vector<double> flat, PackingLayout layout,
                                 u64 logical_rows, u64 logical_cols) {
        PackedSlots out;
        u64 cap = layout.slots_per_cipher;
        flat.resize(layout.cipher_count * cap, 0.0);
        for (u64 c = 0; c < layout.cipher_count; ++c) {
            out.chunks.emplace_back(flat.begin() + static_cast<long>(c * cap),
                                    flat.begin() + static_cast<long>((c + 1) * cap));
        }
        out.layout = layout;
        out.logical_rows = logical_rows;
        out.logical_cols = logical_cols;
        return out;
    }

    std::vector<double> flat() const {
        std::vector<double> out;
        for (const auto& c : chunks) out.insert(out.end(), c.begin(), c.end());
        return out;
    }
};

} // namespace fenn::packing
