// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0
//
// The alternating packing protocol: weight flattening with parity-dependent
// orientation and gaps, input replication, label flattening, convolution
// patch decomposition, and the selection masks.

#pragma once

#include "fenn/packing/layout.hpp"

namespace fenn::packing {

/// Dense row-major matrix helper (rows x cols).
struct Matrix {
    u64 rows = 0, cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(u64 r, u64 c) : rows(r), cols(c), data(r * c, 0.0) {}
    double& at(u64 r, u64 c) { return data[r * cols + c]; }
    double at(u64 r, u64 c) const { return data[r * cols + c]; }

    Matrix padded_to(u64 r, u64 c) const {
        Matrix out(r, c);
        for (u64 i = 0; i < rows; ++i)
            for (u64 j = 0; j < cols; ++j) out.at(i, j) = at(i, j);
        return out;
    }
};

/// Padded layer widths: h[0] = d, h[1..l]; every entry a power of two.
inline std::vector<u64> padded_dims(const std::vector<u64>& dims) {
    std::vector<u64> out;
    out.reserve(dims.size());
    for (u64 d : dims) out.push_back(next_power_of_two(d));
    return out;
}

/// Layout of a single weight matrix. For column packing `constraint_w` is
/// the next layer's width (the gap hosts its in-place replication); for row
/// packing it is the width two layers back (the stride must match the
/// previous column stride). Zero means no constraint.
inline PackingLayout weight_layout_generic(u64 in_w, u64 out_w, u64 constraint_w, bool odd,
                                           u64 slot_capacity) {
    PackingLayout lay;
    lay.rows = in_w;
    lay.cols = out_w;
    if (odd) {
        lay.orientation = Orientation::Column;
        lay.gap = constraint_w > in_w ? constraint_w - in_w : 0;
        lay.block_len = in_w;
        lay.block_count = out_w;
    } else {
        lay.orientation = Orientation::Row;
        lay.gap = constraint_w > out_w ? constraint_w - out_w : 0;
        lay.block_len = out_w;
        lay.block_count = in_w;
    }
    lay.replication = 1;
    lay.finalize(slot_capacity);
    return lay;
}

/// Layout of layer j's weights (1-indexed; h = padded widths incl. h[0]=d).
inline PackingLayout weight_layout(const std::vector<u64>& h, std::size_t j, u64 slot_capacity,
                                   std::size_t parity_offset = 0) {
    std::size_t l = h.size() - 1;
    FENN_REQUIRE(j >= 1 && j <= l, "weight_layout: bad layer index");
    bool odd = ((j + parity_offset) % 2 == 1);
    u64 constraint = odd ? (j + 1 <= l ? h[j + 1] : 0) // undefined h_{l+1}: treated as 0
                         : (j >= 2 ? h[j - 2] : 0);
    return weight_layout_generic(h[j - 1], h[j], constraint, odd, slot_capacity);
}

/// Flattens a padded weight matrix (in_dim x out_dim) into slots per layout.
inline PackedSlots flatten_weights(const Matrix& w, const PackingLayout& lay) {
    Matrix p = w.padded_to(lay.rows, lay.cols);
    std::vector<double> flat(lay.total_slots(), 0.0);
    u64 stride = lay.block_stride();
    if (lay.orientation == Orientation::Column) {
        for (u64 c = 0; c < lay.cols; ++c)
            for (u64 r = 0; r < lay.rows; ++r) flat[c * stride + r] = p.at(r, c);
    } else {
        for (u64 r = 0; r < lay.rows; ++r)
            for (u64 c = 0; c < lay.cols; ++c) flat[r * stride + c] = p.at(r, c);
    }
    return PackedSlots::from_flat(std::move(flat), lay, w.rows, w.cols);
}

/// Recovers the logical matrix from packed slots (exact on the reference
/// backend; used by oracles and the model writer).
inline Matrix unpack_weights(const PackedSlots& p) {
    Matrix out(p.logical_rows, p.logical_cols);
    auto flat = p.flat();
    u64 stride = p.layout.block_stride();
    if (p.layout.orientation == Orientation::Column) {
        for (u64 c = 0; c < p.logical_cols; ++c)
            for (u64 r = 0; r < p.logical_rows; ++r) out.at(r, c) = flat[c * stride + r];
    } else {
        for (u64 r = 0; r < p.logical_rows; ++r)
            for (u64 c = 0; c < p.logical_cols; ++c) out.at(r, c) = flat[r * stride + c];
    }
    return out;
}

/// pack_weights_ap: the weight-initialization packing for a whole network.
inline std::vector<PackedSlots> pack_weights_ap(const std::vector<Matrix>& weights,
                                                const std::vector<u64>& dims,
                                                u64 slot_capacity) {
    FENN_REQUIRE(weights.size() + 1 == dims.size(), "dims must list d, h_1..h_l");
    auto h = padded_dims(dims);
    std::vector<PackedSlots> out;
    for (std::size_t j = 1; j <= weights.size(); ++j) {
        auto lay = weight_layout(h, j, slot_capacity);
        out.push_back(flatten_weights(weights[j - 1], lay));
    }
    return out;
}

/// Input preparation: each sample row replicated h_1 times with
/// |gap| = max(h_1 - d, 0) between replicas (both dims padded).
inline PackedSlots prepare_inputs(const std::vector<double>& x_row, u64 h1, u64 d,
                                  u64 slot_capacity) {
    FENN_REQUIRE(x_row.size() <= d, "sample longer than the declared dimension");
    u64 dp = next_power_of_two(d);
    u64 h1p = next_power_of_two(h1);
    PackingLayout lay;
    lay.orientation = Orientation::Row;
    lay.gap = h1p > dp ? h1p - dp : 0;
    lay.block_len = dp;
    lay.block_count = h1p;
    lay.replication = h1p;
    lay.rows = 1;
    lay.cols = dp;
    lay.finalize(slot_capacity);
    std::vector<double> flat(lay.total_slots(), 0.0);
    u64 stride = lay.block_stride();
    for (u64 k = 0; k < h1p; ++k)
        for (u64 i = 0; i < x_row.size(); ++i) flat[k * stride + i] = x_row[i];
    return PackedSlots::from_flat(std::move(flat), lay, 1, dp);
}

/// Variant used by the compiled pipeline: replication and stride chosen by
/// the layout compiler (stride may differ from the literal protocol rule
/// when consecutive widths disagree).
inline PackedSlots prepare_inputs_strided(const std::vector<double>& x_row, u64 replicas,
                                          u64 stride, u64 slot_capacity) {
    PackingLayout lay;
    lay.orientation = Orientation::Row;
    FENN_REQUIRE(stride >= x_row.size(), "stride shorter than the sample");
    lay.gap = stride - next_power_of_two(std::max<u64>(1, x_row.size()));
    lay.block_len = stride - lay.gap;
    lay.block_count = replicas;
    lay.replication = replicas;
    lay.rows = 1;
    lay.cols = lay.block_len;
    lay.finalize(slot_capacity);
    std::vector<double> flat(lay.total_slots(), 0.0);
    for (u64 k = 0; k < replicas; ++k)
        for (u64 i = 0; i < x_row.size(); ++i) flat[k * stride + i] = x_row[i];
    return PackedSlots::from_flat(std::move(flat), lay, 1, lay.block_len);
}

/// Label preparation: for odd-depth networks the one-hot vector is
/// flattened with |gap| = h_l between entries, otherwise packed contiguously.
inline std::vector<double> prepare_labels(const std::vector<double>& y, std::size_t l, u64 hl) {
    FENN_REQUIRE(y.size() <= hl, "label vector longer than the output width");
    if (l % 2 == 0) {
        std::vector<double> out(y.begin(), y.end());
        return out;
    }
    std::vector<double> out(y.size() * (hl + 1), 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) out[i * (hl + 1)] = y[i];
    return out;
}

/// Labels placed to match a computed output layout: value k at slot
/// k * stride (stride = 1 packs contiguously).
inline std::vector<double> prepare_labels_strided(const std::vector<double>& y, u64 stride,
                                                  u64 slots) {
    std::vector<double> out(slots, 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) out[i * stride] = y[i];
    return out;
}

/// Selection masks of the execution pipeline: m1 picks one slot per block
/// (the inner-sum landing slots), m2 keeps the leading out_width slots.
inline std::vector<double> make_mask_block_starts(u64 stride, u64 blocks, u64 slots) {
    std::vector<double> m(slots, 0.0);
    for (u64 k = 0; k < blocks; ++k) m[(k * stride) % slots] = 1.0;
    return m;
}

inline std::vector<double> make_mask_leading(u64 width, u64 slots) {
    std::vector<double> m(slots, 0.0);
    for (u64 i = 0; i < width && i < slots; ++i) m[i] = 1.0;
    return m;
}

// ---------------------------------------------------------------------------
// Convolution packing.
// ---------------------------------------------------------------------------

struct ConvPacking {
    PackedSlots inputs;        // t flattened patches, gap per AP rule
    PackingLayout kernel_layout; // kernel replicated t times, same gap
    u64 patch_count = 0;       // t
    u64 out_h = 0, out_w = 0;  // spatial output dims
};

/// Decomposes an image into kernel-sized patches and packs them with an
/// inter-patch gap sized for the next fully connected layer (gap omitted
/// when the next layer is convolutional or pooling).
inline ConvPacking pack_conv(const Matrix& image, u64 f, u64 stride_px, u64 next_h,
                             bool next_is_fc, u64 slot_capacity) {
    FENN_REQUIRE(image.rows >= f && image.cols >= f, "kernel larger than the image");
    FENN_REQUIRE((image.rows - f) % stride_px == 0 && (image.cols - f) % stride_px == 0,
                 "incompatible image/kernel/stride dims");
    u64 oh = (image.rows - f) / stride_px + 1;
    u64 ow = (image.cols - f) / stride_px + 1;
    u64 t = oh * ow;
    u64 h1 = next_power_of_two(f * f);
    u64 hnext = next_power_of_two(next_h);
    u64 gap = next_is_fc && hnext > h1 ? hnext - h1 : 0;

    PackingLayout lay;
    lay.orientation = Orientation::Conv;
    lay.gap = gap;
    lay.block_len = h1;
    lay.block_count = next_power_of_two(t);
    lay.replication = 1;
    lay.rows = lay.block_count;
    lay.cols = h1;
    lay.finalize(slot_capacity);

    std::vector<double> flat(lay.total_slots(), 0.0);
    u64 bstride = lay.block_stride();
    u64 p = 0;
    for (u64 oy = 0; oy < oh; ++oy) {
        for (u64 ox = 0; ox < ow; ++ox, ++p) {
            for (u64 ky = 0; ky < f; ++ky)
                for (u64 kx = 0; kx < f; ++kx)
                    flat[p * bstride + ky * f + kx] = image.at(oy * stride_px + ky,
                                                               ox * stride_px + kx);
        }
    }
    ConvPacking out;
    out.inputs = PackedSlots::from_flat(std::move(flat), lay, t, f * f);
    out.kernel_layout = lay;
    out.patch_count = t;
    out.out_h = oh;
    out.out_w = ow;
    return out;
}

/// Kernel replicated t times with the conv layout's gap.
inline PackedSlots replicate_kernel(const std::vector<double>& kernel_flat,
                                    const ConvPacking& cp) {
    const auto& lay = cp.kernel_layout;
    std::vector<double> flat(lay.total_slots(), 0.0);
    u64 bstride = lay.block_stride();
    for (u64 pidx = 0; pidx < cp.patch_count; ++pidx)
        for (std::size_t i = 0; i < kernel_flat.size(); ++i)
            flat[pidx * bstride + i] = kernel_flat[i];
    return PackedSlots::from_flat(std::move(flat), lay, cp.patch_count, kernel_flat.size());
}

} // namespace fenn::packing
