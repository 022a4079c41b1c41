// Copyright (c) 2026 The fenn authors
// SPDX-License-Identifier: Apache-2.0
//
// Length-prefixed binary serialization: u32 payload length, 4-byte magic,
// version byte, type byte, payload. Deterministic for deterministic inputs.

#pragma once

#include <cstring>

#include "fenn/core/backend_real.hpp"
#include "fenn/core/boot.hpp"

namespace fenn::core {

inline constexpr char kMagic[4] = {'F', 'E', 'N', 'N'};

enum class WireType : unsigned char {
    RingParams = 1,
    PublicKey = 2,
    Ciphertext = 3,
    DecryptionShare = 4,
    BootstrapShare = 5,
    KeySwitchShare = 6,
    KeyGenRound1 = 7,
    KeyGenRound2 = 8,
    Blob = 9,
};

class ByteWriter {
public:
    void u8(unsigned char v) { buf_.push_back(v); }
    void u32v(u32 v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void u64v(u64 v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void f64(double v) {
        u64 bits;
        std::memcpy(&bits, &v, 8);
        u64v(bits);
    }
    void vec_u64(const std::vector<u64>& v) {
        u64v(v.size());
        for (u64 x : v) u64v(x);
    }
    std::vector<unsigned char> take() { return std::move(buf_); }
    std::size_t size() const { return buf_.size(); }

private:
    std::vector<unsigned char> buf_;
};

class ByteReader {
public:
    explicit ByteReader(const std::vector<unsigned char>& buf) : buf_(buf) {}
    unsigned char u8() { return buf_[pos_++]; }
    u32 u32v() {
        u32 v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<u32>(u8()) << (8 * i);
        return v;
    }
    u64 u64v() {
        u64 v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<u64>(u8()) << (8 * i);
        return v;
    }
    double f64() {
        u64 bits = u64v();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::vector<u64> vec_u64() {
        std::vector<u64> v(u64v());
        for (auto& x : v) x = u64v();
        return v;
    }

private:
    const std::vector<unsigned char>& buf_;
    std::size_t pos_ = 0;
};

namespace detail {

inline void write_poly(ByteWriter& w, const RnsPoly& p) {
    w.u8(p.domain == Domain::Eval ? 1 : 0);
    w.u64v(p.nprimes());
    for (const auto& limb : p.limbs) w.vec_u64(limb);
    w.u8(p.has_special() ? 1 : 0);
    if (p.has_special()) w.vec_u64(p.special);
}

inline RnsPoly read_poly(ByteReader& r) {
    RnsPoly p;
    p.domain = r.u8() ? Domain::Eval : Domain::Coeff;
    u64 np = r.u64v();
    p.limbs.resize(np);
    for (auto& limb : p.limbs) limb = r.vec_u64();
    if (r.u8()) p.special = r.vec_u64();
    return p;
}

inline std::vector<unsigned char> finish(WireType type, ByteWriter& payload) {
    auto body = payload.take();
    ByteWriter out;
    out.u32v(static_cast<u32>(body.size() + 6)); // magic + version + type
    out.u8(kMagic[0]);
    out.u8(kMagic[1]);
    out.u8(kMagic[2]);
    out.u8(kMagic[3]);
    out.u8(1); // version
    out.u8(static_cast<unsigned char>(type));
    auto head = out.take();
    head.insert(head.end(), body.begin(), body.end());
    return head;
}

inline WireType check_header(ByteReader& r) {
    u32 len = r.u32v();
    (void)len;
    FENN_REQUIRE(r.u8() == kMagic[0] && r.u8() == kMagic[1] && r.u8() == kMagic[2] &&
                     r.u8() == kMagic[3],
                 "bad magic");
    FENN_REQUIRE(r.u8() == 1, "unsupported version");
    return static_cast<WireType>(r.u8());
}

} // namespace detail

inline std::vector<unsigned char> serialize(const RingParams& p) {
    ByteWriter w;
    w.u64v(p.ring_dim);
    w.vec_u64(p.modulus_chain);
    w.u64v(p.special_prime);
    w.u32v(p.initial_level);
    w.f64(p.initial_scale);
    w.u32v(p.security_level);
    w.u8(p.toy_mode ? 1 : 0);
    return detail::finish(WireType::RingParams, w);
}

inline RingParams deserialize_ring_params(const std::vector<unsigned char>& buf) {
    ByteReader r(buf);
    FENN_REQUIRE(detail::check_header(r) == WireType::RingParams, "type mismatch");
    RingParams p;
    p.ring_dim = r.u64v();
    p.modulus_chain = r.vec_u64();
    p.special_prime = r.u64v();
    p.initial_level = r.u32v();
    p.initial_scale = r.f64();
    p.security_level = r.u32v();
    p.toy_mode = r.u8() != 0;
    return p;
}

inline std::vector<unsigned char> serialize(const Ciphertext& c) {
    ByteWriter w;
    w.u32v(c.level);
    w.f64(c.scale);
    detail::write_poly(w, c.c0);
    detail::write_poly(w, c.c1);
    w.u8(c.c2.has_value() ? 1 : 0);
    if (c.c2) detail::write_poly(w, *c.c2);
    return detail::finish(WireType::Ciphertext, w);
}

inline Ciphertext deserialize_ciphertext(const std::vector<unsigned char>& buf) {
    ByteReader r(buf);
    FENN_REQUIRE(detail::check_header(r) == WireType::Ciphertext, "type mismatch");
    Ciphertext c;
    c.level = r.u32v();
    c.scale = r.f64();
    c.c0 = detail::read_poly(r);
    c.c1 = detail::read_poly(r);
    if (r.u8()) c.c2 = detail::read_poly(r);
    return c;
}

inline std::vector<unsigned char> serialize(const PublicKey& pk) {
    ByteWriter w;
    detail::write_poly(w, pk.b);
    detail::write_poly(w, pk.a);
    return detail::finish(WireType::PublicKey, w);
}

inline PublicKey deserialize_public_key(const std::vector<unsigned char>& buf) {
    ByteReader r(buf);
    FENN_REQUIRE(detail::check_header(r) == WireType::PublicKey, "type mismatch");
    PublicKey pk;
    pk.b = detail::read_poly(r);
    pk.a = detail::read_poly(r);
    return pk;
}

inline std::vector<unsigned char> serialize(const BootstrapShare& s) {
    ByteWriter w;
    detail::write_poly(w, s.h0);
    detail::write_poly(w, s.h1);
    return detail::finish(WireType::BootstrapShare, w);
}

inline std::vector<unsigned char> serialize(const RealContext::KeySwitchShare& s) {
    ByteWriter w;
    detail::write_poly(w, s.h0);
    detail::write_poly(w, s.h1);
    return detail::finish(WireType::KeySwitchShare, w);
}

/// Size of one serialized polynomial with `nprimes` limbs.
inline u64 poly_wire_bytes(u64 ring_dim, u64 nprimes, bool with_special) {
    u64 limb = 8 + 8 * ring_dim;
    return 1 + 8 + nprimes * limb + 1 + (with_special ? limb : 0);
}

/// Size of one serialized ciphertext at the given level (header included).
inline u64 ciphertext_wire_bytes(u64 ring_dim, u32 level) {
    return 10 + 4 + 8 + 2 * poly_wire_bytes(ring_dim, static_cast<u64>(level) + 1, false) + 1;
}

/// Size of one serialized bootstrap share (h0 at call level, h1 at top).
inline u64 bootstrap_share_wire_bytes(u64 ring_dim, u32 call_level, u32 top_level) {
    return 10 + poly_wire_bytes(ring_dim, static_cast<u64>(call_level) + 1, false) +
           poly_wire_bytes(ring_dim, static_cast<u64>(top_level) + 1, false);
}

} // namespace fenn::core
