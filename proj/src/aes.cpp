/*
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 * This file is part of ctsched, a constant-time AES scheduling workbench.
 */

#include "aes.hpp"

#include <stdexcept>

namespace ctsched {

uint32_t load_be32(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) |
           uint32_t(p[3]);
}

void store_be32(uint8_t* p, uint32_t v) {
    p[0] = uint8_t(v >> 24);
    p[1] = uint8_t(v >> 16);
    p[2] = uint8_t(v >> 8);
    p[3] = uint8_t(v);
}

uint8_t gf_mul(uint8_t a, uint8_t b) {
    uint8_t r = 0;
    while (b) {
        if (b & 1) r ^= a;
        uint8_t hi = a & 0x80;
        a = uint8_t(a << 1);
        if (hi) a ^= 0x1b;
        b >>= 1;
    }
    return r;
}

static uint8_t rotl8(uint8_t x, unsigned n) {
    return uint8_t((x << n) | (x >> (8 - n)));
}

// S-box from the multiplicative inverse (via 0x03 exp/log tables) followed by
// the affine map.
static std::array<uint8_t, 256> build_sbox() {
    std::array<uint8_t, 256> exp{}, log{};
    uint8_t x = 1;
    for (int i = 0; i < 255; ++i) {
        exp[i] = x;
        log[x] = uint8_t(i);
        x = gf_mul(x, 0x03);
    }
    std::array<uint8_t, 256> sbox{};
    for (int v = 0; v < 256; ++v) {
        uint8_t inv = v ? exp[(255 - log[v]) % 255] : 0;
        sbox[v] = uint8_t(inv ^ rotl8(inv, 1) ^ rotl8(inv, 2) ^ rotl8(inv, 3) ^ rotl8(inv, 4) ^
                          0x63);
    }
    return sbox;
}

const std::array<uint32_t, 256>& TTableSet::te(unsigned id) const {
    switch (id) {
        case 0: return te0;
        case 1: return te1;
        case 2: return te2;
        case 3: return te3;
        default: throw std::invalid_argument("table id out of range");
    }
}

TTableSet generate_tables() {
    TTableSet t;
    t.sbox = build_sbox();
    for (int x = 0; x < 256; ++x) {
        uint8_t s = t.sbox[x];
        uint8_t s2 = gf_mul(s, 2);
        uint8_t s3 = gf_mul(s, 3);
        uint32_t w = (uint32_t(s2) << 24) | (uint32_t(s) << 16) | (uint32_t(s) << 8) |
                     uint32_t(s3);
        t.te0[x] = w;
        t.te1[x] = (w >> 8) | (w << 24);
        t.te2[x] = (w >> 16) | (w << 16);
        t.te3[x] = (w >> 24) | (w << 8);
    }
    return t;
}

static const std::array<uint8_t, 256>& shared_sbox() {
    static const std::array<uint8_t, 256> sbox = build_sbox();
    return sbox;
}

RoundKeySchedule expand_key(const Key128& key) {
    static const uint32_t rcon[10] = {0x01, 0x02, 0x04, 0x08, 0x10,
                                      0x20, 0x40, 0x80, 0x1b, 0x36};
    const auto& sbox = shared_sbox();
    RoundKeySchedule ks;
    for (int i = 0; i < 4; ++i) ks.words[i] = load_be32(key.data() + 4 * i);
    for (int i = 4; i < 44; ++i) {
        uint32_t temp = ks.words[i - 1];
        if (i % 4 == 0) {
            temp = (temp << 8) | (temp >> 24);  // RotWord
            temp = (uint32_t(sbox[temp >> 24]) << 24) | (uint32_t(sbox[(temp >> 16) & 0xff]) << 16) |
                   (uint32_t(sbox[(temp >> 8) & 0xff]) << 8) | uint32_t(sbox[temp & 0xff]);
            temp ^= rcon[i / 4 - 1] << 24;
        }
        ks.words[i] = ks.words[i - 4] ^ temp;
    }
    return ks;
}

// ---- reference path: byte-state four-step rounds --------------------------

// State layout follows the standard column-major state array: state[r + 4c].
static void add_round_key(uint8_t state[16], const RoundKeySchedule& ks, int round) {
    for (int c = 0; c < 4; ++c) {
        uint32_t w = ks.words[4 * round + c];
        state[0 + 4 * c] ^= uint8_t(w >> 24);
        state[1 + 4 * c] ^= uint8_t(w >> 16);
        state[2 + 4 * c] ^= uint8_t(w >> 8);
        state[3 + 4 * c] ^= uint8_t(w);
    }
}

static void sub_bytes(uint8_t state[16]) {
    const auto& sbox = shared_sbox();
    for (int i = 0; i < 16; ++i) state[i] = sbox[state[i]];
}

static void shift_rows(uint8_t state[16]) {
    uint8_t tmp[16];
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) tmp[r + 4 * c] = state[r + 4 * ((c + r) % 4)];
    for (int i = 0; i < 16; ++i) state[i] = tmp[i];
}

static void mix_columns(uint8_t state[16]) {
    for (int c = 0; c < 4; ++c) {
        uint8_t a0 = state[4 * c], a1 = state[4 * c + 1], a2 = state[4 * c + 2],
                a3 = state[4 * c + 3];
        state[4 * c + 0] = uint8_t(gf_mul(a0, 2) ^ gf_mul(a1, 3) ^ a2 ^ a3);
        state[4 * c + 1] = uint8_t(a0 ^ gf_mul(a1, 2) ^ gf_mul(a2, 3) ^ a3);
        state[4 * c + 2] = uint8_t(a0 ^ a1 ^ gf_mul(a2, 2) ^ gf_mul(a3, 3));
        state[4 * c + 3] = uint8_t(gf_mul(a0, 3) ^ a1 ^ a2 ^ gf_mul(a3, 2));
    }
}

Block encrypt_reference(const Block& pt, const RoundKeySchedule& ks) {
    uint8_t state[16];
    for (int i = 0; i < 16; ++i) state[i] = pt[i];
    add_round_key(state, ks, 0);
    for (int round = 1; round <= 9; ++round) {
        sub_bytes(state);
        shift_rows(state);
        mix_columns(state);
        add_round_key(state, ks, round);
    }
    sub_bytes(state);
    shift_rows(state);
    add_round_key(state, ks, 10);
    Block out;
    for (int i = 0; i < 16; ++i) out[i] = state[i];
    return out;
}

// ---- T-table path ----------------------------------------------------------

static Block ttable_encrypt(const Block& pt, const RoundKeySchedule& ks, const TTableSet& t,
                            std::vector<TableLookup>* trace) {
    uint32_t s[4], w[4];
    for (int i = 0; i < 4; ++i) s[i] = load_be32(pt.data() + 4 * i) ^ ks.words[i];

    uint32_t* src = s;
    uint32_t* dst = w;
    for (int round = 1; round <= 9; ++round) {
        for (int i = 0; i < 4; ++i) {
            uint8_t i0 = uint8_t(src[i] >> 24);
            uint8_t i1 = uint8_t(src[(i + 1) & 3] >> 16);
            uint8_t i2 = uint8_t(src[(i + 2) & 3] >> 8);
            uint8_t i3 = uint8_t(src[(i + 3) & 3]);
            if (trace) {
                trace->push_back({0, i0});
                trace->push_back({1, i1});
                trace->push_back({2, i2});
                trace->push_back({3, i3});
            }
            dst[i] = t.te0[i0] ^ t.te1[i1] ^ t.te2[i2] ^ t.te3[i3] ^ ks.words[4 * round + i];
        }
        std::swap(src, dst);
    }

    Block out;
    for (int i = 0; i < 4; ++i) {
        uint8_t i0 = uint8_t(src[i] >> 24);
        uint8_t i1 = uint8_t(src[(i + 1) & 3] >> 16);
        uint8_t i2 = uint8_t(src[(i + 2) & 3] >> 8);
        uint8_t i3 = uint8_t(src[(i + 3) & 3]);
        if (trace) {
            trace->push_back({kSboxTable, i0});
            trace->push_back({kSboxTable, i1});
            trace->push_back({kSboxTable, i2});
            trace->push_back({kSboxTable, i3});
        }
        uint32_t word = (uint32_t(t.sbox[i0]) << 24) | (uint32_t(t.sbox[i1]) << 16) |
                        (uint32_t(t.sbox[i2]) << 8) | uint32_t(t.sbox[i3]);
        store_be32(out.data() + 4 * i, word ^ ks.words[40 + i]);
    }
    return out;
}

Block encrypt_ttable(const Block& pt, const RoundKeySchedule& ks, const TTableSet& t) {
    return ttable_encrypt(pt, ks, t, nullptr);
}

Block encrypt_ttable_trace(const Block& pt, const RoundKeySchedule& ks, const TTableSet& t,
                           std::vector<TableLookup>& trace) {
    trace.clear();
    trace.reserve(160);
    return ttable_encrypt(pt, ks, t, &trace);
}

}  // namespace ctsched
