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

#include <random>
#include <stdexcept>

#include "aes.hpp"
#include "doctest.h"
#include "hex.hpp"

using namespace ctsched;

namespace {

// Published S-box, kept here as an oracle independent of the generated one.
const uint8_t kSbox[256] = {
    0x63, 0x7c, 0x77, 0x7b, 0xf2, 0x6b, 0x6f, 0xc5, 0x30, 0x01, 0x67, 0x2b, 0xfe, 0xd7, 0xab,
    0x76, 0xca, 0x82, 0xc9, 0x7d, 0xfa, 0x59, 0x47, 0xf0, 0xad, 0xd4, 0xa2, 0xaf, 0x9c, 0xa4,
    0x72, 0xc0, 0xb7, 0xfd, 0x93, 0x26, 0x36, 0x3f, 0xf7, 0xcc, 0x34, 0xa5, 0xe5, 0xf1, 0x71,
    0xd8, 0x31, 0x15, 0x04, 0xc7, 0x23, 0xc3, 0x18, 0x96, 0x05, 0x9a, 0x07, 0x12, 0x80, 0xe2,
    0xeb, 0x27, 0xb2, 0x75, 0x09, 0x83, 0x2c, 0x1a, 0x1b, 0x6e, 0x5a, 0xa0, 0x52, 0x3b, 0xd6,
    0xb3, 0x29, 0xe3, 0x2f, 0x84, 0x53, 0xd1, 0x00, 0xed, 0x20, 0xfc, 0xb1, 0x5b, 0x6a, 0xcb,
    0xbe, 0x39, 0x4a, 0x4c, 0x58, 0xcf, 0xd0, 0xef, 0xaa, 0xfb, 0x43, 0x4d, 0x33, 0x85, 0x45,
    0xf9, 0x02, 0x7f, 0x50, 0x3c, 0x9f, 0xa8, 0x51, 0xa3, 0x40, 0x8f, 0x92, 0x9d, 0x38, 0xf5,
    0xbc, 0xb6, 0xda, 0x21, 0x10, 0xff, 0xf3, 0xd2, 0xcd, 0x0c, 0x13, 0xec, 0x5f, 0x97, 0x44,
    0x17, 0xc4, 0xa7, 0x7e, 0x3d, 0x64, 0x5d, 0x19, 0x73, 0x60, 0x81, 0x4f, 0xdc, 0x22, 0x2a,
    0x90, 0x88, 0x46, 0xee, 0xb8, 0x14, 0xde, 0x5e, 0x0b, 0xdb, 0xe0, 0x32, 0x3a, 0x0a, 0x49,
    0x06, 0x24, 0x5c, 0xc2, 0xd3, 0xac, 0x62, 0x91, 0x95, 0xe4, 0x79, 0xe7, 0xc8, 0x37, 0x6d,
    0x8d, 0xd5, 0x4e, 0xa9, 0x6c, 0x56, 0xf4, 0xea, 0x65, 0x7a, 0xae, 0x08, 0xba, 0x78, 0x25,
    0x2e, 0x1c, 0xa6, 0xb4, 0xc6, 0xe8, 0xdd, 0x74, 0x1f, 0x4b, 0xbd, 0x8b, 0x8a, 0x70, 0x3e,
    0xb5, 0x66, 0x48, 0x03, 0xf6, 0x0e, 0x61, 0x35, 0x57, 0xb9, 0x86, 0xc1, 0x1d, 0x9e, 0xe1,
    0xf8, 0x98, 0x11, 0x69, 0xd9, 0x8e, 0x94, 0x9b, 0x1e, 0x87, 0xe9, 0xce, 0x55, 0x28, 0xdf,
    0x8c, 0xa1, 0x89, 0x0d, 0xbf, 0xe6, 0x42, 0x68, 0x41, 0x99, 0x2d, 0x0f, 0xb0, 0x54, 0xbb,
    0x16};

// Brute-force inverse + affine map, a second route to the same table.
uint8_t sbox_bruteforce(uint8_t x) {
    uint8_t inv = 0;
    if (x != 0)
        for (int y = 1; y < 256; ++y)
            if (gf_mul(x, uint8_t(y)) == 1) inv = uint8_t(y);
    auto rotl = [](uint8_t b, int n) { return uint8_t((b << n) | (b >> (8 - n))); };
    return uint8_t(inv ^ rotl(inv, 1) ^ rotl(inv, 2) ^ rotl(inv, 3) ^ rotl(inv, 4) ^ 0x63);
}

Block random_block(std::mt19937_64& rng) {
    Block b;
    for (auto& x : b) x = uint8_t(rng());
    return b;
}

}  // namespace

TEST_CASE("generated S-box matches the published table and the GF route") {
    auto t = generate_tables();
    for (int x = 0; x < 256; ++x) {
        CHECK(t.sbox[x] == kSbox[x]);
        CHECK(t.sbox[x] == sbox_bruteforce(uint8_t(x)));
    }
    CHECK(t.sbox[0x00] == 0x63);
}

TEST_CASE("T tables: size, rotation and byte-composition invariants") {
    auto t = generate_tables();
    CHECK(sizeof(t.te0) == 1024);
    CHECK(sizeof(t.te0) + sizeof(t.te1) + sizeof(t.te2) + sizeof(t.te3) == 4096);

    auto ror = [](uint32_t w, int n) { return (w >> n) | (w << (32 - n)); };
    for (int x = 0; x < 256; ++x) {
        uint8_t s = t.sbox[x];
        uint32_t expect = (uint32_t(gf_mul(s, 2)) << 24) | (uint32_t(s) << 16) |
                          (uint32_t(s) << 8) | uint32_t(gf_mul(s, 3));
        CHECK(t.te0[x] == expect);
        CHECK(t.te1[x] == ror(t.te0[x], 8));
        CHECK(t.te2[x] == ror(t.te0[x], 16));
        CHECK(t.te3[x] == ror(t.te0[x], 24));
    }
    CHECK(t.te0[0x00] == 0xc66363a5);
}

TEST_CASE("key expansion known answers") {
    auto zero = expand_key(Key128{});
    for (int i = 0; i < 4; ++i) CHECK(zero.words[i] == 0);
    CHECK(zero.words[4] == 0x62636363);

    auto ks = expand_key(block_from_hex("2b7e151628aed2a6abf7158809cf4f3c"));
    CHECK(ks.words[0] == 0x2b7e1516);
    CHECK(ks.words[4] == 0xa0fafe17);
    CHECK(ks.words[43] == 0xb6630ca6);
}

TEST_CASE("key expansion packs the raw key into words 0..3") {
    std::mt19937_64 rng(101);
    for (int i = 0; i < 100; ++i) {
        Key128 key = random_block(rng);
        auto ks = expand_key(key);
        for (int w = 0; w < 4; ++w) CHECK(ks.words[w] == load_be32(key.data() + 4 * w));
    }
}

namespace {

// Byte-oriented expansion against the published S-box; a second route to the
// word-oriented implementation.
std::array<uint32_t, 44> expand_key_bytes(const Key128& key) {
    uint8_t w[44][4];
    for (int i = 0; i < 4; ++i)
        for (int b = 0; b < 4; ++b) w[i][b] = key[4 * i + b];
    uint8_t rc = 0x01;
    for (int i = 4; i < 44; ++i) {
        uint8_t t[4] = {w[i - 1][0], w[i - 1][1], w[i - 1][2], w[i - 1][3]};
        if (i % 4 == 0) {
            uint8_t first = t[0];
            t[0] = kSbox[t[1]];
            t[1] = kSbox[t[2]];
            t[2] = kSbox[t[3]];
            t[3] = kSbox[first];
            t[0] ^= rc;
            rc = gf_mul(rc, 2);
        }
        for (int b = 0; b < 4; ++b) w[i][b] = uint8_t(w[i - 4][b] ^ t[b]);
    }
    std::array<uint32_t, 44> out;
    for (int i = 0; i < 44; ++i)
        out[i] = (uint32_t(w[i][0]) << 24) | (uint32_t(w[i][1]) << 16) |
                 (uint32_t(w[i][2]) << 8) | uint32_t(w[i][3]);
    return out;
}

}  // namespace

TEST_CASE("key expansion matches an independent byte-oriented oracle") {
    std::mt19937_64 rng(111);
    for (int i = 0; i < 100; ++i) {
        Key128 key = random_block(rng);
        auto ks = expand_key(key);
        auto oracle = expand_key_bytes(key);
        for (int w = 0; w < 44; ++w) CHECK(ks.words[w] == oracle[w]);
    }
}

TEST_CASE("reference path reproduces the published vector") {
    auto key = block_from_hex("000102030405060708090a0b0c0d0e0f");
    auto pt = block_from_hex("00112233445566778899aabbccddeeff");
    auto ct = encrypt_reference(pt, expand_key(key));
    CHECK(to_hex(ct) == "69c4e0d86a7b0430d8cdb78070b4c55a");
}

TEST_CASE("distinct plaintexts map to distinct ciphertexts") {
    auto ks = expand_key(block_from_hex("000102030405060708090a0b0c0d0e0f"));
    Block a{}, b{};
    b[15] = 1;
    CHECK(encrypt_reference(a, ks) != encrypt_reference(b, ks));
}

TEST_CASE("T-table path agrees with the reference on random inputs") {
    auto t = generate_tables();
    std::mt19937_64 rng(202);
    for (int i = 0; i < 2000; ++i) {
        Key128 key = random_block(rng);
        Block pt = random_block(rng);
        auto ks = expand_key(key);
        CHECK(encrypt_ttable(pt, ks, t) == encrypt_reference(pt, ks));
    }
}

TEST_CASE("lookup trace shape") {
    auto t = generate_tables();
    auto key = block_from_hex("2b7e151628aed2a6abf7158809cf4f3c");
    auto pt = block_from_hex("3243f6a8885a308d313198a2e0370734");
    auto ks = expand_key(key);
    std::vector<TableLookup> trace;
    auto ct = encrypt_ttable_trace(pt, ks, t, trace);
    CHECK(ct == encrypt_ttable(pt, ks, t));
    CHECK(trace.size() == 160);

    size_t per_table[5] = {0, 0, 0, 0, 0};
    for (const auto& l : trace) per_table[l.table]++;
    for (int tab = 0; tab < 4; ++tab) CHECK(per_table[tab] == 36);
    CHECK(per_table[kSboxTable] == 16);

    // The first 16 lookups index with pt[j] ^ key[j], one per byte position.
    std::array<int, 16> seen{};
    for (int i = 0; i < 16; ++i) {
        uint8_t idx = trace[i].index;
        for (int j = 0; j < 16; ++j)
            if (idx == (pt[j] ^ key[j])) seen[j]++;
    }
    int covered = 0;
    for (int j = 0; j < 16; ++j) covered += seen[j] > 0;
    CHECK(covered >= 15);  // collisions between positions can merge matches
}

TEST_CASE("first-round trace indices are exactly the whitened bytes") {
    auto t = generate_tables();
    std::mt19937_64 rng(303);
    Key128 key = random_block(rng);
    Block pt = random_block(rng);
    auto ks = expand_key(key);
    std::vector<TableLookup> trace;
    encrypt_ttable_trace(pt, ks, t, trace);
    // Round-1 lookup for word w, term b reads byte position 4*((w+b)%4)+b.
    for (int w = 0; w < 4; ++w)
        for (int b = 0; b < 4; ++b) {
            int j = 4 * ((w + b) % 4) + b;
            CHECK(trace[4 * w + b].table == b);
            CHECK(trace[4 * w + b].index == (pt[j] ^ key[j]));
        }
}

TEST_CASE("hex helpers") {
    CHECK(to_hex(block_from_hex("000102030405060708090a0b0c0d0eff")) ==
          "000102030405060708090a0b0c0d0eff");
    CHECK_THROWS_AS(block_from_hex("00"), std::invalid_argument);
    CHECK_THROWS_AS(block_from_hex("zz112233445566778899aabbccddeeff"),
                    std::invalid_argument);
}
