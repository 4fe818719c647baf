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

#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace ctsched {

using Block = std::array<uint8_t, 16>;
using Key128 = std::array<uint8_t, 16>;

// 44 expanded round-key words, packed big-endian so that word >> 24 selects
// the first byte. words[0..3] are the raw key.
struct RoundKeySchedule {
    std::array<uint32_t, 44> words{};
};

// The four 1 KB round tables plus the 256-byte S-box used by the final round.
// te1/te2/te3 are the 8/16/24-bit right rotations of te0, and te0[x] packs
// (2*S[x], S[x], S[x], 3*S[x]) top byte first.
struct TTableSet {
    std::array<uint32_t, 256> te0{}, te1{}, te2{}, te3{};
    std::array<uint8_t, 256> sbox{};

    const std::array<uint32_t, 256>& te(unsigned id) const;
};

// One table access. Tables 0..3 are te0..te3; kSboxTable is the final-round
// S-box lookup.
struct TableLookup {
    uint8_t table;
    uint8_t index;
};
inline constexpr uint8_t kSboxTable = 4;

uint8_t gf_mul(uint8_t a, uint8_t b);

TTableSet generate_tables();
RoundKeySchedule expand_key(const Key128& key);

// Plain four-step rounds on the byte state array; the correctness oracle for
// everything else.
Block encrypt_reference(const Block& pt, const RoundKeySchedule& ks);

Block encrypt_ttable(const Block& pt, const RoundKeySchedule& ks, const TTableSet& t);

// Same as encrypt_ttable but records every table access in order: 16 per main
// round, 16 S-box lookups in the final round (160 total).
Block encrypt_ttable_trace(const Block& pt, const RoundKeySchedule& ks, const TTableSet& t,
                           std::vector<TableLookup>& trace);

uint32_t load_be32(const uint8_t* p);
void store_be32(uint8_t* p, uint32_t v);

}  // namespace ctsched
