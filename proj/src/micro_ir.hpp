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

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "aes.hpp"

namespace ctsched::ir {

struct parse_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class OpKind : uint8_t { Copy, Shr, Mask, TLoad, SLoad, RkXor, XorAcc, Nop };

// Which output word of which round an op computes. Round 0 is the whitening
// block, rounds 1..9 the table rounds, round 10 the S-box round.
struct QueueTag {
    int8_t round = -1;
    int8_t word = -1;

    bool valid() const { return round >= 0 && round <= 10 && word >= 0 && word <= 3; }
    bool operator==(const QueueTag&) const = default;
    std::string str() const;
};

// Single straight-line operation over 32-bit virtual registers. dst/src hold
// register ids interned in the owning program. TLOAD/SLOAD are the only
// memory operations; everything else executes in one cycle.
struct MicroOp {
    OpKind kind = OpKind::Nop;
    int16_t dst = -1;
    int16_t src0 = -1;
    int16_t src1 = -1;
    uint8_t shift = 0;    // SHR amount; SLOAD output byte lane
    uint8_t table = 0;    // TLOAD table id (0..3)
    uint8_t rk_word = 0;  // RK_XOR round-key word index (0..43)
    QueueTag tag;

    bool is_load() const { return kind == OpKind::TLoad || kind == OpKind::SLoad; }
    int n_srcs() const;
    bool operator==(const MicroOp&) const = default;
};

struct MicroProgram {
    std::vector<std::string> reg_names;
    std::vector<MicroOp> ops;
    std::vector<int16_t> inputs;
    std::vector<int16_t> outputs;

    int16_t reg(std::string_view name);           // intern, creating if absent
    int find_reg(std::string_view name) const;    // -1 if absent
    size_t load_count() const;
};

// One round's worth of bitwise operations for a single output word, in the
// four-block order copy/shift/mask/load/accumulate. round in 1..9, word in
// 0..3. The fragment's inputs are the four source state words.
MicroProgram decompose_word(int round, int word);

// The full encryption: 4 whitening XORs, 9 table rounds of 4 fragments each,
// and the final S-box round. 724 ops, 160 of them loads.
MicroProgram decompose_encryption();

// Executes ops over a register file. `defined` tracks initialisation; reads
// of undefined registers throw.
void run_ops(std::span<const MicroOp> ops, std::vector<uint32_t>& regs,
             std::vector<uint8_t>& defined, const RoundKeySchedule& ks, const TTableSet& t,
             const std::vector<std::string>& reg_names);

std::vector<uint32_t> interpret_words(const MicroProgram& p, std::span<const uint32_t> input_words,
                                      const RoundKeySchedule& ks, const TTableSet& t);

Block interpret(const MicroProgram& p, const Block& pt, const RoundKeySchedule& ks,
                const TTableSet& t);

// One op per line: `dst = KIND(srcs...) [queue=tag]`, preceded by inputs: and
// outputs: lines. Round-trips through parse_program.
std::string dump(const MicroProgram& p);
std::string dump_op(const MicroOp& op, const std::vector<std::string>& reg_names);
MicroProgram parse_program(const std::string& text);

// Parses a single op line (including bare NOP) against an existing symbol
// table, interning registers as needed.
MicroOp parse_op_line(std::string_view line, MicroProgram& symtab);

void check_well_formed(const MicroProgram& p);
void check_queue_independence(const MicroProgram& p);

}  // namespace ctsched::ir
