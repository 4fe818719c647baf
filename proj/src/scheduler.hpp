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

#include <string>
#include <vector>

#include "micro_ir.hpp"

namespace ctsched::sched {

// Per-output-word instruction queue. Ops keep their program order; queues of
// one round are mutually data independent.
struct OpQueue {
    ir::QueueTag tag;
    std::vector<size_t> op_indices;
};

std::vector<OpQueue> build_queues(const ir::MicroProgram& p);

struct Slot {
    ir::MicroOp op;              // OpKind::Nop for padding
    int32_t queue = -1;          // queue index within the segment, -1 for NOPs
    int64_t original_index = -1; // position in the source program, -1 for NOPs
};

struct Schedule {
    std::vector<Slot> slots;
    int depth = 0;
    std::vector<std::string> reg_names;
    std::vector<int16_t> inputs, outputs;
    size_t mem_op_count = 0;
    // For the k-th load in slot order, its index in program memory-op order.
    // Hit/miss patterns are indexed by program order.
    std::vector<uint32_t> pattern_index;

    size_t nop_count() const;
};

// Greedy rotating round-robin over the queues of a single round: at each slot
// the first queue whose head op has all operands produced at least `depth`
// slots back (memory producers) or one slot back (arithmetic) issues; a NOP
// is emitted when no head is ready. Queues must all belong to one round.
Schedule schedule_queues(const ir::MicroProgram& p, const std::vector<OpQueue>& queues,
                         int depth);

// Schedules each round's queues independently and concatenates the segments;
// rounds only pass whole state words between each other, so no load crosses a
// segment boundary.
Schedule schedule_program(const ir::MicroProgram& p, int depth);

// The unscheduled baseline: ops laid out in program order, no padding.
Schedule layout_sequential(const ir::MicroProgram& p);

struct LoadGap {
    size_t load_slot = 0;
    size_t consumer_slot = 0;
    uint64_t gap = 0;
    bool consumed = false;
};

struct GapReport {
    uint64_t min_load_use_gap = 0;
    size_t slot_count = 0;
    size_t nop_count = 0;
    size_t mem_op_count = 0;
    bool order_preserved = true;
    bool pass = false;
    std::vector<LoadGap> loads;
};

GapReport verify_gaps(const Schedule& s, int depth);

Block interpret(const Schedule& s, const Block& pt, const RoundKeySchedule& ks,
                const TTableSet& t);

std::string dump(const Schedule& s);
Schedule parse_schedule(const std::string& text);

}  // namespace ctsched::sched
