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

#include "scheduler.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace ctsched::sched {

size_t Schedule::nop_count() const {
    size_t n = 0;
    for (const auto& s : slots)
        if (s.op.kind == ir::OpKind::Nop) ++n;
    return n;
}

std::vector<OpQueue> build_queues(const ir::MicroProgram& p) {
    std::vector<OpQueue> queues;
    for (size_t i = 0; i < p.ops.size(); ++i) {
        const auto& op = p.ops[i];
        if (!op.tag.valid())
            throw std::invalid_argument("op " + std::to_string(i) + " has no queue tag");
        auto it = std::find_if(queues.begin(), queues.end(),
                               [&](const OpQueue& q) { return q.tag == op.tag; });
        if (it == queues.end()) {
            queues.push_back({op.tag, {}});
            it = queues.end() - 1;
        }
        it->op_indices.push_back(i);
    }
    return queues;
}

namespace {

void copy_context(const ir::MicroProgram& p, Schedule& s) {
    s.reg_names = p.reg_names;
    s.inputs = p.inputs;
    s.outputs = p.outputs;
}

// Program-order rank of every memory op.
std::vector<uint32_t> load_ranks(const ir::MicroProgram& p) {
    std::vector<uint32_t> rank(p.ops.size(), 0);
    uint32_t n = 0;
    for (size_t i = 0; i < p.ops.size(); ++i) rank[i] = p.ops[i].is_load() ? n++ : n;
    return rank;
}

void finish_schedule(const ir::MicroProgram& p, Schedule& s) {
    auto ranks = load_ranks(p);
    s.mem_op_count = 0;
    s.pattern_index.clear();
    for (const auto& slot : s.slots) {
        if (!slot.op.is_load()) continue;
        ++s.mem_op_count;
        s.pattern_index.push_back(slot.original_index >= 0 ? ranks[size_t(slot.original_index)]
                                                           : uint32_t(s.pattern_index.size()));
    }
}

struct Def {
    int64_t slot;
    bool from_load;
};

// Schedules one round's queues, appending to out.slots. `defined` carries the
// registers produced by earlier segments (and program inputs); those are
// always ready.
void schedule_segment(const ir::MicroProgram& p, const std::vector<OpQueue>& queues, int depth,
                      std::vector<uint8_t>& defined, Schedule& out) {
    const size_t nregs = p.reg_names.size();
    std::vector<Def> defs(nregs, Def{std::numeric_limits<int64_t>::min() / 2, false});

    // Cross-queue reads of same-segment registers would make round-robin
    // interleaving unsound; reject them up front. This also catches registers
    // that are never defined at all.
    {
        std::vector<int32_t> def_queue(nregs, -1);
        for (size_t qi = 0; qi < queues.size(); ++qi)
            for (size_t oi : queues[qi].op_indices) {
                const auto& op = p.ops[oi];
                if (op.kind != ir::OpKind::Nop && op.dst >= 0)
                    def_queue[op.dst] = int32_t(qi);
            }
        for (size_t qi = 0; qi < queues.size(); ++qi) {
            std::vector<uint8_t> seen_before(nregs, 0);
            for (size_t oi : queues[qi].op_indices) {
                const auto& op = p.ops[oi];
                for (int si = 0; si < op.n_srcs(); ++si) {
                    int16_t src = si == 0 ? op.src0 : op.src1;
                    if (src < 0 || size_t(src) >= nregs)
                        throw std::runtime_error("op reads an unknown register");
                    if (def_queue[src] == int32_t(qi)) {
                        if (!seen_before[src])
                            throw std::runtime_error(
                                "unsatisfiable dependency: queue " + queues[qi].tag.str() +
                                " reads a register it has not defined yet");
                    } else if (def_queue[src] >= 0) {
                        throw std::runtime_error("queues are not data independent: " +
                                                 queues[qi].tag.str() + " reads from " +
                                                 queues[def_queue[src]].tag.str());
                    } else if (!defined[src]) {
                        throw std::runtime_error("unsatisfiable dependency: register '" +
                                                 p.reg_names[src] + "' is never defined");
                    }
                }
                if (op.kind != ir::OpKind::Nop && op.dst >= 0) seen_before[op.dst] = 1;
            }
        }
    }

    std::vector<size_t> head(queues.size(), 0);
    size_t remaining = 0;
    for (const auto& q : queues) remaining += q.op_indices.size();

    int64_t slot = int64_t(out.slots.size());
    size_t start = 0;
    while (remaining > 0) {
        bool issued = false;
        for (size_t k = 0; k < queues.size() && !issued; ++k) {
            size_t qi = (start + k) % queues.size();
            if (head[qi] >= queues[qi].op_indices.size()) continue;
            size_t oi = queues[qi].op_indices[head[qi]];
            const auto& op = p.ops[oi];

            bool ready = true;
            for (int si = 0; si < op.n_srcs() && ready; ++si) {
                int16_t src = si == 0 ? op.src0 : op.src1;
                const Def& d = defs[src];
                // Registers defined before this segment keep the far-negative
                // sentinel slot and are always ready.
                if (slot - d.slot < (d.from_load ? depth : 1)) ready = false;
            }
            if (!ready) continue;

            out.slots.push_back({op, int32_t(qi), int64_t(oi)});
            if (op.kind != ir::OpKind::Nop && op.dst >= 0) {
                defs[op.dst] = {slot, op.is_load()};
                defined[op.dst] = 1;
            }
            ++head[qi];
            --remaining;
            start = (qi + 1) % queues.size();
            issued = true;
        }
        if (!issued) out.slots.push_back({ir::MicroOp{}, -1, -1});
        ++slot;
    }
}

}  // namespace

Schedule schedule_queues(const ir::MicroProgram& p, const std::vector<OpQueue>& queues,
                         int depth) {
    if (depth < 1) throw std::invalid_argument("depth must be >= 1");
    if (queues.empty()) throw std::invalid_argument("no queues to schedule");
    for (const auto& q : queues) {
        if (q.op_indices.empty()) throw std::invalid_argument("empty queue");
        if (!q.tag.valid()) throw std::invalid_argument("queue without a valid tag");
        if (q.tag.round != queues.front().tag.round)
            throw std::invalid_argument("queues must belong to a single round");
    }

    Schedule s;
    s.depth = depth;
    copy_context(p, s);
    std::vector<uint8_t> defined(p.reg_names.size(), 0);
    for (int16_t r : p.inputs) defined[r] = 1;
    // Anything defined by ops outside the given queues counts as external.
    {
        std::vector<uint8_t> in_queues(p.ops.size(), 0);
        for (const auto& q : queues)
            for (size_t oi : q.op_indices) in_queues[oi] = 1;
        for (size_t i = 0; i < p.ops.size(); ++i)
            if (!in_queues[i] && p.ops[i].kind != ir::OpKind::Nop && p.ops[i].dst >= 0)
                defined[p.ops[i].dst] = 1;
    }
    schedule_segment(p, queues, depth, defined, s);
    finish_schedule(p, s);
    return s;
}

Schedule schedule_program(const ir::MicroProgram& p, int depth) {
    if (depth < 1) throw std::invalid_argument("depth must be >= 1");
    auto queues = build_queues(p);

    // Group queues by round, keeping round order; rounds hand whole state
    // words to their successors, so segments can be scheduled independently.
    std::map<int, std::vector<OpQueue>> rounds;
    for (auto& q : queues) rounds[q.tag.round].push_back(std::move(q));

    Schedule s;
    s.depth = depth;
    copy_context(p, s);
    std::vector<uint8_t> defined(p.reg_names.size(), 0);
    for (int16_t r : p.inputs) defined[r] = 1;
    for (auto& [round, qs] : rounds) schedule_segment(p, qs, depth, defined, s);
    finish_schedule(p, s);
    return s;
}

Schedule layout_sequential(const ir::MicroProgram& p) {
    Schedule s;
    s.depth = 0;
    copy_context(p, s);
    for (size_t i = 0; i < p.ops.size(); ++i) s.slots.push_back({p.ops[i], -1, int64_t(i)});
    finish_schedule(p, s);
    return s;
}

GapReport verify_gaps(const Schedule& s, int depth) {
    GapReport r;
    r.slot_count = s.slots.size();
    r.nop_count = s.nop_count();
    r.mem_op_count = s.mem_op_count;
    r.min_load_use_gap = std::numeric_limits<uint64_t>::max();

    for (size_t i = 0; i < s.slots.size(); ++i) {
        const auto& op = s.slots[i].op;
        if (!op.is_load()) continue;
        LoadGap g;
        g.load_slot = i;
        for (size_t j = i + 1; j < s.slots.size(); ++j) {
            const auto& other = s.slots[j].op;
            if ((other.n_srcs() >= 1 && other.src0 == op.dst) ||
                (other.n_srcs() >= 2 && other.src1 == op.dst)) {
                g.consumer_slot = j;
                g.gap = uint64_t(j - i);
                g.consumed = true;
                break;
            }
            if (other.kind != ir::OpKind::Nop && other.dst == op.dst) break;  // redefined
        }
        if (g.consumed) r.min_load_use_gap = std::min(r.min_load_use_gap, g.gap);
        r.loads.push_back(g);
    }
    if (r.min_load_use_gap == std::numeric_limits<uint64_t>::max()) r.min_load_use_gap = 0;

    // Order preservation: per queue tag, original positions must be strictly
    // increasing in slot order.
    std::map<std::pair<int, int>, int64_t> last_pos;
    for (const auto& slot : s.slots) {
        if (slot.original_index < 0 || !slot.op.tag.valid()) continue;
        auto key = std::make_pair(int(slot.op.tag.round), int(slot.op.tag.word));
        auto it = last_pos.find(key);
        if (it != last_pos.end() && slot.original_index <= it->second) {
            r.order_preserved = false;
            break;
        }
        last_pos[key] = slot.original_index;
    }

    r.pass = r.order_preserved && (r.loads.empty() || r.min_load_use_gap >= uint64_t(depth));
    return r;
}

Block interpret(const Schedule& s, const Block& pt, const RoundKeySchedule& ks,
                const TTableSet& t) {
    if (s.inputs.size() != 4 || s.outputs.size() != 4)
        throw std::invalid_argument("block interpretation needs 4 input and 4 output words");
    std::vector<uint32_t> regs(s.reg_names.size(), 0);
    std::vector<uint8_t> defined(s.reg_names.size(), 0);
    for (int i = 0; i < 4; ++i) {
        regs[s.inputs[i]] = load_be32(pt.data() + 4 * i);
        defined[s.inputs[i]] = 1;
    }
    std::vector<ir::MicroOp> ops;
    ops.reserve(s.slots.size());
    for (const auto& slot : s.slots) ops.push_back(slot.op);
    ir::run_ops(ops, regs, defined, ks, t, s.reg_names);
    Block ct;
    for (int i = 0; i < 4; ++i) {
        if (!defined[s.outputs[i]]) throw std::runtime_error("schedule output is undefined");
        store_be32(ct.data() + 4 * i, regs[s.outputs[i]]);
    }
    return ct;
}

std::string dump(const Schedule& s) {
    std::string out = "# depth: " + std::to_string(s.depth) + "\n";
    out += "inputs:";
    for (int16_t r : s.inputs) out += " " + s.reg_names.at(size_t(r));
    out += "\noutputs:";
    for (int16_t r : s.outputs) out += " " + s.reg_names.at(size_t(r));
    out += "\n";
    for (const auto& slot : s.slots) out += ir::dump_op(slot.op, s.reg_names) + "\n";
    return out;
}

Schedule parse_schedule(const std::string& text) {
    ir::MicroProgram p = ir::parse_program(text);
    Schedule s;
    s.depth = 0;
    copy_context(p, s);
    for (size_t i = 0; i < p.ops.size(); ++i)
        s.slots.push_back({p.ops[i], -1, p.ops[i].kind == ir::OpKind::Nop ? -1 : int64_t(i)});
    // Parsed schedules carry no provenance; patterns follow slot order.
    for (const auto& slot : s.slots)
        if (slot.op.is_load()) s.pattern_index.push_back(uint32_t(s.mem_op_count++));
    return s;
}

}  // namespace ctsched::sched
