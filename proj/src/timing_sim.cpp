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

#include "timing_sim.hpp"

#include <bitset>
#include <limits>
#include <random>
#include <stdexcept>

namespace ctsched::sim {

void LatencyModel::validate() const {
    if (exec < 1 || exec > hit || hit >= miss)
        throw std::invalid_argument("latency model requires 1 <= exec <= hit < miss");
}

void CacheConfig::validate() const {
    if (line_size < 4 || 1024 % line_size != 0)
        throw std::invalid_argument("line size must divide 1024 and hold whole entries");
    if (!warm_start && !evictions.empty())
        throw std::invalid_argument("evictions only apply to a warm-start cache");
    for (const auto& e : evictions) {
        uint32_t lines = e.table == 4 ? sbox_lines() : table_lines();
        if (e.table > 4 || e.line >= lines)
            throw std::invalid_argument("evicted line out of range");
    }
}

std::vector<EvictedLine> leak_preset(uint32_t line_size) {
    CacheConfig probe{line_size, true, {}};
    probe.validate();
    // Not a subgroup under XOR, so no line-shift of the set maps it onto
    // itself and the correlation peak is unique per cache line.
    static constexpr uint16_t kLines[] = {0, 3, 5, 14};
    std::vector<EvictedLine> out;
    for (uint8_t table = 0; table < 4; ++table)
        for (uint16_t line : kLines) {
            uint16_t l = uint16_t(line % probe.table_lines());
            bool dup = false;
            for (const auto& e : out)
                if (e.table == table && e.line == l) dup = true;
            if (!dup) out.push_back({table, l});
        }
    return out;
}

uint64_t simulate(const sched::Schedule& s, const HitMissPattern& pattern,
                  const LatencyModel& lm) {
    lm.validate();
    if (pattern.size() != s.mem_op_count)
        throw std::invalid_argument("pattern length " + std::to_string(pattern.size()) +
                                    " does not match memory-op count " +
                                    std::to_string(s.mem_op_count));

    // ready[r]: earliest issue cycle at which r's value is usable.
    std::vector<int64_t> ready(s.reg_names.size(), 0);
    int64_t prev_issue = -int64_t(lm.exec);
    size_t load_i = 0;

    for (const auto& slot : s.slots) {
        const auto& op = slot.op;
        int64_t issue = prev_issue + lm.exec;
        if (op.n_srcs() >= 1 && op.src0 >= 0) issue = std::max(issue, ready[op.src0]);
        if (op.n_srcs() >= 2 && op.src1 >= 0) issue = std::max(issue, ready[op.src1]);

        if (op.is_load()) {
            MemOutcome o = pattern[s.pattern_index[load_i++]];
            ready[op.dst] = issue + (o == MemOutcome::Miss ? lm.miss : lm.hit);
        } else if (op.kind != ir::OpKind::Nop && op.dst >= 0) {
            ready[op.dst] = issue + lm.exec;
        }
        prev_issue = issue;
    }
    return uint64_t(prev_issue + lm.exec);
}

TimingSpread timing_spread(const sched::Schedule& s, const LatencyModel& lm, uint64_t samples,
                           uint64_t seed,
                           const std::function<void(std::string_view, uint64_t)>& row) {
    TimingSpread out;
    out.min_cycles = std::numeric_limits<uint64_t>::max();
    double sum = 0.0, sumsq = 0.0;

    auto eval = [&](std::string_view id, const HitMissPattern& p) {
        uint64_t c = simulate(s, p, lm);
        out.min_cycles = std::min(out.min_cycles, c);
        out.max_cycles = std::max(out.max_cycles, c);
        sum += double(c);
        sumsq += double(c) * double(c);
        ++out.evaluated;
        if (row) row(id, c);
    };

    const size_t n = s.mem_op_count;
    if (n <= 12) {
        out.exhaustive = true;
        for (uint64_t bits = 0; bits < (uint64_t(1) << n); ++bits) {
            HitMissPattern p(n);
            for (size_t i = 0; i < n; ++i)
                p[i] = (bits >> i) & 1 ? MemOutcome::Miss : MemOutcome::Hit;
            eval("exh" + std::to_string(bits), p);
        }
    } else {
        eval("all_hit", HitMissPattern(n, MemOutcome::Hit));
        eval("all_miss", HitMissPattern(n, MemOutcome::Miss));
        std::mt19937_64 rng(seed);
        HitMissPattern p(n);
        for (uint64_t k = 0; k < samples; ++k) {
            uint64_t bits = 0;
            for (size_t i = 0; i < n; ++i) {
                if (i % 64 == 0) bits = rng();
                p[i] = (bits >> (i % 64)) & 1 ? MemOutcome::Miss : MemOutcome::Hit;
            }
            eval("rand" + std::to_string(k), p);
        }
    }
    double mean = sum / double(out.evaluated);
    out.variance = sumsq / double(out.evaluated) - mean * mean;
    if (out.variance < 0) out.variance = 0;
    return out;
}

HitMissPattern pattern_from_data(const Block& pt, const RoundKeySchedule& ks, const TTableSet& t,
                                 const CacheConfig& cfg) {
    cfg.validate();
    std::vector<TableLookup> trace;
    encrypt_ttable_trace(pt, ks, t, trace);

    std::array<std::bitset<256>, 5> present;
    if (cfg.warm_start) {
        for (unsigned tab = 0; tab < 5; ++tab) {
            uint32_t lines = tab == 4 ? cfg.sbox_lines() : cfg.table_lines();
            for (uint32_t l = 0; l < lines; ++l) present[tab][l] = true;
        }
        for (const auto& e : cfg.evictions) present[e.table][e.line] = false;
    }

    HitMissPattern pattern;
    pattern.reserve(trace.size());
    for (const auto& look : trace) {
        uint32_t line = look.table == kSboxTable ? look.index / cfg.line_size
                                                 : look.index / cfg.entries_per_line();
        pattern.push_back(present[look.table][line] ? MemOutcome::Hit : MemOutcome::Miss);
        present[look.table][line] = true;
    }
    return pattern;
}

}  // namespace ctsched::sim
