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

#include <functional>
#include <string_view>
#include <vector>

#include "scheduler.hpp"

namespace ctsched::sim {

// Single-issue in-order machine: one instruction issues per `exec` cycles,
// a load's value becomes usable `hit` or `miss` cycles after its issue, and a
// consumer stalls until all operands are usable. No speculation, no overlap
// of one load's latency with another's outcome.
struct LatencyModel {
    uint32_t exec = 1;
    uint32_t hit = 2;
    uint32_t miss = 6;

    void validate() const;  // requires 1 <= exec <= hit < miss
};

enum class MemOutcome : uint8_t { Hit = 0, Miss = 1 };

// One entry per memory op, ordered by program memory-op index.
using HitMissPattern = std::vector<MemOutcome>;

struct EvictedLine {
    uint8_t table;  // 0..3 round tables, 4 the S-box
    uint16_t line;
};

// Cold-start direct-mapped model over the table addresses: a lookup hits iff
// its cache line was touched earlier in the same encryption. With warm_start
// the encryption instead begins with every table line resident except the
// listed evictions, which models the fixed lines the measurement window's own
// buffer work pushes out; that per-line bias is what makes the first-round
// indices observable to a remote profile at all.
struct CacheConfig {
    uint32_t line_size = 64;  // bytes; must divide 1024
    bool warm_start = false;
    std::vector<EvictedLine> evictions;

    uint32_t entries_per_line() const { return line_size / 4; }
    uint32_t table_lines() const { return 1024 / line_size; }
    uint32_t sbox_lines() const { return (256 + line_size - 1) / line_size; }
    void validate() const;
};

// The default per-table eviction set used by the leaky oracle.
std::vector<EvictedLine> leak_preset(uint32_t line_size);

uint64_t simulate(const sched::Schedule& s, const HitMissPattern& pattern,
                  const LatencyModel& lm);

struct TimingSpread {
    uint64_t min_cycles = 0;
    uint64_t max_cycles = 0;
    double variance = 0.0;
    uint64_t evaluated = 0;
    bool exhaustive = false;
};

// Evaluates the all-hit and all-miss patterns plus `samples` random ones, or
// every pattern when the schedule has at most 12 memory ops. `row` receives
// one (pattern id, cycles) pair per evaluation when set.
TimingSpread timing_spread(const sched::Schedule& s, const LatencyModel& lm, uint64_t samples,
                           uint64_t seed,
                           const std::function<void(std::string_view, uint64_t)>& row = {});

// Replays the lookup trace of one encryption against the cache model.
HitMissPattern pattern_from_data(const Block& pt, const RoundKeySchedule& ks, const TTableSet& t,
                                 const CacheConfig& cfg);

}  // namespace ctsched::sim
