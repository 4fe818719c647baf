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
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "timing_sim.hpp"

namespace ctsched::attack {

struct TimingSample {
    std::array<uint8_t, 16> nonce;
    uint64_t cycles;
};

// Per (byte position, byte value) mean cycle deviation from the grand mean.
struct TimingProfile {
    std::array<std::array<double, 256>, 16> mean_dev{};
    std::array<std::array<uint64_t, 256>, 16> counts{};
    double grand_mean = 0.0;
    uint64_t total_samples = 0;
    size_t empty_cells = 0;  // cells with no sample; their deviation is 0
};

TimingProfile build_profile(std::span<const TimingSample> samples);

struct CorrelationResult {
    std::array<std::array<double, 256>, 16> scores{};
};

// score[j][g] = sum_v study[j][v ^ study_key[j]] * attack[j][v ^ g]; with both
// servers leaking the same index profile, the maximum lands on the target's
// key byte (up to cache-line aliasing).
CorrelationResult correlate(const TimingProfile& study, const Key128& study_key,
                            const TimingProfile& attack);

struct KeySpaceEstimate {
    std::array<std::vector<uint8_t>, 16> candidates;
    double size_log2 = 0.0;
    double size_decimal = 0.0;
};

// Keeps every guess scoring within `margin` row standard deviations of the
// row maximum. A flat row keeps all 256 guesses.
KeySpaceEstimate candidate_sets(const CorrelationResult& c, double margin);

// Deterministic per-index packet stream; byte i of packet k does not depend
// on how much of packet k is generated, so the 16-byte nonce prefix is stable
// across consumers that need different packet lengths.
struct PacketGen {
    uint64_t seed = 0;
    void fill(uint64_t index, std::span<uint8_t> out) const;
};

class TimingOracle {
  public:
    virtual ~TimingOracle() = default;
    virtual uint64_t time_packet(std::span<const uint8_t> packet) = 0;
    virtual uint64_t losses() const { return 0; }
};

// In-process oracle: replays the request's first 16 bytes through the chosen
// encryption path and prices its lookup trace with the cache model.
class SimOracle final : public TimingOracle {
  public:
    enum class Mode { unprotected, protected_ };

    SimOracle(Mode mode, int depth, const Key128& key, const sim::CacheConfig& cache,
              const sim::LatencyModel& lm, uint64_t window_offset);

    uint64_t time_packet(std::span<const uint8_t> packet) override;

    const sched::Schedule& schedule() const { return sched_; }

  private:
    RoundKeySchedule ks_;
    TTableSet tables_;
    sched::Schedule sched_;
    sim::CacheConfig cache_;
    sim::LatencyModel lm_;
    uint64_t offset_;
};

struct AttackParams {
    uint64_t packets_per_cell = 0;  // total packets per phase = 256 * this
    uint32_t packet_len = 800;
    double margin = 1.0;
    uint64_t seed = 1;
    std::optional<Key128> true_key;
    std::string study_profile_csv;  // optional output paths
    std::string attack_profile_csv;
};

struct AttackOutcome {
    KeySpaceEstimate estimate;
    CorrelationResult scores;
    TimingProfile study_profile;
    TimingProfile attack_profile;
    bool containment_checked = false;
    std::array<bool, 16> contained{};
    bool all_contained = false;
    uint64_t study_samples = 0, target_samples = 0;
    uint64_t study_losses = 0, target_losses = 0;
};

// Two-phase run: profile the study oracle under its known key, profile the
// target, correlate, and select candidates.
AttackOutcome run_attack(TimingOracle& study, const Key128& study_key, TimingOracle& target,
                         const AttackParams& params);

// CSV rows `position,value,mean_dev,count`, 16*256 of them after the header.
void write_profile_csv(const TimingProfile& p, std::ostream& out);

std::string keyspace_report(const AttackOutcome& o);

}  // namespace ctsched::attack
