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

#include "attack.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace ctsched::attack {

TimingProfile build_profile(std::span<const TimingSample> samples) {
    if (samples.empty()) throw std::invalid_argument("cannot profile an empty sample stream");

    TimingProfile p;
    std::array<std::array<double, 256>, 16> sums{};
    double total = 0.0;
    for (const auto& s : samples) {
        total += double(s.cycles);
        for (int j = 0; j < 16; ++j) {
            sums[j][s.nonce[j]] += double(s.cycles);
            ++p.counts[j][s.nonce[j]];
        }
    }
    p.total_samples = samples.size();
    p.grand_mean = total / double(samples.size());
    for (int j = 0; j < 16; ++j)
        for (int v = 0; v < 256; ++v) {
            if (p.counts[j][v] == 0) {
                ++p.empty_cells;
                continue;
            }
            p.mean_dev[j][v] = sums[j][v] / double(p.counts[j][v]) - p.grand_mean;
        }
    return p;
}

CorrelationResult correlate(const TimingProfile& study, const Key128& study_key,
                            const TimingProfile& attack) {
    CorrelationResult c;
    for (int j = 0; j < 16; ++j)
        for (int g = 0; g < 256; ++g) {
            double acc = 0.0;
            for (int v = 0; v < 256; ++v)
                acc += study.mean_dev[j][v ^ study_key[j]] * attack.mean_dev[j][v ^ g];
            c.scores[j][g] = acc;
        }
    return c;
}

KeySpaceEstimate candidate_sets(const CorrelationResult& c, double margin) {
    if (margin < 0) throw std::invalid_argument("margin must be >= 0");
    KeySpaceEstimate e;
    for (int j = 0; j < 16; ++j) {
        const auto& row = c.scores[j];
        double best = row[0], mean = 0.0;
        for (double s : row) {
            best = std::max(best, s);
            mean += s;
        }
        mean /= 256.0;
        double var = 0.0;
        for (double s : row) var += (s - mean) * (s - mean);
        double stddev = std::sqrt(var / 256.0);

        double threshold = best - margin * stddev;
        for (int g = 0; g < 256; ++g)
            if (row[g] >= threshold) e.candidates[j].push_back(uint8_t(g));
        e.size_log2 += std::log2(double(e.candidates[j].size()));
    }
    e.size_decimal = std::exp2(e.size_log2);
    return e;
}

// ---- packet stream ---------------------------------------------------------

static uint64_t splitmix64(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

void PacketGen::fill(uint64_t index, std::span<uint8_t> out) const {
    uint64_t state = seed ^ (0x632be59bd9b4e019ull * (index + 1));
    size_t i = 0;
    while (i < out.size()) {
        uint64_t word = splitmix64(state);
        for (int b = 0; b < 8 && i < out.size(); ++b, ++i) out[i] = uint8_t(word >> (8 * b));
    }
}

// ---- oracles ---------------------------------------------------------------

SimOracle::SimOracle(Mode mode, int depth, const Key128& key, const sim::CacheConfig& cache,
                     const sim::LatencyModel& lm, uint64_t window_offset)
    : ks_(expand_key(key)), tables_(generate_tables()), cache_(cache), lm_(lm),
      offset_(window_offset) {
    lm_.validate();
    cache_.validate();
    auto program = ir::decompose_encryption();
    if (mode == Mode::unprotected) {
        sched_ = sched::layout_sequential(program);
    } else {
        sched_ = sched::schedule_program(program, depth);
        auto report = sched::verify_gaps(sched_, depth);
        if (!report.pass)
            throw std::runtime_error("protected oracle schedule failed gap verification");
    }
}

uint64_t SimOracle::time_packet(std::span<const uint8_t> packet) {
    if (packet.size() < 16) throw std::invalid_argument("packet shorter than a block");
    Block pt;
    std::copy(packet.begin(), packet.begin() + 16, pt.begin());
    auto pattern = sim::pattern_from_data(pt, ks_, tables_, cache_);
    return offset_ + sim::simulate(sched_, pattern, lm_);
}

// ---- attack driver ---------------------------------------------------------

namespace {

std::vector<TimingSample> collect_phase(TimingOracle& oracle, uint64_t n_packets,
                                        uint32_t packet_len, uint64_t seed) {
    PacketGen gen{seed};
    std::vector<uint8_t> packet(packet_len);
    std::vector<TimingSample> samples;
    samples.reserve(n_packets);
    for (uint64_t i = 0; i < n_packets; ++i) {
        gen.fill(i, packet);
        TimingSample s;
        std::copy(packet.begin(), packet.begin() + 16, s.nonce.begin());
        s.cycles = oracle.time_packet(packet);
        samples.push_back(s);
    }
    return samples;
}

void maybe_write_csv(const TimingProfile& p, const std::string& path) {
    if (path.empty()) return;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_profile_csv(p, out);
}

}  // namespace

AttackOutcome run_attack(TimingOracle& study, const Key128& study_key, TimingOracle& target,
                         const AttackParams& params) {
    if (params.packets_per_cell == 0)
        throw std::invalid_argument("packets_per_cell must be >= 1");
    if (params.packet_len < 16 || params.packet_len > 800)
        throw std::invalid_argument("packet length must be in 16..800");
    if (params.margin < 0) throw std::invalid_argument("margin must be >= 0");

    const uint64_t n = params.packets_per_cell * 256;
    // Distinct per-phase streams so the two servers never see shared inputs.
    const uint64_t study_seed = params.seed;
    const uint64_t attack_seed = params.seed ^ 0x517cc1b727220a95ull;

    AttackOutcome out;
    auto study_samples = collect_phase(study, n, params.packet_len, study_seed);
    out.study_profile = build_profile(study_samples);
    out.study_samples = study_samples.size();
    out.study_losses = study.losses();

    auto target_samples = collect_phase(target, n, params.packet_len, attack_seed);
    out.attack_profile = build_profile(target_samples);
    out.target_samples = target_samples.size();
    out.target_losses = target.losses();

    maybe_write_csv(out.study_profile, params.study_profile_csv);
    maybe_write_csv(out.attack_profile, params.attack_profile_csv);

    out.scores = correlate(out.study_profile, study_key, out.attack_profile);
    out.estimate = candidate_sets(out.scores, params.margin);

    if (params.true_key) {
        out.containment_checked = true;
        out.all_contained = true;
        for (int j = 0; j < 16; ++j) {
            const auto& set = out.estimate.candidates[j];
            out.contained[j] =
                std::find(set.begin(), set.end(), (*params.true_key)[j]) != set.end();
            out.all_contained = out.all_contained && out.contained[j];
        }
    }
    return out;
}

void write_profile_csv(const TimingProfile& p, std::ostream& out) {
    out << "position,value,mean_dev,count\n";
    char buf[64];
    for (int j = 0; j < 16; ++j)
        for (int v = 0; v < 256; ++v) {
            std::snprintf(buf, sizeof buf, "%.17g", p.mean_dev[j][v]);
            out << j << ',' << v << ',' << buf << ',' << p.counts[j][v] << '\n';
        }
}

std::string keyspace_report(const AttackOutcome& o) {
    std::string s;
    char line[128];
    for (int j = 0; j < 16; ++j) {
        std::snprintf(line, sizeof line, "position %2d: %3zu candidates%s\n", j,
                      o.estimate.candidates[j].size(),
                      !o.containment_checked ? ""
                      : o.contained[j]       ? "  [true byte contained]"
                                             : "  [TRUE BYTE MISSED]");
        s += line;
    }
    std::snprintf(line, sizeof line, "key space: 2^%.4f = %.6g\n", o.estimate.size_log2,
                  o.estimate.size_decimal);
    s += line;
    if (o.containment_checked)
        s += o.all_contained ? "all true key bytes contained\n"
                             : "some true key bytes missed\n";
    return s;
}

}  // namespace ctsched::attack
