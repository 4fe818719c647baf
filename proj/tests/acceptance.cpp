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

// End-to-end acceptance suite. Each criterion prints one PASS/FAIL line; the
// binary exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "attack.hpp"
#include "hex.hpp"
#include "service.hpp"

using namespace ctsched;

namespace {

int g_failures = 0;

struct Criterion {
    std::string name;
    std::vector<std::string> problems;
    std::chrono::steady_clock::time_point begin = std::chrono::steady_clock::now();

    explicit Criterion(std::string n) : name(std::move(n)) {}

    void expect(bool ok, const std::string& what) {
        if (!ok) problems.push_back(what);
    }

    ~Criterion() {
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - begin)
                          .count();
        if (problems.empty()) {
            std::printf("PASS  %s  (%.1fs)\n", name.c_str(), secs);
        } else {
            ++g_failures;
            std::printf("FAIL  %s  (%.1fs)\n", name.c_str(), secs);
            for (const auto& p : problems) std::printf("      - %s\n", p.c_str());
        }
        std::fflush(stdout);
    }
};

Block random_block(std::mt19937_64& rng) {
    Block b;
    for (auto& x : b) x = uint8_t(rng());
    return b;
}

void criterion1_aes_correctness() {
    Criterion c("1. AES correctness: four paths on the published vector plus 10^4 random pairs");

    auto tables = generate_tables();
    auto program = ir::decompose_encryption();
    auto schedule6 = sched::schedule_program(program, 6);

    auto key = block_from_hex("000102030405060708090a0b0c0d0e0f");
    auto pt = block_from_hex("00112233445566778899aabbccddeeff");
    auto ks = expand_key(key);
    const std::string want = "69c4e0d86a7b0430d8cdb78070b4c55a";
    c.expect(to_hex(encrypt_reference(pt, ks)) == want, "reference path mismatch");
    c.expect(to_hex(encrypt_ttable(pt, ks, tables)) == want, "ttable path mismatch");
    c.expect(to_hex(ir::interpret(program, pt, ks, tables)) == want, "micro path mismatch");
    c.expect(to_hex(sched::interpret(schedule6, pt, ks, tables)) == want,
             "scheduled path mismatch");

    std::mt19937_64 rng(1001);
    bool all = true;
    for (int i = 0; i < 10000 && all; ++i) {
        Key128 k = random_block(rng);
        Block x = random_block(rng);
        auto rk = expand_key(k);
        Block a = encrypt_reference(x, rk);
        all = all && a == encrypt_ttable(x, rk, tables) &&
              a == ir::interpret(program, x, rk, tables) &&
              a == sched::interpret(schedule6, x, rk, tables);
    }
    c.expect(all, "pairwise agreement failed on a random case");
}

void criterion2_reschedule_example() {
    Criterion c("2. rescheduling example: stall with a short gap, absorbed with a long one");

    auto build = [](int consumer_slot) {
        ir::MicroProgram p;
        int16_t x = p.reg("x");
        p.inputs.push_back(x);
        int16_t lv = p.reg("lv");
        for (int slot = 1; slot <= 8; ++slot) {
            int16_t dst = p.reg("r" + std::to_string(slot));
            if (slot == 2)
                p.ops.push_back({ir::OpKind::TLoad, lv, x, -1, 0, 0, 0, {1, 0}});
            else
                p.ops.push_back({ir::OpKind::Copy, dst,
                                 slot == consumer_slot ? lv : x, -1, 0, 0, 0, {1, 0}});
        }
        p.outputs = {x};
        return sched::layout_sequential(p);
    };

    sim::LatencyModel lm{1, 2, 6};
    auto near = build(6);
    auto far = build(8);
    c.expect(sim::simulate(near, {sim::MemOutcome::Hit}, lm) == 8, "near layout, hit != 8");
    c.expect(sim::simulate(near, {sim::MemOutcome::Miss}, lm) == 10, "near layout, miss != 10");
    c.expect(sim::simulate(far, {sim::MemOutcome::Hit}, lm) == 8, "far layout, hit != 8");
    c.expect(sim::simulate(far, {sim::MemOutcome::Miss}, lm) == 8, "far layout, miss != 8");
}

void criterion3_constant_time() {
    Criterion c("3. constant time: zero spread at depths 6..14, nonzero unscheduled");

    auto program = ir::decompose_encryption();
    sim::LatencyModel lm{1, 2, 6};
    for (int depth : {6, 8, 10, 12, 14}) {
        auto s = sched::schedule_program(program, depth);
        auto gaps = sched::verify_gaps(s, depth);
        c.expect(gaps.pass, "gap verification failed at depth " + std::to_string(depth));
        auto spread = sim::timing_spread(s, lm, 10000, 77);
        c.expect(spread.max_cycles == spread.min_cycles,
                 "nonzero spread at depth " + std::to_string(depth));
    }
    auto seq = sched::layout_sequential(program);
    auto spread = sim::timing_spread(seq, lm, 10000, 77);
    c.expect(spread.max_cycles > spread.min_cycles, "unscheduled layout shows no spread");
}

void criterion4_key_space() {
    Criterion c("4. key space: full 2^128 against protected, reduced with every byte found "
                "against unprotected");

    auto target_key = block_from_hex("2b7e151628aed2a6abf7158809cf4f3c");
    Key128 study_key{};
    sim::CacheConfig cache;
    cache.line_size = 64;
    cache.warm_start = true;
    cache.evictions = sim::leak_preset(64);
    sim::LatencyModel lm{1, 2, 6};

    {
        attack::SimOracle study(attack::SimOracle::Mode::protected_, 12, study_key, cache, lm,
                                0);
        attack::SimOracle target(attack::SimOracle::Mode::protected_, 12, target_key, cache,
                                 lm, 0);
        attack::AttackParams prm;
        prm.packets_per_cell = 64;
        prm.margin = 1.0;
        prm.seed = 11;
        prm.true_key = target_key;
        auto out = attack::run_attack(study, study_key, target, prm);
        c.expect(out.estimate.size_log2 == 128.0, "protected key space is not 2^128");
        double full = std::exp2(128.0);
        c.expect(std::abs(out.estimate.size_decimal - full) <= 0.001 * full,
                 "protected key space decimal off by more than 0.1%");
    }
    {
        attack::SimOracle study(attack::SimOracle::Mode::unprotected, 0, study_key, cache, lm,
                                0);
        attack::SimOracle target(attack::SimOracle::Mode::unprotected, 0, target_key, cache,
                                 lm, 0);
        attack::AttackParams prm;
        prm.packets_per_cell = 8192;  // 2^13
        prm.packet_len = 800;
        prm.margin = 1.0;
        prm.seed = 12;
        prm.true_key = target_key;
        auto out = attack::run_attack(study, study_key, target, prm);
        c.expect(out.estimate.size_log2 < 128.0, "unprotected key space not reduced");
        c.expect(out.all_contained, "a true key byte fell outside its candidate set");
    }
}

void criterion5_overhead_trend() {
    Criterion c("5. overhead trend: all-hit cycles non-decreasing over depths 6..14");

    auto program = ir::decompose_encryption();
    sim::LatencyModel lm{1, 2, 6};
    uint64_t prev = 0;
    for (int depth : {6, 8, 10, 12, 14}) {
        auto s = sched::schedule_program(program, depth);
        sim::HitMissPattern allhit(s.mem_op_count, sim::MemOutcome::Hit);
        uint64_t cycles = sim::simulate(s, allhit, lm);
        c.expect(cycles >= prev, "all-hit cycles decreased at depth " + std::to_string(depth));
        prev = cycles;
    }
}

void criterion6_wire_protocol() {
    Criterion c("6. wire protocol: 40-byte layout, short-packet drop, loopback attack equals "
                "in-process");

    auto key = block_from_hex("000102030405060708090a0b0c0d0e0f");
    net::ServerConfig cfg;
    cfg.key = key;
    cfg.cache.warm_start = true;
    cfg.cache.evictions = sim::leak_preset(64);
    cfg.sim_counter_start = 5000;
    net::ServerEngine engine(cfg);

    std::vector<uint8_t> request(800);
    std::mt19937_64 rng(61);
    for (auto& b : request) b = uint8_t(rng());
    Block pt;
    std::copy(request.begin(), request.begin() + 16, pt.begin());

    auto resp = engine.process(request);
    c.expect(resp.has_value() && resp->size() == 40, "no 40-byte response");
    if (resp) {
        bool echo = true;
        for (int i = 0; i < 16; ++i) echo = echo && (*resp)[i] == request[i];
        c.expect(echo, "nonce echo mismatch");

        auto scrambled = encrypt_ttable(Block{}, expand_key(key), generate_tables());
        bool sz = true;
        for (int i = 0; i < 16; ++i) sz = sz && (*resp)[16 + i] == scrambled[i];
        c.expect(sz, "scrambled-zero bytes mismatch");

        auto le32 = [&](int off) {
            return uint32_t((*resp)[off]) | (uint32_t((*resp)[off + 1]) << 8) |
                   (uint32_t((*resp)[off + 2]) << 16) | (uint32_t((*resp)[off + 3]) << 24);
        };
        c.expect(le32(32) == 5000, "start timestamp not little-endian counter origin");
        c.expect(net::wrap_delta(le32(32), le32(36)) == engine.sim_cycles(pt),
                 "timestamp delta does not equal injected cycles");
    }
    std::vector<uint8_t> short_pkt(15, 1);
    c.expect(!engine.process(short_pkt).has_value(), "15-byte packet was answered");

    // Loopback equality with the in-process oracle, same seed.
    auto target_key = block_from_hex("2b7e151628aed2a6abf7158809cf4f3c");
    Key128 study_key{};
    sim::CacheConfig cache;
    cache.warm_start = true;
    cache.evictions = sim::leak_preset(64);

    attack::AttackParams prm;
    prm.packets_per_cell = 16;
    prm.packet_len = 800;
    prm.margin = 1.0;
    prm.seed = 616;
    prm.true_key = target_key;

    attack::SimOracle study_sim(attack::SimOracle::Mode::unprotected, 0, study_key, cache, {},
                                0);
    attack::SimOracle target_sim(attack::SimOracle::Mode::unprotected, 0, target_key, cache,
                                 {}, 0);
    auto local = attack::run_attack(study_sim, study_key, target_sim, prm);

    net::ServerConfig study_cfg = cfg;
    study_cfg.key = study_key;
    study_cfg.sim_counter_start = 0;
    net::ServerConfig target_cfg = cfg;
    target_cfg.key = target_key;
    target_cfg.sim_counter_start = 0;
    net::TimingServer study_server, target_server;
    study_server.start(study_cfg);
    target_server.start(target_cfg);
    {
        net::NetOracle study_net("127.0.0.1", study_server.port());
        net::NetOracle target_net("127.0.0.1", target_server.port());
        auto remote = attack::run_attack(study_net, study_key, target_net, prm);
        bool equal = remote.estimate.size_log2 == local.estimate.size_log2;
        for (int j = 0; j < 16; ++j)
            equal = equal && remote.estimate.candidates[j] == local.estimate.candidates[j];
        c.expect(equal, "loopback estimate differs from the in-process estimate");
    }
    study_server.stop();
    target_server.stop();
}

void criterion7_profile_identities() {
    Criterion c("7. profile identities: centering within 1e-9 and self-correlation argmax");

    std::mt19937_64 rng(71);
    std::vector<attack::TimingSample> stream(30000);
    for (auto& s : stream) {
        for (auto& b : s.nonce) b = uint8_t(rng());
        s.cycles = 6000 + rng() % 400;
    }
    auto profile = attack::build_profile(stream);
    for (int j = 0; j < 16; ++j) {
        double acc = 0.0, scale = 0.0;
        for (int v = 0; v < 256; ++v) {
            acc += double(profile.counts[j][v]) * profile.mean_dev[j][v];
            scale += double(profile.counts[j][v]) * std::abs(profile.mean_dev[j][v]);
        }
        c.expect(std::abs(acc) <= 1e-9 * std::max(1.0, scale),
                 "centering identity violated at position " + std::to_string(j));
    }

    attack::TimingProfile synthetic{};
    for (int j = 0; j < 16; ++j)
        for (int v = 0; v < 256; ++v) {
            synthetic.mean_dev[j][v] = double(int64_t(rng() % 2001)) / 100.0 - 10.0;
            synthetic.counts[j][v] = 1;
        }
    Key128 key = random_block(rng);
    auto scores = attack::correlate(synthetic, key, synthetic);
    for (int j = 0; j < 16; ++j) {
        int argmax = 0;
        for (int g = 1; g < 256; ++g)
            if (scores.scores[j][g] > scores.scores[j][argmax]) argmax = g;
        c.expect(argmax == key[j],
                 "self-correlation argmax missed the key at position " + std::to_string(j));
    }
}

}  // namespace

int main() {
    criterion1_aes_correctness();
    criterion2_reschedule_example();
    criterion3_constant_time();
    criterion4_key_space();
    criterion5_overhead_trend();
    criterion6_wire_protocol();
    criterion7_profile_identities();

    if (g_failures == 0) {
        std::printf("all acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d acceptance criteria FAILED\n", g_failures);
    return 1;
}
