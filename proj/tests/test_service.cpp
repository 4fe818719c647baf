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

#include "doctest.h"
#include "hex.hpp"
#include "service.hpp"

using namespace ctsched;

namespace {

net::ServerConfig sim_config(const Key128& key) {
    net::ServerConfig cfg;
    cfg.key = key;
    cfg.mode = net::ServerConfig::Mode::unprotected;
    cfg.timing = net::ServerConfig::Timing::sim;
    cfg.cache.warm_start = true;
    cfg.cache.evictions = sim::leak_preset(64);
    return cfg;
}

uint32_t le32(const uint8_t* p) {
    return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) |
           (uint32_t(p[3]) << 24);
}

}  // namespace

TEST_CASE("response layout is bit-exact") {
    auto key = block_from_hex("000102030405060708090a0b0c0d0e0f");
    auto cfg = sim_config(key);
    cfg.sim_counter_start = 1000;
    net::ServerEngine engine(cfg);

    std::vector<uint8_t> request(800);
    std::mt19937_64 rng(8);
    for (auto& b : request) b = uint8_t(rng());

    Block pt;
    std::copy(request.begin(), request.begin() + 16, pt.begin());
    uint64_t expected_cycles = engine.sim_cycles(pt);

    auto resp = engine.process(request);
    REQUIRE(resp.has_value());
    REQUIRE(resp->size() == 40);

    // [0..16): nonce echo
    for (int i = 0; i < 16; ++i) CHECK((*resp)[i] == request[i]);

    // [16..32): scrambled zero = E_k(0), a key-dependent constant
    auto ks = expand_key(key);
    auto tables = generate_tables();
    Block scrambled = encrypt_ttable(Block{}, ks, tables);
    for (int i = 0; i < 16; ++i) CHECK((*resp)[16 + i] == scrambled[i]);

    // [32..36)/[36..40): little-endian start/end counter words
    uint32_t start = le32(resp->data() + 32);
    uint32_t end = le32(resp->data() + 36);
    CHECK(start == 1000);
    CHECK(net::wrap_delta(start, end) == expected_cycles);

    // scrambled-zero bytes stay constant across requests
    std::vector<uint8_t> other(800, 0x5a);
    auto resp2 = engine.process(other);
    REQUIRE(resp2.has_value());
    for (int i = 0; i < 16; ++i) CHECK((*resp2)[16 + i] == (*resp)[16 + i]);
}

TEST_CASE("short and oversized packets are dropped silently") {
    net::ServerEngine engine(sim_config(Key128{}));
    std::vector<uint8_t> short_pkt(15, 0xab);
    CHECK(!engine.process(short_pkt).has_value());
    std::vector<uint8_t> min_pkt(16, 0xab);
    CHECK(engine.process(min_pkt).has_value());
    std::vector<uint8_t> big_pkt(801, 0xab);
    CHECK(!engine.process(big_pkt).has_value());
}

TEST_CASE("timestamp wraparound") {
    CHECK(net::wrap_delta(0xFFFFFFF0u, 0x00000010u) == 0x20u);
    CHECK(net::wrap_delta(0, 0) == 0);

    auto cfg = sim_config(Key128{});
    cfg.sim_counter_start = 0xFFFFFFF0ull;
    net::ServerEngine engine(cfg);
    std::vector<uint8_t> request(32, 0x11);
    Block pt;
    std::copy(request.begin(), request.begin() + 16, pt.begin());
    auto resp = engine.process(request);
    REQUIRE(resp.has_value());
    uint32_t start = le32(resp->data() + 32);
    uint32_t end = le32(resp->data() + 36);
    CHECK(start == 0xFFFFFFF0u);
    CHECK(end < start);  // wrapped
    CHECK(net::wrap_delta(start, end) == engine.sim_cycles(pt));
}

TEST_CASE("loopback collection returns injected simulator cycles exactly") {
    auto key = block_from_hex("2b7e151628aed2a6abf7158809cf4f3c");
    auto cfg = sim_config(key);
    net::TimingServer server;
    server.start(cfg);
    REQUIRE(server.port() != 0);

    const uint64_t seed = 21;
    const uint64_t n = 200;
    auto result = net::collect("127.0.0.1", server.port(), n, 800, seed);
    CHECK(result.lost == 0);
    REQUIRE(result.samples.size() == n);

    net::ServerEngine reference(cfg);
    attack::PacketGen gen{seed};
    std::array<uint8_t, 800> packet;
    for (uint64_t i = 0; i < n; ++i) {
        gen.fill(i, packet);
        Block pt;
        std::copy(packet.begin(), packet.begin() + 16, pt.begin());
        CHECK(result.samples[i].nonce == pt);
        CHECK(result.samples[i].cycles == reference.sim_cycles(pt));
    }
    server.stop();
}

TEST_CASE("network attack equals the in-process attack for the same seed") {
    auto target_key = block_from_hex("2b7e151628aed2a6abf7158809cf4f3c");
    Key128 study_key{};

    sim::CacheConfig cache;
    cache.warm_start = true;
    cache.evictions = sim::leak_preset(64);

    attack::AttackParams prm;
    prm.packets_per_cell = 4;
    prm.packet_len = 64;
    prm.margin = 1.0;
    prm.seed = 2024;
    prm.true_key = target_key;

    attack::SimOracle study_sim(attack::SimOracle::Mode::unprotected, 0, study_key, cache, {},
                                0);
    attack::SimOracle target_sim(attack::SimOracle::Mode::unprotected, 0, target_key, cache, {},
                                 0);
    auto local = attack::run_attack(study_sim, study_key, target_sim, prm);

    net::TimingServer study_server, target_server;
    study_server.start(sim_config(study_key));
    target_server.start(sim_config(target_key));
    net::NetOracle study_net("127.0.0.1", study_server.port());
    net::NetOracle target_net("127.0.0.1", target_server.port());
    auto remote = attack::run_attack(study_net, study_key, target_net, prm);
    study_server.stop();
    target_server.stop();

    CHECK(remote.estimate.size_log2 == local.estimate.size_log2);
    for (int j = 0; j < 16; ++j)
        CHECK(remote.estimate.candidates[j] == local.estimate.candidates[j]);
    CHECK(remote.target_losses == 0);
}

TEST_CASE("collection from a dead endpoint raises a network error") {
    CHECK_THROWS_AS(net::collect("127.0.0.1", 9, 10, 64, 1, /*retries=*/0, /*timeout_ms=*/30),
                    net::net_error);
}

TEST_CASE("endpoint parsing") {
    auto [host, port] = net::parse_endpoint("127.0.0.1:5000");
    CHECK(host == "127.0.0.1");
    CHECK(port == 5000);
    CHECK_THROWS_AS(net::parse_endpoint("nope"), std::invalid_argument);
    CHECK_THROWS_AS(net::parse_endpoint("1.2.3.4:99999"), std::invalid_argument);
}
