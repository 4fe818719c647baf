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

#include <atomic>
#include <memory>
#include <optional>
#include <thread>

#include "attack.hpp"

namespace ctsched::net {

struct net_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ServerConfig {
    std::string bind_host = "127.0.0.1";
    uint16_t port = 0;  // 0 = ephemeral
    Key128 key{};
    enum class Mode { unprotected, protected_ } mode = Mode::unprotected;
    int depth = 12;
    enum class Timing { real, sim } timing = Timing::sim;
    sim::LatencyModel lm{};
    sim::CacheConfig cache{};
    uint64_t window_offset = 0;
    uint64_t sim_counter_start = 0;
};

// The request handler, separated from the socket loop. A request shorter than
// one block (or longer than the 800-byte work area) is dropped without a
// response. Responses are exactly 40 bytes: the echoed 16-byte nonce, the
// 16 scrambled-zero bytes, and the 32-bit little-endian start/end timestamps.
class ServerEngine {
  public:
    explicit ServerEngine(const ServerConfig& cfg);

    std::optional<std::array<uint8_t, 40>> process(std::span<const uint8_t> request);

    // Injected timing for one request, as the sim timing source computes it.
    uint64_t sim_cycles(const Block& pt) const;

    const std::array<uint8_t, 16>& scrambled_zero() const { return scrambledzero_; }

  private:
    ServerConfig cfg_;
    RoundKeySchedule ks_;
    TTableSet tables_;
    sched::Schedule path_;
    std::array<uint8_t, 16> scrambledzero_{};
    std::array<uint8_t, 800> workarea_{};
    uint64_t counter_ = 0;
};

// Datagram server around a ServerEngine. Requests are handled strictly one at
// a time; nothing else runs inside the timestamp window.
class TimingServer {
  public:
    TimingServer() = default;
    ~TimingServer();
    TimingServer(const TimingServer&) = delete;
    TimingServer& operator=(const TimingServer&) = delete;

    void start(const ServerConfig& cfg);  // binds and serves on a thread
    void stop();
    uint16_t port() const { return port_; }
    uint64_t requests_served() const { return served_.load(); }

    // Blocking variant for the CLI; serves until the process is killed.
    [[noreturn]] static void run_foreground(const ServerConfig& cfg);

  private:
    void loop();

    int fd_ = -1;
    uint16_t port_ = 0;
    std::unique_ptr<ServerEngine> engine_;
    std::thread thread_;
    std::atomic<bool> stopping_{false};
    std::atomic<uint64_t> served_{0};
};

inline uint32_t wrap_delta(uint32_t start, uint32_t end) {
    return end - start;  // unsigned arithmetic handles counter wraparound
}

struct CollectResult {
    std::vector<attack::TimingSample> samples;
    uint64_t lost = 0;
};

// Sends `n_packets` generated packets one at a time and pairs each response
// with its request by the echoed nonce. Packets that time out after the given
// retries are counted as lost; a dead endpoint raises net_error early.
CollectResult collect(const std::string& host, uint16_t port, uint64_t n_packets,
                      uint32_t packet_len, uint64_t seed, int retries = 3,
                      int timeout_ms = 500);

// Remote oracle for run_attack; retries each packet and throws net_error once
// an exchange fails outright.
class NetOracle final : public attack::TimingOracle {
  public:
    NetOracle(const std::string& host, uint16_t port, int retries = 5, int timeout_ms = 500);
    ~NetOracle() override;

    uint64_t time_packet(std::span<const uint8_t> packet) override;
    uint64_t losses() const override { return retried_; }

  private:
    int fd_ = -1;
    int retries_;
    uint64_t retried_ = 0;
};

// host:port helper; throws std::invalid_argument on malformed input.
std::pair<std::string, uint16_t> parse_endpoint(const std::string& endpoint);

}  // namespace ctsched::net
