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

#include "service.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <ctime>

namespace ctsched::net {

namespace {

uint64_t cycle_counter() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_ia32_rdtsc();
#else
    timespec ts;
    clock_gettime(CLOCK_MONOTONIC, &ts);
    return uint64_t(ts.tv_sec) * 1000000000ull + uint64_t(ts.tv_nsec);
#endif
}

void store_le32(uint8_t* p, uint32_t v) {
    p[0] = uint8_t(v);
    p[1] = uint8_t(v >> 8);
    p[2] = uint8_t(v >> 16);
    p[3] = uint8_t(v >> 24);
}

uint32_t load_le32(const uint8_t* p) {
    return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) |
           (uint32_t(p[3]) << 24);
}

sockaddr_in make_addr(const std::string& host, uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
        throw std::invalid_argument("bad IPv4 address '" + host + "'");
    return addr;
}

void set_recv_timeout(int fd, int ms) {
    timeval tv{};
    tv.tv_sec = ms / 1000;
    tv.tv_usec = (ms % 1000) * 1000;
    setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
}

int open_udp() {
    int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd < 0) throw net_error("socket() failed");
    return fd;
}

}  // namespace

// ---- engine ----------------------------------------------------------------

ServerEngine::ServerEngine(const ServerConfig& cfg)
    : cfg_(cfg), ks_(expand_key(cfg.key)), tables_(generate_tables()),
      counter_(cfg.sim_counter_start) {
    cfg_.lm.validate();
    cfg_.cache.validate();
    // Key expansion and path construction happen once here, outside the
    // timed window.
    auto program = ir::decompose_encryption();
    if (cfg_.mode == ServerConfig::Mode::protected_) {
        path_ = sched::schedule_program(program, cfg_.depth);
        auto report = sched::verify_gaps(path_, cfg_.depth);
        if (!report.pass) throw std::runtime_error("protected server failed gap verification");
    } else {
        path_ = sched::layout_sequential(program);
    }
    Block zero{};
    scrambledzero_ = encrypt_ttable(zero, ks_, tables_);
}

uint64_t ServerEngine::sim_cycles(const Block& pt) const {
    auto pattern = sim::pattern_from_data(pt, ks_, tables_, cfg_.cache);
    return cfg_.window_offset + sim::simulate(path_, pattern, cfg_.lm);
}

std::optional<std::array<uint8_t, 40>> ServerEngine::process(std::span<const uint8_t> request) {
    const bool real = cfg_.timing == ServerConfig::Timing::real;
    std::array<uint8_t, 40> out{};

    uint64_t start = real ? cycle_counter() : counter_;
    store_le32(out.data() + 32, uint32_t(start));

    if (request.size() < 16 || request.size() > workarea_.size()) return std::nullopt;

    for (size_t i = 0; i < 16; ++i) out[i] = request[i];
    for (size_t i = 16; i < request.size(); ++i) workarea_[i] = request[i];

    Block pt;
    std::copy(request.begin(), request.begin() + 16, pt.begin());
    Block ct = real && cfg_.mode == ServerConfig::Mode::protected_
                   ? sched::interpret(path_, pt, ks_, tables_)
                   : encrypt_ttable(pt, ks_, tables_);
    std::copy(ct.begin(), ct.end(), workarea_.begin());

    for (size_t i = 0; i < 16; ++i) out[16 + i] = scrambledzero_[i];

    uint64_t end;
    if (real) {
        end = cycle_counter();
    } else {
        counter_ += sim_cycles(pt);
        end = counter_;
    }
    store_le32(out.data() + 36, uint32_t(end));
    return out;
}

// ---- server ----------------------------------------------------------------

TimingServer::~TimingServer() {
    stop();
}

void TimingServer::start(const ServerConfig& cfg) {
    if (fd_ >= 0) throw std::logic_error("server already started");
    engine_ = std::make_unique<ServerEngine>(cfg);
    fd_ = open_udp();
    auto addr = make_addr(cfg.bind_host, cfg.port);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(fd_);
        fd_ = -1;
        throw net_error("bind to " + cfg.bind_host + ":" + std::to_string(cfg.port) + " failed");
    }
    socklen_t alen = sizeof addr;
    getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &alen);
    port_ = ntohs(addr.sin_port);
    set_recv_timeout(fd_, 100);  // lets the loop observe stop()
    stopping_ = false;
    thread_ = std::thread(&TimingServer::loop, this);
}

void TimingServer::loop() {
    std::array<uint8_t, 2048> buf;
    while (!stopping_) {
        sockaddr_in peer{};
        socklen_t plen = sizeof peer;
        ssize_t n = ::recvfrom(fd_, buf.data(), buf.size(), 0,
                               reinterpret_cast<sockaddr*>(&peer), &plen);
        if (n <= 0) continue;
        auto resp = engine_->process(std::span<const uint8_t>(buf.data(), size_t(n)));
        ++served_;
        if (resp)
            ::sendto(fd_, resp->data(), resp->size(), 0, reinterpret_cast<sockaddr*>(&peer),
                     plen);
    }
}

void TimingServer::stop() {
    if (fd_ < 0) return;
    stopping_ = true;
    if (thread_.joinable()) thread_.join();
    ::close(fd_);
    fd_ = -1;
}

void TimingServer::run_foreground(const ServerConfig& cfg) {
    ServerEngine engine(cfg);
    int fd = open_udp();
    auto addr = make_addr(cfg.bind_host, cfg.port);
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
        throw net_error("bind to " + cfg.bind_host + ":" + std::to_string(cfg.port) + " failed");
    socklen_t alen = sizeof addr;
    getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &alen);
    std::fprintf(stderr, "serving on %s:%u\n", cfg.bind_host.c_str(), ntohs(addr.sin_port));

    std::array<uint8_t, 2048> buf;
    for (;;) {
        sockaddr_in peer{};
        socklen_t plen = sizeof peer;
        ssize_t n = ::recvfrom(fd, buf.data(), buf.size(), 0, reinterpret_cast<sockaddr*>(&peer),
                               &plen);
        if (n <= 0) continue;
        auto resp = engine.process(std::span<const uint8_t>(buf.data(), size_t(n)));
        if (resp)
            ::sendto(fd, resp->data(), resp->size(), 0, reinterpret_cast<sockaddr*>(&peer),
                     plen);
    }
}

// ---- client ----------------------------------------------------------------

namespace {

// One request/response exchange; returns the measured delta or nullopt on
// timeout or mismatched echo.
std::optional<uint64_t> exchange(int fd, const sockaddr_in& dest,
                                 std::span<const uint8_t> packet) {
    if (::sendto(fd, packet.data(), packet.size(), 0,
                 reinterpret_cast<const sockaddr*>(&dest), sizeof dest) < 0)
        return std::nullopt;
    std::array<uint8_t, 64> resp;
    for (;;) {
        ssize_t n = ::recv(fd, resp.data(), resp.size(), 0);
        if (n < 0) return std::nullopt;  // timeout
        if (n != 40) continue;
        if (std::memcmp(resp.data(), packet.data(), 16) != 0) continue;  // stale datagram
        uint32_t start = load_le32(resp.data() + 32);
        uint32_t end = load_le32(resp.data() + 36);
        return uint64_t(wrap_delta(start, end));
    }
}

}  // namespace

CollectResult collect(const std::string& host, uint16_t port, uint64_t n_packets,
                      uint32_t packet_len, uint64_t seed, int retries, int timeout_ms) {
    if (packet_len < 16 || packet_len > 800)
        throw std::invalid_argument("packet length must be in 16..800");

    int fd = open_udp();
    set_recv_timeout(fd, timeout_ms);
    auto dest = make_addr(host, port);

    CollectResult result;
    result.samples.reserve(n_packets);
    attack::PacketGen gen{seed};
    std::vector<uint8_t> packet(packet_len);
    uint64_t attempts_without_contact = 0;

    for (uint64_t i = 0; i < n_packets; ++i) {
        gen.fill(i, packet);
        std::optional<uint64_t> delta;
        for (int attempt = 0; attempt <= retries && !delta; ++attempt)
            delta = exchange(fd, dest, packet);
        if (delta) {
            attack::TimingSample s;
            std::copy(packet.begin(), packet.begin() + 16, s.nonce.begin());
            s.cycles = *delta;
            result.samples.push_back(s);
            attempts_without_contact = 0;
        } else {
            ++result.lost;
            if (result.samples.empty() && ++attempts_without_contact >= 5) {
                ::close(fd);
                throw net_error("no response from " + host + ":" + std::to_string(port));
            }
        }
    }
    ::close(fd);
    return result;
}

NetOracle::NetOracle(const std::string& host, uint16_t port, int retries, int timeout_ms)
    : retries_(retries) {
    fd_ = open_udp();
    set_recv_timeout(fd_, timeout_ms);
    auto dest = make_addr(host, port);
    if (::connect(fd_, reinterpret_cast<sockaddr*>(&dest), sizeof dest) != 0) {
        ::close(fd_);
        throw net_error("cannot reach " + host + ":" + std::to_string(port));
    }
}

NetOracle::~NetOracle() {
    if (fd_ >= 0) ::close(fd_);
}

uint64_t NetOracle::time_packet(std::span<const uint8_t> packet) {
    std::array<uint8_t, 64> resp;
    for (int attempt = 0; attempt <= retries_; ++attempt) {
        if (attempt > 0) ++retried_;
        if (::send(fd_, packet.data(), packet.size(), 0) < 0) continue;
        for (;;) {
            ssize_t n = ::recv(fd_, resp.data(), resp.size(), 0);
            if (n < 0) break;  // timeout; resend
            if (n != 40 || std::memcmp(resp.data(), packet.data(), 16) != 0) continue;
            return uint64_t(wrap_delta(load_le32(resp.data() + 32), load_le32(resp.data() + 36)));
        }
    }
    throw net_error("timing oracle unreachable after retries");
}

std::pair<std::string, uint16_t> parse_endpoint(const std::string& endpoint) {
    size_t colon = endpoint.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 >= endpoint.size())
        throw std::invalid_argument("endpoint must be host:port");
    int port = 0;
    for (size_t i = colon + 1; i < endpoint.size(); ++i) {
        char c = endpoint[i];
        if (c < '0' || c > '9') throw std::invalid_argument("bad port in endpoint");
        port = port * 10 + (c - '0');
        if (port > 65535) throw std::invalid_argument("port out of range");
    }
    return {endpoint.substr(0, colon), uint16_t(port)};
}

}  // namespace ctsched::net
