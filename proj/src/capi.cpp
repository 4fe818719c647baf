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

#include "ctsched.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>

#include "attack.hpp"
#include "hex.hpp"
#include "service.hpp"

using namespace ctsched;

extern "C" {

struct ctsched_program {
    ir::MicroProgram rep;
};

struct ctsched_schedule {
    sched::Schedule rep;
};

struct ctsched_server {
    net::TimingServer rep;
};

}  // extern "C"

namespace {

thread_local std::string g_last_error;

ctsched_status fail(ctsched_status s, const std::string& msg) {
    g_last_error = msg;
    return s;
}

template <typename F>
ctsched_status guard(F&& f) {
    try {
        return f();
    } catch (const std::invalid_argument& e) {
        return fail(CTSCHED_EINVAL, e.what());
    } catch (const ir::parse_error& e) {
        return fail(CTSCHED_EPARSE, e.what());
    } catch (const net::net_error& e) {
        return fail(CTSCHED_ENET, e.what());
    } catch (const std::exception& e) {
        return fail(CTSCHED_ERUNTIME, e.what());
    } catch (...) {
        return fail(CTSCHED_ERUNTIME, "unknown error");
    }
}

ctsched_status require(bool ok, const char* what) {
    return ok ? CTSCHED_OK : fail(CTSCHED_EINVAL, what);
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

Key128 key_from(const uint8_t k[16]) {
    Key128 key;
    std::memcpy(key.data(), k, 16);
    return key;
}

sim::LatencyModel lm_from(const ctsched_latency_model* lm) {
    if (!lm) return {};
    return {lm->exec, lm->hit, lm->miss};
}

sim::CacheConfig cache_from(const ctsched_cache_config* cfg) {
    if (!cfg) return {};
    sim::CacheConfig out;
    out.line_size = cfg->line_size;
    out.warm_start = cfg->warm_start != 0;
    for (size_t i = 0; i < cfg->n_evictions; ++i)
        out.evictions.push_back({cfg->evictions[i].table, cfg->evictions[i].line});
    return out;
}

// Storage for the default attack configuration's eviction preset.
const std::vector<ctsched_evicted_line>& default_evictions() {
    static const std::vector<ctsched_evicted_line> v = [] {
        std::vector<ctsched_evicted_line> out;
        for (const auto& e : sim::leak_preset(64)) out.push_back({e.table, e.line});
        return out;
    }();
    return v;
}

}  // namespace

extern "C" {

const char* ctsched_status_name(ctsched_status s) {
    switch (s) {
        case CTSCHED_OK: return "ok";
        case CTSCHED_EINVAL: return "invalid argument";
        case CTSCHED_EPARSE: return "parse error";
        case CTSCHED_ENET: return "network error";
        case CTSCHED_EIO: return "io error";
        case CTSCHED_ERUNTIME: return "runtime error";
    }
    return "unknown";
}

const char* ctsched_last_error(void) {
    return g_last_error.c_str();
}

void ctsched_free(void* p) {
    std::free(p);
}

/* ---- hex ------------------------------------------------------------------ */

ctsched_status ctsched_hex_decode(const char* hex, uint8_t* out, size_t out_len) {
    if (auto s = require(hex && out, "null argument")) return s;
    return guard([&] {
        from_hex(hex, std::span<uint8_t>(out, out_len));
        return CTSCHED_OK;
    });
}

ctsched_status ctsched_hex_encode(const uint8_t* bytes, size_t len, char* out, size_t out_cap) {
    if (auto s = require(bytes && out, "null argument")) return s;
    if (auto s = require(out_cap >= 2 * len + 1, "output buffer too small")) return s;
    std::string hex = to_hex(std::span<const uint8_t>(bytes, len));
    std::memcpy(out, hex.c_str(), hex.size() + 1);
    return CTSCHED_OK;
}

/* ---- AES ------------------------------------------------------------------ */

ctsched_status ctsched_encrypt(const uint8_t key[16], const uint8_t pt[16], const char* path,
                               int depth, uint8_t ct[16]) {
    if (auto s = require(key && pt && path && ct, "null argument")) return s;
    return guard([&] {
        auto ks = expand_key(key_from(key));
        Block block = key_from(pt);
        Block out;
        std::string which = path;
        if (which == "reference") {
            out = encrypt_reference(block, ks);
        } else if (which == "ttable") {
            out = encrypt_ttable(block, ks, generate_tables());
        } else if (which == "micro") {
            out = ir::interpret(ir::decompose_encryption(), block, ks, generate_tables());
        } else if (which == "scheduled") {
            if (depth < 1)
                return fail(CTSCHED_EINVAL, "scheduled path requires a depth >= 1");
            auto s = sched::schedule_program(ir::decompose_encryption(), depth);
            out = sched::interpret(s, block, ks, generate_tables());
        } else {
            return fail(CTSCHED_EINVAL, "unknown path '" + which + "'");
        }
        std::memcpy(ct, out.data(), 16);
        return CTSCHED_OK;
    });
}

ctsched_status ctsched_tables_selfcheck(char** summary) {
    if (auto s = require(summary != nullptr, "null argument")) return s;
    return guard([&] {
        auto t = generate_tables();
        auto ror = [](uint32_t w, unsigned n) { return (w >> n) | (w << (32 - n)); };
        for (int x = 0; x < 256; ++x) {
            uint8_t s = t.sbox[x];
            uint32_t expect = (uint32_t(gf_mul(s, 2)) << 24) | (uint32_t(s) << 16) |
                              (uint32_t(s) << 8) | uint32_t(gf_mul(s, 3));
            if (t.te0[x] != expect || t.te1[x] != ror(t.te0[x], 8) ||
                t.te2[x] != ror(t.te0[x], 16) || t.te3[x] != ror(t.te0[x], 24))
                return fail(CTSCHED_ERUNTIME, "table invariant violated");
        }
        std::string text;
        text += "tables: 4 x 1024 bytes (256 x 32-bit words each) + 256-byte sbox\n";
        text += "sbox[0x00] = 0x63, te0[0x00] = 0xc66363a5\n";
        text += "rotation identities te1/te2/te3 = ror8/16/24(te0): ok\n";
        text += "byte composition te0[x] = (2*S, S, S, 3*S): ok\n";
        *summary = dup_string(text);
        return CTSCHED_OK;
    });
}

/* ---- programs and schedules -------------------------------------------------- */

ctsched_status ctsched_program_decompose(ctsched_program** out) {
    if (auto s = require(out != nullptr, "null argument")) return s;
    return guard([&] {
        *out = new ctsched_program{ir::decompose_encryption()};
        return CTSCHED_OK;
    });
}

ctsched_status ctsched_program_parse(const char* text, ctsched_program** out) {
    if (auto s = require(text && out, "null argument")) return s;
    return guard([&] {
        auto p = ir::parse_program(text);
        ir::check_well_formed(p);
        *out = new ctsched_program{std::move(p)};
        return CTSCHED_OK;
    });
}

ctsched_status ctsched_program_dump(const ctsched_program* p, char** text) {
    if (auto s = require(p && text, "null argument")) return s;
    return guard([&] {
        *text = dup_string(ir::dump(p->rep));
        return CTSCHED_OK;
    });
}

size_t ctsched_program_op_count(const ctsched_program* p) {
    return p ? p->rep.ops.size() : 0;
}

size_t ctsched_program_load_count(const ctsched_program* p) {
    return p ? p->rep.load_count() : 0;
}

void ctsched_program_free(ctsched_program* p) {
    delete p;
}

ctsched_status ctsched_schedule_build(const ctsched_program* p, int depth,
                                      ctsched_schedule** out) {
    if (auto s = require(p && out, "null argument")) return s;
    return guard([&] {
        *out = new ctsched_schedule{sched::schedule_program(p->rep, depth)};
        return CTSCHED_OK;
    });
}

ctsched_status ctsched_schedule_sequential(const ctsched_program* p, ctsched_schedule** out) {
    if (auto s = require(p && out, "null argument")) return s;
    return guard([&] {
        *out = new ctsched_schedule{sched::layout_sequential(p->rep)};
        return CTSCHED_OK;
    });
}

ctsched_status ctsched_schedule_parse(const char* text, ctsched_schedule** out) {
    if (auto s = require(text && out, "null argument")) return s;
    return guard([&] {
        *out = new ctsched_schedule{sched::parse_schedule(text)};
        return CTSCHED_OK;
    });
}

ctsched_status ctsched_schedule_dump(const ctsched_schedule* s, char** text) {
    if (auto st = require(s && text, "null argument")) return st;
    return guard([&] {
        *text = dup_string(sched::dump(s->rep));
        return CTSCHED_OK;
    });
}

size_t ctsched_schedule_slot_count(const ctsched_schedule* s) {
    return s ? s->rep.slots.size() : 0;
}

void ctsched_schedule_free(ctsched_schedule* s) {
    delete s;
}

ctsched_status ctsched_schedule_verify(const ctsched_schedule* s, int depth,
                                       ctsched_gap_report* out) {
    if (auto st = require(s && out, "null argument")) return st;
    return guard([&] {
        auto r = sched::verify_gaps(s->rep, depth);
        out->min_load_use_gap = r.min_load_use_gap;
        out->slot_count = r.slot_count;
        out->nop_count = r.nop_count;
        out->mem_op_count = r.mem_op_count;
        out->order_preserved = r.order_preserved ? 1 : 0;
        out->pass = r.pass ? 1 : 0;
        return CTSCHED_OK;
    });
}

/* ---- timing simulation -------------------------------------------------------- */

void ctsched_latency_model_default(ctsched_latency_model* lm) {
    if (lm) *lm = {1, 2, 6};
}

void ctsched_cache_config_default(ctsched_cache_config* cfg) {
    if (cfg) *cfg = {64, 0, nullptr, 0};
}

size_t ctsched_cache_leak_preset(uint32_t line_size, ctsched_evicted_line* out, size_t cap) {
    try {
        auto preset = sim::leak_preset(line_size);
        if (out)
            for (size_t i = 0; i < preset.size() && i < cap; ++i)
                out[i] = {preset[i].table, preset[i].line};
        return preset.size();
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return 0;
    }
}

ctsched_status ctsched_simulate(const ctsched_schedule* s, const ctsched_latency_model* lm,
                                const uint8_t* pattern, size_t pattern_len, uint64_t* cycles) {
    if (auto st = require(s && cycles && (pattern || pattern_len == 0), "null argument"))
        return st;
    return guard([&] {
        sim::HitMissPattern p(pattern_len);
        for (size_t i = 0; i < pattern_len; ++i)
            p[i] = pattern[i] ? sim::MemOutcome::Miss : sim::MemOutcome::Hit;
        *cycles = sim::simulate(s->rep, p, lm_from(lm));
        return CTSCHED_OK;
    });
}

ctsched_status ctsched_timing_spread(const ctsched_schedule* s,
                                     const ctsched_latency_model* lm, uint64_t samples,
                                     uint64_t seed, const char* csv_path, ctsched_spread* out) {
    if (auto st = require(s && out, "null argument")) return st;
    return guard([&] {
        std::ofstream csv;
        if (csv_path) {
            csv.open(csv_path);
            if (!csv) return fail(CTSCHED_EIO, std::string("cannot open '") + csv_path + "'");
            csv << "pattern_id,cycles\n";
        }
        auto row = [&](std::string_view id, uint64_t c) {
            if (csv.is_open()) csv << id << ',' << c << '\n';
        };
        auto spread = sim::timing_spread(s->rep, lm_from(lm), samples, seed,
                                         csv_path ? std::function(row) : nullptr);
        out->min_cycles = spread.min_cycles;
        out->max_cycles = spread.max_cycles;
        out->variance = spread.variance;
        out->evaluated = spread.evaluated;
        out->exhaustive = spread.exhaustive ? 1 : 0;
        return CTSCHED_OK;
    });
}

ctsched_status ctsched_pattern_from_data(const uint8_t pt[16], const uint8_t key[16],
                                         const ctsched_cache_config* cfg, uint8_t* pattern,
                                         size_t cap, size_t* len) {
    if (auto st = require(pt && key && pattern && len, "null argument")) return st;
    return guard([&] {
        auto ks = expand_key(key_from(key));
        auto p = sim::pattern_from_data(key_from(pt), ks, generate_tables(), cache_from(cfg));
        if (cap < p.size()) return fail(CTSCHED_EINVAL, "pattern buffer too small");
        for (size_t i = 0; i < p.size(); ++i)
            pattern[i] = p[i] == sim::MemOutcome::Miss ? 1 : 0;
        *len = p.size();
        return CTSCHED_OK;
    });
}

/* ---- attack ------------------------------------------------------------------ */

void ctsched_attack_config_default(ctsched_attack_config* cfg) {
    if (!cfg) return;
    std::memset(cfg, 0, sizeof *cfg);
    cfg->mode = "unprotected";
    cfg->depth = 12;
    cfg->packets_per_cell = 1024;
    cfg->packet_len = 800;
    cfg->margin = 1.0;
    cfg->seed = 1;
    ctsched_latency_model_default(&cfg->lm);
    cfg->cache.line_size = 64;
    cfg->cache.warm_start = 1;
    cfg->cache.evictions = default_evictions().data();
    cfg->cache.n_evictions = default_evictions().size();
}

ctsched_status ctsched_attack_run(const ctsched_attack_config* cfg, ctsched_keyspace* out) {
    if (auto st = require(cfg && out, "null argument")) return st;
    return guard([&] {
        attack::AttackParams params;
        params.packets_per_cell = cfg->packets_per_cell;
        params.packet_len = cfg->packet_len;
        params.margin = cfg->margin;
        params.seed = cfg->seed;
        if (cfg->check_containment) params.true_key = key_from(cfg->true_key);
        if (cfg->study_profile_csv) params.study_profile_csv = cfg->study_profile_csv;
        if (cfg->attack_profile_csv) params.attack_profile_csv = cfg->attack_profile_csv;

        std::unique_ptr<attack::TimingOracle> study, target;
        if (cfg->study_endpoint || cfg->target_endpoint) {
            if (!cfg->study_endpoint || !cfg->target_endpoint)
                return fail(CTSCHED_EINVAL, "network mode needs both endpoints");
            auto [sh, sp] = net::parse_endpoint(cfg->study_endpoint);
            auto [th, tp] = net::parse_endpoint(cfg->target_endpoint);
            study = std::make_unique<net::NetOracle>(sh, sp);
            target = std::make_unique<net::NetOracle>(th, tp);
        } else {
            std::string mode = cfg->mode ? cfg->mode : "unprotected";
            attack::SimOracle::Mode m;
            if (mode == "unprotected")
                m = attack::SimOracle::Mode::unprotected;
            else if (mode == "protected")
                m = attack::SimOracle::Mode::protected_;
            else
                return fail(CTSCHED_EINVAL, "mode must be unprotected or protected");
            auto cache = cache_from(&cfg->cache);
            auto lm = lm_from(&cfg->lm);
            study = std::make_unique<attack::SimOracle>(m, cfg->depth, key_from(cfg->study_key),
                                                        cache, lm, cfg->window_offset);
            target = std::make_unique<attack::SimOracle>(m, cfg->depth, key_from(cfg->target_key),
                                                         cache, lm, cfg->window_offset);
        }

        auto res = attack::run_attack(*study, key_from(cfg->study_key), *target, params);

        std::memset(out, 0, sizeof *out);
        for (int j = 0; j < 16; ++j) {
            for (uint8_t v : res.estimate.candidates[j])
                out->candidates[j][v / 8] |= uint8_t(1u << (v % 8));
            out->set_size[j] = uint16_t(res.estimate.candidates[j].size());
            out->contained[j] = res.containment_checked && res.contained[j] ? 1 : 0;
        }
        out->size_log2 = res.estimate.size_log2;
        out->size_decimal = res.estimate.size_decimal;
        out->containment_checked = res.containment_checked ? 1 : 0;
        out->all_contained = res.all_contained ? 1 : 0;
        out->study_samples = res.study_samples;
        out->target_samples = res.target_samples;
        out->study_losses = res.study_losses;
        out->target_losses = res.target_losses;
        return CTSCHED_OK;
    });
}

/* ---- service ------------------------------------------------------------------ */

namespace {

net::ServerConfig server_config_from(const ctsched_server_config* cfg) {
    net::ServerConfig out;
    if (cfg->bind_host) out.bind_host = cfg->bind_host;
    out.port = cfg->port;
    out.key = key_from(cfg->key);
    std::string mode = cfg->mode ? cfg->mode : "unprotected";
    if (mode == "protected")
        out.mode = net::ServerConfig::Mode::protected_;
    else if (mode == "unprotected")
        out.mode = net::ServerConfig::Mode::unprotected;
    else
        throw std::invalid_argument("mode must be unprotected or protected");
    out.depth = cfg->depth;
    std::string timing = cfg->timing ? cfg->timing : "sim";
    if (timing == "real")
        out.timing = net::ServerConfig::Timing::real;
    else if (timing == "sim")
        out.timing = net::ServerConfig::Timing::sim;
    else
        throw std::invalid_argument("timing must be sim or real");
    out.lm = lm_from(&cfg->lm);
    out.cache = cache_from(&cfg->cache);
    out.window_offset = cfg->window_offset;
    out.sim_counter_start = cfg->sim_counter_start;
    return out;
}

}  // namespace

void ctsched_server_config_default(ctsched_server_config* cfg) {
    if (!cfg) return;
    std::memset(cfg, 0, sizeof *cfg);
    cfg->bind_host = "127.0.0.1";
    cfg->mode = "unprotected";
    cfg->depth = 12;
    cfg->timing = "sim";
    ctsched_latency_model_default(&cfg->lm);
    cfg->cache.line_size = 64;
    cfg->cache.warm_start = 1;
    cfg->cache.evictions = default_evictions().data();
    cfg->cache.n_evictions = default_evictions().size();
}

ctsched_status ctsched_server_start(const ctsched_server_config* cfg, ctsched_server** out) {
    if (auto st = require(cfg && out, "null argument")) return st;
    return guard([&] {
        auto server = std::make_unique<ctsched_server>();
        server->rep.start(server_config_from(cfg));
        *out = server.release();
        return CTSCHED_OK;
    });
}

ctsched_status ctsched_server_port(const ctsched_server* s, uint16_t* port) {
    if (auto st = require(s && port, "null argument")) return st;
    *port = s->rep.port();
    return CTSCHED_OK;
}

ctsched_status ctsched_server_stop(ctsched_server* s) {
    if (auto st = require(s != nullptr, "null argument")) return st;
    return guard([&] {
        s->rep.stop();
        delete s;
        return CTSCHED_OK;
    });
}

ctsched_status ctsched_server_run(const ctsched_server_config* cfg) {
    if (auto st = require(cfg != nullptr, "null argument")) return st;
    return guard([&] {
        net::TimingServer::run_foreground(server_config_from(cfg));
        return CTSCHED_OK;
    });
}

ctsched_status ctsched_collect(const char* endpoint, uint64_t packets, uint32_t packet_len,
                               uint64_t seed, const char* csv_path, uint64_t* collected,
                               uint64_t* lost) {
    if (auto st = require(endpoint != nullptr, "null argument")) return st;
    return guard([&] {
        auto [host, port] = net::parse_endpoint(endpoint);
        auto res = net::collect(host, port, packets, packet_len, seed);
        if (csv_path) {
            std::ofstream csv(csv_path);
            if (!csv) return fail(CTSCHED_EIO, std::string("cannot open '") + csv_path + "'");
            csv << "nonce_hex,cycles\n";
            for (const auto& s : res.samples)
                csv << to_hex(s.nonce) << ',' << s.cycles << '\n';
        }
        if (collected) *collected = res.samples.size();
        if (lost) *lost = res.lost;
        return CTSCHED_OK;
    });
}

}  // extern "C"
