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

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ctsched.h"
#include "json.hpp"

namespace {

using nlohmann::json;

[[noreturn]] void die(ctsched_status s, const std::string& context) {
    std::cerr << "error: " << context << ": " << ctsched_status_name(s) << " ("
              << ctsched_last_error() << ")\n";
    std::exit(1);
}

void check(ctsched_status s, const std::string& context) {
    if (s != CTSCHED_OK) die(s, context);
}

std::vector<uint8_t> decode_hex(const std::string& hex, size_t n, const std::string& what) {
    std::vector<uint8_t> out(n);
    ctsched_status s = ctsched_hex_decode(hex.c_str(), out.data(), out.size());
    if (s != CTSCHED_OK) die(s, what);
    return out;
}

std::string encode_hex(const uint8_t* bytes, size_t n) {
    std::string out(2 * n + 1, '\0');
    check(ctsched_hex_encode(bytes, n, out.data(), out.size()), "hex encode");
    out.resize(2 * n);
    return out;
}

struct LmOption {
    std::string text = "1,2,6";
    ctsched_latency_model parse() const {
        ctsched_latency_model lm;
        if (std::sscanf(text.c_str(), "%u,%u,%u", &lm.exec, &lm.hit, &lm.miss) != 3) {
            std::cerr << "error: --lm expects exec,hit,miss\n";
            std::exit(1);
        }
        return lm;
    }
};

// Owns the eviction list backing a ctsched_cache_config.
struct CacheOption {
    uint32_t line_size = 64;
    std::string evict = "preset";  // preset | none | t:l[,t:l...]
    std::vector<ctsched_evicted_line> lines;

    ctsched_cache_config build(bool default_warm) {
        ctsched_cache_config cfg;
        ctsched_cache_config_default(&cfg);
        cfg.line_size = line_size;
        lines.clear();
        if (evict == "none" || (!default_warm && evict == "preset")) {
            return cfg;  // cold start
        }
        if (evict == "preset") {
            size_t n = ctsched_cache_leak_preset(line_size, nullptr, 0);
            if (n == 0) {
                std::cerr << "error: bad line size for eviction preset\n";
                std::exit(1);
            }
            lines.resize(n);
            ctsched_cache_leak_preset(line_size, lines.data(), lines.size());
        } else {
            std::stringstream ss(evict);
            std::string item;
            while (std::getline(ss, item, ',')) {
                unsigned table = 0, line = 0;
                if (std::sscanf(item.c_str(), "%u:%u", &table, &line) != 2) {
                    std::cerr << "error: --evict expects preset, none or table:line pairs\n";
                    std::exit(1);
                }
                lines.push_back({uint8_t(table), uint16_t(line)});
            }
        }
        cfg.warm_start = 1;
        cfg.evictions = lines.data();
        cfg.n_evictions = lines.size();
        return cfg;
    }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        std::cerr << "error: cannot read '" << path << "'\n";
        std::exit(1);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path);
    if (!out) {
        std::cerr << "error: cannot write '" << out_path << "'\n";
        std::exit(1);
    }
    out << text;
}

json keyspace_json(const ctsched_keyspace& ks) {
    json positions = json::array();
    for (int j = 0; j < 16; ++j) {
        json pos;
        pos["position"] = j;
        pos["set_size"] = ks.set_size[j];
        if (ks.containment_checked) pos["contains_true_byte"] = ks.contained[j] != 0;
        if (ks.set_size[j] <= 32) {
            json cands = json::array();
            for (int v = 0; v < 256; ++v)
                if (ks.candidates[j][v / 8] & (1u << (v % 8))) cands.push_back(v);
            pos["candidates"] = cands;
        }
        positions.push_back(pos);
    }
    json out;
    out["positions"] = positions;
    out["size_log2"] = ks.size_log2;
    out["size_decimal"] = ks.size_decimal;
    if (ks.containment_checked) out["all_true_bytes_contained"] = ks.all_contained != 0;
    out["study_samples"] = ks.study_samples;
    out["target_samples"] = ks.target_samples;
    out["study_losses"] = ks.study_losses;
    out["target_losses"] = ks.target_losses;
    return out;
}

void print_keyspace(const ctsched_keyspace& ks) {
    for (int j = 0; j < 16; ++j) {
        std::printf("position %2d: %3u candidates", j, ks.set_size[j]);
        if (ks.containment_checked)
            std::printf("%s", ks.contained[j] ? "  [true byte contained]" : "  [TRUE BYTE MISSED]");
        std::printf("\n");
    }
    std::printf("key space: 2^%.4f = %.6g\n", ks.size_log2, ks.size_decimal);
    if (ks.containment_checked)
        std::printf("%s\n", ks.all_contained ? "all true key bytes contained"
                                             : "some true key bytes missed");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ctsched: constant-time AES scheduling workbench"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read defaults from a key=value file");

    // ---- tables ----
    auto* cmd_tables = app.add_subcommand("tables", "generate the lookup tables and self-check");

    // ---- encrypt ----
    auto* cmd_encrypt = app.add_subcommand("encrypt", "encrypt one block");
    std::string enc_key, enc_pt, enc_path = "ttable";
    int enc_depth = 0;
    cmd_encrypt->add_option("--key", enc_key, "key, 32 hex chars")->required();
    cmd_encrypt->add_option("--pt", enc_pt, "plaintext, 32 hex chars")->required();
    cmd_encrypt->add_option("--path", enc_path, "reference|ttable|micro|scheduled");
    cmd_encrypt->add_option("--depth", enc_depth, "pipeline depth (scheduled path)");

    // ---- decompose ----
    auto* cmd_decompose = app.add_subcommand("decompose", "dump the micro-op program");
    std::string dec_out;
    cmd_decompose->add_option("--out", dec_out, "write to file instead of stdout");

    // ---- schedule ----
    auto* cmd_schedule = app.add_subcommand("schedule", "dump the rescheduled program");
    int sch_depth = 0;
    std::string sch_out;
    cmd_schedule->add_option("--depth", sch_depth, "pipeline depth")->required();
    cmd_schedule->add_option("--out", sch_out, "write to file instead of stdout");

    // ---- verify ----
    auto* cmd_verify = app.add_subcommand("verify", "check load-use gaps of a schedule");
    int ver_depth = 0;
    std::string ver_in;
    cmd_verify->add_option("--depth", ver_depth, "pipeline depth")->required();
    cmd_verify->add_option("--in", ver_in, "schedule file (default: build at --depth)");

    // ---- simulate ----
    auto* cmd_simulate = app.add_subcommand("simulate", "timing spread under the latency model");
    int simu_depth = 0;
    bool simu_unscheduled = false;
    uint64_t simu_samples = 10000, simu_seed = 1;
    std::string simu_csv;
    LmOption simu_lm;
    cmd_simulate->add_option("--depth", simu_depth, "pipeline depth of the schedule");
    cmd_simulate->add_flag("--unscheduled", simu_unscheduled, "simulate the sequential layout");
    cmd_simulate->add_option("--lm", simu_lm.text, "latency model exec,hit,miss");
    cmd_simulate->add_option("--samples", simu_samples, "random hit/miss patterns");
    cmd_simulate->add_option("--seed", simu_seed, "pattern RNG seed");
    cmd_simulate->add_option("--csv", simu_csv, "write pattern_id,cycles rows here");

    // ---- attack ----
    auto* cmd_attack = app.add_subcommand("attack", "run the study/attack key-recovery");
    std::string atk_mode = "unprotected", atk_key, atk_study_key(32, '0');
    std::string atk_target, atk_study_target, atk_json, atk_profile_csv, atk_study_profile_csv;
    int atk_depth = 12;
    uint64_t atk_ppc = 1024, atk_seed = 1;
    uint32_t atk_len = 800;
    double atk_margin = 1.0;
    LmOption atk_lm;
    CacheOption atk_cache;
    bool atk_no_containment = false;
    cmd_attack->add_option("--mode", atk_mode, "unprotected|protected (sim oracle)");
    cmd_attack->add_option("--depth", atk_depth, "pipeline depth for protected mode");
    cmd_attack->add_option("--key", atk_key, "target key (sim oracle), 32 hex chars");
    cmd_attack->add_option("--study-key", atk_study_key, "study key, 32 hex chars");
    cmd_attack->add_option("--target", atk_target, "attack server host:port (network mode)");
    cmd_attack->add_option("--study-target", atk_study_target, "study server host:port");
    cmd_attack->add_option("--packets-per-cell", atk_ppc, "samples per profile cell");
    cmd_attack->add_option("--len", atk_len, "packet length, 16..800");
    cmd_attack->add_option("--margin", atk_margin, "candidate margin in row std deviations");
    cmd_attack->add_option("--seed", atk_seed, "packet RNG seed");
    cmd_attack->add_option("--lm", atk_lm.text, "latency model exec,hit,miss");
    cmd_attack->add_option("--line-size", atk_cache.line_size, "cache line size in bytes");
    cmd_attack->add_option("--evict", atk_cache.evict, "preset|none|t:l,t:l,...");
    cmd_attack->add_option("--json", atk_json, "write machine-readable summary here");
    cmd_attack->add_option("--profile-csv", atk_profile_csv, "attack-phase profile CSV");
    cmd_attack->add_option("--study-profile-csv", atk_study_profile_csv,
                           "study-phase profile CSV");
    cmd_attack->add_flag("--no-containment", atk_no_containment,
                         "skip the true-key containment report");

    // ---- serve ----
    auto* cmd_serve = app.add_subcommand("serve", "run the datagram timing server");
    std::string srv_bind = "127.0.0.1:0", srv_key(32, '0'), srv_mode = "unprotected",
                srv_timing = "sim";
    int srv_depth = 12;
    uint64_t srv_offset = 0, srv_counter = 0;
    LmOption srv_lm;
    CacheOption srv_cache;
    cmd_serve->add_option("--bind", srv_bind, "bind address host:port (port 0 = ephemeral)");
    cmd_serve->add_option("--key", srv_key, "server key, 32 hex chars");
    cmd_serve->add_option("--mode", srv_mode, "unprotected|protected");
    cmd_serve->add_option("--depth", srv_depth, "pipeline depth for protected mode");
    cmd_serve->add_option("--timing", srv_timing, "sim|real timestamp source");
    cmd_serve->add_option("--lm", srv_lm.text, "latency model exec,hit,miss (sim)");
    cmd_serve->add_option("--line-size", srv_cache.line_size, "cache line size in bytes (sim)");
    cmd_serve->add_option("--evict", srv_cache.evict, "preset|none|t:l,... (sim)");
    cmd_serve->add_option("--offset", srv_offset, "constant non-AES window cycles (sim)");
    cmd_serve->add_option("--counter-start", srv_counter, "injected counter origin (sim)");

    // ---- collect ----
    auto* cmd_collect = app.add_subcommand("collect", "gather timing samples from a server");
    std::string col_target, col_csv;
    uint64_t col_packets = 1000, col_seed = 1;
    uint32_t col_len = 800;
    cmd_collect->add_option("--target", col_target, "server host:port")->required();
    cmd_collect->add_option("--packets", col_packets, "number of packets");
    cmd_collect->add_option("--len", col_len, "packet length, 16..800");
    cmd_collect->add_option("--seed", col_seed, "packet RNG seed");
    cmd_collect->add_option("--csv", col_csv, "write nonce_hex,cycles rows here");

    // ---- sweep ----
    auto* cmd_sweep = app.add_subcommand("sweep", "depth sweep with attacks and reports");
    std::string swp_depths = "6,8,10,12,14", swp_out = "sweep_out", swp_key;
    uint64_t swp_ppc = 1024, swp_samples = 10000, swp_seed = 1;
    double swp_margin = 1.0;
    LmOption swp_lm;
    CacheOption swp_cache;
    cmd_sweep->add_option("--depths", swp_depths, "comma-separated pipeline depths");
    cmd_sweep->add_option("--out-dir", swp_out, "report directory");
    cmd_sweep->add_option("--key", swp_key, "target key (default: random-looking fixed key)");
    cmd_sweep->add_option("--packets-per-cell", swp_ppc, "samples per profile cell");
    cmd_sweep->add_option("--samples", swp_samples, "random patterns per spread check");
    cmd_sweep->add_option("--margin", swp_margin, "candidate margin");
    cmd_sweep->add_option("--seed", swp_seed, "RNG seed");
    cmd_sweep->add_option("--lm", swp_lm.text, "latency model exec,hit,miss");
    cmd_sweep->add_option("--line-size", swp_cache.line_size, "cache line size in bytes");
    cmd_sweep->add_option("--evict", swp_cache.evict, "preset|none|t:l,...");

    CLI11_PARSE(app, argc, argv);

    if (cmd_tables->parsed()) {
        char* summary = nullptr;
        check(ctsched_tables_selfcheck(&summary), "tables");
        std::cout << summary;
        ctsched_free(summary);
        return 0;
    }

    if (cmd_encrypt->parsed()) {
        auto key = decode_hex(enc_key, 16, "--key");
        auto pt = decode_hex(enc_pt, 16, "--pt");
        if (enc_path == "scheduled" && enc_depth < 1) {
            std::cerr << "error: --path scheduled requires --depth >= 1\n";
            return 1;
        }
        uint8_t ct[16];
        check(ctsched_encrypt(key.data(), pt.data(), enc_path.c_str(), enc_depth, ct),
              "encrypt");
        std::cout << encode_hex(ct, 16) << "\n";
        return 0;
    }

    if (cmd_decompose->parsed()) {
        ctsched_program* p = nullptr;
        check(ctsched_program_decompose(&p), "decompose");
        char* text = nullptr;
        check(ctsched_program_dump(p, &text), "dump");
        emit(text, dec_out);
        ctsched_free(text);
        ctsched_program_free(p);
        return 0;
    }

    if (cmd_schedule->parsed()) {
        ctsched_program* p = nullptr;
        check(ctsched_program_decompose(&p), "decompose");
        ctsched_schedule* s = nullptr;
        check(ctsched_schedule_build(p, sch_depth, &s), "schedule");
        char* text = nullptr;
        check(ctsched_schedule_dump(s, &text), "dump");
        emit(text, sch_out);
        ctsched_free(text);
        ctsched_schedule_free(s);
        ctsched_program_free(p);
        return 0;
    }

    if (cmd_verify->parsed()) {
        ctsched_schedule* s = nullptr;
        if (!ver_in.empty()) {
            std::string text = slurp(ver_in);
            check(ctsched_schedule_parse(text.c_str(), &s), "parse schedule");
        } else {
            ctsched_program* p = nullptr;
            check(ctsched_program_decompose(&p), "decompose");
            check(ctsched_schedule_build(p, ver_depth, &s), "schedule");
            ctsched_program_free(p);
        }
        ctsched_gap_report r;
        check(ctsched_schedule_verify(s, ver_depth, &r), "verify");
        ctsched_schedule_free(s);
        std::printf("slots:            %llu\n", (unsigned long long)r.slot_count);
        std::printf("nops:             %llu\n", (unsigned long long)r.nop_count);
        std::printf("memory ops:       %llu\n", (unsigned long long)r.mem_op_count);
        std::printf("min load-use gap: %llu (required %d)\n",
                    (unsigned long long)r.min_load_use_gap, ver_depth);
        std::printf("order preserved:  %s\n", r.order_preserved ? "yes" : "no");
        std::printf("%s\n", r.pass ? "PASS" : "FAIL");
        return r.pass ? 0 : 1;
    }

    if (cmd_simulate->parsed()) {
        if (simu_unscheduled == (simu_depth > 0)) {
            std::cerr << "error: give exactly one of --depth or --unscheduled\n";
            return 1;
        }
        ctsched_program* p = nullptr;
        check(ctsched_program_decompose(&p), "decompose");
        ctsched_schedule* s = nullptr;
        if (simu_unscheduled)
            check(ctsched_schedule_sequential(p, &s), "layout");
        else
            check(ctsched_schedule_build(p, simu_depth, &s), "schedule");
        ctsched_latency_model lm = simu_lm.parse();
        ctsched_spread spread;
        check(ctsched_timing_spread(s, &lm, simu_samples, simu_seed,
                                    simu_csv.empty() ? nullptr : simu_csv.c_str(), &spread),
              "spread");
        ctsched_schedule_free(s);
        ctsched_program_free(p);
        std::printf("patterns evaluated: %llu%s\n", (unsigned long long)spread.evaluated,
                    spread.exhaustive ? " (exhaustive)" : "");
        std::printf("cycles: min %llu, max %llu, spread %llu, variance %.6g\n",
                    (unsigned long long)spread.min_cycles, (unsigned long long)spread.max_cycles,
                    (unsigned long long)(spread.max_cycles - spread.min_cycles),
                    spread.variance);
        return 0;
    }

    if (cmd_attack->parsed()) {
        ctsched_attack_config cfg;
        ctsched_attack_config_default(&cfg);
        cfg.mode = atk_mode.c_str();
        cfg.depth = atk_depth;
        auto study_key = decode_hex(atk_study_key, 16, "--study-key");
        std::memcpy(cfg.study_key, study_key.data(), 16);
        std::vector<uint8_t> target_key(16, 0);
        if (!atk_key.empty()) target_key = decode_hex(atk_key, 16, "--key");
        std::memcpy(cfg.target_key, target_key.data(), 16);
        if (!atk_no_containment && atk_target.empty()) {
            cfg.check_containment = 1;
            std::memcpy(cfg.true_key, target_key.data(), 16);
        }
        cfg.packets_per_cell = atk_ppc;
        cfg.packet_len = atk_len;
        cfg.margin = atk_margin;
        cfg.seed = atk_seed;
        cfg.lm = atk_lm.parse();
        cfg.cache = atk_cache.build(true);
        if (!atk_target.empty()) cfg.target_endpoint = atk_target.c_str();
        if (!atk_study_target.empty()) cfg.study_endpoint = atk_study_target.c_str();
        if (!atk_profile_csv.empty()) cfg.attack_profile_csv = atk_profile_csv.c_str();
        if (!atk_study_profile_csv.empty()) cfg.study_profile_csv = atk_study_profile_csv.c_str();

        ctsched_keyspace ks;
        check(ctsched_attack_run(&cfg, &ks), "attack");
        print_keyspace(ks);
        if (!atk_json.empty()) {
            std::ofstream out(atk_json);
            out << keyspace_json(ks).dump(2) << "\n";
        }
        return 0;
    }

    if (cmd_serve->parsed()) {
        ctsched_server_config cfg;
        ctsched_server_config_default(&cfg);
        auto colon = srv_bind.rfind(':');
        std::string host = colon == std::string::npos ? srv_bind : srv_bind.substr(0, colon);
        int port = colon == std::string::npos ? 0 : std::atoi(srv_bind.c_str() + colon + 1);
        cfg.bind_host = host.c_str();
        cfg.port = uint16_t(port);
        auto key = decode_hex(srv_key, 16, "--key");
        std::memcpy(cfg.key, key.data(), 16);
        cfg.mode = srv_mode.c_str();
        cfg.depth = srv_depth;
        cfg.timing = srv_timing.c_str();
        cfg.lm = srv_lm.parse();
        cfg.cache = srv_cache.build(true);
        cfg.window_offset = srv_offset;
        cfg.sim_counter_start = srv_counter;
        check(ctsched_server_run(&cfg), "serve");
        return 0;
    }

    if (cmd_collect->parsed()) {
        uint64_t collected = 0, lost = 0;
        check(ctsched_collect(col_target.c_str(), col_packets, col_len, col_seed,
                              col_csv.empty() ? nullptr : col_csv.c_str(), &collected, &lost),
              "collect");
        std::printf("collected %llu samples, lost %llu\n", (unsigned long long)collected,
                    (unsigned long long)lost);
        return 0;
    }

    if (cmd_sweep->parsed()) {
        std::filesystem::create_directories(swp_out);
        std::filesystem::create_directories(swp_out + "/profiles");
        ctsched_latency_model lm = swp_lm.parse();

        std::vector<int> depths;
        {
            std::stringstream ss(swp_depths);
            std::string item;
            while (std::getline(ss, item, ',')) depths.push_back(std::atoi(item.c_str()));
        }
        if (depths.empty()) {
            std::cerr << "error: no depths given\n";
            return 1;
        }
        std::string key_hex = swp_key.empty() ? "2b7e151628aed2a6abf7158809cf4f3c" : swp_key;
        auto target_key = decode_hex(key_hex, 16, "--key");

        ctsched_program* p = nullptr;
        check(ctsched_program_decompose(&p), "decompose");
        ctsched_schedule* seq = nullptr;
        check(ctsched_schedule_sequential(p, &seq), "layout");
        size_t loads = ctsched_program_load_count(p);
        std::vector<uint8_t> allhit(loads, 0);
        uint64_t base_cycles = 0;
        check(ctsched_simulate(seq, &lm, allhit.data(), allhit.size(), &base_cycles),
              "simulate");
        ctsched_spread base_spread;
        check(ctsched_timing_spread(seq, &lm, swp_samples, swp_seed, nullptr, &base_spread),
              "spread");

        auto run_atk = [&](const char* mode, int depth, const char* study_csv,
                           const char* attack_csv, ctsched_keyspace* ks) {
            ctsched_attack_config cfg;
            ctsched_attack_config_default(&cfg);
            cfg.mode = mode;
            cfg.depth = depth;
            std::memcpy(cfg.target_key, target_key.data(), 16);
            cfg.check_containment = 1;
            std::memcpy(cfg.true_key, target_key.data(), 16);
            cfg.packets_per_cell = swp_ppc;
            cfg.margin = swp_margin;
            cfg.seed = swp_seed;
            cfg.lm = lm;
            cfg.cache = swp_cache.build(true);
            cfg.study_profile_csv = study_csv;
            cfg.attack_profile_csv = attack_csv;
            check(ctsched_attack_run(&cfg, ks), std::string("attack ") + mode);
        };

        std::string unprot_csv = swp_out + "/profiles/unprotected.csv";
        ctsched_keyspace unprot;
        run_atk("unprotected", 0, nullptr, unprot_csv.c_str(), &unprot);

        std::ofstream report(swp_out + "/report.csv");
        report << "depth,slot_count,nop_count,min_gap,allhit_cycles,unscheduled_allhit_cycles,"
                  "overhead_ratio,spread,keyspace_log2\n";
        json summary;
        summary["unscheduled"] = {{"allhit_cycles", base_cycles},
                                  {"spread", base_spread.max_cycles - base_spread.min_cycles},
                                  {"keyspace_log2", unprot.size_log2},
                                  {"all_contained", unprot.all_contained != 0}};
        summary["depths"] = json::array();

        bool all_ok = true;
        std::printf("unscheduled: all-hit %llu cycles, spread %llu, attack key space 2^%.2f%s\n",
                    (unsigned long long)base_cycles,
                    (unsigned long long)(base_spread.max_cycles - base_spread.min_cycles),
                    unprot.size_log2,
                    unprot.all_contained && unprot.size_log2 < 128.0
                        ? ""
                        : "  (baseline recovery incomplete; raise --packets-per-cell)");

        bool first_protected_profile = true;
        uint64_t prev_cycles = 0;
        for (int depth : depths) {
            ctsched_schedule* s = nullptr;
            check(ctsched_schedule_build(p, depth, &s), "schedule");
            ctsched_gap_report gaps;
            check(ctsched_schedule_verify(s, depth, &gaps), "verify");
            if (!gaps.pass) {
                std::printf("depth %d: gap verification FAILED\n", depth);
                return 1;
            }
            ctsched_spread spread;
            check(ctsched_timing_spread(s, &lm, swp_samples, swp_seed, nullptr, &spread),
                  "spread");
            std::vector<uint8_t> hits(gaps.mem_op_count, 0);
            uint64_t cycles = 0;
            check(ctsched_simulate(s, &lm, hits.data(), hits.size(), &cycles), "simulate");
            ctsched_schedule_free(s);

            std::string prot_csv = swp_out + "/profiles/protected_d" + std::to_string(depth) +
                                   ".csv";
            ctsched_keyspace prot;
            run_atk("protected", depth,  nullptr,
                    first_protected_profile ? prot_csv.c_str() : nullptr, &prot);
            first_protected_profile = false;

            uint64_t spread_delta = spread.max_cycles - spread.min_cycles;
            bool ct_ok = spread_delta == 0 || depth < int(lm.miss);
            bool ks_ok = prot.size_log2 == 128.0;
            bool trend_ok = cycles >= prev_cycles;
            prev_cycles = cycles;
            all_ok = all_ok && ct_ok && ks_ok && trend_ok;
            if (!trend_ok)
                std::printf("depth %d: all-hit cycles decreased against the previous depth\n",
                            depth);

            double ratio = double(cycles) / double(base_cycles);
            report << depth << ',' << gaps.slot_count << ',' << gaps.nop_count << ','
                   << gaps.min_load_use_gap << ',' << cycles << ',' << base_cycles << ','
                   << ratio << ',' << spread_delta << ',' << prot.size_log2 << '\n';
            summary["depths"].push_back({{"depth", depth},
                                         {"slot_count", gaps.slot_count},
                                         {"nop_count", gaps.nop_count},
                                         {"min_gap", gaps.min_load_use_gap},
                                         {"allhit_cycles", cycles},
                                         {"overhead_ratio", ratio},
                                         {"spread", spread_delta},
                                         {"keyspace_log2", prot.size_log2}});
            std::printf(
                "depth %2d: slots %llu, nops %llu, min gap %llu, all-hit %llu cycles "
                "(%.3fx), spread %llu, protected key space 2^%.2f\n",
                depth, (unsigned long long)gaps.slot_count, (unsigned long long)gaps.nop_count,
                (unsigned long long)gaps.min_load_use_gap, (unsigned long long)cycles, ratio,
                (unsigned long long)spread_delta, prot.size_log2);
            if (!ct_ok) std::printf("depth %d: nonzero spread at depth >= miss latency\n", depth);
            if (!ks_ok) std::printf("depth %d: protected key space below 2^128\n", depth);
        }
        ctsched_schedule_free(seq);
        ctsched_program_free(p);
        std::ofstream(swp_out + "/summary.json") << summary.dump(2) << "\n";
        std::printf("%s\n", all_ok ? "SWEEP PASS" : "SWEEP FAIL");
        return all_ok ? 0 : 1;
    }

    return 0;
}
