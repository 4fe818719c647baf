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

/*
 * C API for libctsched.
 *
 * The workbench decomposes T-table AES-128 into single-cycle bitwise
 * micro-operations, reschedules them so every table load sits at least a
 * pipeline depth ahead of its first consumer, and validates the result with a
 * cycle-level timing simulator, a remote-timing key-recovery harness, and a
 * datagram measurement service.
 *
 * All functions return CTSCHED_OK on success; on failure,
 * ctsched_last_error() carries a thread-local description. Objects returned
 * through handle out-parameters must be released with their _free function.
 */

#ifndef CTSCHED_H
#define CTSCHED_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ctsched_status {
    CTSCHED_OK = 0,
    CTSCHED_EINVAL = 1,   /* invalid argument or precondition violated */
    CTSCHED_EPARSE = 2,   /* malformed program or schedule text */
    CTSCHED_ENET = 3,     /* endpoint unreachable or network failure */
    CTSCHED_EIO = 4,      /* file I/O failure */
    CTSCHED_ERUNTIME = 5  /* any other runtime failure */
} ctsched_status;

const char* ctsched_status_name(ctsched_status s);
const char* ctsched_last_error(void);

/* Frees any buffer returned through a char** out-parameter. */
void ctsched_free(void* p);

/* ---- hex ----------------------------------------------------------------- */

ctsched_status ctsched_hex_decode(const char* hex, uint8_t* out, size_t out_len);
/* out_cap must be at least 2*len+1; the result is NUL terminated. */
ctsched_status ctsched_hex_encode(const uint8_t* bytes, size_t len, char* out, size_t out_cap);

/* ---- AES ----------------------------------------------------------------- */

/* path: "reference", "ttable", "micro" or "scheduled"; depth is the pipeline
 * depth for the scheduled path and must be >= 1 there (ignored otherwise). */
ctsched_status ctsched_encrypt(const uint8_t key[16], const uint8_t pt[16], const char* path,
                               int depth, uint8_t ct[16]);

/* Regenerates the tables, checks the rotation/byte-composition invariants and
 * returns a printable summary. */
ctsched_status ctsched_tables_selfcheck(char** summary);

/* ---- micro programs and schedules ----------------------------------------- */

typedef struct ctsched_program ctsched_program;
typedef struct ctsched_schedule ctsched_schedule;

ctsched_status ctsched_program_decompose(ctsched_program** out);
ctsched_status ctsched_program_parse(const char* text, ctsched_program** out);
ctsched_status ctsched_program_dump(const ctsched_program* p, char** text);
size_t ctsched_program_op_count(const ctsched_program* p);
size_t ctsched_program_load_count(const ctsched_program* p);
void ctsched_program_free(ctsched_program* p);

ctsched_status ctsched_schedule_build(const ctsched_program* p, int depth,
                                      ctsched_schedule** out);
ctsched_status ctsched_schedule_sequential(const ctsched_program* p, ctsched_schedule** out);
ctsched_status ctsched_schedule_parse(const char* text, ctsched_schedule** out);
ctsched_status ctsched_schedule_dump(const ctsched_schedule* s, char** text);
size_t ctsched_schedule_slot_count(const ctsched_schedule* s);
void ctsched_schedule_free(ctsched_schedule* s);

typedef struct ctsched_gap_report {
    uint64_t min_load_use_gap;
    uint64_t slot_count;
    uint64_t nop_count;
    uint64_t mem_op_count;
    int order_preserved;
    int pass;
} ctsched_gap_report;

ctsched_status ctsched_schedule_verify(const ctsched_schedule* s, int depth,
                                       ctsched_gap_report* out);

/* ---- timing simulation ----------------------------------------------------- */

typedef struct ctsched_latency_model {
    uint32_t exec; /* default 1 */
    uint32_t hit;  /* default 2 */
    uint32_t miss; /* default 6 */
} ctsched_latency_model;

typedef struct ctsched_evicted_line {
    uint8_t table; /* 0..3 round tables, 4 S-box */
    uint16_t line;
} ctsched_evicted_line;

typedef struct ctsched_cache_config {
    uint32_t line_size; /* bytes, divides 1024; default 64 */
    /* 0: cold cache per encryption. 1: every table line resident except the
     * listed evictions (the leaky-server model). */
    int warm_start;
    const ctsched_evicted_line* evictions;
    size_t n_evictions;
} ctsched_cache_config;

void ctsched_latency_model_default(ctsched_latency_model* lm);
void ctsched_cache_config_default(ctsched_cache_config* cfg);
/* Leaky-server eviction preset for the given line size. Writes up to cap
 * entries and returns the full count. */
size_t ctsched_cache_leak_preset(uint32_t line_size, ctsched_evicted_line* out, size_t cap);

/* pattern entries: 0 = hit, 1 = miss, ordered by program memory-op index. */
ctsched_status ctsched_simulate(const ctsched_schedule* s, const ctsched_latency_model* lm,
                                const uint8_t* pattern, size_t pattern_len, uint64_t* cycles);

typedef struct ctsched_spread {
    uint64_t min_cycles;
    uint64_t max_cycles;
    double variance;
    uint64_t evaluated;
    int exhaustive;
} ctsched_spread;

/* Evaluates all-hit, all-miss and `samples` random patterns (every pattern
 * when the schedule has at most 12 loads). csv_path may be NULL; when given,
 * rows `pattern_id,cycles` are written there. */
ctsched_status ctsched_timing_spread(const ctsched_schedule* s,
                                     const ctsched_latency_model* lm, uint64_t samples,
                                     uint64_t seed, const char* csv_path, ctsched_spread* out);

/* Hit/miss pattern of one encryption under the cache model; *len receives the
 * number of entries (the trace length, 160 for the full program). */
ctsched_status ctsched_pattern_from_data(const uint8_t pt[16], const uint8_t key[16],
                                         const ctsched_cache_config* cfg, uint8_t* pattern,
                                         size_t cap, size_t* len);

/* ---- attack harness --------------------------------------------------------- */

typedef struct ctsched_attack_config {
    const char* mode; /* "unprotected" | "protected" (in-process oracles) */
    int depth;        /* pipeline depth for protected mode */
    uint8_t study_key[16];
    uint8_t target_key[16]; /* key of the in-process target oracle */
    int check_containment;  /* when set, true_key is compared to the sets */
    uint8_t true_key[16];
    uint64_t packets_per_cell; /* packets per phase = 256 * this */
    uint32_t packet_len;       /* 16..800 */
    double margin;             /* candidate threshold, in row std deviations */
    uint64_t seed;
    ctsched_latency_model lm;
    ctsched_cache_config cache;
    uint64_t window_offset;
    /* "host:port" endpoints switch both phases to the network; NULL runs the
     * in-process simulator oracles. */
    const char* study_endpoint;
    const char* target_endpoint;
    const char* study_profile_csv;  /* optional output paths */
    const char* attack_profile_csv;
} ctsched_attack_config;

typedef struct ctsched_keyspace {
    uint8_t candidates[16][32]; /* bitmap; bit v%8 of byte v/8 */
    uint16_t set_size[16];
    double size_log2;
    double size_decimal;
    int containment_checked;
    uint8_t contained[16];
    int all_contained;
    uint64_t study_samples, target_samples;
    uint64_t study_losses, target_losses;
} ctsched_keyspace;

/* Defaults: unprotected mode, depth 12, zero keys, 800-byte packets, margin
 * 1.0, lm (1,2,6), 64-byte lines with the leaky eviction preset. */
void ctsched_attack_config_default(ctsched_attack_config* cfg);
ctsched_status ctsched_attack_run(const ctsched_attack_config* cfg, ctsched_keyspace* out);

/* ---- timing service --------------------------------------------------------- */

typedef struct ctsched_server_config {
    const char* bind_host; /* default "127.0.0.1" */
    uint16_t port;         /* 0 = ephemeral */
    uint8_t key[16];
    const char* mode;   /* "unprotected" | "protected" */
    int depth;
    const char* timing; /* "sim" | "real" */
    ctsched_latency_model lm;
    ctsched_cache_config cache;
    uint64_t window_offset;
    uint64_t sim_counter_start; /* injected counter origin */
} ctsched_server_config;

typedef struct ctsched_server ctsched_server;

void ctsched_server_config_default(ctsched_server_config* cfg);
ctsched_status ctsched_server_start(const ctsched_server_config* cfg, ctsched_server** out);
ctsched_status ctsched_server_port(const ctsched_server* s, uint16_t* port);
/* Stops the server and frees the handle. */
ctsched_status ctsched_server_stop(ctsched_server* s);
/* Foreground variant; only returns on error. */
ctsched_status ctsched_server_run(const ctsched_server_config* cfg);

/* Collects `packets` samples from a running server, optionally writing CSV
 * rows `nonce_hex,cycles` to csv_path. */
ctsched_status ctsched_collect(const char* endpoint, uint64_t packets, uint32_t packet_len,
                               uint64_t seed, const char* csv_path, uint64_t* collected,
                               uint64_t* lost);

#ifdef __cplusplus
}
#endif

#endif /* CTSCHED_H */
