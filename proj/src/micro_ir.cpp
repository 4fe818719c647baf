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

#include "micro_ir.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace ctsched::ir {

std::string QueueTag::str() const {
    if (!valid()) return "?";
    // Odd rounds accumulate into t-words, even rounds (and the final round)
    // into s-words, matching the alternation of the unrolled source.
    char acc = (round % 2 == 1) ? 't' : 's';
    return "r" + std::to_string(int(round)) + "." + acc + std::to_string(int(word));
}

int MicroOp::n_srcs() const {
    switch (kind) {
        case OpKind::Nop: return 0;
        case OpKind::XorAcc: return 2;
        default: return 1;
    }
}

int16_t MicroProgram::reg(std::string_view name) {
    int found = find_reg(name);
    if (found >= 0) return int16_t(found);
    reg_names.emplace_back(name);
    return int16_t(reg_names.size() - 1);
}

int MicroProgram::find_reg(std::string_view name) const {
    for (size_t i = 0; i < reg_names.size(); ++i)
        if (reg_names[i] == name) return int(i);
    return -1;
}

size_t MicroProgram::load_count() const {
    size_t n = 0;
    for (const auto& op : ops)
        if (op.is_load()) ++n;
    return n;
}

// ---- decomposition ---------------------------------------------------------

namespace {

const char* state_prefix(int round) {
    // Sources of round r are the outputs of round r-1.
    return (round % 2 == 1) ? "s" : "t";
}

// Emits the four-block fragment computing one output word of one round.
void emit_fragment(MicroProgram& p, int round, int word) {
    const std::string src_pfx = state_prefix(round);
    const std::string acc_pfx = (round % 2 == 1) ? "t" : "s";
    int16_t acc = p.reg(acc_pfx + std::to_string(word));
    QueueTag tag{int8_t(round), int8_t(word)};

    for (int block = 0; block < 4; ++block) {
        int16_t src = p.reg(src_pfx + std::to_string((word + block) % 4));
        int16_t u = p.reg("u" + std::to_string(word) + std::to_string(block));
        int16_t v = p.reg("v" + std::to_string(word) + std::to_string(block));
        uint8_t lane = uint8_t(24 - 8 * block);

        p.ops.push_back({OpKind::Copy, u, src, -1, 0, 0, 0, tag});
        if (block < 3) p.ops.push_back({OpKind::Shr, u, u, -1, lane, 0, 0, tag});
        if (block > 0) p.ops.push_back({OpKind::Mask, u, u, -1, 0, 0, 0, tag});
        if (round <= 9)
            p.ops.push_back({OpKind::TLoad, v, u, -1, 0, uint8_t(block), 0, tag});
        else
            p.ops.push_back({OpKind::SLoad, v, u, -1, lane, 0, 0, tag});
        if (block == 0)
            p.ops.push_back({OpKind::RkXor, acc, v, -1, 0, 0, uint8_t(4 * round + word), tag});
        else
            p.ops.push_back({OpKind::XorAcc, acc, acc, v, 0, 0, 0, tag});
    }
}

}  // namespace

MicroProgram decompose_word(int round, int word) {
    if (round < 1 || round > 9) throw std::invalid_argument("round must be in 1..9");
    if (word < 0 || word > 3) throw std::invalid_argument("word must be in 0..3");
    MicroProgram p;
    for (int i = 0; i < 4; ++i)
        p.inputs.push_back(p.reg(std::string(state_prefix(round)) + std::to_string(i)));
    emit_fragment(p, round, word);
    p.outputs.push_back(p.ops.back().dst);
    return p;
}

MicroProgram decompose_encryption() {
    MicroProgram p;
    for (int i = 0; i < 4; ++i) p.inputs.push_back(p.reg("in" + std::to_string(i)));

    // Whitening: s_w = in_w ^ rk[w]. These feed the first round's indices and
    // are scheduled like any other arithmetic op.
    for (int w = 0; w < 4; ++w) {
        int16_t s = p.reg("s" + std::to_string(w));
        p.ops.push_back({OpKind::RkXor, s, p.inputs[w], -1, 0, 0, uint8_t(w),
                         QueueTag{0, int8_t(w)}});
    }
    for (int round = 1; round <= 10; ++round)
        for (int word = 0; word < 4; ++word) emit_fragment(p, round, word);

    for (int w = 0; w < 4; ++w) p.outputs.push_back(int16_t(p.find_reg("s" + std::to_string(w))));
    return p;
}

// ---- interpretation --------------------------------------------------------

void run_ops(std::span<const MicroOp> ops, std::vector<uint32_t>& regs,
             std::vector<uint8_t>& defined, const RoundKeySchedule& ks, const TTableSet& t,
             const std::vector<std::string>& reg_names) {
    auto name_of = [&](int16_t r) -> std::string {
        return (r >= 0 && size_t(r) < reg_names.size()) ? reg_names[r]
                                                        : ("#" + std::to_string(r));
    };
    auto read = [&](int16_t r) -> uint32_t {
        if (r < 0 || size_t(r) >= regs.size() || !defined[r])
            throw std::runtime_error("use of undefined register '" + name_of(r) + "'");
        return regs[r];
    };
    auto write = [&](int16_t r, uint32_t v) {
        if (r < 0 || size_t(r) >= regs.size())
            throw std::runtime_error("write to unknown register");
        regs[r] = v;
        defined[r] = 1;
    };
    auto index_of = [&](uint32_t v) -> uint8_t {
        if (v > 0xff) throw std::runtime_error("table index out of range");
        return uint8_t(v);
    };

    for (const auto& op : ops) {
        switch (op.kind) {
            case OpKind::Copy: write(op.dst, read(op.src0)); break;
            case OpKind::Shr: write(op.dst, read(op.src0) >> op.shift); break;
            case OpKind::Mask: write(op.dst, read(op.src0) & 0xff); break;
            case OpKind::TLoad: write(op.dst, t.te(op.table)[index_of(read(op.src0))]); break;
            case OpKind::SLoad:
                write(op.dst, uint32_t(t.sbox[index_of(read(op.src0))]) << op.shift);
                break;
            case OpKind::RkXor: write(op.dst, ks.words[op.rk_word] ^ read(op.src0)); break;
            case OpKind::XorAcc: write(op.dst, read(op.src0) ^ read(op.src1)); break;
            case OpKind::Nop: break;
        }
    }
}

std::vector<uint32_t> interpret_words(const MicroProgram& p, std::span<const uint32_t> input_words,
                                      const RoundKeySchedule& ks, const TTableSet& t) {
    if (input_words.size() != p.inputs.size())
        throw std::invalid_argument("input word count does not match program inputs");
    std::vector<uint32_t> regs(p.reg_names.size(), 0);
    std::vector<uint8_t> defined(p.reg_names.size(), 0);
    for (size_t i = 0; i < p.inputs.size(); ++i) {
        regs[p.inputs[i]] = input_words[i];
        defined[p.inputs[i]] = 1;
    }
    run_ops(p.ops, regs, defined, ks, t, p.reg_names);
    std::vector<uint32_t> out;
    out.reserve(p.outputs.size());
    for (int16_t r : p.outputs) {
        if (r < 0 || !defined[r]) throw std::runtime_error("program output is undefined");
        out.push_back(regs[r]);
    }
    return out;
}

Block interpret(const MicroProgram& p, const Block& pt, const RoundKeySchedule& ks,
                const TTableSet& t) {
    if (p.inputs.size() != 4 || p.outputs.size() != 4)
        throw std::invalid_argument("block interpretation needs 4 input and 4 output words");
    std::array<uint32_t, 4> in;
    for (int i = 0; i < 4; ++i) in[i] = load_be32(pt.data() + 4 * i);
    auto out = interpret_words(p, in, ks, t);
    Block ct;
    for (int i = 0; i < 4; ++i) store_be32(ct.data() + 4 * i, out[i]);
    return ct;
}

// ---- textual form ----------------------------------------------------------

std::string dump_op(const MicroOp& op, const std::vector<std::string>& reg_names) {
    auto r = [&](int16_t id) -> const std::string& { return reg_names.at(size_t(id)); };
    std::string line;
    switch (op.kind) {
        case OpKind::Nop: return "NOP";
        case OpKind::Copy: line = r(op.dst) + " = COPY(" + r(op.src0) + ")"; break;
        case OpKind::Shr:
            line = r(op.dst) + " = SHR" + std::to_string(op.shift) + "(" + r(op.src0) + ")";
            break;
        case OpKind::Mask: line = r(op.dst) + " = MASK(" + r(op.src0) + ")"; break;
        case OpKind::TLoad:
            line = r(op.dst) + " = TLOAD" + std::to_string(op.table) + "(" + r(op.src0) + ")";
            break;
        case OpKind::SLoad:
            line = r(op.dst) + " = SLOAD" + std::to_string(op.shift) + "(" + r(op.src0) + ")";
            break;
        case OpKind::RkXor:
            line = r(op.dst) + " = RK_XOR[" + std::to_string(op.rk_word) + "](" + r(op.src0) + ")";
            break;
        case OpKind::XorAcc:
            line = r(op.dst) + " = XOR_ACC(" + r(op.src0) + ", " + r(op.src1) + ")";
            break;
    }
    if (op.tag.valid()) line += " [queue=" + op.tag.str() + "]";
    return line;
}

std::string dump(const MicroProgram& p) {
    std::string out;
    out += "inputs:";
    for (int16_t r : p.inputs) out += " " + p.reg_names.at(size_t(r));
    out += "\noutputs:";
    for (int16_t r : p.outputs) out += " " + p.reg_names.at(size_t(r));
    out += "\n";
    for (const auto& op : p.ops) out += dump_op(op, p.reg_names) + "\n";
    return out;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

bool valid_reg_name(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
    return true;
}

int parse_uint(std::string_view s, const char* what) {
    if (s.empty()) throw parse_error(std::string("missing ") + what);
    int v = 0;
    for (char c : s) {
        if (c < '0' || c > '9') throw parse_error(std::string("bad ") + what);
        v = v * 10 + (c - '0');
        if (v > 0xffff) throw parse_error(std::string("bad ") + what);
    }
    return v;
}

QueueTag parse_tag(std::string_view s) {
    // rR.<acc-name>, e.g. r1.t0
    if (s.size() < 4 || s.front() != 'r') throw parse_error("bad queue tag");
    size_t dot = s.find('.');
    if (dot == std::string_view::npos) throw parse_error("bad queue tag");
    int round = parse_uint(s.substr(1, dot - 1), "queue round");
    std::string_view acc = s.substr(dot + 1);
    if (acc.size() < 2) throw parse_error("bad queue tag");
    char wc = acc.back();
    if (wc < '0' || wc > '3') throw parse_error("bad queue word");
    QueueTag tag{int8_t(round), int8_t(wc - '0')};
    if (!tag.valid()) throw parse_error("queue tag out of range");
    return tag;
}

}  // namespace

MicroOp parse_op_line(std::string_view line, MicroProgram& symtab) {
    line = trim(line);
    MicroOp op;

    // optional [queue=...] suffix
    if (size_t q = line.rfind(" [queue="); q != std::string_view::npos) {
        std::string_view tag = line.substr(q + 8);
        if (tag.empty() || tag.back() != ']') throw parse_error("unterminated queue tag");
        tag.remove_suffix(1);
        op.tag = parse_tag(tag);
        line = trim(line.substr(0, q));
    }

    if (line == "NOP") {
        op.kind = OpKind::Nop;
        return op;
    }

    size_t eq = line.find(" = ");
    if (eq == std::string_view::npos) throw parse_error("expected 'dst = KIND(...)'");
    std::string_view dst = trim(line.substr(0, eq));
    if (!valid_reg_name(dst)) throw parse_error("bad destination register");
    std::string_view rhs = trim(line.substr(eq + 3));

    size_t open = rhs.find('(');
    if (open == std::string_view::npos || rhs.back() != ')')
        throw parse_error("expected 'KIND(args)'");
    std::string_view head = rhs.substr(0, open);
    std::string_view args = rhs.substr(open + 1, rhs.size() - open - 2);

    std::vector<std::string_view> srcs;
    {
        size_t pos = 0;
        while (pos <= args.size() && !args.empty()) {
            size_t comma = args.find(',', pos);
            std::string_view piece =
                trim(comma == std::string_view::npos ? args.substr(pos)
                                                     : args.substr(pos, comma - pos));
            if (!valid_reg_name(piece)) throw parse_error("bad source register");
            srcs.push_back(piece);
            if (comma == std::string_view::npos) break;
            pos = comma + 1;
        }
    }

    auto need_srcs = [&](size_t n) {
        if (srcs.size() != n) throw parse_error("wrong operand count");
    };

    if (head == "COPY") {
        op.kind = OpKind::Copy;
        need_srcs(1);
    } else if (head.starts_with("SHR")) {
        op.kind = OpKind::Shr;
        int amt = parse_uint(head.substr(3), "shift amount");
        if (amt != 0 && amt != 8 && amt != 16 && amt != 24) throw parse_error("bad shift amount");
        op.shift = uint8_t(amt);
        need_srcs(1);
    } else if (head == "MASK") {
        op.kind = OpKind::Mask;
        need_srcs(1);
    } else if (head.starts_with("TLOAD")) {
        op.kind = OpKind::TLoad;
        int id = parse_uint(head.substr(5), "table id");
        if (id > 3) throw parse_error("table id out of range");
        op.table = uint8_t(id);
        need_srcs(1);
    } else if (head.starts_with("SLOAD")) {
        op.kind = OpKind::SLoad;
        int lane = parse_uint(head.substr(5), "lane shift");
        if (lane != 0 && lane != 8 && lane != 16 && lane != 24)
            throw parse_error("bad lane shift");
        op.shift = uint8_t(lane);
        need_srcs(1);
    } else if (head.starts_with("RK_XOR[")) {
        if (head.back() != ']') throw parse_error("unterminated RK_XOR index");
        op.kind = OpKind::RkXor;
        int idx = parse_uint(head.substr(7, head.size() - 8), "round-key index");
        if (idx > 43) throw parse_error("round-key index out of range");
        op.rk_word = uint8_t(idx);
        need_srcs(1);
    } else if (head == "XOR_ACC") {
        op.kind = OpKind::XorAcc;
        need_srcs(2);
    } else {
        throw parse_error("unknown op kind '" + std::string(head) + "'");
    }

    op.dst = symtab.reg(dst);
    op.src0 = symtab.reg(srcs[0]);
    if (srcs.size() > 1) op.src1 = symtab.reg(srcs[1]);
    return op;
}

MicroProgram parse_program(const std::string& text) {
    MicroProgram p;
    std::istringstream in(text);
    std::string raw;
    while (std::getline(in, raw)) {
        std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        if (line.starts_with("inputs:") || line.starts_with("outputs:")) {
            bool is_inputs = line.front() == 'i';
            line.remove_prefix(is_inputs ? 7 : 8);
            std::istringstream names{std::string(line)};
            std::string name;
            auto& list = is_inputs ? p.inputs : p.outputs;
            while (names >> name) {
                if (!valid_reg_name(name)) throw parse_error("bad register name in header");
                list.push_back(p.reg(name));
            }
            continue;
        }
        p.ops.push_back(parse_op_line(line, p));
    }
    if (p.ops.empty() && p.inputs.empty()) throw parse_error("empty program");
    return p;
}

// ---- static checks ---------------------------------------------------------

void check_well_formed(const MicroProgram& p) {
    std::vector<uint8_t> defined(p.reg_names.size(), 0);
    for (int16_t r : p.inputs) {
        if (r < 0 || size_t(r) >= p.reg_names.size())
            throw std::runtime_error("bad input register id");
        defined[r] = 1;
    }
    for (size_t i = 0; i < p.ops.size(); ++i) {
        const auto& op = p.ops[i];
        for (int s = 0; s < op.n_srcs(); ++s) {
            int16_t src = s == 0 ? op.src0 : op.src1;
            if (src < 0 || size_t(src) >= p.reg_names.size() || !defined[src])
                throw std::runtime_error("op " + std::to_string(i) +
                                         " reads a register before definition");
        }
        if (op.kind != OpKind::Nop) {
            if (op.dst < 0 || size_t(op.dst) >= p.reg_names.size())
                throw std::runtime_error("op " + std::to_string(i) + " has no destination");
            defined[op.dst] = 1;
        }
    }
    for (int16_t r : p.outputs)
        if (r < 0 || !defined[r]) throw std::runtime_error("program output never defined");
}

void check_queue_independence(const MicroProgram& p) {
    // Within one round, an op must not read a register defined by a different
    // queue of the same round. Reads of earlier rounds' outputs are fine.
    std::unordered_map<int, std::vector<QueueTag>> def_tag_by_round_reg;
    auto key = [&](int round, int16_t reg) { return round * 0x10000 + reg; };

    for (const auto& op : p.ops) {
        if (!op.tag.valid()) throw std::runtime_error("op without queue tag");
        if (op.kind == OpKind::Nop) continue;
        auto& defs = def_tag_by_round_reg[key(op.tag.round, op.dst)];
        defs.push_back(op.tag);
    }
    for (const auto& op : p.ops) {
        for (int s = 0; s < op.n_srcs(); ++s) {
            int16_t src = s == 0 ? op.src0 : op.src1;
            auto it = def_tag_by_round_reg.find(key(op.tag.round, src));
            if (it == def_tag_by_round_reg.end()) continue;
            for (const auto& tag : it->second)
                if (!(tag == op.tag))
                    throw std::runtime_error("queue " + op.tag.str() + " reads a register of " +
                                             tag.str());
        }
    }
}

}  // namespace ctsched::ir
