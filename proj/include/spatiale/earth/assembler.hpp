#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "spatiale/aram/machine.hpp"
#include "spatiale/earth/expand.hpp"
#include "spatiale/earth/parser.hpp"

namespace spatiale::earth {

namespace detail {

inline std::string at_loc(const SourceLocation& l) {
    return "line " + std::to_string(l.line) + ":" + std::to_string(l.column) + ": ";
}

inline std::int64_t constant_of(const IntExpr& e, const SourceLocation& loc, const char* what) {
    if (!e.is_constant()) throw AssemblyError(at_loc(loc) + what + " '" + e.to_string() + "' is not a constant");
    return e.eval();
}

} // namespace detail

/// Places a flat module at `base`: code first, then BITS packed into shared
/// registers, then one register per BYTES or WORDS label.
inline ModuleImage layout_and_assemble(const EarthAST& ast, Address base, const aram::MachineConfig& cfg = {},
                                       std::vector<std::string>* warnings = nullptr) {
    using detail::at_loc;
    using detail::constant_of;
    if (!ast.is_flat()) throw AssemblyError("module " + ast.name + " still contains replicators");

    ModuleImage m;
    m.name = ast.name;
    m.base = base;
    m.time = ast.time;

    std::vector<const Instr*> code;
    for (const auto& item : ast.code) code.push_back(&std::get<Instr>(item));
    m.code_size = static_cast<Address>(code.size());
    m.entry = {base, base + 1};

    std::map<std::int64_t, Address> labels;
    for (std::size_t i = 0; i < code.size(); ++i) {
        const Instr& ins = *code[i];
        if (!ins.label) continue;
        auto l = constant_of(*ins.label, ins.loc, "label");
        if (!labels.emplace(l, base + static_cast<Address>(i)).second)
            throw AssemblyError(at_loc(ins.loc) + "duplicate label " + std::to_string(l));
    }

    Address next = base + m.code_size;
    const unsigned ww = cfg.word_width;
    unsigned bit_fill = ww;
    Address bit_reg = 0;
    for (const auto& s : ast.storage) {
        if (s.kind != StorageKind::Bits) continue;
        if (bit_fill == ww) bit_reg = next++, bit_fill = 0;
        m.ports.push_back({s.label, s.category, StorageType::Bit, bit_reg, bit_fill++, 1});
    }
    for (const auto& s : ast.storage) {
        if (s.kind == StorageKind::Bits) continue;
        if (width_of(storage_type(s.kind)) > ww)
            throw AssemblyError(at_loc(s.loc) + "'" + s.label + "' is wider than a register");
        m.ports.push_back({s.label, s.category, storage_type(s.kind), next++, 0, 1});
    }
    if (const Port* b = m.port("busy"); b && b->type == StorageType::Bit) m.busy = BitLocation{b->reg, b->bit};

    if (next > cfg.memory_size || next - 1 > cfg.max_addr())
        throw AssemblyError("module " + ast.name + " at base " + std::to_string(base) + " overflows memory (" +
                            std::to_string(next) + " registers needed)");

    auto resolve_label = [&](std::int64_t l, const SourceLocation& loc) {
        auto it = labels.find(l);
        if (it == labels.end()) throw AssemblyError(at_loc(loc) + "undefined label " + std::to_string(l));
        return it->second;
    };

    m.words.assign(next - base, 0);
    for (std::size_t i = 0; i < code.size(); ++i) {
        const Instr& ins = *code[i];
        std::uint64_t x = 0, y = 0;
        if (ins.opcode == aram::Opcode::Jump) {
            x = ins.target.kind == JumpTarget::Kind::Absolute
                    ? ins.target.absolute
                    : resolve_label(constant_of(ins.target.label, ins.loc, "jump target"), ins.loc);
            auto span = constant_of(ins.span, ins.loc, "jump offset");
            if (span < 0 || static_cast<std::uint64_t>(span) > cfg.max_offset())
                throw AssemblyError(at_loc(ins.loc) + "jump offset " + std::to_string(span) + " out of range");
            y = static_cast<std::uint64_t>(span);
        } else {
            const auto& op = ins.operand;
            std::int64_t bit = op.bit ? constant_of(*op.bit, ins.loc, "bit index") : 0;
            std::int64_t width = ww;
            switch (op.kind) {
            case BitOperand::Kind::Storage: {
                const Port* p = m.port(op.storage);
                if (!p) throw AssemblyError(at_loc(ins.loc) + "undeclared label '" + op.storage + "'");
                if (bit < 0 || bit >= static_cast<std::int64_t>(p->width()))
                    throw AssemblyError(at_loc(ins.loc) + "bit index " + std::to_string(bit) + " out of range for '" +
                                        op.storage + "' (width " + std::to_string(p->width()) + ")");
                x = p->reg;
                bit += p->bit;
                break;
            }
            case BitOperand::Kind::CodeLabel:
                x = resolve_label(constant_of(op.code_label, ins.loc, "code label"), ins.loc);
                break;
            case BitOperand::Kind::Absolute: x = op.absolute; break;
            }
            if (bit < 0 || bit >= width)
                throw AssemblyError(at_loc(ins.loc) + "bit index " + std::to_string(bit) + " out of range");
            y = static_cast<std::uint64_t>(bit);
        }
        try {
            m.words[i] = aram::encode_instruction(ins.opcode, x, y, cfg);
        } catch (const EncodingError& e) {
            throw AssemblyError(at_loc(ins.loc) + e.what());
        }
    }

    if (ast.exec_label) {
        const SourceLocation none{};
        m.exec = resolve_label(constant_of(*ast.exec_label, none, "EXEC label"), none);
    }

    if (warnings) {
        bool ok = !code.empty() && code[0]->opcode == aram::Opcode::Wrt1 &&
                  code[0]->operand.kind == BitOperand::Kind::Storage && code[0]->operand.storage == "busy";
        if (!ok) warnings->push_back("module " + ast.name + ": first instruction is not 'wrt1 busy'");
    }
    return m;
}

struct Assembly {
    EarthAST flat;
    ModuleImage image;
    std::vector<std::string> warnings;
};

inline Assembly assemble_source(std::string_view text, Address base = 1, const aram::MachineConfig& cfg = {}) {
    Assembly a;
    a.flat = expand_replicators(parse_earth(text));
    a.image = layout_and_assemble(a.flat, base, cfg, &a.warnings);
    return a;
}

inline ModuleImage assemble(std::string_view text, Address base = 1, const aram::MachineConfig& cfg = {}) {
    return assemble_source(text, base, cfg).image;
}

// ---------------------------------------------------------------------------
// Timing.

/// Fresh machine holding just this module, marked at its entry.
inline aram::MachineState instantiate(const ModuleImage& m, const aram::MachineConfig& cfg) {
    aram::MachineConfig c = m.machine_config(cfg);
    c.memory_size = std::max<std::uint32_t>(c.memory_size, m.end());
    return aram::load_image(m.to_image(), c);
}

struct TimingReport {
    std::uint64_t min_cycles = 0, max_cycles = 0;
    std::uint64_t cases = 0;
    bool all_halted = true;
    bool within_declared = true;
};

/// Runs the module on every assignment of its input and ioput bits (at most 16 bits).
inline TimingReport verify_time(const ModuleImage& m, const aram::MachineConfig& cfg = {},
                                std::uint64_t limit = 100'000) {
    std::vector<const Port*> ins;
    unsigned bits = 0;
    for (const auto& p : m.ports)
        if (p.category == Category::Input || p.category == Category::Ioput) ins.push_back(&p), bits += p.width();
    if (bits > 16) throw Error("module " + m.name + " has " + std::to_string(bits) + " input bits; at most 16 can be enumerated");

    aram::MachineConfig c = m.machine_config(cfg);
    c.memory_size = std::max<std::uint32_t>(c.memory_size, m.end());
    const aram::MachineState blank = aram::load_image(m.to_image(), c);
    TimingReport r;
    r.min_cycles = ~std::uint64_t{0};
    for (std::uint64_t v = 0; v < (std::uint64_t{1} << bits); ++v) {
        aram::MachineState s = blank;
        unsigned shift = 0;
        for (const Port* p : ins) {
            write_port(s, *p, (v >> shift) & ((std::uint64_t{1} << p->width()) - 1));
            shift += p->width();
        }
        aram::RunOptions opt;
        opt.max_cycles = limit;
        auto res = aram::run(std::move(s), c, opt);
        if (res.terminator != aram::Terminator::Halted) r.all_halted = false;
        r.min_cycles = std::min(r.min_cycles, res.cycles);
        r.max_cycles = std::max(r.max_cycles, res.cycles);
        ++r.cases;
    }
    if (m.time) r.within_declared = r.min_cycles >= m.time->first && r.max_cycles <= m.time->second;
    return r;
}

} // namespace spatiale::earth
