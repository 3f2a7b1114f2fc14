#pragma once

#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "spatiale/earth/assembler.hpp"
#include "spatiale/space/coactivity.hpp"
#include "spatiale/space/expand.hpp"
#include "spatiale/space/library.hpp"

namespace spatiale::space {

struct CompileOptions {
    aram::MachineConfig machine;
    Address base = 1;
    std::optional<unsigned> scale;
    bool reverse_deep = false; // lay deep replicas out in reverse order
};

/// A placed submodule instance, at any depth.
struct InstanceInfo {
    std::string path;
    std::string cls;
    Address base = 0, end = 0;
    std::optional<BitLocation> busy;
};

struct LineSpan {
    std::string line;
    Address begin = 0, end = 0;
};

struct CompiledProgram {
    ModuleImage image;
    CoactivityReport coactivity;
    std::vector<LineSpan> spans;
    std::vector<InstanceInfo> instances;
    std::vector<aram::Watch> watches; // busy and run bits: a set while already set is a re-activation
    std::string report;

    aram::Image to_image() const { return image.to_image(); }
    aram::MachineConfig machine_config(aram::MachineConfig cfg) const { return image.machine_config(std::move(cfg)); }
    InterfaceDescriptor descriptor() const { return describe(image); }
};

namespace detail {

/// Public and private storage entities of a library class, without placing it.
struct ClassPort {
    std::string name;
    StorageType type = StorageType::Reg;
    Category category = Category::Private;
    unsigned count = 1;
};

inline std::vector<ClassPort> class_ports(const LibraryClass& c) {
    std::vector<ClassPort> out;
    if (c.kind == LibraryClass::Kind::Earth) {
        for (const auto& s : c.earth->storage) {
            StorageType t = s.kind == earth::StorageKind::Bits ? StorageType::Bit
                            : s.kind == earth::StorageKind::Bytes ? StorageType::Byte
                                                                  : StorageType::Reg;
            out.push_back({s.label, t, s.category, 1});
        }
    } else {
        for (const auto& s : c.space->storage) out.push_back({s.label, s.type, s.category, s.count()});
    }
    return out;
}

inline bool class_has_exec(const LibraryClass& c) { return c.kind == LibraryClass::Kind::Earth && c.earth->exec_label.has_value(); }

struct Operand {
    enum class Kind { Code, Storage, Control, ChildEntry, ChildExec, ChildBusy, ChildPort };
    Kind kind = Kind::Code;
    std::size_t id = 0; // label, storage register, control bit or child index
    unsigned bit = 0;
    std::string port;

    std::string key() const { return std::to_string(static_cast<int>(kind)) + ":" + std::to_string(id) + ":" + port + ":" + std::to_string(bit); }
};

struct WordT {
    aram::Opcode op = aram::Opcode::Jump;
    Operand x;
    unsigned y = 0; // jump span
};

struct Target {
    Operand x;
    unsigned span = 0;
};

struct Cell {
    Operand base; // bit 0 of the entity
    StorageType type = StorageType::Reg;
    std::string name;

    Operand bit(unsigned b) const {
        Operand o = base;
        o.bit = b;
        return o;
    }
};

struct Built {
    ModuleImage image;
    std::vector<InstanceInfo> instances;
    std::vector<aram::Watch> watches;
    std::vector<LineSpan> spans;
    CoactivityReport coactivity;
    std::string report;
};

inline Built build_space(const SpaceAST& ast, const Library& lib, const CompileOptions& opt, Address base,
                         std::vector<std::string>& stack);

inline std::size_t flat_index(const std::vector<std::int64_t>& idx, const std::vector<unsigned>& dims) {
    std::size_t f = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) f = f * dims[k] + static_cast<std::size_t>(idx[k]);
    return f;
}

class Synth {
public:
    Synth(const SpaceAST& ast, const ExpandedProgram& prog, const CoactivityReport& co, const Library& lib,
          const CompileOptions& opt)
        : ast_(ast), prog_(prog), co_(co), lib_(lib), opt_(opt), fan_(opt.machine.max_offset() + 1) {}

    Built build(Address base, std::vector<std::string>& stack) {
        declare_storage();
        declare_children();
        allocate_control();
        emit_program();
        return link(base, stack);
    }

private:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    const SpaceAST& ast_;
    const ExpandedProgram& prog_;
    const CoactivityReport& co_;
    const Library& lib_;
    const CompileOptions& opt_;
    const std::size_t fan_;

    std::vector<WordT> code_;
    std::vector<std::ptrdiff_t> pos_;

    std::map<std::string, std::size_t> storage_at_;
    std::size_t storage_regs_ = 0;

    struct Child {
        std::string path;
        const LibraryClass* cls = nullptr;
        std::optional<unsigned> parameter;
        std::vector<ClassPort> ports;
        bool exec = false;
        std::optional<int> exec_unit;
    };
    std::vector<Child> children_;
    std::map<std::string, std::size_t> child_at_;

    std::size_t control_bits_ = 0;
    std::map<int, std::size_t> run_bit_;
    std::map<int, std::vector<std::size_t>> grun_bits_;

    std::map<int, std::size_t> entry_label_; // E[k]
    std::map<int, std::size_t> grow_head_;   // H of a grow
    std::vector<std::tuple<std::string, std::size_t, std::size_t>> spans_;

    // -- labels and words ----------------------------------------------------
    std::size_t label() {
        pos_.push_back(-1);
        return pos_.size() - 1;
    }
    void bind(std::size_t l) { pos_[l] = static_cast<std::ptrdiff_t>(code_.size()); }
    static Operand code(std::size_t l) { return {Operand::Kind::Code, l, 0, {}}; }
    void emit(aram::Opcode op, Operand x, unsigned y = 0) { code_.push_back({op, std::move(x), y}); }
    void jump(std::size_t l, unsigned span) { emit(aram::Opcode::Jump, code(l), span); }
    void jump(const Target& t) { emit(aram::Opcode::Jump, t.x, t.span); }
    Operand control(std::size_t id) const { return {Operand::Kind::Control, id, 0, {}}; }

    [[noreturn]] static void fail(const SourceLocation& loc, const std::string& msg) {
        throw CompileError("line " + std::to_string(loc.line) + ":" + std::to_string(loc.column) + ": " + msg);
    }

    // -- declarations --------------------------------------------------------
    void declare_storage() {
        for (const auto& s : ast_.storage) {
            storage_at_[s.label] = storage_regs_;
            storage_regs_ += s.count();
        }
    }

    static std::string element_name(const std::string& label, std::size_t flat, const std::vector<unsigned>& dims) {
        std::string s = label;
        std::vector<std::size_t> idx(dims.size());
        for (std::size_t k = dims.size(); k-- > 0;) idx[k] = flat % dims[k], flat /= dims[k];
        for (auto i : idx) s += "[" + std::to_string(i) + "]";
        return s;
    }

    void declare_children() {
        for (const auto& d : ast_.submodules) {
            const LibraryClass& cls = lib_.find(d.cls);
            child_at_[d.label] = children_.size();
            auto ports = class_ports(cls);
            bool exec = class_has_exec(cls);
            if (d.parameter && !exec) fail(d.loc, "class '" + d.cls + "' takes no parameter");
            if (d.parameter && *d.parameter > opt_.machine.max_offset()) fail(d.loc, "parameter exceeds the offset field");
            for (std::size_t e = 0; e < d.count(); ++e)
                children_.push_back({element_name(d.label, e, d.dims), &cls, d.parameter, ports, exec, std::nullopt});
        }
    }

    void allocate_control() {
        control_bits_ = 1; // busy
        for (const auto& u : prog_.units) run_bit_[u.number] = control_bits_++;
        for (const auto& u : prog_.units)
            for (std::size_t i = 0; i < u.grow.size(); ++i) grun_bits_[u.number].push_back(control_bits_++);
    }

    // -- operand resolution --------------------------------------------------
    std::size_t child_of(const Place& p) const {
        const auto* d = ast_.find_submodule(p.label);
        if (!d) fail(p.loc, "'" + p.label + "' is not a submodule");
        return child_at_.at(p.label) + flat_index(p.index, d->dims);
    }

    enum class Access { Read, Write };

    Cell cell(const Place& p, Access acc) const {
        if (const auto* s = ast_.find_storage(p.label)) {
            Operand o{Operand::Kind::Storage, storage_at_.at(p.label) + flat_index(p.index, s->dims), 0, {}};
            return {o, s->type, p.to_string()};
        }
        std::size_t c = child_of(p);
        if (!p.port) fail(p.loc, "'" + p.to_string() + "' names an instance, not a port");
        const Child& ch = children_[c];
        const ClassPort* port = nullptr;
        for (const auto& q : ch.ports)
            if (q.name == *p.port) port = &q;
        if (!port || port->category == Category::Private)
            fail(p.loc, "class '" + ch.cls->name + "' has no public port '" + *p.port + "'");
        if (acc == Access::Write && port->category == Category::Output)
            fail(p.loc, "cannot copy into output port '" + p.to_string() + "'");
        if (port->count != 1) fail(p.loc, "port array '" + p.to_string() + "' needs a runtime index, which is out of subset");
        return {{Operand::Kind::ChildPort, c, 0, *p.port}, port->type, p.to_string()};
    }

    // -- fan-out tree ----------------------------------------------------------
    // Emits `ENT: jump ROOT 1`, the root, a chain of `chain` jumps ending at
    // `next`, then the remaining tree levels. Returns the tree depth.
    std::size_t emit_tree(std::size_t ent, const std::vector<Target>& leaves, std::size_t chain_extra, const Target& next) {
        struct Level {
            std::vector<Target> words;
            std::vector<std::size_t> labels;
        };
        std::vector<Level> tree;
        tree.push_back({leaves, std::vector<std::size_t>(leaves.size(), npos)});
        while (tree.back().words.size() > 1) {
            Level up;
            const std::size_t n = tree.back().words.size();
            for (std::size_t i = 0; i < n; i += fan_) {
                std::size_t l = label();
                tree.back().labels[i] = l;
                up.words.push_back({code(l), static_cast<unsigned>(std::min(fan_, n - i) - 1)});
            }
            up.labels.assign(up.words.size(), npos);
            tree.push_back(std::move(up));
        }
        const std::size_t depth = tree.size();
        std::size_t root = label();
        bind(ent);
        jump(root, 1);
        bind(root);
        jump(tree.back().words.front());
        const std::size_t chain = depth + chain_extra;
        for (std::size_t k = 0; k < chain; ++k) {
            if (k + 1 < chain) {
                std::size_t l = label();
                jump(l, 0);
                bind(l);
            } else {
                jump(next);
            }
        }
        for (std::size_t lv = depth - 1; lv-- > 0;) {
            const Level& L = tree[lv];
            for (std::size_t i = 0; i < L.words.size(); ++i) {
                if (L.labels[i] != npos) bind(L.labels[i]);
                jump(L.words[i]);
            }
        }
        return depth;
    }

    // -- columns ---------------------------------------------------------------
    void emit_copy_column(std::size_t ent, const std::vector<const XCopy*>& copies, std::size_t next) {
        struct Gadget {
            Operand src, dst;
        };
        struct Block {
            std::vector<std::pair<bool, Operand>> writes;
        };
        std::vector<Target> leaves;
        std::vector<std::pair<std::size_t, Gadget>> gadgets;
        std::vector<std::pair<std::size_t, Block>> blocks;
        std::set<std::string> written;
        for (const XCopy* cp : copies) {
            Cell dst = cell(cp->destination, Access::Write);
            const unsigned w = width_of(dst.type);
            for (unsigned b = 0; b < w; ++b)
                if (!written.insert(dst.bit(b).key()).second)
                    fail(cp->destination.loc, "two copies write '" + dst.name + "' in one column");
            if (cp->immediate) {
                if (w < 64 && *cp->immediate >> w) fail(cp->destination.loc, "immediate " + std::to_string(*cp->immediate) + " does not fit " + dst.name);
                if (cp->destination.port) {
                    const Child& ch = children_[child_of(cp->destination)];
                    if (ch.parameter && *cp->immediate > *ch.parameter)
                        fail(cp->destination.loc, "immediate exceeds the declared parameter of " + ch.path);
                }
                Block blk;
                for (unsigned b = 0; b < w; ++b) blk.writes.push_back({(*cp->immediate >> b) & 1u, dst.bit(b)});
                std::size_t l = label();
                leaves.push_back({code(l), w - 1});
                blocks.push_back({l, std::move(blk)});
                continue;
            }
            Cell src = cell(*cp->source, Access::Read);
            if (src.type != dst.type)
                fail(cp->destination.loc, "type mismatch copying " + std::string(to_string(src.type)) + " " + src.name + " into " +
                                              std::string(to_string(dst.type)) + " " + dst.name);
            for (unsigned b = 0; b < w; ++b) {
                std::size_t l = label();
                leaves.push_back({code(l), 0});
                gadgets.push_back({l, {src.bit(b), dst.bit(b)}});
            }
        }
        // Gadgets fire at depth+1 and write at depth+2; the next column starts at depth+3.
        emit_tree(ent, leaves, 2, {code(next), 0});
        for (auto& [l, g] : gadgets) {
            bind(l);
            emit(aram::Opcode::Cond, g.src);
            emit(aram::Opcode::Wrt0, g.dst);
            emit(aram::Opcode::Wrt1, g.dst);
        }
        for (auto& [l, blk] : blocks) {
            bind(l);
            for (auto& [v, o] : blk.writes) emit(v ? aram::Opcode::Wrt1 : aram::Opcode::Wrt0, o);
        }
    }

    void bind_exec(std::size_t child, const XActivation& a) {
        Child& ch = children_[child];
        if (!ch.exec) fail(a.instance.loc, "'" + ch.path + "' is not a meta-module");
        int unit = a.line->head();
        if (ch.exec_unit && *ch.exec_unit != unit) fail(a.instance.loc, "'" + ch.path + "' is bound to two different lines");
        ch.exec_unit = unit;
        const Unit* u = prog_.find(unit);
        if (ch.parameter && u && u->kind == Unit::Kind::Grow && *ch.parameter > u->grow.size())
            fail(a.instance.loc, "parameter of '" + ch.path + "' exceeds the replicas of line " + std::to_string(unit));
    }

    void emit_activation_column(std::size_t ent, const std::vector<const XActivation*>& acts, std::size_t next) {
        std::vector<Target> leaves;
        std::vector<std::size_t> waits;
        std::set<std::size_t> seen_entry, seen_exec;
        for (const XActivation* a : acts) {
            if (a->instance.port) fail(a->instance.loc, "activation of a port");
            std::size_t c = child_of(a->instance);
            if (a->line) bind_exec(c, *a);
            if (a->mode == ActivationEntry::Mode::Execute) {
                if (!seen_exec.insert(c).second) fail(a->instance.loc, "'" + children_[c].path + "' executed twice in one column");
                leaves.push_back({{Operand::Kind::ChildExec, c, 0, {}}, 0});
                continue;
            }
            if (!seen_entry.insert(c).second) fail(a->instance.loc, "'" + children_[c].path + "' activated twice in one column");
            leaves.push_back({{Operand::Kind::ChildEntry, c, 0, {}}, 1});
            waits.push_back(c);
        }
        // Entries run at depth+1; busy is visible from depth+2.
        std::size_t first_poll = waits.empty() ? next : label();
        emit_tree(ent, leaves, 1, {code(first_poll), 0});
        std::vector<Operand> bits;
        for (auto c : waits) bits.push_back({Operand::Kind::ChildBusy, c, 0, {}});
        if (!bits.empty()) emit_polls(first_poll, bits, {code(next), 0});
    }

    // Polls each bit with `P: cond b / jump on 0 / jump P 0` until it reads 0,
    // in order, then jumps to `after`.
    void emit_polls(std::size_t first, const std::vector<Operand>& bits, const Target& after) {
        std::size_t p = first;
        for (std::size_t k = 0; k < bits.size(); ++k) {
            bind(p);
            std::size_t nxt = k + 1 < bits.size() ? label() : npos;
            emit(aram::Opcode::Cond, bits[k]);
            if (nxt == npos) jump(after);
            else jump(nxt, 0);
            jump(p, 0);
            p = nxt;
        }
    }

    // Emits the non-control columns of a line; returns the label of the final segment.
    std::size_t emit_columns(const std::vector<std::vector<const XCopy*>>& copy_cols,
                             const std::vector<std::vector<const XActivation*>>& act_cols, const std::vector<bool>& is_copy) {
        const std::size_t n = is_copy.size();
        std::vector<std::size_t> ent(n + 1);
        for (auto& e : ent) e = label();
        for (std::size_t j = 0; j < n; ++j) {
            if (is_copy[j]) emit_copy_column(ent[j], copy_cols[j], ent[j + 1]);
            else emit_activation_column(ent[j], act_cols[j], ent[j + 1]);
        }
        return ent[n];
    }

    std::size_t emit_merged(const std::vector<const XLine*>& replicas) {
        const std::size_t n = replicas.front()->columns.size();
        std::vector<std::vector<const XCopy*>> cc(n);
        std::vector<std::vector<const XActivation*>> ac(n);
        std::vector<bool> is_copy(n);
        for (std::size_t j = 0; j < n; ++j) {
            is_copy[j] = replicas.front()->columns[j].is_copy();
            for (const XLine* r : replicas) {
                for (const auto& c : r->columns[j].copies) cc[j].push_back(&c);
                for (const auto& a : r->columns[j].activations) ac[j].push_back(&a);
            }
        }
        return emit_columns(cc, ac, is_copy);
    }

    std::vector<int> co_members(int unit) const {
        std::set<int> out;
        for (const auto& st : co_.states)
            if (st.carry && *st.carry == unit)
                for (int m : st.members)
                    if (m != unit) out.insert(m);
        return {out.begin(), out.end()};
    }

    Target egress_target(const Egress& e) const {
        int head = e.line.head();
        return {code(entry_label_.at(head)), e.offset};
    }

    // Final segment of a top-level unit: wait for co-members, clear the run
    // bit and transfer control.
    void emit_final(std::size_t fin, int unit, const std::vector<std::size_t>& extra_waits) {
        std::vector<Operand> waits;
        for (auto g : extra_waits) waits.push_back(control(g));
        for (int m : co_members(unit)) waits.push_back(control(run_bit_.at(m)));
        const Unit* u = prog_.find(unit);
        const std::optional<XControl>& exit = u->exit;
        const unsigned span = exit ? 1 : 0;
        std::size_t x = label();
        if (!waits.empty()) {
            emit_polls(fin, waits, {code(x), span});
        } else {
            bind(fin);
            if (span) jump(x, span);
        }
        bind(x);
        emit(aram::Opcode::Wrt0, control(run_bit_.at(unit)));
        if (!exit) return;
        switch (exit->kind) {
        case Control::Kind::Halt: emit(aram::Opcode::Wrt0, control(0)); break;
        case Control::Kind::Jump: jump(egress_target(exit->first)); break;
        case Control::Kind::Cond: {
            Cell b = cell(exit->bit, Access::Read);
            if (b.type != StorageType::Bit) fail(exit->bit.loc, "cond needs a BIT, '" + b.name + "' is " + std::string(to_string(b.type)));
            emit(aram::Opcode::Cond, b.bit(0));
            jump(egress_target(exit->first));
            jump(egress_target(exit->second));
            break;
        }
        case Control::Kind::Subhalt: throw CompileError("subhalt outside a grow");
        }
    }

    void emit_unit_line(const Unit& u) {
        std::size_t start = code_.size();
        bind(entry_target_[u.number]);
        emit(aram::Opcode::Wrt1, control(run_bit_.at(u.number)));
        std::vector<const XLine*> reps;
        for (const auto& r : u.replicas) reps.push_back(&r);
        if (opt_.reverse_deep) std::reverse(reps.begin(), reps.end());
        std::size_t fin = emit_merged(reps);
        emit_final(fin, u.number, {});
        spans_.emplace_back(std::to_string(u.number), start, code_.size());
    }

    void emit_grow(const Unit& u) {
        std::size_t start = code_.size();
        const std::size_t r = u.grow.size();
        std::size_t head = grow_head_.at(u.number);
        std::size_t hs = label(), fin = label();
        std::vector<std::size_t> q(r);
        for (auto& l : q) l = label();
        bind(head);
        jump(hs, 1);
        for (std::size_t i = 0; i < r; ++i) jump(q[i], 1);
        bind(hs);
        emit(aram::Opcode::Wrt1, control(run_bit_.at(u.number)));
        jump(fin, 0);
        emit_final(fin, u.number, grun_bits_.at(u.number));
        spans_.emplace_back(std::to_string(u.number), start, code_.size());

        for (std::size_t i = 0; i < r; ++i) {
            std::size_t rstart = code_.size();
            const auto& lines = u.grow[i];
            const std::size_t m = lines.size();
            std::vector<std::size_t> se(m), ent(m);
            for (auto& l : se) l = label();
            for (auto& l : ent) l = label();
            auto local = [&](const Egress& e) -> Target {
                for (std::size_t k = 0; k < m; ++k)
                    if (lines[k].address == e.line) return {code(se[k]), e.offset};
                throw CompileError("grow target " + e.line.to_string() + " is missing");
            };
            bind(q[i]);
            emit(aram::Opcode::Wrt1, control(grun_bits_.at(u.number)[i]));
            for (std::size_t k = 0; k < m; ++k) {
                bind(se[k]);
                jump(ent[k], 0);
            }
            for (std::size_t k = 0; k < m; ++k) {
                const XLine& l = lines[k];
                std::size_t n = l.columns.size();
                std::vector<std::vector<const XCopy*>> cc(n);
                std::vector<std::vector<const XActivation*>> ac(n);
                std::vector<bool> is_copy(n);
                for (std::size_t j = 0; j < n; ++j) {
                    is_copy[j] = l.columns[j].is_copy();
                    for (const auto& c : l.columns[j].copies) cc[j].push_back(&c);
                    for (const auto& a : l.columns[j].activations) ac[j].push_back(&a);
                }
                std::size_t lf;
                if (n == 0) {
                    lf = ent[k];
                } else {
                    // columns start at ent[k]
                    std::vector<std::size_t> e(n + 1);
                    e[0] = ent[k];
                    for (std::size_t j = 1; j <= n; ++j) e[j] = label();
                    for (std::size_t j = 0; j < n; ++j) {
                        if (is_copy[j]) emit_copy_column(e[j], cc[j], e[j + 1]);
                        else emit_activation_column(e[j], ac[j], e[j + 1]);
                    }
                    lf = e[n];
                }
                bind(lf);
                const XControl& k2 = *l.control;
                switch (k2.kind) {
                case Control::Kind::Jump: jump(local(k2.first)); break;
                case Control::Kind::Cond: {
                    Cell b = cell(k2.bit, Access::Read);
                    if (b.type != StorageType::Bit) fail(k2.bit.loc, "cond needs a BIT");
                    emit(aram::Opcode::Cond, b.bit(0));
                    jump(local(k2.first));
                    jump(local(k2.second));
                    break;
                }
                case Control::Kind::Subhalt: emit(aram::Opcode::Wrt0, control(grun_bits_.at(u.number)[i])); break;
                case Control::Kind::Halt: throw CompileError("HALT inside a grow");
                }
            }
            spans_.emplace_back(std::to_string(u.number) + "[" + std::to_string(*lines.front().replica) + "]", rstart, code_.size());
        }
    }

    std::map<int, std::size_t> entry_target_; // S_k of base and deep units

    void emit_program() {
        emit(aram::Opcode::Wrt1, control(0));
        for (const auto& u : prog_.units) {
            std::size_t e = label();
            entry_label_[u.number] = e;
            bind(e);
            if (u.kind == Unit::Kind::Grow) {
                std::size_t h = label();
                grow_head_[u.number] = h;
                jump(h, static_cast<unsigned>(u.grow.size()));
            } else {
                std::size_t s = label();
                entry_target_[u.number] = s;
                jump(s, 1);
            }
        }
        spans_.emplace_back("entry", 0, code_.size());
        for (const auto& u : prog_.units) {
            if (u.kind == Unit::Kind::Grow) emit_grow(u);
            else emit_unit_line(u);
        }
    }

    // -- linking -----------------------------------------------------------------
    Built link(Address base, std::vector<std::string>& stack) {
        const auto code_size = static_cast<Address>(code_.size());
        const Address storage_base = base + code_size;
        const Address control_base = storage_base + static_cast<Address>(storage_regs_);
        const Address control_regs = static_cast<Address>((control_bits_ + opt_.machine.word_width - 1) / opt_.machine.word_width);
        Address next = control_base + control_regs;

        Built out;
        std::vector<ModuleImage> images;
        aram::MachineConfig child_cfg = opt_.machine;
        child_cfg.memory_size = static_cast<std::uint32_t>(opt_.machine.max_addr() + 1);
        for (const Child& ch : children_) {
            ModuleImage img;
            if (ch.cls->kind == LibraryClass::Kind::Earth) {
                try {
                    img = earth::layout_and_assemble(*ch.cls->earth, next, child_cfg);
                } catch (const Error& e) {
                    throw CompileError(ch.path + ": " + e.what());
                }
                out.instances.push_back({ch.path, ch.cls->name, img.base, img.end(), img.busy});
                if (img.busy) out.watches.push_back({img.busy->reg, img.busy->bit, ch.path + ".busy"});
            } else {
                if (std::find(stack.begin(), stack.end(), ch.cls->name) != stack.end())
                    throw CompileError("recursive class reference: " + ch.cls->name);
                CompileOptions sub = opt_;
                sub.machine = child_cfg;
                Built b = build_space(*ch.cls->space, lib_, sub, next, stack);
                img = std::move(b.image);
                out.instances.push_back({ch.path, ch.cls->name, img.base, img.end(), img.busy});
                for (auto& i : b.instances) out.instances.push_back({ch.path + "." + i.path, i.cls, i.base, i.end, i.busy});
                for (auto& w : b.watches) out.watches.push_back({w.x, w.y, ch.path + "." + w.name});
            }
            next = img.end();
            images.push_back(std::move(img));
        }
        if (next > opt_.machine.memory_size)
            throw CompileError("memory overflow: module " + ast_.name + " needs registers up to " + std::to_string(next) +
                               ", memory has " + std::to_string(opt_.machine.memory_size));

        auto bit_of = [&](const Operand& o) -> BitLocation {
            switch (o.kind) {
            case Operand::Kind::Storage: return {storage_base + static_cast<Address>(o.id), o.bit};
            case Operand::Kind::Control:
                return {control_base + static_cast<Address>(o.id / opt_.machine.word_width), static_cast<unsigned>(o.id % opt_.machine.word_width)};
            case Operand::Kind::ChildBusy: return *images[o.id].busy;
            case Operand::Kind::ChildPort: {
                const Port* p = images[o.id].port(o.port);
                return p->at(0, o.bit);
            }
            default: throw CompileError("internal: bad bit operand");
            }
        };
        auto addr_of = [&](const Operand& o) -> Address {
            switch (o.kind) {
            case Operand::Kind::Code:
                if (pos_[o.id] < 0) throw CompileError("internal: unbound code label");
                return base + static_cast<Address>(pos_[o.id]);
            case Operand::Kind::ChildEntry: return images[o.id].entry[0];
            case Operand::Kind::ChildExec: return *images[o.id].exec;
            default: throw CompileError("internal: bad jump operand");
            }
        };

        ModuleImage& m = out.image;
        m.name = ast_.name;
        m.base = base;
        m.code_size = code_size;
        m.words.assign(next - base, 0);
        m.entry = {base, base + 1};
        m.busy = BitLocation{control_base, 0};
        m.time = ast_.time;
        for (std::size_t i = 0; i < code_.size(); ++i) {
            const WordT& w = code_[i];
            if (w.op == aram::Opcode::Jump) {
                m.words[i] = aram::encode_instruction(w.op, addr_of(w.x), w.y, opt_.machine);
            } else {
                auto b = bit_of(w.x);
                m.words[i] = aram::encode_instruction(w.op, b.reg, b.bit, opt_.machine);
            }
        }
        for (const auto& s : ast_.storage)
            m.ports.push_back({s.label, s.category, s.type, storage_base + static_cast<Address>(storage_at_.at(s.label)), 0, s.count()});
        for (std::size_t c = 0; c < images.size(); ++c) {
            const ModuleImage& img = images[c];
            std::copy(img.words.begin(), img.words.end(), m.words.begin() + (img.base - base));
            if (children_[c].exec_unit) {
                int unit = *children_[c].exec_unit;
                std::size_t target = grow_head_.count(unit) ? grow_head_.at(unit) : entry_label_.at(unit);
                Address& word = m.words[*img.exec - base];
                auto ins = aram::decode_instruction(word, opt_.machine);
                ins.x = base + static_cast<Address>(pos_[target]);
                word = aram::encode_instruction(ins, opt_.machine);
            }
        }

        out.watches.insert(out.watches.begin(), {control_base, 0, "busy"});
        for (const auto& [unit, bit] : run_bit_) {
            auto b = bit_of(control(bit));
            out.watches.push_back({b.reg, b.bit, "run " + std::to_string(unit)});
        }
        for (const auto& [unit, bits] : grun_bits_)
            for (std::size_t i = 0; i < bits.size(); ++i) {
                auto b = bit_of(control(bits[i]));
                out.watches.push_back({b.reg, b.bit, "run " + std::to_string(unit) + "[" + std::to_string(i) + "]"});
            }
        for (const auto& [name, b, e] : spans_) out.spans.push_back({name, base + static_cast<Address>(b), base + static_cast<Address>(e)});
        return out;
    }
};

} // namespace detail

} // namespace spatiale::space
