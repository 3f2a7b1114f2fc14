#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "spatiale/space/ast.hpp"

namespace spatiale::space {

/// A reference with every index evaluated.
struct Place {
    std::string label;
    std::vector<std::int64_t> index;
    std::optional<std::string> port;
    SourceLocation loc;

    std::string element() const {
        std::string s = label;
        for (auto i : index) s += "[" + std::to_string(i) + "]";
        return s;
    }
    std::string to_string() const { return port ? element() + "." + *port : element(); }
    friend bool operator==(const Place& a, const Place& b) { return a.label == b.label && a.index == b.index && a.port == b.port; }
};

struct XCopy {
    std::optional<Place> source;
    std::optional<std::uint64_t> immediate;
    Place destination;
};

struct XActivation {
    ActivationEntry::Mode mode = ActivationEntry::Mode::Activate;
    Place instance;
    std::optional<LineAddress> line;
};

struct XControl {
    Control::Kind kind = Control::Kind::Halt;
    Place bit;
    Egress first, second;
    LineAddress construct;
};

struct XColumn {
    std::vector<XCopy> copies;
    std::vector<XActivation> activations;
    bool is_copy() const noexcept { return !copies.empty(); }
};

struct XLine {
    LineAddress address;
    std::vector<XColumn> columns; // control column removed
    std::optional<XControl> control;
    std::optional<std::int64_t> replica; // control variable value
};

/// A top-level line after construct expansion.
struct Unit {
    enum class Kind { Base, Deep, Grow };
    Kind kind = Kind::Base;
    int number = 0;
    std::vector<XLine> replicas;             // base: one line; deep: one line per replica
    std::vector<std::vector<XLine>> grow;    // grow: the renamed subprogram of each replica
    std::optional<XControl> exit;            // base: its control; constructs: the egress as a jump
};

struct ExpandedProgram {
    std::vector<Unit> units;
    const Unit* find(int n) const {
        for (const auto& u : units)
            if (u.number == n) return &u;
        return nullptr;
    }
};

/// Caps construct bounds at N replicas and array dimensions at N elements.
inline SpaceAST apply_scale(SpaceAST ast, std::optional<unsigned> scale) {
    if (!scale) return ast;
    if (*scale == 0) throw CompileError("scale override must be positive");
    const auto n = static_cast<std::int64_t>(*scale);
    for (auto& c : ast.constructs) c.hi = std::min(c.hi, c.lo + n - 1);
    for (auto& s : ast.storage)
        for (auto& d : s.dims) d = std::min(d, *scale);
    for (auto& s : ast.submodules)
        for (auto& d : s.dims) d = std::min(d, *scale);
    return ast;
}

namespace detail {

struct Scope {
    const SpaceAST& ast;
    std::optional<std::string> var;
    std::int64_t value = 0;

    std::int64_t eval(const Index& ix, SourceLocation loc) const {
        if (!ix.is_var) return ix.value;
        if (!var) throw CompileError("line " + std::to_string(loc.line) + ": control variable '" + ix.var + "' used outside any construct");
        if (ix.var != *var) throw CompileError("line " + std::to_string(loc.line) + ": '" + ix.var + "' is not the control variable '" + *var + "'");
        if (!ix.fn.empty() && (!ast.replications || !ast.replications->declares(ix.fn)))
            throw CompileError("line " + std::to_string(loc.line) + ": incremental function '" + ix.fn + "' is not declared");
        return apply_fn(ix.fn, value);
    }

    Place place(const Ref& r) const {
        Place p;
        p.label = r.label;
        p.port = r.port;
        p.loc = r.loc;
        const std::vector<unsigned>* dims = nullptr;
        if (const auto* s = ast.find_storage(r.label)) {
            dims = &s->dims;
            if (r.port) throw CompileError(at(r.loc) + "storage '" + r.label + "' has no ports");
        } else if (const auto* m = ast.find_submodule(r.label)) {
            dims = &m->dims;
        } else {
            throw CompileError(at(r.loc) + "unknown label '" + r.label + "'");
        }
        if (r.index.size() != dims->size())
            throw CompileError(at(r.loc) + "'" + r.to_string() + "' needs " + std::to_string(dims->size()) + " index(es)");
        for (std::size_t k = 0; k < r.index.size(); ++k) {
            auto v = eval(r.index[k], r.loc);
            if (v < 0 || v >= static_cast<std::int64_t>((*dims)[k]))
                throw CompileError(at(r.loc) + "index " + std::to_string(v) + " of '" + r.to_string() + "' is out of range");
            p.index.push_back(v);
        }
        return p;
    }

    static std::string at(SourceLocation loc) { return "line " + std::to_string(loc.line) + ":" + std::to_string(loc.column) + ": "; }
};

inline XLine expand_line(const BaseLine& l, const Scope& scope) {
    XLine x;
    x.address = l.address;
    if (scope.var) x.replica = scope.value;
    for (const auto& col : l.columns) {
        if (!col.controls.empty()) {
            const Control& c = col.controls.front();
            XControl k;
            k.kind = c.kind;
            if (c.kind == Control::Kind::Cond) k.bit = scope.place(c.bit);
            k.first = c.first;
            k.second = c.second;
            k.construct = c.construct;
            x.control = k;
            continue;
        }
        XColumn xc;
        for (const auto& cp : col.copies) {
            XCopy y;
            if (cp.source) y.source = scope.place(*cp.source);
            if (cp.immediate) {
                auto v = scope.eval(*cp.immediate, cp.destination.loc);
                if (v < 0) throw CompileError(Scope::at(cp.destination.loc) + "negative immediate");
                y.immediate = static_cast<std::uint64_t>(v);
            }
            y.destination = scope.place(cp.destination);
            xc.copies.push_back(std::move(y));
        }
        for (const auto& a : col.activations) {
            XActivation y;
            y.mode = a.mode;
            y.instance = scope.place(a.instance);
            y.line = a.line;
            xc.activations.push_back(std::move(y));
        }
        x.columns.push_back(std::move(xc));
    }
    return x;
}

inline std::optional<XControl> egress_control(const Construct& c) {
    if (!c.egress) return std::nullopt;
    XControl k;
    k.kind = Control::Kind::Jump;
    k.first = *c.egress;
    return k;
}

} // namespace detail

/// Removes construct lines: deep replicas become parallel copies of the
/// base line, grow replicas become renamed copies of the subprogram.
inline ExpandedProgram expand_constructs(const SpaceAST& ast) {
    ExpandedProgram out;
    for (int n : ast.units()) {
        Unit u;
        u.number = n;
        if (const Construct* c = ast.find_construct(n)) {
            u.kind = c->kind == Construct::Kind::Deep ? Unit::Kind::Deep : Unit::Kind::Grow;
            u.exit = detail::egress_control(*c);
            std::vector<const BaseLine*> body;
            for (const auto& l : ast.lines)
                if (l.address.within(c->address)) body.push_back(&l);
            std::sort(body.begin(), body.end(), [](auto* a, auto* b) { return a->address < b->address; });
            if (body.empty()) throw CompileError("construct " + c->address.to_string() + " has no lines");
            for (std::int64_t v = c->lo; v <= c->hi; ++v) {
                detail::Scope scope{ast, c->var, v};
                if (u.kind == Unit::Kind::Deep) {
                    u.replicas.push_back(detail::expand_line(*body.front(), scope));
                } else {
                    std::vector<XLine> copy;
                    for (const BaseLine* l : body) copy.push_back(detail::expand_line(*l, scope));
                    u.grow.push_back(std::move(copy));
                }
            }
        } else {
            detail::Scope scope{ast, std::nullopt, 0};
            u.replicas.push_back(detail::expand_line(*ast.find_line(LineAddress{{n}}), scope));
            u.exit = u.replicas.front().control;
        }
        out.units.push_back(std::move(u));
    }
    return out;
}

namespace detail {

inline std::string format_control(const XControl& k) {
    auto eg = [](const Egress& e) { return "(" + e.line.to_string() + "," + std::to_string(e.offset) + ")"; };
    switch (k.kind) {
    case Control::Kind::Halt: return "HALT";
    case Control::Kind::Jump: return "jump" + eg(k.first);
    case Control::Kind::Cond: return "cond_" + k.bit.to_string() + " " + eg(k.first) + " " + eg(k.second);
    case Control::Kind::Subhalt: return "subhalt(" + k.construct.to_string() + ")";
    }
    return {};
}

inline std::string format_xline(const XLine& l) {
    std::string s;
    for (const auto& c : l.columns) {
        if (!s.empty()) s += " :: ";
        std::string col;
        for (const auto& cp : c.copies) {
            if (!col.empty()) col += "  ";
            col += (cp.immediate ? "#" + std::to_string(*cp.immediate) : cp.source->to_string()) + " -> " + cp.destination.to_string();
        }
        for (const auto& a : c.activations) {
            if (!col.empty()) col += "  ";
            const char* prefix = a.mode == ActivationEntry::Mode::Execute ? "-" : "_";
            col += prefix + a.instance.element();
            if (a.line) col += "(" + a.line->to_string() + ")";
        }
        s += col;
    }
    if (l.control) s += (s.empty() ? "" : " :: ") + format_control(*l.control);
    return s;
}

} // namespace detail

/// Base lines after construct expansion, one row per replica.
inline std::string format_expanded(const ExpandedProgram& p) {
    std::ostringstream os;
    for (const auto& u : p.units) {
        switch (u.kind) {
        case Unit::Kind::Base: os << u.number << ": " << detail::format_xline(u.replicas.front()) << " ;;\n"; break;
        case Unit::Kind::Deep:
            os << u.number << ": deep, " << u.replicas.size() << " replicas";
            if (u.exit) os << ", egress " << detail::format_control(*u.exit).substr(4);
            os << '\n';
            for (const auto& r : u.replicas)
                os << "  " << r.address.to_string() << "[" << *r.replica << "]: " << detail::format_xline(r) << " ;;\n";
            break;
        case Unit::Kind::Grow:
            os << u.number << ": grow, " << u.grow.size() << " replicas";
            if (u.exit) os << ", egress " << detail::format_control(*u.exit).substr(4);
            os << '\n';
            for (const auto& rep : u.grow)
                for (const auto& r : rep)
                    os << "  " << r.address.to_string() << "[" << *r.replica << "]: " << detail::format_xline(r) << " ;;\n";
            break;
        }
    }
    return os.str();
}

} // namespace spatiale::space
