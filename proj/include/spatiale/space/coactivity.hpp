#pragma once

#include <deque>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "spatiale/space/ast.hpp"

namespace spatiale::space {

struct Violation {
    std::string rule;
    std::string where;
    SourceLocation loc;

    std::string to_string() const {
        std::string s;
        if (loc.line) s = "line " + std::to_string(loc.line) + ":" + std::to_string(loc.column) + ": ";
        return s + where + ": " + rule;
    }
};

/// One state of the module's transition system: a co-active set of top-level lines.
struct CoState {
    std::vector<int> members;
    std::optional<int> carry;
    std::vector<std::size_t> successors;
};

struct CoactivityReport {
    std::vector<CoState> states;
    std::vector<Violation> violations;

    bool ok() const noexcept { return violations.empty(); }
};

namespace rules {
inline constexpr const char* kControlNotFinal = "control may appear only in the final column";
inline constexpr const char* kMixedColumn = "a column may not mix copies, activations and control";
inline constexpr const char* kOneControl = "a final column holds exactly one control instruction";
inline constexpr const char* kNoCarry = "co-active set has no carry line";
inline constexpr const char* kManyCarries = "co-active set has more than one carry line";
inline constexpr const char* kMissingLine = "control targets a line that does not exist";
inline constexpr const char* kUnitNumbering = "top-level lines must be numbered 1..n without gaps";
inline constexpr const char* kDeepShape = "a deep construct wraps exactly one base line n.1 without control";
inline constexpr const char* kGrowExit = "every grow line must end in a jump, cond or subhalt inside its grow";
inline constexpr const char* kSubhaltOutside = "subhalt outside its grow";
inline constexpr const char* kMetaTarget = "meta-module line must be a top-level line";
} // namespace rules

namespace detail {

/// The exit of a top-level unit: a base line's control or a construct's egress.
struct UnitExit {
    bool halts = false;
    std::vector<Egress> egresses;
    bool has_control = false;
};

inline UnitExit unit_exit(const SpaceAST& ast, int unit) {
    UnitExit e;
    if (const Construct* c = ast.find_construct(unit)) {
        if (c->egress) e.egresses.push_back(*c->egress), e.has_control = true;
        return e;
    }
    const BaseLine* l = ast.find_line(LineAddress{{unit}});
    if (!l || !l->control()) return e;
    const Control& k = *l->control();
    e.has_control = true;
    switch (k.kind) {
    case Control::Kind::Halt: e.halts = true; break;
    case Control::Kind::Jump: e.egresses.push_back(k.first); break;
    case Control::Kind::Cond: e.egresses.push_back(k.first), e.egresses.push_back(k.second); break;
    case Control::Kind::Subhalt: break;
    }
    return e;
}

inline std::vector<int> meta_executed(const SpaceAST& ast, int unit) {
    std::vector<int> out;
    for (const auto& l : ast.lines) {
        if (l.address.head() != unit) continue;
        for (const auto& c : l.columns)
            for (const auto& a : c.activations)
                if (a.mode == ActivationEntry::Mode::Execute && a.line && a.line->top_level()) out.push_back(a.line->head());
    }
    return out;
}

} // namespace detail

/// Static checks of the co-activity rules plus derivation of the state system.
inline CoactivityReport check_coactivity(const SpaceAST& ast) {
    CoactivityReport rep;
    auto violate = [&](const char* rule, std::string where, SourceLocation loc = {}) {
        rep.violations.push_back({rule, std::move(where), loc});
    };

    const auto units = ast.units();
    for (std::size_t k = 0; k < units.size(); ++k)
        if (units[k] != static_cast<int>(k + 1)) {
            violate(rules::kUnitNumbering, "line " + std::to_string(units[k]));
            break;
        }
    const std::set<int> unit_set(units.begin(), units.end());

    auto check_targets = [&](const Egress& e, const std::string& where, SourceLocation loc) {
        for (unsigned o = 0; o <= e.offset; ++o) {
            LineAddress t = e.line;
            t.parts.back() += static_cast<int>(o);
            bool exists = t.top_level() ? unit_set.count(t.head()) > 0 : ast.find_line(t) != nullptr;
            if (!exists) violate(rules::kMissingLine, where + " -> " + t.to_string(), loc);
        }
    };

    for (const auto& l : ast.lines) {
        const std::string where = "line " + l.address.to_string();
        for (std::size_t c = 0; c < l.columns.size(); ++c) {
            const Column& col = l.columns[c];
            int kinds = !col.copies.empty() + !col.activations.empty() + !col.controls.empty();
            if (!col.controls.empty() && c + 1 != l.columns.size()) violate(rules::kControlNotFinal, where, col.loc);
            else if (kinds > 1) violate(rules::kMixedColumn, where, col.loc);
            else if (col.controls.size() > 1) violate(rules::kOneControl, where, col.loc);
            for (const auto& a : col.activations)
                if (a.mode != ActivationEntry::Mode::Activate && (!a.line || !a.line->top_level() || !unit_set.count(a.line->head())))
                    violate(rules::kMetaTarget, where, col.loc);
        }
        const Control* k = l.control();
        const Construct* owner = l.address.top_level() ? nullptr : ast.find_construct(l.address.head());
        if (!owner) {
            if (k && k->kind == Control::Kind::Subhalt) violate(rules::kSubhaltOutside, where, k->loc);
            if (k && k->kind == Control::Kind::Jump) check_targets(k->first, where, k->loc);
            if (k && k->kind == Control::Kind::Cond) check_targets(k->first, where, k->loc), check_targets(k->second, where, k->loc);
            if (k && (k->kind == Control::Kind::Jump || k->kind == Control::Kind::Cond)) {
                auto top = [](const Egress& e) { return e.line.top_level(); };
                if (!top(k->first) || (k->kind == Control::Kind::Cond && !top(k->second)))
                    violate(rules::kMissingLine, where + " targets a line inside a construct", k->loc);
            }
        } else if (owner->kind == Construct::Kind::Deep) {
            if (l.address.parts != std::vector<int>{owner->address.head(), 1} || k) violate(rules::kDeepShape, where, l.loc);
        } else {
            auto inside = [&](const Egress& e) {
                if (!e.line.within(owner->address)) return false;
                for (unsigned o = 0; o <= e.offset; ++o) {
                    LineAddress t = e.line;
                    t.parts.back() += static_cast<int>(o);
                    if (!ast.find_line(t)) return false;
                }
                return true;
            };
            bool good = k != nullptr;
            if (k && k->kind == Control::Kind::Halt) good = false;
            if (k && k->kind == Control::Kind::Jump) good = inside(k->first);
            if (k && k->kind == Control::Kind::Cond) good = inside(k->first) && inside(k->second);
            if (k && k->kind == Control::Kind::Subhalt) good = k->construct == owner->address;
            if (!good) violate(rules::kGrowExit, where, k ? k->loc : l.loc);
        }
    }
    for (const auto& c : ast.constructs) {
        if (c.kind == Construct::Kind::Deep) {
            int n = 0;
            for (const auto& l : ast.lines) n += l.address.within(c.address);
            if (n != 1) violate(rules::kDeepShape, "line " + c.address.to_string(), c.loc);
        }
        if (c.egress) check_targets(*c.egress, "line " + c.address.to_string(), c.loc);
    }
    if (!rep.violations.empty() || units.empty()) return rep;

    // States: breadth-first from {1}; a member's meta-execute pulls its target in.
    auto closure = [&](std::set<int> s) {
        std::deque<int> work(s.begin(), s.end());
        while (!work.empty()) {
            int u = work.front();
            work.pop_front();
            for (int t : detail::meta_executed(ast, u))
                if (s.insert(t).second) work.push_back(t);
        }
        return std::vector<int>(s.begin(), s.end());
    };
    std::map<std::vector<int>, std::size_t> index;
    std::deque<std::size_t> work;
    auto intern = [&](std::vector<int> members) {
        auto [it, fresh] = index.emplace(members, rep.states.size());
        if (fresh) {
            rep.states.push_back({std::move(members), std::nullopt, {}});
            work.push_back(it->second);
        }
        return it->second;
    };
    intern(closure({1}));
    while (!work.empty()) {
        std::size_t k = work.front();
        work.pop_front();
        std::vector<int> carries;
        for (int u : rep.states[k].members)
            if (detail::unit_exit(ast, u).has_control) carries.push_back(u);
        std::string where = "state {";
        for (std::size_t i = 0; i < rep.states[k].members.size(); ++i)
            where += (i ? "," : "") + std::to_string(rep.states[k].members[i]);
        where += "}";
        if (carries.empty()) {
            violate(rules::kNoCarry, where);
            continue;
        }
        if (carries.size() > 1) {
            violate(rules::kManyCarries, where);
            continue;
        }
        rep.states[k].carry = carries.front();
        for (const auto& e : detail::unit_exit(ast, carries.front()).egresses) {
            std::set<int> next;
            for (unsigned o = 0; o <= e.offset; ++o) next.insert(e.line.head() + static_cast<int>(o));
            std::size_t s = intern(closure(next));
            rep.states[k].successors.push_back(s);
        }
    }
    return rep;
}

/// Text listing of the derived states.
inline std::string format_states(const SpaceAST& ast, const CoactivityReport& rep) {
    std::ostringstream os;
    auto name = [&](int u) {
        std::string s = std::to_string(u);
        if (const Construct* c = ast.find_construct(u)) s += c->kind == Construct::Kind::Deep ? " (deep)" : " (grow)";
        return s;
    };
    for (std::size_t k = 0; k < rep.states.size(); ++k) {
        const auto& st = rep.states[k];
        os << "state " << k << ": {";
        for (std::size_t i = 0; i < st.members.size(); ++i) os << (i ? ", " : "") << name(st.members[i]);
        os << "}";
        if (st.carry) os << " carry " << *st.carry;
        os << " ->";
        const auto ex = st.carry ? detail::unit_exit(ast, *st.carry) : detail::UnitExit{};
        const char* sep = " ";
        if (ex.halts) {
            os << " HALT";
            sep = ", ";
        }
        for (auto s : st.successors) {
            os << sep << "state " << s;
            sep = ", ";
        }
        os << '\n';
    }
    for (const auto& v : rep.violations) os << "violation: " << v.to_string() << '\n';
    return os.str();
}

} // namespace spatiale::space
