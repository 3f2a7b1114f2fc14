#pragma once

// Interstrings over an abstract memory: alternating alpha (functional-unit activation)
// and beta (cell copy) columns, evaluated synchronously column by column.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "spatiale/error.hpp"

namespace spatiale::interlang {

struct Empty {
    friend bool operator==(const Empty&, const Empty&) = default;
};
struct Var {
    std::string name;
    friend bool operator==(const Var&, const Var&) = default;
};
struct Const {
    std::int64_t value = 0;
    friend bool operator==(const Const&, const Const&) = default;
};
/// A value produced by a functional unit.
template <class T>
struct Computed {
    T value{};
    friend bool operator==(const Computed&, const Computed&) = default;
};

template <class T>
using Cell = std::variant<Empty, Var, Const, Computed<T>>;

/// Cell 0 holds the result; functional unit j reads cells 3j+1, 3j+2 and writes 3j+3.
template <class T>
struct AbstractMemory {
    std::vector<Cell<T>> cells;

    AbstractMemory() : cells(4) {}
    explicit AbstractMemory(std::size_t functional_units) : cells(3 * functional_units + 1) {
        if (functional_units == 0) throw Error("abstract memory needs at least one functional unit");
    }

    std::size_t functional_units() const noexcept { return (cells.size() - 1) / 3; }
    std::size_t size() const noexcept { return cells.size(); }
    bool well_formed() const noexcept { return cells.size() >= 4 && cells.size() % 3 == 1; }

    friend bool operator==(const AbstractMemory&, const AbstractMemory&) = default;
};

struct Activation {
    std::string function;
    std::size_t unit = 0;
    friend bool operator==(const Activation&, const Activation&) = default;
};

struct Copy {
    std::size_t source = 0;
    std::size_t destination = 0;
    friend bool operator==(const Copy&, const Copy&) = default;
};

struct AlphaColumn {
    std::vector<Activation> activations;
    friend bool operator==(const AlphaColumn&, const AlphaColumn&) = default;
};

struct BetaColumn {
    std::vector<Copy> copies;
    friend bool operator==(const BetaColumn&, const BetaColumn&) = default;
};

using Column = std::variant<AlphaColumn, BetaColumn>;

struct Interstring {
    std::vector<Column> columns;

    std::size_t alpha_activations() const {
        std::size_t n = 0;
        for (const auto& c : columns)
            if (auto* a = std::get_if<AlphaColumn>(&c)) n += a->activations.size();
        return n;
    }
    friend bool operator==(const Interstring&, const Interstring&) = default;
};

struct Violation {
    std::size_t column = 0;
    std::string message;
    friend bool operator==(const Violation&, const Violation&) = default;
};

/// Checks alternation, non-empty columns, per-column uniqueness and index ranges.
inline std::vector<Violation> validate(const Interstring& s, std::size_t memory_size) {
    std::vector<Violation> out;
    const std::size_t units = memory_size >= 1 ? (memory_size - 1) / 3 : 0;
    if (memory_size < 4 || memory_size % 3 != 1)
        out.push_back({0, "memory size " + std::to_string(memory_size) + " is not 3F+1"});
    if (s.columns.empty()) out.push_back({0, "empty interstring"});
    for (std::size_t c = 0; c < s.columns.size(); ++c) {
        if (c > 0 && s.columns[c].index() == s.columns[c - 1].index())
            out.push_back({c, "columns do not alternate"});
        if (const auto* a = std::get_if<AlphaColumn>(&s.columns[c])) {
            if (a->activations.empty()) out.push_back({c, "empty alpha column"});
            std::set<std::size_t> seen;
            for (const auto& act : a->activations) {
                if (act.unit >= units) out.push_back({c, "functional unit " + std::to_string(act.unit) + " out of range"});
                if (!seen.insert(act.unit).second)
                    out.push_back({c, "duplicate FU " + std::to_string(act.unit)});
            }
        } else {
            const auto& b = std::get<BetaColumn>(s.columns[c]);
            if (b.copies.empty()) out.push_back({c, "empty beta column"});
            std::set<std::size_t> seen;
            for (const auto& cp : b.copies) {
                if (cp.source >= memory_size) out.push_back({c, "source cell " + std::to_string(cp.source) + " out of range"});
                if (cp.destination >= memory_size)
                    out.push_back({c, "destination cell " + std::to_string(cp.destination) + " out of range"});
                if (!seen.insert(cp.destination).second)
                    out.push_back({c, "duplicate destination " + std::to_string(cp.destination)});
            }
        }
    }
    return out;
}

template <class T>
struct Semantics {
    std::map<std::string, std::function<T(const T&, const T&)>> functions;
    std::map<std::string, T> variables;
    std::function<T(std::int64_t)> constant = [](std::int64_t v) { return static_cast<T>(v); };
};

/// Integer semantics for +, -, * (and ×), wrapping modulo 2^64.
inline Semantics<std::int64_t> integer_semantics(std::map<std::string, std::int64_t> vars = {}) {
    Semantics<std::int64_t> s;
    auto wrap = [](auto f) {
        return [f](const std::int64_t& a, const std::int64_t& b) {
            return static_cast<std::int64_t>(f(static_cast<std::uint64_t>(a), static_cast<std::uint64_t>(b)));
        };
    };
    s.functions["+"] = wrap([](std::uint64_t a, std::uint64_t b) { return a + b; });
    s.functions["-"] = wrap([](std::uint64_t a, std::uint64_t b) { return a - b; });
    s.functions["*"] = wrap([](std::uint64_t a, std::uint64_t b) { return a * b; });
    s.functions["×"] = s.functions["*"];
    s.variables = std::move(vars);
    return s;
}

template <class T>
T cell_value(const Cell<T>& c, const Semantics<T>& sem, std::size_t cell, std::size_t column) {
    return std::visit(
        [&](const auto& v) -> T {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, Empty>) {
                throw EvalError("column " + std::to_string(column) + ": read of empty cell " + std::to_string(cell));
            } else if constexpr (std::is_same_v<V, Var>) {
                auto it = sem.variables.find(v.name);
                if (it == sem.variables.end())
                    throw EvalError("column " + std::to_string(column) + ": unmapped variable '" + v.name + "'");
                return it->second;
            } else if constexpr (std::is_same_v<V, Const>) {
                return sem.constant(v.value);
            } else {
                return v.value;
            }
        },
        c);
}

/// Applies the columns left to right and returns the memory after each one.
/// The input memory is never modified.
template <class T>
std::vector<AbstractMemory<T>> eval(const Interstring& s, const AbstractMemory<T>& initial, const Semantics<T>& sem) {
    if (auto v = validate(s, initial.size()); !v.empty())
        throw EvalError("ill-formed interstring: column " + std::to_string(v.front().column) + ": " + v.front().message);
    std::vector<AbstractMemory<T>> out;
    out.reserve(s.columns.size());
    AbstractMemory<T> mem = initial;
    for (std::size_t c = 0; c < s.columns.size(); ++c) {
        AbstractMemory<T> next = mem;
        if (const auto* a = std::get_if<AlphaColumn>(&s.columns[c])) {
            for (const auto& act : a->activations) {
                auto fn = sem.functions.find(act.function);
                if (fn == sem.functions.end())
                    throw EvalError("column " + std::to_string(c) + ": unmapped function '" + act.function + "'");
                const std::size_t in0 = 3 * act.unit + 1, in1 = 3 * act.unit + 2;
                T result = fn->second(cell_value(mem.cells[in0], sem, in0, c), cell_value(mem.cells[in1], sem, in1, c));
                next.cells[3 * act.unit + 3] = Computed<T>{std::move(result)};
            }
        } else {
            // Read phase against `mem`, write phase into `next`.
            for (const auto& cp : std::get<BetaColumn>(s.columns[c]).copies) {
                if (std::holds_alternative<Empty>(mem.cells[cp.source]))
                    throw EvalError("column " + std::to_string(c) + ": read of empty cell " + std::to_string(cp.source));
                next.cells[cp.destination] = mem.cells[cp.source];
            }
        }
        out.push_back(next);
        mem = std::move(next);
    }
    return out;
}

/// Final cell-0 value of an evaluation.
template <class T>
T result_of(const Interstring& s, const AbstractMemory<T>& initial, const Semantics<T>& sem) {
    auto trace = eval(s, initial, sem);
    if (trace.empty()) throw EvalError("empty interstring");
    return cell_value(trace.back().cells[0], sem, 0, s.columns.size());
}

// ---------------------------------------------------------------------------
// Text notation: `+(0) *(1) :: 3->1 6->2 :: ... ;` and `memory: _ x y 3 ...`

namespace detail {

inline std::string strip_comments(std::string_view text) {
    std::string out;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (auto p = line.find("//"); p != std::string::npos) line.erase(p);
        if (auto p = line.find('#'); p != std::string::npos) line.erase(p);
        out += line;
        out += '\n';
    }
    return out;
}

inline std::vector<std::string> split_entries(std::string_view col) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : col) {
        if (std::isspace(static_cast<unsigned char>(ch)) || ch == ',') {
            if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
        } else {
            cur += ch;
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    // Rejoin "3 -> 1" written with spaces.
    std::vector<std::string> joined;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i] == "->" && !joined.empty() && i + 1 < out.size()) {
            joined.back() += "->" + out[++i];
        } else if (out[i].size() > 2 && out[i].ends_with("->") && i + 1 < out.size()) {
            joined.push_back(out[i] + out[i + 1]);
            ++i;
        } else if (out[i].starts_with("->") && !joined.empty()) {
            joined.back() += out[i];
        } else {
            joined.push_back(out[i]);
        }
    }
    return joined;
}

inline std::size_t parse_index(const std::string& s, const std::string& ctx) {
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); }))
        throw Error("bad index '" + s + "' in '" + ctx + "'");
    return std::stoul(s);
}

} // namespace detail

inline Interstring parse_interstring(std::string_view text) {
    std::string body = detail::strip_comments(text);
    auto semi = body.find(';');
    if (semi == std::string::npos) throw Error("interstring must be terminated by ';'");
    if (body.find_first_not_of(" \t\r\n", semi + 1) != std::string::npos)
        throw Error("trailing text after ';'");
    body.erase(semi);
    Interstring s;
    std::size_t pos = 0;
    while (true) {
        auto next = body.find("::", pos);
        std::string col = body.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
        auto entries = detail::split_entries(col);
        if (entries.empty()) throw Error("empty column " + std::to_string(s.columns.size()));
        const bool beta = entries.front().find("->") != std::string::npos;
        if (beta) {
            BetaColumn b;
            for (const auto& e : entries) {
                auto arrow = e.find("->");
                if (arrow == std::string::npos) throw Error("mixed column entry '" + e + "'");
                b.copies.push_back({detail::parse_index(e.substr(0, arrow), e), detail::parse_index(e.substr(arrow + 2), e)});
            }
            s.columns.emplace_back(std::move(b));
        } else {
            AlphaColumn a;
            for (const auto& e : entries) {
                auto open = e.rfind('(');
                if (open == std::string::npos || open == 0 || e.back() != ')')
                    throw Error("bad activation '" + e + "'");
                a.activations.push_back({e.substr(0, open), detail::parse_index(e.substr(open + 1, e.size() - open - 2), e)});
            }
            s.columns.emplace_back(std::move(a));
        }
        if (next == std::string::npos) break;
        pos = next + 2;
    }
    return s;
}

inline std::string format_interstring(const Interstring& s) {
    std::ostringstream os;
    for (std::size_t c = 0; c < s.columns.size(); ++c) {
        if (c) os << " :: ";
        if (const auto* a = std::get_if<AlphaColumn>(&s.columns[c])) {
            for (std::size_t i = 0; i < a->activations.size(); ++i)
                os << (i ? " " : "") << a->activations[i].function << '(' << a->activations[i].unit << ')';
        } else {
            const auto& b = std::get<BetaColumn>(s.columns[c]);
            for (std::size_t i = 0; i < b.copies.size(); ++i)
                os << (i ? " " : "") << b.copies[i].source << "->" << b.copies[i].destination;
        }
    }
    os << " ;";
    return os.str();
}

template <class T>
AbstractMemory<T> parse_memory(std::string_view text) {
    auto entries = detail::split_entries(text);
    if (entries.size() < 4 || entries.size() % 3 != 1)
        throw Error("memory must have 3F+1 cells, got " + std::to_string(entries.size()));
    AbstractMemory<T> m((entries.size() - 1) / 3);
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        if (e == "_") continue;
        const bool numeric = (std::isdigit(static_cast<unsigned char>(e[0])) || (e[0] == '-' && e.size() > 1));
        if (numeric) m.cells[i] = Const{std::stoll(e)};
        else m.cells[i] = Var{e};
    }
    return m;
}

template <class T>
std::string format_cell(const Cell<T>& c) {
    return std::visit(
        [](const auto& v) -> std::string {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, Empty>) return "_";
            else if constexpr (std::is_same_v<V, Var>) return v.name;
            else if constexpr (std::is_same_v<V, Const>) return std::to_string(v.value);
            else {
                std::ostringstream os;
                os << v.value;
                return os.str();
            }
        },
        c);
}

template <class T>
std::string format_memory(const AbstractMemory<T>& m) {
    std::string out;
    for (std::size_t i = 0; i < m.cells.size(); ++i) {
        if (i) out += ' ';
        out += format_cell(m.cells[i]);
    }
    return out;
}

/// An interstring program file: a `memory:` line followed by the interstring.
template <class T>
struct InterstringProgram {
    AbstractMemory<T> memory;
    Interstring string;
};

template <class T>
InterstringProgram<T> parse_program(std::string_view text) {
    std::string body = detail::strip_comments(text);
    auto m = body.find("memory:");
    if (m == std::string::npos) throw Error("missing 'memory:' line");
    auto eol = body.find('\n', m);
    InterstringProgram<T> p;
    p.memory = parse_memory<T>(body.substr(m + 7, eol - m - 7));
    body.erase(m, eol == std::string::npos ? std::string::npos : eol - m);
    p.string = parse_interstring(body);
    return p;
}

} // namespace spatiale::interlang
