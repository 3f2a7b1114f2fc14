#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spatiale/error.hpp"
#include "spatiale/module_image.hpp"

namespace spatiale::space {

/// Dotted line address such as 3, 3.1 or 5.2.
struct LineAddress {
    std::vector<int> parts;

    bool top_level() const noexcept { return parts.size() == 1; }
    int head() const { return parts.at(0); }
    bool within(const LineAddress& outer) const {
        if (parts.size() <= outer.parts.size()) return false;
        return std::equal(outer.parts.begin(), outer.parts.end(), parts.begin());
    }
    std::string to_string() const {
        std::string s;
        for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? "." : "") + std::to_string(parts[i]);
        return s;
    }
    friend bool operator==(const LineAddress&, const LineAddress&) = default;
    friend auto operator<=>(const LineAddress&, const LineAddress&) = default;
};

/// A (line, offset) control target: lines line .. line+offset start together.
struct Egress {
    LineAddress line;
    unsigned offset = 0;
    friend bool operator==(const Egress&, const Egress&) = default;
};

/// Array index or immediate: a constant or the control variable, optionally
/// passed through an incremental function (inc, 2*, 2*+1).
struct Index {
    bool is_var = false;
    std::int64_t value = 0;
    std::string var;
    std::string fn;

    std::string to_string() const {
        if (!is_var) return std::to_string(value);
        return fn.empty() ? var : var + "/" + fn;
    }
};

inline std::int64_t apply_fn(const std::string& fn, std::int64_t v) {
    if (fn.empty()) return v;
    if (fn == "inc") return v + 1;
    if (fn == "2*") return 2 * v;
    if (fn == "2*+1") return 2 * v + 1;
    throw CompileError("unknown incremental function '" + fn + "'");
}

/// `label[idx]...[.port]`
struct Ref {
    std::string label;
    std::vector<Index> index;
    std::optional<std::string> port;
    SourceLocation loc;

    std::string to_string() const {
        std::string s = label;
        for (const auto& i : index) s += "[" + i.to_string() + "]";
        if (port) s += "." + *port;
        return s;
    }
};

struct CopyEntry {
    std::optional<Ref> source;
    std::optional<Index> immediate;
    Ref destination;
};

struct ActivationEntry {
    enum class Mode { Activate, Program, Execute };
    Mode mode = Mode::Activate;
    Ref instance;
    std::optional<LineAddress> line;
};

struct Control {
    enum class Kind { Cond, Jump, Halt, Subhalt };
    Kind kind = Kind::Halt;
    Ref bit;
    Egress first, second; // cond: bit 0 -> first, bit 1 -> second; jump: first
    LineAddress construct; // subhalt
    SourceLocation loc;
};

struct Column {
    std::vector<CopyEntry> copies;
    std::vector<ActivationEntry> activations;
    std::vector<Control> controls;
    std::size_t position = 0; // character offset of the column in its first row
    SourceLocation loc;

    bool is_copy() const noexcept { return !copies.empty() && activations.empty() && controls.empty(); }
    bool is_activation() const noexcept { return copies.empty() && !activations.empty() && controls.empty(); }
    bool is_control() const noexcept { return copies.empty() && activations.empty() && !controls.empty(); }
};

struct BaseLine {
    LineAddress address;
    std::vector<Column> columns;
    SourceLocation loc;

    const Control* control() const {
        if (columns.empty() || columns.back().controls.empty()) return nullptr;
        return &columns.back().controls.front();
    }
};

struct Construct {
    enum class Kind { Deep, Grow };
    Kind kind = Kind::Deep;
    LineAddress address;
    std::string var;
    std::int64_t lo = 0, hi = 0;
    std::string step = "inc";
    std::optional<Egress> egress;
    SourceLocation loc;
};

struct StorageDecl {
    StorageType type = StorageType::Reg;
    std::string label;
    std::vector<unsigned> dims;
    Category category = Category::Private;
    SourceLocation loc;

    unsigned count() const {
        unsigned n = 1;
        for (unsigned d : dims) n *= d;
        return n;
    }
};

struct SubmoduleDecl {
    std::string cls;
    std::optional<unsigned> parameter; // PJUMP{n}
    std::string label;
    std::vector<unsigned> dims;
    SourceLocation loc;

    unsigned count() const {
        unsigned n = 1;
        for (unsigned d : dims) n *= d;
        return n;
    }
};

struct Replications {
    std::string var;
    std::vector<std::string> functions;
    bool declares(const std::string& fn) const {
        return std::find(functions.begin(), functions.end(), fn) != functions.end();
    }
};

struct SpaceAST {
    std::string name;
    std::vector<StorageDecl> storage;
    std::vector<SubmoduleDecl> submodules;
    std::optional<Replications> replications;
    std::optional<std::pair<std::uint64_t, std::uint64_t>> time;
    std::vector<BaseLine> lines;
    std::vector<Construct> constructs;

    const StorageDecl* find_storage(const std::string& l) const {
        for (const auto& s : storage)
            if (s.label == l) return &s;
        return nullptr;
    }
    const SubmoduleDecl* find_submodule(const std::string& l) const {
        for (const auto& s : submodules)
            if (s.label == l) return &s;
        return nullptr;
    }
    const Construct* find_construct(int head) const {
        for (const auto& c : constructs)
            if (c.address.head() == head) return &c;
        return nullptr;
    }
    const BaseLine* find_line(const LineAddress& a) const {
        for (const auto& l : lines)
            if (l.address == a) return &l;
        return nullptr;
    }
    /// Top-level line numbers in ascending order.
    std::vector<int> units() const {
        std::vector<int> u;
        for (const auto& l : lines) u.push_back(l.address.head());
        for (const auto& c : constructs) u.push_back(c.address.head());
        std::sort(u.begin(), u.end());
        u.erase(std::unique(u.begin(), u.end()), u.end());
        return u;
    }
};

} // namespace spatiale::space
