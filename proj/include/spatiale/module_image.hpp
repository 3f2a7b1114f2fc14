#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "spatiale/aram/image.hpp"

namespace spatiale {

using aram::Address;
using aram::Word;

enum class Category { Input, Output, Ioput, Private };

inline std::string_view to_string(Category c) noexcept {
    switch (c) {
    case Category::Input: return "input";
    case Category::Output: return "output";
    case Category::Ioput: return "ioput";
    case Category::Private: return "private";
    }
    return "?";
}

inline std::optional<Category> category_from(std::string_view s) noexcept {
    if (s == "input") return Category::Input;
    if (s == "output") return Category::Output;
    if (s == "ioput") return Category::Ioput;
    if (s == "private") return Category::Private;
    return std::nullopt;
}

/// Storage types shared by Earth and Space. Copies are only legal between equal types.
enum class StorageType { Bit, Byte, Reg };

inline unsigned width_of(StorageType t) noexcept {
    switch (t) {
    case StorageType::Bit: return 1;
    case StorageType::Byte: return 8;
    case StorageType::Reg: return 32;
    }
    return 0;
}

inline std::string_view to_string(StorageType t) noexcept {
    switch (t) {
    case StorageType::Bit: return "BIT";
    case StorageType::Byte: return "BYTE";
    case StorageType::Reg: return "REG";
    }
    return "?";
}

struct BitLocation {
    Address reg = 0;
    unsigned bit = 0;
    friend bool operator==(const BitLocation&, const BitLocation&) = default;
};

/// A named storage entity. Arrays occupy `count` consecutive registers, each element
/// starting at the same bit offset.
struct Port {
    std::string name;
    Category category = Category::Private;
    StorageType type = StorageType::Bit;
    Address reg = 0;
    unsigned bit = 0;
    unsigned count = 1;

    unsigned width() const noexcept { return width_of(type); }
    bool is_public() const noexcept { return category != Category::Private; }
    BitLocation at(unsigned element, unsigned b) const { return {reg + element, bit + b}; }
    friend bool operator==(const Port&, const Port&) = default;
};

/// An assembled or compiled module placed at `base`: its whole region
/// (code, storage and any sub-instances) plus the interface a caller needs.
struct ModuleImage {
    std::string name;
    Address base = 0;
    std::vector<Word> words;
    Address code_size = 0;
    std::vector<Port> ports;
    std::array<Address, 2> entry{0, 1};
    std::optional<BitLocation> busy;
    std::optional<Address> exec;
    std::optional<std::pair<std::uint64_t, std::uint64_t>> time;

    Address size() const noexcept { return static_cast<Address>(words.size()); }
    Address end() const noexcept { return base + size(); }

    const Port* port(std::string_view n) const {
        for (const auto& p : ports)
            if (p.name == n) return &p;
        return nullptr;
    }

    aram::Image to_image() const {
        aram::Image img;
        for (std::size_t i = 0; i < words.size(); ++i)
            if (words[i]) img.put(base + static_cast<Address>(i), words[i]);
        return img;
    }

    aram::MachineConfig machine_config(aram::MachineConfig cfg) const {
        cfg.initial_marking = {entry[0], entry[1]};
        return cfg;
    }
};

// ---------------------------------------------------------------------------
// Port value access on a machine state.

inline std::uint64_t read_port(const aram::MachineState& s, const Port& p, unsigned element = 0) {
    std::uint64_t v = 0;
    for (unsigned b = 0; b < p.width(); ++b) {
        auto loc = p.at(element, b);
        if (s.bit(loc.reg, loc.bit)) v |= std::uint64_t{1} << b;
    }
    return v;
}

inline void write_port(aram::MachineState& s, const Port& p, std::uint64_t value, unsigned element = 0) {
    if (element >= p.count) throw Error("element " + std::to_string(element) + " outside port " + p.name);
    for (unsigned b = 0; b < p.width(); ++b) {
        auto loc = p.at(element, b);
        s.set_bit(loc.reg, loc.bit, (value >> b) & 1u);
    }
}

// ---------------------------------------------------------------------------
// Interface descriptor: one `port <label> <category> <register> <bit> <width>` line per
// element, plus `module`, `entry`, `busy`, `exec`, `code` and `time` records.

struct InterfaceDescriptor {
    std::string module;
    std::array<Address, 2> entry{1, 2};
    std::optional<BitLocation> busy;
    std::optional<Address> exec;
    Address code_begin = 0, code_end = 0;
    std::optional<std::pair<std::uint64_t, std::uint64_t>> time;

    struct Entry {
        std::string label;
        Category category = Category::Private;
        Address reg = 0;
        unsigned bit = 0;
        unsigned width = 1;
    };
    std::vector<Entry> ports;

    const Entry* find(std::string_view label) const {
        for (const auto& e : ports)
            if (e.label == label) return &e;
        return nullptr;
    }
};

inline InterfaceDescriptor describe(const ModuleImage& m, bool include_private = false) {
    InterfaceDescriptor d;
    d.module = m.name;
    d.entry = m.entry;
    d.busy = m.busy;
    d.exec = m.exec;
    d.code_begin = m.base;
    d.code_end = m.base + m.code_size;
    d.time = m.time;
    for (const auto& p : m.ports) {
        if (!p.is_public() && !include_private) continue;
        for (unsigned e = 0; e < p.count; ++e) {
            std::string label = p.count > 1 ? p.name + "[" + std::to_string(e) + "]" : p.name;
            d.ports.push_back({label, p.category, p.reg + e, p.bit, p.width()});
        }
    }
    return d;
}

inline std::string format_descriptor(const InterfaceDescriptor& d) {
    std::ostringstream os;
    os << "module " << d.module << '\n';
    os << "entry " << d.entry[0] << ' ' << d.entry[1] << '\n';
    os << "code " << d.code_begin << ' ' << d.code_end << '\n';
    if (d.busy) os << "busy " << d.busy->reg << ' ' << d.busy->bit << '\n';
    if (d.exec) os << "exec " << *d.exec << '\n';
    if (d.time) os << "time " << d.time->first << ' ' << d.time->second << '\n';
    for (const auto& p : d.ports)
        os << "port " << p.label << ' ' << to_string(p.category) << ' ' << p.reg << ' ' << p.bit << ' ' << p.width << '\n';
    return os.str();
}

inline InterfaceDescriptor parse_descriptor(std::string_view text) {
    InterfaceDescriptor d;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key)) continue;
        auto bad = [&] { return LoadError("descriptor line " + std::to_string(n) + ": malformed '" + key + "' record"); };
        if (key == "module") {
            ls >> d.module;
        } else if (key == "entry") {
            if (!(ls >> d.entry[0] >> d.entry[1])) throw bad();
        } else if (key == "code") {
            if (!(ls >> d.code_begin >> d.code_end)) throw bad();
        } else if (key == "busy") {
            BitLocation b;
            if (!(ls >> b.reg >> b.bit)) throw bad();
            d.busy = b;
        } else if (key == "exec") {
            Address a;
            if (!(ls >> a)) throw bad();
            d.exec = a;
        } else if (key == "time") {
            std::uint64_t lo, hi;
            if (!(ls >> lo >> hi)) throw bad();
            d.time = {lo, hi};
        } else if (key == "port") {
            InterfaceDescriptor::Entry e;
            std::string cat;
            if (!(ls >> e.label >> cat >> e.reg >> e.bit >> e.width)) throw bad();
            auto c = category_from(cat);
            if (!c) throw bad();
            e.category = *c;
            d.ports.push_back(std::move(e));
        } else {
            throw LoadError("descriptor line " + std::to_string(n) + ": unknown record '" + key + "'");
        }
    }
    return d;
}

inline std::uint64_t read_entry(const aram::MachineState& s, const InterfaceDescriptor::Entry& e) {
    std::uint64_t v = 0;
    for (unsigned b = 0; b < e.width; ++b)
        if (s.bit(e.reg, e.bit + b)) v |= std::uint64_t{1} << b;
    return v;
}

inline void write_entry(aram::MachineState& s, const InterfaceDescriptor::Entry& e, std::uint64_t value) {
    for (unsigned b = 0; b < e.width; ++b) s.set_bit(e.reg, e.bit + b, (value >> b) & 1u);
}

} // namespace spatiale
