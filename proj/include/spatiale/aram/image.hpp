#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "spatiale/aram/machine.hpp"

namespace spatiale::aram {

/// Sparse memory contents: address -> word. Unlisted registers load as zero.
struct Image {
    std::map<Address, Word> words;

    void put(Address a, Word w) { words[a] = w; }
    bool empty() const noexcept { return words.empty(); }
    friend bool operator==(const Image&, const Image&) = default;
};

inline std::string hex8(Word w) {
    std::ostringstream os;
    os << std::hex << std::uppercase << std::setw(8) << std::setfill('0') << w;
    return os.str();
}

/// Line-oriented text form: `@<hex>` moves the load cursor, `<8 hex digits>` stores one
/// word and advances it, `#` starts a comment.
inline Image parse_image(std::string_view text) {
    Image img;
    std::uint64_t cursor = 0;
    std::size_t lineno = 0;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        std::istringstream ls(line);
        std::string tok;
        while (ls >> tok) {
            auto bad = [&](const char* why) {
                return LoadError("image line " + std::to_string(lineno) + ": " + why + " '" + tok + "'");
            };
            if (tok[0] == '@') {
                if (tok.size() < 2 || !std::all_of(tok.begin() + 1, tok.end(), [](unsigned char c) { return std::isxdigit(c); }))
                    throw bad("bad address");
                cursor = std::stoull(tok.substr(1), nullptr, 16);
                continue;
            }
            if (tok.size() != 8 || !std::all_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isxdigit(c); }))
                throw bad("expected 8 hex digits");
            if (cursor > 0xFFFFFFFFull) throw bad("address overflow");
            img.words[static_cast<Address>(cursor)] = static_cast<Word>(std::stoul(tok, nullptr, 16));
            ++cursor;
        }
    }
    return img;
}

inline std::string format_image(const Image& img) {
    std::ostringstream os;
    std::uint64_t cursor = ~std::uint64_t{0};
    for (const auto& [a, w] : img.words) {
        if (a != cursor) os << '@' << std::hex << std::uppercase << a << std::dec << '\n';
        os << hex8(w) << '\n';
        cursor = std::uint64_t{a} + 1;
    }
    return os.str();
}

/// Fresh running state: memory from the image, marking from the config.
inline MachineState load_image(const Image& img, const MachineConfig& cfg) {
    cfg.validate();
    MachineState s;
    s.memory.assign(cfg.memory_size, 0);
    for (const auto& [a, w] : img.words) {
        if (a >= cfg.memory_size)
            throw LoadError("image word at " + std::to_string(a) + " exceeds memory size " +
                            std::to_string(cfg.memory_size));
        s.memory[a] = w;
    }
    s.marking = Marking::from(cfg.initial_marking);
    if (s.marking.empty()) s.status = Status::Halted;
    return s;
}

/// `C<cycle> F[<addr>:<mnemonic> ...] W[(x,y)=v ...] M[<addr> ...]`
inline std::string format_trace_line(std::uint64_t cycle, const StepReport& r) {
    std::ostringstream os;
    os << 'C' << cycle << " F[";
    for (std::size_t i = 0; i < r.fired.size(); ++i)
        os << (i ? " " : "") << r.fired[i].first << ':' << mnemonic(r.fired[i].second.opcode);
    os << "] W[";
    for (std::size_t i = 0; i < r.writes.size(); ++i)
        os << (i ? " " : "") << '(' << r.writes[i].x << ',' << r.writes[i].y << ")=" << (r.writes[i].value ? 1 : 0);
    os << "] M[";
    for (std::size_t i = 0; i < r.next_marked.size(); ++i) os << (i ? " " : "") << r.next_marked[i];
    os << ']';
    return os.str();
}

/// Disassembly that is itself a loadable image: words carry their decoding in a comment.
/// `symbols` maps register indices to names for operand annotation.
inline std::string disassemble(const Image& img, const MachineConfig& cfg, Address from, Address to,
                               const std::map<Address, std::string>& symbols = {}) {
    std::ostringstream os;
    auto sym = [&](Address a) -> std::string {
        auto it = symbols.find(a);
        return it == symbols.end() ? std::string{} : " <" + it->second + ">";
    };
    os << '@' << std::hex << std::uppercase << from << std::dec << '\n';
    for (std::uint64_t a = from; a < to; ++a) {
        auto it = img.words.find(static_cast<Address>(a));
        const Word w = it == img.words.end() ? 0 : it->second;
        const Instruction ins = decode_instruction(w, cfg);
        os << hex8(w) << "  # " << a << ": " << mnemonic(ins.opcode) << ' ' << ins.x << ' ' << ins.y
           << sym(ins.x) << '\n';
    }
    return os.str();
}

} // namespace spatiale::aram
