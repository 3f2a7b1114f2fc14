#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spatiale/error.hpp"

namespace spatiale::aram {

using Word = std::uint32_t;
using Address = std::uint32_t;

enum class Opcode : std::uint8_t { Wrt0 = 0, Wrt1 = 1, Cond = 2, Jump = 3 };

inline std::string_view mnemonic(Opcode op) noexcept {
    switch (op) {
    case Opcode::Wrt0: return "wrt0";
    case Opcode::Wrt1: return "wrt1";
    case Opcode::Cond: return "cond";
    case Opcode::Jump: return "jump";
    }
    return "?";
}

inline std::optional<Opcode> opcode_from_mnemonic(std::string_view s) noexcept {
    if (s == "wrt0") return Opcode::Wrt0;
    if (s == "wrt1") return Opcode::Wrt1;
    if (s == "cond") return Opcode::Cond;
    if (s == "jump") return Opcode::Jump;
    return std::nullopt;
}

struct Instruction {
    Opcode opcode = Opcode::Wrt0;
    Address x = 0; // destination cell / first jump target
    std::uint32_t y = 0; // bit offset, or jump span

    friend bool operator==(const Instruction&, const Instruction&) = default;
};

/// Field layout and machine dimensions.
///
/// The offset field occupies the lowest bits, the destination field sits directly
/// above it and the opcode takes the top bits of the word. Anything in between is
/// reserved: ignored on decode and written as zero on encode.
struct MachineConfig {
    unsigned word_width = 32;
    unsigned addr_bits = 21;
    unsigned offset_bits = 5;
    unsigned opcode_bits = 2;
    std::uint32_t memory_size = 1u << 16;
    std::vector<Address> initial_marking{1, 2};

    unsigned addr_shift() const noexcept { return offset_bits; }
    unsigned opcode_shift() const noexcept { return word_width - opcode_bits; }
    std::uint64_t max_addr() const noexcept { return (std::uint64_t{1} << addr_bits) - 1; }
    std::uint32_t max_offset() const noexcept { return (1u << offset_bits) - 1; }
    /// Largest number of registers one jump can mark.
    std::uint32_t max_jump_targets() const noexcept { return max_offset() + 1; }

    void validate() const {
        if (word_width == 0 || word_width > 32)
            throw Error("word width must be in 1..32");
        if (opcode_bits != 2)
            throw Error("opcode field must be 2 bits wide");
        if (opcode_bits + addr_bits + offset_bits > word_width)
            throw Error("instruction fields do not fit in the word width");
        if (memory_size == 0 || memory_size - 1 > max_addr())
            throw Error("memory size exceeds the addressable range");
        for (Address a : initial_marking)
            if (a >= memory_size)
                throw Error("initial marking index " + std::to_string(a) + " outside memory");
    }
};

inline Word encode_instruction(Opcode op, std::uint64_t x, std::uint64_t y,
                               const MachineConfig& cfg = {}) {
    if (x > cfg.max_addr())
        throw EncodingError("x", "destination field overflow: " + std::to_string(x));
    if (y > cfg.max_offset())
        throw EncodingError("y", "offset field overflow: " + std::to_string(y));
    return (static_cast<Word>(op) << cfg.opcode_shift()) |
           (static_cast<Word>(x) << cfg.addr_shift()) | static_cast<Word>(y);
}

inline Word encode_instruction(const Instruction& i, const MachineConfig& cfg = {}) {
    return encode_instruction(i.opcode, i.x, i.y, cfg);
}

inline Instruction decode_instruction(Word w, const MachineConfig& cfg = {}) noexcept {
    Instruction i;
    i.opcode = static_cast<Opcode>((w >> cfg.opcode_shift()) & 0x3u);
    i.x = static_cast<Address>((w >> cfg.addr_shift()) & cfg.max_addr());
    i.y = w & cfg.max_offset();
    return i;
}

} // namespace spatiale::aram
