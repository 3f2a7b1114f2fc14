#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "spatiale/aram/instruction.hpp"
#include "spatiale/error.hpp"
#include "spatiale/module_image.hpp"
#include "spatiale/support/intexpr.hpp"

namespace spatiale::earth {

using support::IntExpr;

enum class StorageKind { Bits, Bytes, Words };

inline StorageType storage_type(StorageKind k) noexcept {
    switch (k) {
    case StorageKind::Bits: return StorageType::Bit;
    case StorageKind::Bytes: return StorageType::Byte;
    case StorageKind::Words: return StorageType::Reg;
    }
    return StorageType::Bit;
}

struct StorageDecl {
    StorageKind kind = StorageKind::Bits;
    std::string label;
    Category category = Category::Private;
    SourceLocation loc;
};

/// Operand of wrt0/wrt1/cond: a storage label, a code label (self-modifying access)
/// or an absolute register, each with an optional bit index.
struct BitOperand {
    enum class Kind { Storage, CodeLabel, Absolute };
    Kind kind = Kind::Storage;
    std::string storage;
    IntExpr code_label;
    std::uint64_t absolute = 0;
    std::optional<IntExpr> bit;
};

struct JumpTarget {
    enum class Kind { Label, Absolute };
    Kind kind = Kind::Label;
    IntExpr label;
    std::uint64_t absolute = 0;
};

struct Instr {
    aram::Opcode opcode = aram::Opcode::Wrt0;
    BitOperand operand;   // wrt0 / wrt1 / cond
    JumpTarget target;    // jump
    IntExpr span;         // jump
    std::optional<IntExpr> label;
    SourceLocation loc;
};

struct Replicator;
using CodeItem = std::variant<Instr, Replicator>;

struct Replicator {
    IntExpr lo, hi;
    std::string var;
    std::vector<CodeItem> body;
    SourceLocation loc;
};

struct EarthAST {
    std::string name;
    std::vector<StorageDecl> storage;
    std::optional<std::pair<std::uint64_t, std::uint64_t>> time;
    std::optional<IntExpr> exec_label;
    std::vector<CodeItem> code;

    const StorageDecl* find_storage(const std::string& label) const {
        for (const auto& s : storage)
            if (s.label == label) return &s;
        return nullptr;
    }

    bool is_flat() const {
        for (const auto& c : code)
            if (std::holds_alternative<Replicator>(c)) return false;
        return true;
    }
};

} // namespace spatiale::earth
