#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spatiale/aram/instruction.hpp"

namespace spatiale::aram {

enum class ErrorKind { DuplicateMark, WriteConflict, AddressOutOfRange, OffsetOutOfRange, MarkOutOfRange };

inline std::string_view to_string(ErrorKind k) noexcept {
    switch (k) {
    case ErrorKind::DuplicateMark: return "DuplicateMark";
    case ErrorKind::WriteConflict: return "WriteConflict";
    case ErrorKind::AddressOutOfRange: return "AddressOutOfRange";
    case ErrorKind::OffsetOutOfRange: return "OffsetOutOfRange";
    case ErrorKind::MarkOutOfRange: return "MarkOutOfRange";
    }
    return "?";
}

struct MachineError {
    ErrorKind kind{};
    std::uint64_t cycle = 0;
    /// Offending register indices; for bit errors the pairs are flattened (x, y).
    std::vector<std::uint64_t> locations;

    std::string describe() const {
        std::string s(to_string(kind));
        s += " at cycle " + std::to_string(cycle) + " [";
        for (std::size_t i = 0; i < locations.size(); ++i) {
            if (i) s += ' ';
            s += std::to_string(locations[i]);
        }
        return s + "]";
    }

    friend bool operator==(const MachineError&, const MachineError&) = default;
};

/// Thrown only when a marking is built from a caller-supplied list; during
/// execution duplicates become a machine error instead.
class MarkingError : public Error {
public:
    explicit MarkingError(Address a)
        : Error("duplicate register " + std::to_string(a) + " in marking"), address(a) {}
    Address address;
};

/// Set of active register indices, kept sorted.
class Marking {
public:
    Marking() = default;

    static Marking from(std::vector<Address> regs) {
        std::sort(regs.begin(), regs.end());
        auto dup = std::adjacent_find(regs.begin(), regs.end());
        if (dup != regs.end()) throw MarkingError(*dup);
        Marking m;
        m.active_ = std::move(regs);
        return m;
    }

    const std::vector<Address>& active() const noexcept { return active_; }
    bool empty() const noexcept { return active_.empty(); }
    std::size_t size() const noexcept { return active_.size(); }
    bool contains(Address a) const { return std::binary_search(active_.begin(), active_.end(), a); }

    friend bool operator==(const Marking&, const Marking&) = default;

private:
    friend struct Stepper;
    std::vector<Address> active_;
};

enum class Status { Running, Halted, Error };

struct MachineState {
    std::vector<Word> memory;
    Marking marking;
    std::uint64_t cycle = 0;
    Status status = Status::Running;
    std::optional<MachineError> error;

    bool bit(Address x, unsigned y) const { return (memory.at(x) >> y) & 1u; }
    void set_bit(Address x, unsigned y, bool v) {
        if (v) memory.at(x) |= (Word{1} << y);
        else memory.at(x) &= ~(Word{1} << y);
    }

    friend bool operator==(const MachineState&, const MachineState&) = default;
};

struct BitWrite {
    Address x = 0;
    unsigned y = 0;
    bool value = false;
    friend bool operator==(const BitWrite&, const BitWrite&) = default;
};

struct StepReport {
    std::vector<std::pair<Address, Instruction>> fired;
    std::vector<BitWrite> writes;
    std::vector<Address> next_marked;

    friend bool operator==(const StepReport&, const StepReport&) = default;
};

/// Reusable per-run scratch for conflict detection. Sized to the memory.
struct Stepper {
    explicit Stepper(std::size_t memory_size)
        : mark_stamp(memory_size, 0), write_stamp(memory_size, 0), write_mask(memory_size, 0) {}

    /// Advances `s` by one cycle in place. Returns false if nothing happened
    /// because the machine was not running.
    bool step(MachineState& s, const MachineConfig& cfg, StepReport* report = nullptr) {
        if (s.status != Status::Running) return false;
        const std::uint64_t cycle = s.cycle + 1;
        const std::uint64_t stamp = ++epoch_;
        const std::uint64_t size = s.memory.size();

        auto fail = [&](ErrorKind k, std::vector<std::uint64_t> where) {
            s.status = Status::Error;
            s.error = MachineError{k, cycle, std::move(where)};
            s.cycle = cycle;
            return true;
        };

        // Decode phase: every marked word is read from the pre-cycle memory.
        decoded_.clear();
        for (Address a : s.marking.active_) decoded_.emplace_back(a, decode_instruction(s.memory[a], cfg));

        writes_.clear();
        next_.clear();
        for (const auto& [at, ins] : decoded_) {
            switch (ins.opcode) {
            case Opcode::Wrt0:
            case Opcode::Wrt1: {
                if (ins.x >= size) return fail(ErrorKind::AddressOutOfRange, {at, ins.x});
                if (ins.y >= cfg.word_width) return fail(ErrorKind::OffsetOutOfRange, {at, ins.y});
                const Word bit = Word{1} << ins.y;
                if (write_stamp[ins.x] != stamp) {
                    write_stamp[ins.x] = stamp;
                    write_mask[ins.x] = 0;
                }
                if (write_mask[ins.x] & bit) return fail(ErrorKind::WriteConflict, {ins.x, ins.y});
                write_mask[ins.x] |= bit;
                writes_.push_back({ins.x, ins.y, ins.opcode == Opcode::Wrt1});
                break;
            }
            case Opcode::Cond: {
                if (ins.x >= size) return fail(ErrorKind::AddressOutOfRange, {at, ins.x});
                if (ins.y >= cfg.word_width) return fail(ErrorKind::OffsetOutOfRange, {at, ins.y});
                const bool v = (s.memory[ins.x] >> ins.y) & 1u;
                const std::uint64_t target = std::uint64_t{at} + (v ? 2 : 1);
                if (target >= size) return fail(ErrorKind::MarkOutOfRange, {at, target});
                if (!mark(static_cast<Address>(target), stamp)) return fail(ErrorKind::DuplicateMark, {target});
                break;
            }
            case Opcode::Jump: {
                const std::uint64_t last = std::uint64_t{ins.x} + ins.y;
                if (last >= size) return fail(ErrorKind::MarkOutOfRange, {at, last});
                for (std::uint64_t t = ins.x; t <= last; ++t)
                    if (!mark(static_cast<Address>(t), stamp)) return fail(ErrorKind::DuplicateMark, {t});
                break;
            }
            }
        }

        // Commit phase.
        for (const auto& w : writes_) s.set_bit(w.x, w.y, w.value);
        std::sort(next_.begin(), next_.end());
        if (report) {
            report->fired = decoded_;
            report->writes = writes_;
            report->next_marked = next_;
        }
        s.marking.active_.swap(next_);
        s.cycle = cycle;
        if (s.marking.empty()) s.status = Status::Halted;
        return true;
    }

private:
    bool mark(Address a, std::uint64_t stamp) {
        if (mark_stamp[a] == stamp) return false;
        mark_stamp[a] = stamp;
        next_.push_back(a);
        return true;
    }

    std::vector<std::uint64_t> mark_stamp;
    std::vector<std::uint64_t> write_stamp;
    std::vector<Word> write_mask;
    std::uint64_t epoch_ = 0;
    std::vector<std::pair<Address, Instruction>> decoded_;
    std::vector<BitWrite> writes_;
    std::vector<Address> next_;
};

/// One machine cycle as a pure function. Terminal states are returned unchanged.
inline std::pair<MachineState, StepReport> step(const MachineState& state, const MachineConfig& cfg) {
    MachineState next = state;
    StepReport report;
    Stepper(state.memory.size()).step(next, cfg, &report);
    return {std::move(next), std::move(report)};
}

enum class Terminator { Halted, Error, CycleLimit };

inline std::string_view to_string(Terminator t) noexcept {
    switch (t) {
    case Terminator::Halted: return "Halted";
    case Terminator::Error: return "Error";
    case Terminator::CycleLimit: return "Running-at-limit";
    }
    return "?";
}

/// A bit that must not be set while it is already set (re-activation check).
struct Watch {
    Address x = 0;
    unsigned y = 0;
    std::string name;
};

struct WatchHit {
    std::uint64_t cycle = 0;
    std::string name;
};

struct RunOptions {
    std::uint64_t max_cycles = 1'000'000;
    bool keep_trace = false;
    std::vector<Watch> watches;
};

struct RunResult {
    MachineState state;
    std::uint64_t cycles = 0;
    Terminator terminator = Terminator::CycleLimit;
    std::vector<StepReport> trace;
    std::vector<WatchHit> watch_hits;
};

inline RunResult run(MachineState state, const MachineConfig& cfg, const RunOptions& opt = {}) {
    if (opt.max_cycles == 0) throw Error("max_cycles must be positive");
    RunResult r;
    Stepper stepper(state.memory.size());
    StepReport rep;
    const bool need_report = opt.keep_trace || !opt.watches.empty();
    const std::uint64_t start = state.cycle;
    while (state.status == Status::Running && state.cycle - start < opt.max_cycles) {
        std::vector<bool> before;
        if (!opt.watches.empty()) {
            before.reserve(opt.watches.size());
            for (const auto& w : opt.watches) before.push_back(state.bit(w.x, w.y));
        }
        stepper.step(state, cfg, need_report ? &rep : nullptr);
        if (state.status == Status::Error) break;
        if (!opt.watches.empty()) {
            for (std::size_t i = 0; i < opt.watches.size(); ++i) {
                if (!before[i]) continue;
                const auto& w = opt.watches[i];
                for (const auto& wr : rep.writes)
                    if (wr.value && wr.x == w.x && wr.y == w.y) r.watch_hits.push_back({state.cycle, w.name});
            }
        }
        if (opt.keep_trace) r.trace.push_back(rep);
    }
    r.cycles = state.cycle - start;
    switch (state.status) {
    case Status::Halted: r.terminator = Terminator::Halted; break;
    case Status::Error: r.terminator = Terminator::Error; break;
    case Status::Running: r.terminator = Terminator::CycleLimit; break;
    }
    r.state = std::move(state);
    return r;
}

} // namespace spatiale::aram
