// One line per acceptance criterion. Exit status 0 iff every line passes.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "spatiale/earth/assembler.hpp"
#include "spatiale/interlang/translate.hpp"
#include "spatiale/space/compiler.hpp"

using namespace spatiale;
using aram::Address;

namespace {

std::string read(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string stdlib(const std::string& n) { return read(std::string(SPATIALE_STDLIB_DIR) + "/" + n + ".earth"); }
std::string sample(const std::string& n) { return read(std::string(SPATIALE_PROGRAMS_DIR) + "/" + n); }

struct Verdict {
    bool pass = false;
    std::string detail;
};

// Corpus runs feed the final safety line.
struct Safety {
    std::map<std::string, std::size_t> runs;
    std::vector<std::string> failures;
    void record(const std::string& program, const aram::RunResult& r) {
        ++runs[program];
        if (r.terminator != aram::Terminator::Halted || !r.watch_hits.empty()) {
            std::string why = r.state.error ? std::string(aram::to_string(r.state.error->kind))
                                            : r.watch_hits.empty() ? std::string(aram::to_string(r.terminator))
                                                                   : "re-activation of " + r.watch_hits.front().name;
            failures.push_back(program + ": " + why);
        }
    }
} safety;

aram::RunResult run_module(const ModuleImage& m, aram::MachineState s, std::uint64_t limit = 1'000'000,
                           std::vector<aram::Watch> watches = {}) {
    aram::MachineConfig cfg = m.machine_config({});
    cfg.memory_size = static_cast<std::uint32_t>(s.memory.size());
    aram::RunOptions ro;
    ro.max_cycles = limit;
    ro.watches = std::move(watches);
    return aram::run(std::move(s), cfg, ro);
}

aram::MachineState fresh(const ModuleImage& m, std::uint32_t memory = 1u << 16) {
    aram::MachineConfig cfg;
    cfg.memory_size = std::max<std::uint32_t>(memory, m.end());
    return aram::load_image(m.to_image(), m.machine_config(cfg));
}

// -- Earth and A-Ram ---------------------------------------------------------------

Verdict seqand4_timing() {
    auto m = earth::assemble(stdlib("seqand4"));
    std::set<std::uint64_t> low;
    for (std::uint64_t v = 0; v < 16; v += 2) {
        auto s = fresh(m);
        write_port(s, *m.port("input"), v);
        auto r = run_module(m, s);
        if (r.terminator != aram::Terminator::Halted) return {false, "input " + std::to_string(v) + " did not halt"};
        low.insert(r.cycles);
    }
    auto s = fresh(m);
    write_port(s, *m.port("input"), 0xF);
    auto all = run_module(m, s);
    bool ok = low == std::set<std::uint64_t>{4} && all.cycles == 7 && all.terminator == aram::Terminator::Halted;
    return {ok, "bit0=0: " + std::to_string(*low.begin()) + (low.size() == 1 ? "" : "+") + " cycles over 8 inputs, input=f: " +
                    std::to_string(all.cycles) + " cycles"};
}

std::vector<std::string> tokens(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> out;
    for (std::string t; in >> t;) out.push_back(t);
    return out;
}

Verdict seqand4_expansion() {
    const std::string expected = R"(
    wrt1 busy
    cond input.0
    jump 1 1
    cond input.1
    jump 1 1
    cond input.2
    jump 1 1
    cond input.3
    jump 1 1
    jump 3 1
1   wrt0 output
    jump 2 0
2   wrt0 busy
3   wrt1 output
    jump 2 0
    endc
)";
    auto listing = earth::format_listing(earth::expand_replicators(earth::parse_earth(stdlib("seqand4"))));
    auto got = tokens(listing), want = tokens(expected);
    if (got != want) return {false, "listing differs:\n" + listing};
    // labels 1, 2, 3 sit at words 11, 13, 14 of the module assembled at 1
    auto m = earth::assemble(stdlib("seqand4"));
    std::map<Address, Address> jumps; // word -> target
    for (Address a = 0; a < m.code_size; ++a) {
        auto ins = aram::decode_instruction(m.words[a]);
        if (ins.opcode == aram::Opcode::Jump) jumps[a + 1] = ins.x;
    }
    bool labels = m.code_size == 15 && jumps[3] == 11 && jumps[9] == 11 && jumps[10] == 14 && jumps[12] == 13 && jumps[15] == 13;
    return {labels, std::to_string(want.size()) + " tokens equal, 15 instructions, labels 1,2,3 -> 11,13,14"};
}

Verdict seqand4_truth_table() {
    auto m = earth::assemble(stdlib("seqand4"));
    int right = 0;
    for (std::uint64_t v = 0; v < 16; ++v) {
        auto s = fresh(m);
        write_port(s, *m.port("input"), v);
        auto r = run_module(m, s);
        bool want = v == 0xF;
        if (r.terminator == aram::Terminator::Halted && read_port(r.state, *m.port("output")) == want) ++right;
    }
    return {right == 16, std::to_string(right) + "/16 inputs"};
}

struct Fault {
    aram::ErrorKind kind;
    std::uint64_t cycle;
};

std::optional<Fault> run_image(const std::vector<std::pair<Address, aram::Instruction>>& words) {
    aram::Image img;
    for (const auto& [a, i] : words) img.put(a, aram::encode_instruction(i));
    aram::MachineConfig cfg;
    cfg.memory_size = 64;
    aram::RunOptions ro;
    ro.max_cycles = 100;
    auto r = aram::run(aram::load_image(img, cfg), cfg, ro);
    if (!r.state.error) return std::nullopt;
    return Fault{r.state.error->kind, r.state.error->cycle};
}

Verdict error_taxonomy() {
    using aram::Opcode;
    // cycle 1: jumps fan out; cycle 2: two wrt1 hit register 30 bit 0
    auto wc = run_image({{1, {Opcode::Jump, 10, 1}}, {2, {Opcode::Jump, 20, 0}}, {10, {Opcode::Wrt1, 30, 0}},
                         {11, {Opcode::Wrt1, 30, 0}}, {20, {Opcode::Wrt0, 31, 0}}});
    // cycle 1: words 10 and 11 marked; cycle 2: both jumps mark 21
    auto dm = run_image({{1, {Opcode::Jump, 10, 0}}, {2, {Opcode::Jump, 11, 0}}, {10, {Opcode::Jump, 20, 1}},
                         {11, {Opcode::Jump, 21, 0}}});
    bool ok = wc && wc->kind == aram::ErrorKind::WriteConflict && wc->cycle == 2 && dm &&
              dm->kind == aram::ErrorKind::DuplicateMark && dm->cycle == 2;
    auto show = [](const std::optional<Fault>& f) {
        return f ? std::string(aram::to_string(f->kind)) + "@" + std::to_string(f->cycle) : std::string("none");
    };
    return {ok, "expected WriteConflict@2 DuplicateMark@2, got " + show(wc) + " " + show(dm)};
}

// -- Interlanguage ---------------------------------------------------------------------

Verdict shared_subterm_interstring() {
    auto prog = interlang::parse_program<std::int64_t>(sample("shared.istr"));
    std::mt19937 rng(97);
    std::uniform_int_distribution<std::int64_t> d(-100, 100);
    int right = 0;
    for (int i = 0; i < 1000; ++i) {
        std::int64_t x = d(rng), y = d(rng), z = d(rng);
        std::int64_t want = ((x + y) + y * z) * ((x + y) - y * z);
        if (interlang::result_of(prog.string, prog.memory, interlang::integer_semantics({{"x", x}, {"y", y}, {"z", z}})) == want)
            ++right;
    }
    return {right == 1000, std::to_string(right) + "/1000 triples"};
}

using interlang::Expr;
using interlang::ExprPtr;

ExprPtr random_tree(std::mt19937& rng, int depth) {
    std::uniform_int_distribution<int> coin(0, 9);
    if (depth == 0 || coin(rng) < 2) {
        if (coin(rng) < 8) return Expr::var(std::string(1, static_cast<char>('a' + coin(rng) % 4)));
        return Expr::constant(coin(rng) - 4);
    }
    static const char* ops[] = {"+", "-", "*"};
    return Expr::apply(ops[coin(rng) % 3], random_tree(rng, depth - 1), random_tree(rng, depth - 1));
}

std::int64_t tree_value(const Expr& e, const std::map<std::string, std::int64_t>& env) {
    if (e.kind == Expr::Kind::Variable) return env.at(e.name);
    if (e.kind == Expr::Kind::Constant) return e.value;
    auto a = static_cast<std::uint64_t>(tree_value(*e.left, env)), b = static_cast<std::uint64_t>(tree_value(*e.right, env));
    if (e.name == "+") return static_cast<std::int64_t>(a + b);
    if (e.name == "-") return static_cast<std::int64_t>(a - b);
    return static_cast<std::int64_t>(a * b);
}

void subtrees(const Expr& e, std::set<std::string>& seen) {
    if (e.is_leaf()) return;
    seen.insert(interlang::to_string(e));
    subtrees(*e.left, seen);
    subtrees(*e.right, seen);
}

Verdict translator() {
    std::mt19937 rng(4099);
    std::uniform_int_distribution<std::int64_t> val(-1000, 1000);
    int values = 0, counts = 0;
    for (int n = 0; n < 500; ++n) {
        auto tree = random_tree(rng, 1 + n % 8);
        auto t = interlang::translate(*tree, 1024);
        std::set<std::string> distinct;
        subtrees(*tree, distinct);
        if (t.string.alpha_activations() == distinct.size()) ++counts;
        bool all = true;
        for (int k = 0; k < 10; ++k) {
            std::map<std::string, std::int64_t> env{{"a", val(rng)}, {"b", val(rng)}, {"c", val(rng)}, {"d", val(rng)}};
            all &= interlang::result_of(t.string, t.memory, interlang::integer_semantics(env)) == tree_value(*tree, env);
        }
        values += all;
    }
    return {values == 500 && counts == 500,
            std::to_string(values) + "/500 trees evaluate equal, " + std::to_string(counts) + "/500 activation counts equal"};
}

// -- Space programs -----------------------------------------------------------------

struct Compiled {
    space::CompiledProgram program;
    aram::MachineConfig cfg;
};

Compiled compile_sample(const std::string& file, std::optional<unsigned> scale = {}, std::uint32_t memory = 1u << 16) {
    space::CompileOptions opt;
    opt.scale = scale;
    opt.machine.memory_size = memory;
    Compiled c{space::compile_source(sample(file), space::Library::standard(), opt), {}};
    c.cfg = c.program.machine_config(opt.machine);
    c.cfg.memory_size = std::max<std::uint32_t>(memory, c.program.image.end());
    return c;
}

aram::RunResult run_program(const Compiled& c, aram::MachineState s) {
    aram::RunOptions ro;
    ro.max_cycles = 20'000'000;
    ro.watches = c.program.watches;
    return aram::run(std::move(s), c.cfg, ro);
}

Verdict euclid() {
    auto c = compile_sample("euclid.space");
    const auto& m = c.program.image;
    int right = 0, stable = 0;
    for (std::uint64_t a = 1; a <= 30; ++a)
        for (std::uint64_t b = 1; b <= a; ++b) {
            std::uint64_t cycles[2]{};
            bool good = true;
            for (int k = 0; k < 2; ++k) {
                auto s = space::instantiate(c.program, c.cfg);
                write_port(s, *m.port("a"), a);
                write_port(s, *m.port("b"), b);
                auto r = run_program(c, std::move(s));
                safety.record("euclid", r);
                good &= r.terminator == aram::Terminator::Halted && read_port(r.state, *m.port("gcd")) == std::gcd(a, b);
                cycles[k] = r.cycles;
            }
            right += good;
            stable += cycles[0] == cycles[1];
        }
    return {right == 465 && stable == 465,
            std::to_string(right) + "/465 pairs equal gcd, " + std::to_string(stable) + "/465 repeat with equal cycle counts"};
}

Verdict bigaddition() {
    auto c = compile_sample("bigaddition.space", 64u, 1u << 18);
    std::map<std::pair<Address, unsigned>, std::size_t> busy; // adder busy bit -> index
    for (const auto& inst : c.program.instances)
        if (inst.path.rfind("adder[", 0) == 0 && inst.path.find('.') == std::string::npos && inst.busy)
            busy[{inst.busy->reg, inst.busy->bit}] = busy.size();
    if (busy.size() != 64) return {false, "found " + std::to_string(busy.size()) + " adder instances"};

    auto s = space::instantiate(c.program, c.cfg);
    std::vector<std::uint64_t> set(64, 0), clear(64, 0);
    aram::Stepper st(s.memory.size());
    aram::StepReport rep;
    while (s.status == aram::Status::Running && s.cycle < 100'000) {
        st.step(s, c.cfg, &rep);
        for (const auto& w : rep.writes)
            if (auto it = busy.find({w.x, w.y}); it != busy.end()) (w.value ? set : clear)[it->second] = s.cycle;
    }
    aram::RunResult r{s, s.cycle, s.status == aram::Status::Halted ? aram::Terminator::Halted : aram::Terminator::Error, {}, {}};
    safety.record("bigaddition", r);
    int right = 0;
    for (unsigned i = 0; i < 64; ++i) right += read_port(s, *c.program.image.port("outputarray"), i) == 3u * i;
    // one cycle inside every [set, clear) interval
    std::uint64_t last_set = *std::max_element(set.begin(), set.end());
    std::uint64_t first_clear = *std::min_element(clear.begin(), clear.end());
    bool started = std::find(set.begin(), set.end(), 0u) == set.end() && std::find(clear.begin(), clear.end(), 0u) == clear.end();
    bool overlap = started && last_set < first_clear;
    return {right == 64 && overlap && r.terminator == aram::Terminator::Halted,
            std::to_string(right) + "/64 outputs equal 3i, all 64 adders busy during cycles " + std::to_string(last_set) + ".." +
                std::to_string(first_clear - 1) + ", " + std::to_string(s.cycle) + " cycles"};
}

Verdict addarray32() {
    auto c = compile_sample("addarray32.space");
    const auto& m = c.program.image;
    // absolute address of the exec word of the PJUMP instance
    auto pj = earth::assemble(stdlib("PJUMP"));
    std::optional<Address> exec;
    for (const auto& inst : c.program.instances)
        if (inst.path == "PJUMP") exec = inst.base + (*pj.exec - pj.base);
    if (!exec) return {false, "no PJUMP instance"};

    std::mt19937 rng(2718);
    int right = 0;
    std::vector<unsigned> offsets;
    bool spans_ok = true, offsets_stable = true;
    for (int t = 0; t < 100; ++t) {
        auto s = space::instantiate(c.program, c.cfg);
        std::uint32_t sum = 0;
        for (unsigned i = 0; i < 32; ++i) {
            std::uint32_t v = rng();
            sum += v;
            write_port(s, *m.port("A"), v, i);
        }
        std::vector<unsigned> seen;
        aram::Stepper st(s.memory.size());
        aram::StepReport rep;
        std::vector<aram::WatchHit> hits;
        std::vector<bool> before(c.program.watches.size());
        while (s.status == aram::Status::Running && s.cycle < 1'000'000) {
            for (std::size_t k = 0; k < before.size(); ++k) before[k] = s.bit(c.program.watches[k].x, c.program.watches[k].y);
            const bool fires = std::find(s.marking.active().begin(), s.marking.active().end(), *exec) != s.marking.active().end();
            const auto word = aram::decode_instruction(s.memory[*exec]);
            st.step(s, c.cfg, &rep);
            if (fires) {
                seen.push_back(word.y);
                // the exec word is the only jump into its target span this cycle
                std::size_t in_span = std::count_if(rep.next_marked.begin(), rep.next_marked.end(),
                                                    [&](Address a) { return a >= word.x && a <= word.x + word.y; });
                spans_ok &= in_span == word.y + 1u;
            }
            for (std::size_t k = 0; k < before.size(); ++k)
                if (before[k])
                    for (const auto& w : rep.writes)
                        if (w.value && w.x == c.program.watches[k].x && w.y == c.program.watches[k].y)
                            hits.push_back({s.cycle, c.program.watches[k].name});
        }
        aram::RunResult r{s, s.cycle, s.status == aram::Status::Halted ? aram::Terminator::Halted : s.status == aram::Status::Error ? aram::Terminator::Error : aram::Terminator::CycleLimit, {}, hits};
        safety.record("addarray32", r);
        right += r.terminator == aram::Terminator::Halted && read_port(s, *m.port("sum")) == sum;
        if (t == 0) offsets = seen;
        offsets_stable &= seen == offsets;
    }
    const bool halving = offsets == std::vector<unsigned>{8, 4, 2, 1};
    std::string shown;
    for (auto o : offsets) shown += (shown.empty() ? "" : "->") + std::to_string(o);
    return {right == 100 && halving && spans_ok && offsets_stable,
            std::to_string(right) + "/100 sums, PJUMP offsets " + shown + ": " + std::to_string(offsets.size()) +
                " grow iterations after the deep level, reduction depth " + std::to_string(offsets.size() + 1)};
}

Verdict pjump() {
    auto m = earth::assemble(stdlib("PJUMP"));
    std::map<unsigned, std::size_t> spans;
    auto s = fresh(m, 256);
    for (unsigned k : {3u, 0u}) {
        write_port(s, *m.port("offset"), k);
        s.marking = aram::Marking::from({m.entry[0], m.entry[1]});
        s.status = aram::Status::Running;
        auto r = run_module(m, s);
        if (r.terminator != aram::Terminator::Halted) return {false, "programming did not halt"};
        s = r.state;
        // execute: mark the exec word with its target pointed at a free area
        auto e = s;
        auto ins = aram::decode_instruction(e.memory[*m.exec]);
        ins.x = 200;
        e.memory[*m.exec] = aram::encode_instruction(ins);
        e.marking = aram::Marking::from({*m.exec});
        e.status = aram::Status::Running;
        aram::MachineConfig cfg;
        cfg.memory_size = static_cast<std::uint32_t>(e.memory.size());
        aram::StepReport rep;
        aram::Stepper(e.memory.size()).step(e, cfg, &rep);
        spans[k] = rep.next_marked.size();
    }
    return {spans[3] == 4 && spans[0] == 1,
            "offset 3 marks " + std::to_string(spans[3]) + ", offset 0 marks " + std::to_string(spans[0])};
}

const char* kCopy64 = R"(
module copy64{
  storage{
    unsigned a input;
    unsigned b input;
    unsigned c output;
    unsigned d output;
  };
  code{
    1: a -> c :: HALT ;;
       b -> d
  };
};)";

Verdict compiler_safety() {
    // the sample programs have already run above; add a pure copy-column module
    auto p = space::compile_source(kCopy64, space::Library{});
    std::mt19937 rng(31);
    for (int t = 0; t < 50; ++t) {
        aram::MachineConfig cfg;
        auto s = space::instantiate(p, cfg);
        write_port(s, *p.image.port("a"), rng());
        write_port(s, *p.image.port("b"), rng());
        cfg = p.machine_config(cfg);
        cfg.memory_size = static_cast<std::uint32_t>(s.memory.size());
        aram::RunOptions ro;
        ro.watches = p.watches;
        safety.record("copy64", aram::run(std::move(s), cfg, ro));
    }
    std::size_t total = 0;
    std::string per;
    for (const auto& [n, k] : safety.runs) {
        total += k;
        per += (per.empty() ? "" : ", ") + n + " " + std::to_string(k);
    }
    bool all_programs = safety.runs.size() == 4;
    std::string detail = std::to_string(total - safety.failures.size()) + "/" + std::to_string(total) + " runs clean (" + per + ")";
    if (!safety.failures.empty()) detail += "; first failure " + safety.failures.front();
    return {all_programs && safety.failures.empty(), detail};
}

} // namespace

int main() {
    struct Criterion {
        const char* name;
        double limit_s;
        std::function<Verdict()> check;
    };
    const std::vector<Criterion> criteria{
        {"seqand4 timing", 1, seqand4_timing},
        {"seqand4 replicator expansion", 1, seqand4_expansion},
        {"seqand4 truth table", 1, seqand4_truth_table},
        {"machine error taxonomy", 1, error_taxonomy},
        {"shared-subterm interstring", 5, shared_subterm_interstring},
        {"expression translator", 30, translator},
        {"euclid end to end", 600, euclid},
        {"bigaddition at scale 64", 120, bigaddition},
        {"addarray32 reduction", 300, addarray32},
        {"PJUMP meta-module", 1, pjump},
        {"compiler safety", 1200, compiler_safety},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto& c = criteria[i];
        auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.check();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < c.limit_s;
        const bool pass = v.pass && in_time;
        failed += !pass;
        std::printf("%s [%2zu] %s: %s (%.2f s, limit %.0f s)\n", pass ? "PASS" : "FAIL", i + 1, c.name, v.detail.c_str(), secs,
                    c.limit_s);
    }
    std::printf("%zu/%zu criteria pass\n", criteria.size() - failed, criteria.size());
    return failed ? 1 : 0;
}
