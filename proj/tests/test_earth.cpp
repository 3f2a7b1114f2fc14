#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "spatiale/earth/assembler.hpp"

using namespace spatiale;
using namespace spatiale::earth;
using aram::Opcode;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string seqand4() { return read_file(std::string(SPATIALE_STDLIB_DIR) + "/seqand4.earth"); }

const char* kFig5 = R"(
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

std::vector<std::string> tokens(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string t; in >> t;) out.push_back(t);
    return out;
}

// Hand assembly of the expanded AND gate at base 1: code in 1..15, busy and
// output share register 16, input sits in register 17.
std::vector<aram::Word> hand_assembled() {
    using aram::encode_instruction;
    std::vector<aram::Word> w;
    w.push_back(encode_instruction(Opcode::Wrt1, 16, 0));
    for (unsigned i = 0; i < 4; ++i) {
        w.push_back(encode_instruction(Opcode::Cond, 17, i));
        w.push_back(encode_instruction(Opcode::Jump, 11, 1));
    }
    w.push_back(encode_instruction(Opcode::Jump, 14, 1));
    w.push_back(encode_instruction(Opcode::Wrt0, 16, 1));
    w.push_back(encode_instruction(Opcode::Jump, 13, 0));
    w.push_back(encode_instruction(Opcode::Wrt0, 16, 0));
    w.push_back(encode_instruction(Opcode::Wrt1, 16, 1));
    w.push_back(encode_instruction(Opcode::Jump, 13, 0));
    return w;
}

aram::RunResult run_and(const ModuleImage& m, unsigned input) {
    auto s = instantiate(m, {});
    write_port(s, *m.port("input"), input);
    aram::RunOptions opt;
    opt.max_cycles = 100;
    return aram::run(std::move(s), m.machine_config({}), opt);
}

} // namespace

TEST(Parse, AndGateStructure) {
    auto ast = parse_earth(seqand4());
    EXPECT_EQ(ast.name, "seqand4");
    ASSERT_EQ(ast.storage.size(), 3u);
    EXPECT_EQ(ast.storage[0].label, "busy");
    EXPECT_EQ(ast.storage[0].category, Category::Private);
    EXPECT_EQ(ast.storage[1].label, "output");
    EXPECT_EQ(ast.storage[1].category, Category::Output);
    EXPECT_EQ(ast.storage[2].kind, StorageKind::Bytes);
    ASSERT_TRUE(ast.time);
    EXPECT_EQ(*ast.time, (std::pair<std::uint64_t, std::uint64_t>{4, 7}));

    int replicators = 0;
    std::vector<std::int64_t> labels;
    for (const auto& item : ast.code) {
        if (const auto* r = std::get_if<Replicator>(&item)) {
            ++replicators;
            EXPECT_EQ(r->body.size(), 2u);
        } else if (const auto& ins = std::get<Instr>(item); ins.label) {
            labels.push_back(ins.label->eval());
        }
    }
    EXPECT_EQ(replicators, 1);
    EXPECT_EQ(labels, (std::vector<std::int64_t>{1, 2, 3}));
}

TEST(Parse, BitsDeclaration) {
    auto ast = parse_earth("NAME: m; BITS: busy private, output output; wrt1 busy endc");
    ASSERT_EQ(ast.storage.size(), 2u);
    EXPECT_EQ(ast.storage[0].kind, StorageKind::Bits);
    EXPECT_EQ(ast.storage[1].category, Category::Output);
}

TEST(Parse, MissingEndc) { EXPECT_THROW(parse_earth("NAME: m; BITS: busy private;\n wrt1 busy\n"), SyntaxError); }

TEST(Parse, ErrorsCarryLineAndColumn) {
    try {
        parse_earth("NAME: m;\nBITS: busy private;\n    wrt1 busy\n    frob busy\n    endc\n");
        FAIL();
    } catch (const SyntaxError& e) {
        EXPECT_EQ(e.location().line, 4u);
        EXPECT_EQ(e.location().column, 5u);
        EXPECT_NE(std::string(e.what()).find("unknown mnemonic"), std::string::npos);
    }
}

TEST(Parse, DuplicateStorageLabel) {
    EXPECT_THROW(parse_earth("NAME: m; BITS: a private, a output; wrt1 a endc"), SyntaxError);
}

TEST(Parse, UndeclaredOperand) { EXPECT_THROW(parse_earth("NAME: m; BITS: a private; wrt1 b endc"), SyntaxError); }

TEST(Expand, AndGateMatchesHandExpansion) {
    auto flat = expand_replicators(parse_earth(seqand4()));
    EXPECT_EQ(flat.code.size(), 15u);
    EXPECT_EQ(tokens(format_listing(flat)), tokens(kFig5));
}

TEST(Expand, DegenerateBound) {
    auto flat = expand_replicators(parse_earth("NAME: m; BITS: a private; <0;i;0>{ wrt1 a.i } endc"));
    ASSERT_EQ(flat.code.size(), 1u);
    EXPECT_EQ(std::get<Instr>(flat.code[0]).operand.bit->eval(), 0);
}

TEST(Expand, NestedAffineIndex) {
    auto flat = expand_replicators(parse_earth("NAME: m; BYTES: a input; <0;i;1>{<0;j;1>{cond a.(2*i+j)}} endc"));
    ASSERT_EQ(flat.code.size(), 4u);
    for (std::int64_t k = 0; k < 4; ++k) EXPECT_EQ(std::get<Instr>(flat.code[k]).operand.bit->eval(), k);
}

TEST(Expand, AffineLabels) {
    auto ast = assemble_source("NAME: m; BITS: busy private; WORDS: w ioput;\n"
                               "    wrt1 busy\n    jump 10 0\n"
                               "<0;i;2>{\n[10+i] wrt1 w.i\n}\n    endc\n");
    EXPECT_EQ(ast.flat.code.size(), 5u);
    EXPECT_EQ(aram::decode_instruction(ast.image.words[1]).x, 3u);
}

TEST(Expand, IdempotentOnFlat) {
    auto flat = expand_replicators(parse_earth(seqand4()));
    EXPECT_EQ(format_listing(expand_replicators(flat)), format_listing(flat));
}

TEST(Assemble, MatchesHandAssembly) {
    auto m = assemble(seqand4(), 1);
    EXPECT_EQ(m.code_size, 15u);
    EXPECT_EQ((std::array<aram::Address, 2>{1, 2}), m.entry);
    EXPECT_EQ(std::vector<aram::Word>(m.words.begin(), m.words.begin() + 15), hand_assembled());
    ASSERT_TRUE(m.busy);
    EXPECT_EQ(m.busy->reg, 16u);
    EXPECT_EQ(m.port("input")->reg, 17u);
    auto j = aram::decode_instruction(m.words[9]);
    EXPECT_EQ(j.opcode, Opcode::Jump);
    EXPECT_EQ(j.x, 14u);
    EXPECT_EQ(j.y, 1u);
}

TEST(Assemble, RelocationShiftsAddressesUniformly) {
    auto a = assemble(seqand4(), 1), b = assemble(seqand4(), 1001);
    ASSERT_EQ(a.words.size(), b.words.size());
    for (std::size_t i = 0; i < a.code_size; ++i) {
        auto x = aram::decode_instruction(a.words[i]), y = aram::decode_instruction(b.words[i]);
        EXPECT_EQ(x.opcode, y.opcode);
        EXPECT_EQ(x.y, y.y);
        EXPECT_EQ(x.x + 1000, y.x);
    }
    for (unsigned in = 0; in < 16; ++in) {
        auto ra = run_and(a, in), rb = run_and(b, in);
        EXPECT_EQ(ra.cycles, rb.cycles);
        EXPECT_EQ(read_port(ra.state, *a.port("output")), read_port(rb.state, *b.port("output")));
    }
}

TEST(Assemble, UndefinedLabelIsNamed) {
    try {
        assemble("NAME: m; BITS: busy private; wrt1 busy jump 9 0 endc");
        FAIL();
    } catch (const AssemblyError& e) {
        EXPECT_NE(std::string(e.what()).find("label 9"), std::string::npos);
    }
}

TEST(Assemble, DuplicateCodeLabel) {
    EXPECT_THROW(assemble("NAME: m; BITS: busy private; 1 wrt1 busy 1 wrt0 busy endc"), AssemblyError);
}

TEST(Assemble, BitIndexBeyondWidth) {
    EXPECT_THROW(assemble("NAME: m; BITS: busy private; wrt1 busy.1 endc"), AssemblyError);
    EXPECT_THROW(assemble("NAME: m; BYTES: b private; wrt1 b.8 endc"), AssemblyError);
    EXPECT_NO_THROW(assemble("NAME: m; WORDS: w private; wrt1 w.31 endc"));
}

TEST(Assemble, MemoryOverflow) {
    aram::MachineConfig cfg;
    cfg.memory_size = 10;
    EXPECT_THROW(assemble(seqand4(), 1, cfg), AssemblyError);
}

TEST(Assemble, LexicalInvariance) {
    std::string noisy = "// header comment\n" + seqand4();
    for (std::size_t p = 0; (p = noisy.find("\n", p)) != std::string::npos; p += 3) noisy.replace(p, 1, "\n\t ");
    EXPECT_EQ(assemble(noisy).words, assemble(seqand4()).words);
    EXPECT_EQ(assemble(seqand4()).words, assemble(seqand4()).words);
}

TEST(Assemble, BusyLint) {
    auto good = assemble_source(seqand4());
    EXPECT_TRUE(good.warnings.empty());
    auto bad = assemble_source("NAME: m; BITS: busy private; wrt0 busy endc");
    EXPECT_EQ(bad.warnings.size(), 1u);
}

TEST(Interface, PublicPortsOnly) {
    auto d = describe(assemble(seqand4()));
    EXPECT_EQ(d.find("busy"), nullptr);
    ASSERT_NE(d.find("output"), nullptr);
    EXPECT_EQ(d.find("output")->width, 1u);
    ASSERT_NE(d.find("input"), nullptr);
    EXPECT_EQ(d.find("input")->width, 8u);
    auto back = parse_descriptor(format_descriptor(d));
    EXPECT_EQ(back.ports.size(), d.ports.size());
    EXPECT_EQ(back.busy->reg, 16u);
}

TEST(Simulate, TimingAndTruthTable) {
    auto m = assemble(seqand4());
    for (unsigned in = 0; in < 16; ++in) {
        auto r = run_and(m, in);
        ASSERT_EQ(r.terminator, aram::Terminator::Halted);
        EXPECT_EQ(read_port(r.state, *m.port("output")), in == 15 ? 1u : 0u);
        EXPECT_FALSE(r.state.bit(m.busy->reg, m.busy->bit));
        EXPECT_GE(r.cycles, 4u);
        EXPECT_LE(r.cycles, 7u);
    }
    EXPECT_EQ(run_and(m, 0).cycles, 4u);
    EXPECT_EQ(run_and(m, 14).cycles, 4u);
    EXPECT_EQ(run_and(m, 15).cycles, 7u);
}

TEST(Simulate, VerifyTimeEnumeratesInputs) {
    auto t = verify_time(assemble(seqand4()));
    EXPECT_EQ(t.cases, 256u);
    EXPECT_TRUE(t.all_halted);
    EXPECT_EQ(t.min_cycles, 4u);
    EXPECT_EQ(t.max_cycles, 7u);
    EXPECT_TRUE(t.within_declared);
}
