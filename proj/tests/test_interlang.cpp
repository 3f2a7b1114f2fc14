#include <gtest/gtest.h>

#include <random>
#include <set>

#include "spatiale/interlang/translate.hpp"

using namespace spatiale;
using namespace spatiale::interlang;

namespace {

const char* kShared = "+(0) *(1) :: 3->1 6->2 3->4 6->5 :: +(0) -(1) :: 3->1 6->2 :: *(0) :: 3->0 ;";

std::int64_t shared_product(std::int64_t x, std::int64_t y, std::int64_t z) { return ((x + y) + y * z) * ((x + y) - y * z); }

std::int64_t oracle(const Expr& e, const std::map<std::string, std::int64_t>& env) {
    switch (e.kind) {
    case Expr::Kind::Variable: return env.at(e.name);
    case Expr::Kind::Constant: return e.value;
    case Expr::Kind::Apply: break;
    }
    auto a = static_cast<std::uint64_t>(oracle(*e.left, env));
    auto b = static_cast<std::uint64_t>(oracle(*e.right, env));
    if (e.name == "+") return static_cast<std::int64_t>(a + b);
    if (e.name == "-") return static_cast<std::int64_t>(a - b);
    return static_cast<std::int64_t>(a * b);
}

void distinct(const Expr& e, std::set<std::string>& seen) {
    if (e.is_leaf()) return;
    seen.insert(to_string(e));
    distinct(*e.left, seen);
    distinct(*e.right, seen);
}

ExprPtr random_tree(std::mt19937& rng, int depth) {
    std::uniform_int_distribution<int> coin(0, 9);
    if (depth == 0 || coin(rng) < 2) {
        if (coin(rng) < 8) return Expr::var(std::string(1, static_cast<char>('a' + coin(rng) % 4)));
        return Expr::constant(coin(rng) - 4);
    }
    static const char* ops[] = {"+", "-", "*"};
    return Expr::apply(ops[coin(rng) % 3], random_tree(rng, depth - 1), random_tree(rng, depth - 1));
}

ExprPtr shared_tree() {
    auto x = Expr::var("x"), y = Expr::var("y"), z = Expr::var("z");
    auto s = Expr::apply("+", x, y), p = Expr::apply("*", y, z);
    return Expr::apply("*", Expr::apply("+", s, p), Expr::apply("-", s, p));
}

} // namespace

TEST(Validate, SharedStringIsWellFormed) {
    auto s = parse_interstring(kShared);
    EXPECT_EQ(s.columns.size(), 6u);
    EXPECT_TRUE(validate(s, 7).empty());
}

TEST(Validate, DuplicateDestination) {
    auto v = validate(parse_interstring("1->4 2->4 ;"), 7);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].message, "duplicate destination 4");
}

TEST(Validate, DuplicateUnit) {
    auto v = validate(parse_interstring("+(0) *(0) ;"), 7);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].message, "duplicate FU 0");
}

TEST(Validate, AlternationAndRange) {
    EXPECT_FALSE(validate(parse_interstring("1->0 :: 2->0 ;"), 7).empty());
    EXPECT_FALSE(validate(parse_interstring("+(2) ;"), 7).empty());
    EXPECT_FALSE(validate(parse_interstring("9->0 ;"), 7).empty());
}

TEST(Eval, SharedAtTwoThreeFour) {
    auto s = parse_interstring(kShared);
    auto m = parse_memory<std::int64_t>("_ x y _ y z _");
    EXPECT_EQ(result_of(s, m, integer_semantics({{"x", 2}, {"y", 3}, {"z", 4}})), -119);
    EXPECT_EQ(shared_product(2, 3, 4), -119);
}

TEST(Eval, SharedRandomTriples) {
    auto s = parse_interstring(kShared);
    auto m = parse_memory<std::int64_t>("_ x y _ y z _");
    std::mt19937 rng(11);
    std::uniform_int_distribution<int> d(-100, 100);
    for (int i = 0; i < 1000; ++i) {
        std::int64_t x = d(rng), y = d(rng), z = d(rng);
        ASSERT_EQ(result_of(s, m, integer_semantics({{"x", x}, {"y", y}, {"z", z}})), shared_product(x, y, z));
    }
}

TEST(Eval, PureCopy) {
    auto m = parse_memory<std::int64_t>("_ 7 _ _");
    EXPECT_EQ(result_of(parse_interstring("1->0 ;"), m, integer_semantics()), 7);
}

TEST(Eval, BetaSwapReadsBeforeWriting) {
    auto m = parse_memory<std::int64_t>("_ 1 2 _");
    auto trace = eval(parse_interstring("1->2 2->1 ;"), m, integer_semantics());
    ASSERT_EQ(trace.size(), 1u);
    EXPECT_EQ(format_memory(trace[0]), "_ 2 1 _");
    EXPECT_EQ(format_memory(m), "_ 1 2 _");
}

TEST(Eval, EmptyCellReadNamesCellAndColumn) {
    auto m = parse_memory<std::int64_t>("_ 1 _ _");
    try {
        eval(parse_interstring("+(0) ;"), m, integer_semantics());
        FAIL();
    } catch (const EvalError& e) {
        std::string w = e.what();
        EXPECT_NE(w.find("cell 2"), std::string::npos) << w;
        EXPECT_NE(w.find("column 0"), std::string::npos) << w;
    }
}

TEST(Eval, SnapshotPerColumn) {
    auto s = parse_interstring(kShared);
    auto trace = eval(s, parse_memory<std::int64_t>("_ x y _ y z _"), integer_semantics({{"x", 1}, {"y", 1}, {"z", 1}}));
    EXPECT_EQ(trace.size(), s.columns.size());
}

TEST(Text, RoundTrip) {
    auto s = parse_interstring(kShared);
    EXPECT_EQ(parse_interstring(format_interstring(s)), s);
}

TEST(Translate, Leaf) {
    auto t = translate(*Expr::var("x"), 4);
    ASSERT_EQ(t.string.columns.size(), 1u);
    EXPECT_EQ(format_interstring(t.string), "1->0 ;");
    EXPECT_EQ(result_of(t.string, t.memory, integer_semantics({{"x", 42}})), 42);
}

TEST(Translate, SharesCommonTerms) {
    auto t = translate(*shared_tree(), 8);
    EXPECT_EQ(t.level_width[1], 2u);
    EXPECT_EQ(t.string.alpha_activations(), 5u);
    EXPECT_EQ(t.dag_nodes, 5u);
    EXPECT_TRUE(validate(t.string, t.memory.size()).empty());
    EXPECT_EQ(result_of(t.string, t.memory, integer_semantics({{"x", 2}, {"y", 3}, {"z", 4}})), -119);
}

TEST(Translate, CapacityErrorReportsRequiredWidth) {
    try {
        translate(*shared_tree(), 1);
        FAIL();
    } catch (const CapacityError& e) {
        EXPECT_GE(e.required, 2u);
        EXPECT_NO_THROW(translate(*shared_tree(), e.required));
    }
}

TEST(Translate, RandomTreesMatchRecursiveEvaluation) {
    std::mt19937 rng(2024);
    std::uniform_int_distribution<std::int64_t> val(-1000, 1000);
    for (int n = 0; n < 500; ++n) {
        auto tree = random_tree(rng, 1 + n % 8);
        auto t = translate(*tree, 1024);
        ASSERT_TRUE(validate(t.string, t.memory.size()).empty()) << to_string(*tree);
        std::set<std::string> subtrees;
        distinct(*tree, subtrees);
        EXPECT_EQ(t.string.alpha_activations(), subtrees.size()) << to_string(*tree);
        if (t.depth > 0) {
            EXPECT_EQ(t.string.columns.size(), 2 * t.depth);
        }
        for (int k = 0; k < 10; ++k) {
            std::map<std::string, std::int64_t> env{{"a", val(rng)}, {"b", val(rng)}, {"c", val(rng)}, {"d", val(rng)}};
            ASSERT_EQ(result_of(t.string, t.memory, integer_semantics(env)), oracle(*tree, env)) << to_string(*tree);
        }
    }
}

TEST(Translate, DoesNotMutateInputMemory) {
    auto t = translate(*shared_tree(), 8);
    auto before = t.memory;
    eval(t.string, t.memory, integer_semantics({{"x", 1}, {"y", 2}, {"z", 3}}));
    EXPECT_EQ(t.memory, before);
}
