#pragma once

// Tree expression -> (interstring, abstract memory) translation.
//
// The tree is hash-consed into a DAG so identical subtrees are computed once, then
// scheduled level by level: every node at level k is activated in the k-th alpha column
// on some functional unit, and the beta column before it moves its operands into that
// unit's input cells. Leaves never need a copy at level 1: they are seeded directly into
// the input cells of the units that consume them, and a leaf that is still needed later
// is parked in cells of a spare unit. Functional units are reused greedily once every
// value they hold is dead. The final beta column routes the root to cell 0.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "spatiale/interlang/interstring.hpp"

namespace spatiale::interlang {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// 2-ary functional term.
struct Expr {
    enum class Kind { Variable, Constant, Apply };
    Kind kind = Kind::Variable;
    std::string name; // variable name or function symbol
    std::int64_t value = 0;
    ExprPtr left, right;

    static ExprPtr var(std::string n) { return std::make_shared<Expr>(Expr{Kind::Variable, std::move(n), 0, {}, {}}); }
    static ExprPtr constant(std::int64_t v) { return std::make_shared<Expr>(Expr{Kind::Constant, {}, v, {}, {}}); }
    static ExprPtr apply(std::string f, ExprPtr l, ExprPtr r) {
        if (!l || !r) throw Error("function application needs two operands");
        return std::make_shared<Expr>(Expr{Kind::Apply, std::move(f), 0, std::move(l), std::move(r)});
    }
    bool is_leaf() const noexcept { return kind != Kind::Apply; }
};

inline std::string to_string(const Expr& e) {
    switch (e.kind) {
    case Expr::Kind::Variable: return e.name;
    case Expr::Kind::Constant: return std::to_string(e.value);
    case Expr::Kind::Apply: return "(" + to_string(*e.left) + " " + e.name + " " + to_string(*e.right) + ")";
    }
    return {};
}

class CapacityError : public Error {
public:
    CapacityError(std::size_t required, std::size_t pool)
        : Error("functional unit pool of " + std::to_string(pool) + " is too small; " + std::to_string(required) +
                " required"),
          required(required) {}
    std::size_t required;
};

template <class T = std::int64_t>
struct Translation {
    Interstring string;
    AbstractMemory<T> memory;
    std::size_t functional_units = 0;
    std::size_t dag_nodes = 0;   // distinct applications
    std::size_t depth = 0;       // levels of the DAG
    std::vector<std::size_t> level_width;
};

namespace detail {

struct DagNode {
    Expr::Kind kind;
    std::string name;
    std::int64_t value = 0;
    int left = -1, right = -1;
    std::size_t level = 0;
    std::size_t last_use = 0;
};

struct Dag {
    std::vector<DagNode> nodes;
    int root = -1;
};

inline Dag build_dag(const Expr& tree) {
    Dag dag;
    std::map<std::tuple<int, std::string, std::int64_t, int, int>, int> index;
    std::function<int(const Expr&)> intern = [&](const Expr& e) -> int {
        int l = -1, r = -1;
        if (e.kind == Expr::Kind::Apply) {
            l = intern(*e.left);
            r = intern(*e.right);
        }
        auto key = std::make_tuple(static_cast<int>(e.kind), e.name, e.value, l, r);
        if (auto it = index.find(key); it != index.end()) return it->second;
        DagNode n{e.kind, e.name, e.value, l, r};
        if (l >= 0) n.level = 1 + std::max(dag.nodes[l].level, dag.nodes[r].level);
        dag.nodes.push_back(std::move(n));
        int id = static_cast<int>(dag.nodes.size()) - 1;
        index.emplace(std::move(key), id);
        return id;
    };
    dag.root = intern(tree);
    for (auto& n : dag.nodes) {
        if (n.left < 0) continue;
        dag.nodes[n.left].last_use = std::max(dag.nodes[n.left].last_use, n.level);
        dag.nodes[n.right].last_use = std::max(dag.nodes[n.right].last_use, n.level);
    }
    dag.nodes[dag.root].last_use = dag.nodes[dag.root].level + 1;
    return dag;
}

} // namespace detail

/// Builds an interstring/memory pair equivalent to `tree` under every semantics.
/// Throws CapacityError when more than `fu_pool` functional units are needed.
template <class T = std::int64_t>
Translation<T> translate(const Expr& tree, std::size_t fu_pool) {
    using detail::DagNode;
    const detail::Dag dag = detail::build_dag(tree);
    const auto& nodes = dag.nodes;
    const std::size_t depth = nodes[dag.root].level;

    std::vector<int> cell(1, -1);          // cell -> value id
    std::vector<std::vector<std::size_t>> holders(nodes.size());
    std::vector<int> seed(1, -1);          // initial memory contents
    std::size_t units = 0;

    auto add_unit = [&] {
        cell.resize(cell.size() + 3, -1);
        seed.resize(seed.size() + 3, -1);
        return units++;
    };
    auto place = [&](std::size_t c, int v) {
        if (int old = cell[c]; old >= 0) std::erase(holders[old], c);
        cell[c] = v;
        if (v >= 0) holders[v].push_back(c);
    };

    std::vector<std::vector<int>> by_level(depth + 1);
    for (int i = 0; i < static_cast<int>(nodes.size()); ++i) by_level[nodes[i].level].push_back(i);

    Translation<T> out;
    out.depth = depth;
    out.level_width.assign(depth + 1, 0);
    for (std::size_t k = 1; k <= depth; ++k) out.level_width[k] = by_level[k].size();
    out.dag_nodes = nodes.size() - by_level[0].size();

    if (depth == 0) {
        add_unit();
        seed[1] = dag.root;
        place(1, dag.root);
    } else {
        // Level 1: fresh unit per node, operands seeded in place.
        AlphaColumn first;
        for (int n : by_level[1]) {
            std::size_t j = add_unit();
            seed[3 * j + 1] = nodes[n].left;
            seed[3 * j + 2] = nodes[n].right;
            place(3 * j + 1, nodes[n].left);
            place(3 * j + 2, nodes[n].right);
            first.activations.push_back({nodes[n].name, j});
        }
        // Park leaves that outlive level 1 and are not already held.
        std::size_t spare_unit = 0, spare_slot = 3;
        for (int leaf : by_level[0]) {
            if (nodes[leaf].last_use < 2 || !holders[leaf].empty()) continue;
            if (spare_slot == 3) spare_unit = add_unit(), spare_slot = 0;
            std::size_t c = 3 * spare_unit + 1 + spare_slot++;
            seed[c] = leaf;
            place(c, leaf);
        }
        for (std::size_t i = 0; i < by_level[1].size(); ++i)
            place(3 * first.activations[i].unit + 3, by_level[1][i]);
        out.string.columns.emplace_back(std::move(first));

        for (std::size_t k = 2; k <= depth; ++k) {
            BetaColumn moves;
            AlphaColumn acts;
            std::vector<bool> taken(units, false);
            struct Pending { std::size_t unit; int node; };
            std::vector<Pending> plan;

            auto dead_by = [&](int v) { return v < 0 || nodes[v].last_use <= k; };
            for (int n : by_level[k]) {
                const int ops[2] = {nodes[n].left, nodes[n].right};
                std::optional<std::size_t> chosen;
                for (std::size_t j = 0; j < units && !chosen; ++j) {
                    if (taken[j]) continue;
                    bool ok = dead_by(cell[3 * j + 3]);
                    for (int s = 0; s < 2 && ok; ++s) {
                        int held = cell[3 * j + 1 + s];
                        ok = dead_by(held) || held == ops[s];
                    }
                    if (ok) chosen = j;
                }
                if (!chosen) {
                    chosen = add_unit();
                    taken.push_back(false);
                }
                taken[*chosen] = true;
                plan.push_back({*chosen, n});
            }
            // Beta reads come from the pre-column state, so pick sources first.
            std::vector<std::pair<std::size_t, int>> writes;
            for (const auto& p : plan) {
                const int ops[2] = {nodes[p.node].left, nodes[p.node].right};
                for (int s = 0; s < 2; ++s) {
                    std::size_t dst = 3 * p.unit + 1 + s;
                    if (cell[dst] == ops[s]) continue;
                    const auto& h = holders[ops[s]];
                    if (h.empty()) throw Error("internal: operand value lost during scheduling");
                    moves.copies.push_back({*std::min_element(h.begin(), h.end()), dst});
                    writes.emplace_back(dst, ops[s]);
                }
                acts.activations.push_back({nodes[p.node].name, p.unit});
            }
            for (auto [c, v] : writes) place(c, v);
            for (const auto& p : plan) place(3 * p.unit + 3, p.node);
            out.string.columns.emplace_back(std::move(moves));
            out.string.columns.emplace_back(std::move(acts));
        }
    }

    BetaColumn last;
    const auto& h = holders[dag.root];
    last.copies.push_back({*std::min_element(h.begin(), h.end()), 0});
    out.string.columns.emplace_back(std::move(last));

    if (units > fu_pool) throw CapacityError(units, fu_pool);
    out.functional_units = units;
    out.memory = AbstractMemory<T>(units);
    for (std::size_t c = 0; c < seed.size(); ++c) {
        if (seed[c] < 0) continue;
        const DagNode& leaf = nodes[seed[c]];
        if (leaf.kind == Expr::Kind::Variable) out.memory.cells[c] = Var{leaf.name};
        else out.memory.cells[c] = Const{leaf.value};
    }
    return out;
}

} // namespace spatiale::interlang
