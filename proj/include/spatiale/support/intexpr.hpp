#pragma once

#include <cctype>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>

#include "spatiale/error.hpp"

namespace spatiale::support {

/// Small integer expression: literals, identifiers, + - * and parentheses.
/// Used for replicator label and bit arithmetic.
class IntExpr {
public:
    IntExpr() = default;
    static IntExpr literal(std::int64_t v) {
        IntExpr e;
        e.node_ = std::make_shared<Node>(Node{'#', v, {}, {}, {}});
        return e;
    }

    /// Parses the whole of `text`; throws Error on junk.
    static IntExpr parse(std::string_view text) {
        Parser p{text, 0};
        IntExpr e;
        e.node_ = p.expr();
        p.skip();
        if (p.pos != text.size()) throw Error("unexpected '" + std::string(text.substr(p.pos)) + "' in expression");
        return e;
    }

    bool valid() const noexcept { return node_ != nullptr; }

    bool is_constant() const { return node_ && constant(*node_); }

    std::int64_t eval(const std::map<std::string, std::int64_t>& env = {}) const {
        if (!node_) throw Error("empty expression");
        return eval(*node_, env);
    }

    /// Replaces identifiers bound in `env` and folds the result if it became constant.
    IntExpr substitute(const std::map<std::string, std::int64_t>& env) const {
        IntExpr e;
        e.node_ = subst(node_, env);
        if (e.is_constant()) return literal(e.eval());
        return e;
    }

    std::string to_string() const { return node_ ? str(*node_) : std::string{}; }

private:
    struct Node {
        char op; // '#' literal, '$' identifier, otherwise binary operator
        std::int64_t value;
        std::string name;
        std::shared_ptr<Node> lhs, rhs;
    };
    using NodePtr = std::shared_ptr<Node>;

    struct Parser {
        std::string_view s;
        std::size_t pos;
        void skip() {
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        }
        NodePtr expr() {
            NodePtr l = term();
            for (skip(); pos < s.size() && (s[pos] == '+' || s[pos] == '-'); skip()) {
                char op = s[pos++];
                l = std::make_shared<Node>(Node{op, 0, {}, l, term()});
            }
            return l;
        }
        NodePtr term() {
            NodePtr l = factor();
            for (skip(); pos < s.size() && s[pos] == '*'; skip()) {
                ++pos;
                l = std::make_shared<Node>(Node{'*', 0, {}, l, factor()});
            }
            return l;
        }
        NodePtr factor() {
            skip();
            if (pos >= s.size()) throw Error("expression ends unexpectedly");
            char c = s[pos];
            if (c == '(') {
                ++pos;
                NodePtr e = expr();
                skip();
                if (pos >= s.size() || s[pos] != ')') throw Error("missing ')' in expression");
                ++pos;
                return e;
            }
            if (c == '-') {
                ++pos;
                return std::make_shared<Node>(Node{'-', 0, {}, std::make_shared<Node>(Node{'#', 0, {}, {}, {}}), factor()});
            }
            if (std::isdigit(static_cast<unsigned char>(c))) {
                std::int64_t v = 0;
                while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) v = v * 10 + (s[pos++] - '0');
                return std::make_shared<Node>(Node{'#', v, {}, {}, {}});
            }
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                std::size_t b = pos;
                while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_')) ++pos;
                return std::make_shared<Node>(Node{'$', 0, std::string(s.substr(b, pos - b)), {}, {}});
            }
            throw Error(std::string("unexpected '") + c + "' in expression");
        }
    };

    static bool constant(const Node& n) {
        if (n.op == '#') return true;
        if (n.op == '$') return false;
        return constant(*n.lhs) && constant(*n.rhs);
    }

    static std::int64_t eval(const Node& n, const std::map<std::string, std::int64_t>& env) {
        switch (n.op) {
        case '#': return n.value;
        case '$': {
            auto it = env.find(n.name);
            if (it == env.end()) throw Error("unbound identifier '" + n.name + "'");
            return it->second;
        }
        case '+': return eval(*n.lhs, env) + eval(*n.rhs, env);
        case '-': return eval(*n.lhs, env) - eval(*n.rhs, env);
        default: return eval(*n.lhs, env) * eval(*n.rhs, env);
        }
    }

    static NodePtr subst(const NodePtr& n, const std::map<std::string, std::int64_t>& env) {
        if (!n) return n;
        if (n->op == '$') {
            auto it = env.find(n->name);
            return it == env.end() ? n : std::make_shared<Node>(Node{'#', it->second, {}, {}, {}});
        }
        if (n->op == '#') return n;
        return std::make_shared<Node>(Node{n->op, 0, {}, subst(n->lhs, env), subst(n->rhs, env)});
    }

    static std::string str(const Node& n) {
        switch (n.op) {
        case '#': return std::to_string(n.value);
        case '$': return n.name;
        default: return "(" + str(*n.lhs) + n.op + str(*n.rhs) + ")";
        }
    }

    NodePtr node_;
};

} // namespace spatiale::support
