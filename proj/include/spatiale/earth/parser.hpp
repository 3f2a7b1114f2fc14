#pragma once

#include <cctype>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "spatiale/earth/ast.hpp"

namespace spatiale::earth {

namespace detail {

struct Token {
    enum class Kind { Ident, Int, Punct, End };
    Kind kind = Kind::End;
    std::string text;
    SourceLocation loc;
};

inline std::vector<Token> lex(std::string_view src) {
    std::vector<Token> out;
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < src.size();) {
        char c = src[i];
        if (c == '\n') {
            ++line, col = 1, ++i;
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++col, ++i;
            continue;
        }
        if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
            while (i < src.size() && src[i] != '\n') ++i;
            continue;
        }
        Token t;
        t.loc = {line, col};
        std::size_t b = i;
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            while (i < src.size() && (std::isalnum(static_cast<unsigned char>(src[i])) || src[i] == '_')) ++i;
            t.kind = Token::Kind::Ident;
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            while (i < src.size() && std::isdigit(static_cast<unsigned char>(src[i]))) ++i;
            t.kind = Token::Kind::Int;
        } else if (std::string_view(":;,.<>{}[]()@+-*").find(c) != std::string_view::npos) {
            ++i;
            t.kind = Token::Kind::Punct;
        } else {
            throw SyntaxError(t.loc, std::string("unexpected character '") + c + "'");
        }
        t.text = std::string(src.substr(b, i - b));
        col += i - b;
        out.push_back(std::move(t));
    }
    Token end;
    end.loc = {line, col};
    out.push_back(end);
    return out;
}

class Parser {
public:
    explicit Parser(std::string_view src) : toks_(lex(src)) {}

    EarthAST parse() {
        EarthAST ast;
        while (is_header()) header(ast);
        if (ast.name.empty()) throw SyntaxError(peek().loc, "missing NAME: header");
        bool ended = false;
        ast.code = items(ast, ended, false);
        if (!ended) throw SyntaxError(peek().loc, "missing endc");
        if (peek().kind != Token::Kind::End) throw SyntaxError(peek().loc, "text after endc");
        return ast;
    }

private:
    const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
    Token next() { return toks_[std::min(pos_++, toks_.size() - 1)]; }
    bool at(std::string_view p) const { return peek().kind == Token::Kind::Punct && peek().text == p; }
    void expect(std::string_view p) {
        if (!at(p)) throw SyntaxError(peek().loc, "expected '" + std::string(p) + "', found '" + peek().text + "'");
        ++pos_;
    }
    std::string ident(const char* what) {
        if (peek().kind != Token::Kind::Ident) throw SyntaxError(peek().loc, std::string("expected ") + what);
        return next().text;
    }
    std::int64_t integer(const char* what) {
        if (peek().kind != Token::Kind::Int) throw SyntaxError(peek().loc, std::string("expected ") + what);
        return std::stoll(next().text);
    }

    bool is_header() const {
        static const std::set<std::string, std::less<>> keys{"NAME", "BITS", "BYTES", "WORDS", "TIME", "EXEC"};
        return peek().kind == Token::Kind::Ident && keys.count(peek().text) && peek(1).kind == Token::Kind::Punct &&
               peek(1).text == ":";
    }

    void header(EarthAST& ast) {
        Token key = next();
        expect(":");
        if (key.text == "NAME") {
            if (!ast.name.empty()) throw SyntaxError(key.loc, "duplicate NAME header");
            ast.name = ident("module name");
        } else if (key.text == "TIME") {
            auto lo = integer("minimum time");
            expect("-");
            auto hi = integer("maximum time");
            if (peek().kind == Token::Kind::Ident && peek().text == "cycles") ++pos_;
            ast.time = {static_cast<std::uint64_t>(lo), static_cast<std::uint64_t>(hi)};
        } else if (key.text == "EXEC") {
            ast.exec_label = label_expr();
        } else {
            StorageKind kind = key.text == "BITS" ? StorageKind::Bits
                               : key.text == "BYTES" ? StorageKind::Bytes
                                                     : StorageKind::Words;
            while (true) {
                StorageDecl d;
                d.kind = kind;
                d.loc = peek().loc;
                d.label = ident("storage label");
                Token cat = peek();
                auto c = category_from(ident("interface category"));
                if (!c) throw SyntaxError(cat.loc, "unknown interface category '" + cat.text + "'");
                d.category = *c;
                if (ast.find_storage(d.label)) throw SyntaxError(d.loc, "duplicate label '" + d.label + "'");
                ast.storage.push_back(std::move(d));
                if (at(",")) {
                    ++pos_;
                    continue;
                }
                break;
            }
        }
        expect(";");
    }

    /// Collects tokens up to the matching closer and parses them as an expression.
    IntExpr bracketed(std::string_view open, std::string_view close) {
        SourceLocation loc = peek().loc;
        expect(open);
        std::string text;
        int depth = 1;
        while (true) {
            if (peek().kind == Token::Kind::End) throw SyntaxError(loc, "unterminated '" + std::string(open) + "'");
            if (at(open)) ++depth;
            if (at(close) && --depth == 0) break;
            text += next().text + ' ';
        }
        ++pos_;
        try {
            return IntExpr::parse(text);
        } catch (const SyntaxError&) {
            throw;
        } catch (const Error& e) {
            throw SyntaxError(loc, e.what());
        }
    }

    IntExpr label_expr() {
        if (peek().kind == Token::Kind::Int) return IntExpr::literal(std::stoll(next().text));
        if (at("[")) return bracketed("[", "]");
        throw SyntaxError(peek().loc, "expected label");
    }

    IntExpr small_expr(const char* what) {
        if (peek().kind == Token::Kind::Int) return IntExpr::literal(std::stoll(next().text));
        if (peek().kind == Token::Kind::Ident) return IntExpr::parse(next().text);
        if (at("(")) return bracketed("(", ")");
        throw SyntaxError(peek().loc, std::string("expected ") + what);
    }

    BitOperand bit_operand(const EarthAST& ast) {
        BitOperand op;
        const Token t = peek();
        if (t.kind == Token::Kind::Ident) {
            op.kind = BitOperand::Kind::Storage;
            op.storage = next().text;
            if (!ast.find_storage(op.storage)) throw SyntaxError(t.loc, "undeclared label '" + op.storage + "'");
            if (at(".")) {
                ++pos_;
                op.bit = small_expr("bit index");
            }
            return op;
        }
        if (at("@")) {
            ++pos_;
            op.kind = BitOperand::Kind::Absolute;
            op.absolute = static_cast<std::uint64_t>(integer("absolute register"));
        } else {
            op.kind = BitOperand::Kind::CodeLabel;
            op.code_label = label_expr();
        }
        expect(".");
        op.bit = small_expr("bit index");
        return op;
    }

    std::vector<CodeItem> items(const EarthAST& ast, bool& ended, bool in_replicator) {
        std::vector<CodeItem> out;
        std::optional<IntExpr> pending_label;
        SourceLocation label_loc;
        while (true) {
            const Token t = peek();
            if (t.kind == Token::Kind::End) break;
            if (t.kind == Token::Kind::Ident && t.text == "endc") {
                if (in_replicator) throw SyntaxError(t.loc, "endc inside replicator");
                ++pos_;
                ended = true;
                break;
            }
            if (at("}")) {
                if (!in_replicator) throw SyntaxError(t.loc, "unbalanced '}'");
                break;
            }
            if (t.kind == Token::Kind::Int || at("[")) {
                if (pending_label) throw SyntaxError(t.loc, "two labels on one instruction");
                label_loc = t.loc;
                pending_label = label_expr();
                continue;
            }
            if (at("<")) {
                if (pending_label) throw SyntaxError(label_loc, "label on a replicator");
                Replicator r;
                r.loc = t.loc;
                ++pos_;
                r.lo = small_expr("replicator lower bound");
                expect(";");
                r.var = ident("control variable");
                expect(";");
                r.hi = small_expr("replicator upper bound");
                expect(">");
                expect("{");
                bool dummy = false;
                r.body = items(ast, dummy, true);
                expect("}");
                out.emplace_back(std::move(r));
                continue;
            }
            if (t.kind != Token::Kind::Ident) throw SyntaxError(t.loc, "unexpected '" + t.text + "'");
            auto op = aram::opcode_from_mnemonic(t.text);
            if (!op) throw SyntaxError(t.loc, "unknown mnemonic '" + t.text + "'");
            ++pos_;
            Instr ins;
            ins.opcode = *op;
            ins.loc = t.loc;
            ins.label = std::move(pending_label);
            pending_label.reset();
            if (*op == aram::Opcode::Jump) {
                if (at("@")) {
                    ++pos_;
                    ins.target.kind = JumpTarget::Kind::Absolute;
                    ins.target.absolute = static_cast<std::uint64_t>(integer("absolute register"));
                } else {
                    ins.target.label = label_expr();
                }
                ins.span = small_expr("jump offset");
            } else {
                ins.operand = bit_operand(ast);
            }
            out.emplace_back(std::move(ins));
        }
        if (pending_label) throw SyntaxError(label_loc, "label without instruction");
        return out;
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline EarthAST parse_earth(std::string_view text) { return detail::Parser(text).parse(); }

} // namespace spatiale::earth
