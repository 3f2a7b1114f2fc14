#pragma once

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <limits>
#include <string>
#include <vector>

#include "spatiale/space/ast.hpp"

namespace spatiale::space {

namespace detail {

struct Token {
    enum Kind { Ident, Int, Punct, End } kind = End;
    std::string text;
    std::uint64_t value = 0;
    SourceLocation loc;
};

inline std::vector<Token> lex(const std::string& src) {
    static const char* two[] = {"::", ":>", ":=", ";;", "->", "<="};
    std::vector<Token> out;
    std::size_t line = 1, col = 1, i = 0;
    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n; ++k, ++i) {
            if (src[i] == '\n') ++line, col = 1;
            else ++col;
        }
    };
    while (i < src.size()) {
        char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            advance(1);
            continue;
        }
        if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
            while (i < src.size() && src[i] != '\n') advance(1);
            continue;
        }
        Token t;
        t.loc = {line, col};
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
            t.kind = Token::Ident;
            t.text = src.substr(i, j - i);
            advance(j - i);
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t j = i;
            while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            t.kind = Token::Int;
            t.text = src.substr(i, j - i);
            errno = 0;
            t.value = std::strtoull(t.text.c_str(), nullptr, 10);
            if (errno) throw SyntaxError(t.loc, "integer literal out of range");
            advance(j - i);
        } else {
            t.kind = Token::Punct;
            for (const char* p : two)
                if (src.compare(i, 2, p) == 0) t.text = p;
            if (t.text.empty()) {
                if (std::string_view("{}[]().,;:#/*+-=<>").find(c) == std::string_view::npos)
                    throw SyntaxError(t.loc, std::string("unexpected character '") + c + "'");
                t.text = std::string(1, c);
            }
            advance(t.text.size());
        }
        out.push_back(std::move(t));
    }
    Token end;
    end.loc = {line, col};
    out.push_back(end);
    return out;
}

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : t_(std::move(toks)) {}

    SpaceAST module() {
        SpaceAST ast;
        keyword("module");
        ast.name = ident("module name");
        expect("{");
        while (!at("}")) {
            const Token& k = peek();
            if (k.kind != Token::Ident) fail(k, "expected a section name");
            if (k.text == "storage") storage(ast);
            else if (k.text == "submodules") submodules(ast);
            else if (k.text == "replications") replications(ast);
            else if (k.text == "time") time(ast);
            else if (k.text == "code") code(ast);
            else fail(k, "unknown section '" + k.text + "'");
        }
        expect("}");
        accept(";");
        if (peek().kind != Token::End) fail(peek(), "text after the end of the module");
        check_labels(ast);
        return ast;
    }

private:
    std::vector<Token> t_;
    std::size_t p_ = 0;

    const Token& peek(std::size_t k = 0) const { return t_[std::min(p_ + k, t_.size() - 1)]; }
    const Token& next() {
        const Token& t = peek();
        if (p_ < t_.size() - 1) ++p_;
        return t;
    }
    bool at(const char* punct, std::size_t k = 0) const { return peek(k).kind == Token::Punct && peek(k).text == punct; }
    bool accept(const char* punct) {
        if (!at(punct)) return false;
        next();
        return true;
    }
    [[noreturn]] static void fail(const Token& t, const std::string& msg) { throw SyntaxError(t.loc, msg); }
    void expect(const char* punct) {
        if (!accept(punct)) fail(peek(), std::string("expected '") + punct + "'" + found());
    }
    std::string found() const {
        const Token& t = peek();
        return t.kind == Token::End ? " at end of input" : " before '" + t.text + "'";
    }
    void keyword(const char* kw) {
        if (peek().kind != Token::Ident || peek().text != kw) fail(peek(), std::string("expected '") + kw + "'" + found());
        next();
    }
    std::string ident(const char* what) {
        if (peek().kind != Token::Ident) fail(peek(), std::string("expected ") + what + found());
        return next().text;
    }
    std::uint64_t integer(const char* what) {
        if (peek().kind != Token::Int) fail(peek(), std::string("expected ") + what + found());
        return next().value;
    }

    std::vector<unsigned> dims() {
        std::vector<unsigned> d;
        while (accept("[")) {
            auto v = integer("array dimension");
            if (v == 0 || v > std::numeric_limits<unsigned>::max()) fail(peek(), "bad array dimension");
            d.push_back(static_cast<unsigned>(v));
            expect("]");
        }
        return d;
    }

    void storage(SpaceAST& ast) {
        next();
        expect("{");
        while (!accept("}")) {
            StorageDecl d;
            d.loc = peek().loc;
            std::string type = ident("storage type");
            if (type == "BIT") d.type = StorageType::Bit;
            else if (type == "BYTE") d.type = StorageType::Byte;
            else if (type == "REG" || type == "unsigned") d.type = StorageType::Reg;
            else throw SyntaxError(d.loc, "unknown type '" + type + "'");
            d.label = ident("storage label");
            d.dims = dims();
            if (peek().kind == Token::Ident) {
                auto cat = category_from(peek().text);
                if (!cat) fail(peek(), "unknown interface category '" + peek().text + "'");
                d.category = *cat;
                next();
            }
            expect(";");
            ast.storage.push_back(std::move(d));
        }
        accept(";");
    }

    void submodules(SpaceAST& ast) {
        next();
        expect("{");
        while (!accept("}")) {
            SubmoduleDecl d;
            d.loc = peek().loc;
            d.cls = ident("submodule class");
            if (accept("{")) {
                d.parameter = static_cast<unsigned>(integer("class parameter"));
                expect("}");
            }
            d.label = ident("submodule label");
            d.dims = dims();
            if (d.dims.size() > 3) throw SyntaxError(d.loc, "submodule arrays have at most three dimensions");
            expect(";");
            ast.submodules.push_back(std::move(d));
        }
        accept(";");
    }

    std::string function() {
        if (peek().kind == Token::Ident) return next().text;
        auto k = integer("incremental function");
        std::string fn = std::to_string(k);
        expect("*");
        fn += "*";
        if (accept("+")) fn += "+" + std::to_string(integer("increment"));
        return fn;
    }

    void replications(SpaceAST& ast) {
        const Token& kw = next();
        if (ast.replications) fail(kw, "duplicate replications declaration");
        expect("{");
        Replications r;
        r.var = ident("control variable");
        expect("/");
        do {
            SourceLocation loc = peek().loc;
            auto fn = function();
            if (fn != "inc" && fn != "2*" && fn != "2*+1") throw SyntaxError(loc, "unsupported incremental function '" + fn + "'");
            r.functions.push_back(fn);
        } while (accept(","));
        expect("}");
        expect(";");
        ast.replications = std::move(r);
    }

    void time(SpaceAST& ast) {
        next();
        expect(":");
        auto lo = integer("minimum time");
        expect("-");
        auto hi = integer("maximum time");
        if (peek().kind == Token::Ident && peek().text == "cycles") next();
        expect(";");
        ast.time = {lo, hi};
    }

    // Code section: parsed row by row because continuation rows are placed
    // under the columns they belong to.
    bool at_line_start() const {
        std::size_t k = 0;
        if (peek(k).kind != Token::Int) return false;
        ++k;
        while (at(".", k) && peek(k + 1).kind == Token::Int) k += 2;
        return at(":", k);
    }

    LineAddress address() {
        LineAddress a;
        a.parts.push_back(static_cast<int>(integer("line address")));
        while (at(".") && peek(1).kind == Token::Int) {
            next();
            a.parts.push_back(static_cast<int>(next().value));
        }
        return a;
    }

    Egress egress() {
        expect("(");
        Egress e;
        e.line = address();
        expect(",");
        e.offset = static_cast<unsigned>(integer("offset"));
        expect(")");
        return e;
    }

    Index index() {
        Index ix;
        if (peek().kind == Token::Int) {
            ix.value = static_cast<std::int64_t>(next().value);
            return ix;
        }
        ix.is_var = true;
        ix.var = ident("index");
        if (accept("/")) ix.fn = function();
        return ix;
    }

    Ref ref(std::string label, SourceLocation loc) {
        Ref r;
        r.label = std::move(label);
        r.loc = loc;
        while (accept("[")) {
            r.index.push_back(index());
            expect("]");
        }
        if (r.index.size() > 3) throw SyntaxError(loc, "at most three array indexes");
        if (accept(".")) r.port = ident("port name");
        return r;
    }

    enum class EntryKind { Copy, Activation, Control };

    struct Entry {
        EntryKind kind;
        std::size_t column; // character column of the first token
        CopyEntry copy;
        ActivationEntry act;
        Control ctl;
    };

    static std::string strip_underscores(const std::string& s) {
        std::size_t k = 0;
        while (k < s.size() && k < 2 && s[k] == '_') ++k;
        return s.substr(k);
    }

    Entry entry() {
        const Token& first = peek();
        Entry e;
        e.column = first.loc.column;
        if (accept("#")) {
            e.kind = EntryKind::Copy;
            e.copy.immediate = index();
            expect("->");
            auto loc = peek().loc;
            e.copy.destination = ref(ident("destination"), loc);
            return e;
        }
        if (accept("-")) {
            e.kind = EntryKind::Activation;
            e.act.mode = ActivationEntry::Mode::Execute;
            auto loc = peek().loc;
            e.act.instance = ref(ident("meta-module instance"), loc);
            expect("(");
            e.act.line = address();
            expect(")");
            return e;
        }
        if (first.kind != Token::Ident) fail(first, "expected a column entry" + found());
        const std::string word = first.text;
        if (word == "HALT") {
            next();
            e.kind = EntryKind::Control;
            e.ctl.kind = Control::Kind::Halt;
            e.ctl.loc = first.loc;
            return e;
        }
        if (word == "jump") {
            next();
            e.kind = EntryKind::Control;
            e.ctl.kind = Control::Kind::Jump;
            e.ctl.loc = first.loc;
            e.ctl.first = egress();
            return e;
        }
        if (word == "subhalt") {
            next();
            e.kind = EntryKind::Control;
            e.ctl.kind = Control::Kind::Subhalt;
            e.ctl.loc = first.loc;
            expect("(");
            e.ctl.construct = address();
            expect(")");
            return e;
        }
        if (word.rfind("cond_", 0) == 0 && word.size() > 5) {
            next();
            e.kind = EntryKind::Control;
            e.ctl.kind = Control::Kind::Cond;
            e.ctl.loc = first.loc;
            e.ctl.bit = ref(word.substr(5), first.loc);
            e.ctl.first = egress();
            e.ctl.second = egress();
            return e;
        }
        if (word[0] == '_') {
            next();
            e.kind = EntryKind::Activation;
            e.act.instance = ref(strip_underscores(word), first.loc);
            if (e.act.instance.label.empty()) fail(first, "activation without an instance");
            if (accept("(")) {
                e.act.mode = ActivationEntry::Mode::Program;
                e.act.line = address();
                expect(")");
            }
            return e;
        }
        next();
        e.kind = EntryKind::Copy;
        e.copy.source = ref(word, first.loc);
        expect("->");
        auto loc = peek().loc;
        e.copy.destination = ref(ident("destination"), loc);
        return e;
    }

    static void add_entry(Column& c, Entry&& e) {
        switch (e.kind) {
        case EntryKind::Copy: c.copies.push_back(std::move(e.copy)); break;
        case EntryKind::Activation: c.activations.push_back(std::move(e.act)); break;
        case EntryKind::Control: c.controls.push_back(std::move(e.ctl)); break;
        }
    }

    static EntryKind kind_of(const Column& c) {
        if (!c.controls.empty()) return EntryKind::Control;
        if (!c.activations.empty()) return EntryKind::Activation;
        return EntryKind::Copy;
    }

    bool row_end() const {
        return peek().kind == Token::End || at("}") || at_line_start() || at(";;");
    }

    void construct(SpaceAST& ast, const LineAddress& base, SourceLocation loc) {
        Construct c;
        c.loc = loc;
        c.address = address();
        expect(":");
        const Token& kw = peek();
        std::string kind = ident("deep or grow");
        if (kind == "deep") c.kind = Construct::Kind::Deep;
        else if (kind == "grow") c.kind = Construct::Kind::Grow;
        else fail(kw, "unknown construct '" + kind + "'");
        if (!base.within(c.address) || base.parts.size() != c.address.parts.size() + 1)
            throw SyntaxError(loc, "line " + base.to_string() + " cannot attach to construct " + c.address.to_string());
        expect("<");
        c.var = ident("control variable");
        expect("=");
        c.lo = static_cast<std::int64_t>(integer("initial value"));
        expect(";");
        if (ident("control variable") != c.var) fail(peek(), "bound must test the control variable");
        expect("<=");
        c.hi = static_cast<std::int64_t>(integer("bound"));
        expect(";");
        c.step = function();
        expect(">");
        if (at("(")) c.egress = egress();
        if (c.lo > c.hi) throw SyntaxError(loc, "construct bound below its initial value");
        if (c.step != "inc") throw SyntaxError(loc, "construct step '" + c.step + "' is out of subset");
        if (const Construct* prev = ast.find_construct(c.address.head())) {
            if (prev->kind != c.kind || prev->lo != c.lo || prev->hi != c.hi || prev->var != c.var || !(prev->egress == c.egress))
                throw SyntaxError(loc, "conflicting headers for construct " + c.address.to_string());
            return;
        }
        ast.constructs.push_back(std::move(c));
    }

    void code_line(SpaceAST& ast) {
        BaseLine line;
        line.loc = peek().loc;
        line.address = address();
        expect(":");
        if (ast.find_line(line.address)) throw SyntaxError(line.loc, "duplicate line address " + line.address.to_string());
        for (;;) {
            Column col;
            col.loc = peek().loc;
            col.position = peek().loc.column;
            while (!at("::") && !at(":>") && !at(":=") && !at(";;")) {
                if (peek().kind == Token::End || at("}")) fail(peek(), "line " + line.address.to_string() + " lacks ';;'");
                add_entry(col, entry());
            }
            if (col.copies.empty() && col.activations.empty() && col.controls.empty()) fail(peek(), "empty column");
            line.columns.push_back(std::move(col));
            if (!accept("::")) break;
        }
        if (accept(":>") || accept(":=")) construct(ast, line.address, line.loc);
        expect(";;");

        // continuation rows
        std::size_t last = 0;
        while (!row_end()) {
            Entry e = entry();
            std::size_t best = line.columns.size();
            std::size_t best_dist = std::numeric_limits<std::size_t>::max();
            for (std::size_t k = last; k < line.columns.size(); ++k) {
                if (kind_of(line.columns[k]) != e.kind) continue;
                std::size_t pos = line.columns[k].position;
                std::size_t d = pos > e.column ? pos - e.column : e.column - pos;
                if (d < best_dist) best = k, best_dist = d;
            }
            if (best == line.columns.size())
                throw SyntaxError(line.loc, "continuation entry of line " + line.address.to_string() + " matches no column");
            last = best;
            add_entry(line.columns[best], std::move(e));
        }
        ast.lines.push_back(std::move(line));
    }

    void code(SpaceAST& ast) {
        next();
        expect("{");
        while (!accept("}")) {
            if (!at_line_start()) fail(peek(), "expected a line address" + found());
            code_line(ast);
        }
        accept(";");
    }

    static void check_labels(const SpaceAST& ast) {
        std::vector<std::string> seen;
        auto add = [&](const std::string& l, SourceLocation loc) {
            if (std::find(seen.begin(), seen.end(), l) != seen.end()) throw SyntaxError(loc, "duplicate label '" + l + "'");
            seen.push_back(l);
        };
        for (const auto& s : ast.storage) add(s.label, s.loc);
        for (const auto& s : ast.submodules) add(s.label, s.loc);
        for (const auto& l : ast.lines)
            if (!l.address.top_level() && !ast.find_construct(l.address.parts[0]))
                throw SyntaxError(l.loc, "line " + l.address.to_string() + " belongs to no construct");
        for (const auto& c : ast.constructs)
            if (ast.find_line(c.address)) throw SyntaxError(c.loc, "line " + c.address.to_string() + " is both a base line and a construct");
    }
};

} // namespace detail

/// Parses a Space module.
inline SpaceAST parse_space(const std::string& text) { return detail::Parser(detail::lex(text)).module(); }

} // namespace spatiale::space
