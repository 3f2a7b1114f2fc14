#pragma once

#include <map>
#include <sstream>
#include <string>

#include "spatiale/earth/ast.hpp"

namespace spatiale::earth {

namespace detail {

using Env = std::map<std::string, std::int64_t>;

inline IntExpr bind_vars(const IntExpr& e, const Env& env) { return e.valid() ? e.substitute(env) : e; }

inline void expand_into(const std::vector<CodeItem>& items, Env& env, std::vector<CodeItem>& out) {
    for (const auto& item : items) {
        if (const auto* ins = std::get_if<Instr>(&item)) {
            Instr c = *ins;
            if (c.label) c.label = bind_vars(*c.label, env);
            c.span = bind_vars(c.span, env);
            c.target.label = bind_vars(c.target.label, env);
            c.operand.code_label = bind_vars(c.operand.code_label, env);
            if (c.operand.bit) c.operand.bit = bind_vars(*c.operand.bit, env);
            out.emplace_back(std::move(c));
            continue;
        }
        const auto& r = std::get<Replicator>(item);
        std::int64_t lo, hi;
        try {
            lo = r.lo.eval(env);
            hi = r.hi.eval(env);
        } catch (const Error& e) {
            throw SyntaxError(r.loc, std::string("replicator bound: ") + e.what());
        }
        if (lo > hi) throw SyntaxError(r.loc, "replicator bounds " + std::to_string(lo) + " > " + std::to_string(hi));
        if (env.count(r.var)) throw SyntaxError(r.loc, "control variable '" + r.var + "' shadows an outer one");
        for (std::int64_t v = lo; v <= hi; ++v) {
            env[r.var] = v;
            expand_into(r.body, env, out);
        }
        env.erase(r.var);
    }
}

} // namespace detail

/// Replaces every replicator with hi-lo+1 copies of its body, substituting the
/// control variable into labels, operands and spans.
inline EarthAST expand_replicators(const EarthAST& ast) {
    EarthAST flat = ast;
    flat.code.clear();
    detail::Env env;
    detail::expand_into(ast.code, env, flat.code);
    return flat;
}

namespace detail {

inline std::string expr_text(const IntExpr& e, bool bracket_if_compound) {
    if (e.is_constant()) return std::to_string(e.eval());
    return bracket_if_compound ? "[" + e.to_string() + "]" : "(" + e.to_string() + ")";
}

inline std::string instr_text(const Instr& ins) {
    std::string s(aram::mnemonic(ins.opcode));
    s += ' ';
    if (ins.opcode == aram::Opcode::Jump) {
        if (ins.target.kind == JumpTarget::Kind::Absolute) s += "@" + std::to_string(ins.target.absolute);
        else s += expr_text(ins.target.label, true);
        return s + ' ' + expr_text(ins.span, false);
    }
    const auto& op = ins.operand;
    switch (op.kind) {
    case BitOperand::Kind::Storage: s += op.storage; break;
    case BitOperand::Kind::CodeLabel: s += expr_text(op.code_label, true); break;
    case BitOperand::Kind::Absolute: s += "@" + std::to_string(op.absolute); break;
    }
    if (op.bit) s += "." + expr_text(*op.bit, false);
    return s;
}

inline void list_items(const std::vector<CodeItem>& items, int depth, std::ostringstream& os) {
    std::string indent(4 * static_cast<std::size_t>(depth), ' ');
    for (const auto& item : items) {
        if (const auto* ins = std::get_if<Instr>(&item)) {
            std::string label = ins->label ? expr_text(*ins->label, true) : "";
            if (label.size() < 4) label.resize(4, ' ');
            else label += ' ';
            os << indent << label << instr_text(*ins) << '\n';
            continue;
        }
        const auto& r = std::get<Replicator>(item);
        os << indent << '<' << expr_text(r.lo, false) << ';' << r.var << ';' << expr_text(r.hi, false) << ">{\n";
        list_items(r.body, depth + 1, os);
        os << indent << "}\n";
    }
}

} // namespace detail

/// Code listing in the left-margin label style, ending with `endc`.
inline std::string format_listing(const EarthAST& ast) {
    std::ostringstream os;
    detail::list_items(ast.code, 0, os);
    os << "    endc\n";
    return os.str();
}

/// Listing with headers, suitable for re-parsing.
inline std::string format_module(const EarthAST& ast) {
    std::ostringstream os;
    os << "NAME: " << ast.name << ";\n";
    const char* kinds[] = {"BITS", "BYTES", "WORDS"};
    for (int k = 0; k < 3; ++k) {
        std::string line;
        for (const auto& s : ast.storage) {
            if (static_cast<int>(s.kind) != k) continue;
            if (!line.empty()) line += ", ";
            line += s.label + " " + std::string(to_string(s.category));
        }
        if (!line.empty()) os << kinds[k] << ": " << line << ";\n";
    }
    if (ast.time) os << "TIME: " << ast.time->first << '-' << ast.time->second << " cycles;\n";
    if (ast.exec_label) os << "EXEC: " << detail::expr_text(*ast.exec_label, true) << ";\n";
    os << '\n' << format_listing(ast);
    return os.str();
}

} // namespace spatiale::earth
