#pragma once

#include <sstream>
#include <string>

#include "spatiale/space/synth.hpp"

namespace spatiale::space {

namespace detail {

inline std::string violations_text(const std::string& module, const CoactivityReport& co) {
    std::string s = "module " + module + " breaks the co-activity rules:";
    for (const auto& v : co.violations) s += "\n  " + v.to_string();
    return s;
}

inline Built build_space(const SpaceAST& source, const Library& lib, const CompileOptions& opt, Address base,
                         std::vector<std::string>& stack) {
    SpaceAST ast = apply_scale(source, opt.scale);
    CoactivityReport co = check_coactivity(ast);
    if (!co.ok()) throw CompileError(violations_text(ast.name, co));
    ExpandedProgram prog = expand_constructs(ast);
    stack.push_back(ast.name);
    Built b = Synth(ast, prog, co, lib, opt).build(base, stack);
    stack.pop_back();
    b.coactivity = std::move(co);
    return b;
}

inline std::string format_report(const SpaceAST& ast, const ExpandedProgram& prog, const Built& b) {
    std::ostringstream os;
    const ModuleImage& m = b.image;
    os << "module " << m.name << "\n";
    os << "region " << m.base << ".." << m.end() - 1 << " (" << m.size() << " registers, " << m.code_size << " code)\n";
    os << "lines:\n";
    for (const auto& u : prog.units) {
        os << "  " << u.number;
        switch (u.kind) {
        case Unit::Kind::Base: os << " base"; break;
        case Unit::Kind::Deep: os << " deep, " << u.replicas.size() << " replicas"; break;
        case Unit::Kind::Grow: os << " grow, " << u.grow.size() << " replicas"; break;
        }
        os << '\n';
    }
    os << "states:\n";
    std::istringstream st(format_states(ast, b.coactivity));
    for (std::string line; std::getline(st, line);) os << "  " << line << '\n';
    os << "carry lines: inferred as the member whose exit transfers control\n";
    os << "code spans:\n";
    for (const auto& s : b.spans) os << "  " << s.line << ' ' << s.begin << ".." << s.end - 1 << '\n';
    os << "instances: " << b.instances.size() << '\n';
    for (const auto& i : b.instances) os << "  " << i.path << ' ' << i.cls << ' ' << i.base << ".." << i.end - 1 << '\n';
    return os.str();
}

} // namespace detail

/// parse -> co-activity check -> construct expansion -> elaboration -> synthesis.
inline CompiledProgram compile(const SpaceAST& ast, const Library& lib, const CompileOptions& opt = {}) {
    std::vector<std::string> stack;
    detail::Built b = detail::build_space(ast, lib, opt, opt.base, stack);
    CompiledProgram p;
    SpaceAST scaled = apply_scale(ast, opt.scale);
    p.report = detail::format_report(scaled, expand_constructs(scaled), b);
    p.image = std::move(b.image);
    p.coactivity = std::move(b.coactivity);
    p.spans = std::move(b.spans);
    p.instances = std::move(b.instances);
    p.watches = std::move(b.watches);
    return p;
}

inline CompiledProgram compile_source(const std::string& text, const Library& lib, const CompileOptions& opt = {}) {
    return compile(parse_space(text), lib, opt);
}

/// Fresh machine with the program loaded and its entry marked.
inline aram::MachineState instantiate(const CompiledProgram& p, const aram::MachineConfig& cfg) {
    aram::MachineConfig c = p.machine_config(cfg);
    c.memory_size = std::max<std::uint32_t>(c.memory_size, p.image.end());
    return aram::load_image(p.to_image(), c);
}

} // namespace spatiale::space
