#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "spatiale/earth/assembler.hpp"
#include "spatiale/interlang/interstring.hpp"
#include "spatiale/space/compiler.hpp"

using namespace spatiale;
namespace fs = std::filesystem;

namespace {

struct UserError : Error {
    using Error::Error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UserError("cannot read '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw UserError("cannot write '" + path.string() + "'");
    out << text;
}

std::string ext(const std::string& path) { return fs::path(path).extension().string(); }

struct Common {
    std::uint32_t memory = 1u << 16;
    Address base = 1;
    std::vector<std::string> libs;
    std::optional<unsigned> scale;
    std::string output;
    std::string iface;
    std::vector<std::string> sets;
    bool decimal = false;
    std::uint64_t max_cycles = 10'000'000;
    std::uint64_t from = 0, to = ~std::uint64_t{0};
    bool watch = false;

    aram::MachineConfig machine() const {
        aram::MachineConfig cfg;
        cfg.memory_size = memory;
        return cfg;
    }

    space::Library library() const {
        space::Library lib = space::Library::standard();
        for (const auto& l : libs) lib.add_path(l);
        return lib;
    }
};

/// Everything `run`, `trace` and `disasm` need, whatever the input kind.
struct Loaded {
    aram::Image image;
    InterfaceDescriptor iface;
    bool has_iface = false;
    std::vector<aram::Watch> watches;
    std::map<Address, std::string> symbols;
};

void add_port_symbols(Loaded& l) {
    auto add = [&](Address reg, const std::string& name) {
        auto& s = l.symbols[reg];
        if (s.find(name) == std::string::npos) s += (s.empty() ? "" : "/") + name;
    };
    if (l.iface.busy) add(l.iface.busy->reg, "busy");
    for (const auto& p : l.iface.ports) add(p.reg, p.label);
}

Loaded load(const std::string& path, const Common& c) {
    Loaded l;
    const std::string e = ext(path);
    if (e == ".earth") {
        auto m = earth::assemble(read_file(path), c.base, c.machine());
        l.image = m.to_image();
        l.iface = describe(m);
        l.has_iface = true;
        if (m.busy) l.watches.push_back({m.busy->reg, m.busy->bit, "busy"});
    } else if (e == ".space") {
        space::CompileOptions opt;
        opt.machine = c.machine();
        opt.base = c.base;
        opt.scale = c.scale;
        auto p = space::compile_source(read_file(path), c.library(), opt);
        l.image = p.to_image();
        l.iface = p.descriptor();
        l.has_iface = true;
        l.watches = p.watches;
        for (const auto& s : p.spans) l.symbols[s.begin] = "line " + s.line;
        for (const auto& i : p.instances) l.symbols[i.base] = i.path;
    } else {
        l.image = aram::parse_image(read_file(path));
        std::string iface = c.iface;
        if (iface.empty()) {
            fs::path guess = fs::path(path).replace_extension(".iface");
            if (fs::exists(guess)) iface = guess.string();
        }
        if (!iface.empty()) {
            l.iface = parse_descriptor(read_file(iface));
            l.has_iface = true;
            if (l.iface.busy) l.watches.push_back({l.iface.busy->reg, l.iface.busy->bit, "busy"});
        }
    }
    add_port_symbols(l);
    return l;
}

std::uint64_t parse_value(const std::string& v, bool decimal, const std::string& ctx) {
    std::size_t used = 0;
    std::uint64_t x = 0;
    try {
        x = std::stoull(v, &used, decimal ? 10 : 16);
    } catch (const std::exception&) {
        used = 0;
    }
    if (v.empty() || used != v.size()) throw UserError("bad value in '" + ctx + "'");
    return x;
}

std::vector<std::pair<std::string, std::string>> assignments(const std::vector<std::string>& sets) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& s : sets) {
        std::stringstream ss(s);
        for (std::string a; std::getline(ss, a, ',');) {
            auto eq = a.find('=');
            if (eq == std::string::npos || eq == 0) throw UserError("expected port=value, got '" + a + "'");
            out.emplace_back(a.substr(0, eq), a.substr(eq + 1));
        }
    }
    return out;
}

aram::MachineState prepare(const Loaded& l, const Common& c) {
    aram::MachineConfig cfg = c.machine();
    if (l.has_iface) cfg.initial_marking = {l.iface.entry[0], l.iface.entry[1]};
    if (!l.image.empty()) cfg.memory_size = std::max<std::uint32_t>(cfg.memory_size, l.image.words.rbegin()->first + 1);
    auto s = aram::load_image(l.image, cfg);
    for (const auto& [name, value] : assignments(c.sets)) {
        const auto* p = l.iface.find(name);
        if (!p) throw UserError("no port named '" + name + "'");
        if (p->category != Category::Input && p->category != Category::Ioput) throw UserError("port '" + name + "' is not an input");
        std::uint64_t v = parse_value(value, c.decimal, name + "=" + value);
        if (p->width < 64 && (v >> p->width)) throw UserError("value for '" + name + "' does not fit " + std::to_string(p->width) + " bits");
        write_entry(s, *p, v);
    }
    return s;
}

aram::MachineConfig run_config(const Loaded& l, const aram::MachineState& s) {
    aram::MachineConfig cfg;
    cfg.memory_size = static_cast<std::uint32_t>(s.memory.size());
    if (l.has_iface) cfg.initial_marking = {l.iface.entry[0], l.iface.entry[1]};
    return cfg;
}

std::string value_text(std::uint64_t v, bool decimal) {
    std::ostringstream os;
    if (decimal) os << v;
    else os << std::hex << v;
    return os.str();
}

int report_end(const aram::RunResult& r) {
    if (r.terminator == aram::Terminator::Error) {
        std::cerr << "machine error: " << aram::to_string(r.state.error->kind) << " at cycle " << r.state.error->cycle << '\n';
        std::cout << "error=" << aram::to_string(r.state.error->kind) << '\n';
        return 2;
    }
    return 0;
}

// -- subcommands ---------------------------------------------------------------

int cmd_asm(const std::string& file, const Common& c) {
    auto a = earth::assemble_source(read_file(file), c.base, c.machine());
    for (const auto& w : a.warnings) std::cerr << "warning: " << w << '\n';
    fs::path out = c.output.empty() ? fs::path(file).filename().replace_extension(".img") : fs::path(c.output);
    write_file(out, aram::format_image(a.image.to_image()));
    write_file(fs::path(out).replace_extension(".iface"), format_descriptor(describe(a.image, true)));
    std::cout << "module " << a.image.name << ": " << a.image.code_size << " code words, "
              << a.image.size() - a.image.code_size << " storage registers, base " << a.image.base << '\n';
    std::cout << "wrote " << out.string() << '\n';
    return 0;
}

int cmd_compile(const std::string& file, const Common& c) {
    space::CompileOptions opt;
    opt.machine = c.machine();
    opt.base = c.base;
    opt.scale = c.scale;
    auto p = space::compile_source(read_file(file), c.library(), opt);
    fs::path out = c.output.empty() ? fs::path(file).filename().replace_extension(".img") : fs::path(c.output);
    write_file(out, aram::format_image(p.to_image()));
    write_file(fs::path(out).replace_extension(".iface"), format_descriptor(p.descriptor()));
    write_file(fs::path(out).replace_extension(".report"), p.report);
    std::cout << p.report << "wrote " << out.string() << '\n';
    return 0;
}

int cmd_run(const std::string& file, const Common& c) {
    Loaded l = load(file, c);
    auto s = prepare(l, c);
    aram::RunOptions ro;
    ro.max_cycles = c.max_cycles;
    if (c.watch) ro.watches = l.watches;
    auto cfg = run_config(l, s);
    auto r = aram::run(std::move(s), cfg, ro);
    for (const auto& p : l.iface.ports)
        if (p.category == Category::Output || p.category == Category::Ioput)
            std::cout << p.label << '=' << value_text(read_entry(r.state, p), c.decimal) << '\n';
    std::cout << "cycles=" << r.cycles << '\n';
    std::cout << "status=" << aram::to_string(r.terminator) << '\n';
    for (const auto& h : r.watch_hits) std::cerr << "watch: " << h.name << " set again at cycle " << h.cycle << '\n';
    return report_end(r);
}

int cmd_trace(const std::string& file, const Common& c) {
    Loaded l = load(file, c);
    auto s = prepare(l, c);
    auto cfg = run_config(l, s);
    aram::Stepper st(s.memory.size());
    aram::StepReport rep;
    std::uint64_t n = 0;
    while (s.status == aram::Status::Running && n < c.max_cycles) {
        st.step(s, cfg, &rep);
        ++n;
        if (s.cycle >= c.from && s.cycle <= c.to) std::cout << aram::format_trace_line(s.cycle, rep) << '\n';
        if (s.cycle >= c.to) break;
    }
    if (s.status == aram::Status::Error) {
        std::cerr << "machine error: " << aram::to_string(s.error->kind) << " at cycle " << s.error->cycle << '\n';
        return 2;
    }
    return 0;
}

int cmd_disasm(const std::string& file, const Common& c) {
    Loaded l = load(file, c);
    if (l.image.empty()) return 0;
    Address lo = l.image.words.begin()->first, hi = l.image.words.rbegin()->first + 1;
    if (l.has_iface) lo = std::min(lo, l.iface.code_begin);
    Address from = static_cast<Address>(std::max<std::uint64_t>(lo, c.from));
    Address to = static_cast<Address>(std::min<std::uint64_t>(hi, c.to == ~std::uint64_t{0} ? hi : c.to + 1));
    if (l.has_iface && c.from == 0 && c.to == ~std::uint64_t{0}) to = std::max(l.iface.code_end, from);
    std::cout << aram::disassemble(l.image, c.machine(), from, to, l.symbols);
    return 0;
}

int cmd_expand(const std::string& file, const Common& c) {
    const std::string e = ext(file);
    const std::string text = read_file(file);
    if (e == ".earth") {
        std::cout << earth::format_listing(earth::expand_replicators(earth::parse_earth(text)));
        return 0;
    }
    if (e == ".space") {
        auto ast = space::apply_scale(space::parse_space(text), c.scale);
        std::cout << space::format_expanded(space::expand_constructs(ast));
        return 0;
    }
    auto prog = interlang::parse_program<std::int64_t>(text);
    auto problems = interlang::validate(prog.string, prog.memory.size());
    std::cout << "interstring: " << interlang::format_interstring(prog.string) << '\n';
    std::cout << "validation: " << (problems.empty() ? "ok" : std::to_string(problems.size()) + " problem(s)") << '\n';
    for (const auto& p : problems) std::cout << "  " << p.message << '\n';
    if (!problems.empty()) return 1;
    std::map<std::string, std::int64_t> vars;
    for (const auto& [k, v] : assignments(c.sets)) {
        try {
            vars[k] = std::stoll(v);
        } catch (const std::exception&) {
            throw UserError("bad integer for '" + k + "'");
        }
    }
    auto trace = interlang::eval(prog.string, prog.memory, interlang::integer_semantics(vars));
    std::cout << "memory 0: " << interlang::format_memory(prog.memory) << '\n';
    for (std::size_t k = 0; k < trace.size(); ++k) std::cout << "memory " << k + 1 << ": " << interlang::format_memory(trace[k]) << '\n';
    if (!trace.empty()) std::cout << "result: " << interlang::format_cell(trace.back().cells[0]) << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synchronic A-Ram toolchain: Earth assembler, Space compiler and simulator"};
    app.require_subcommand(1);
    Common c;
    std::string file;
    unsigned scale = 0;

    auto add_machine = [&](CLI::App* s) {
        s->add_option("--memory", c.memory, "Memory size in registers")->check(CLI::PositiveNumber);
    };
    auto add_build = [&](CLI::App* s) {
        s->add_option("--base", c.base, "Link base address");
        s->add_option("--lib", c.libs, "Extra library directory");
        s->add_option("--scale", scale, "Cap deep/grow replicas and array sizes at N")->check(CLI::PositiveNumber);
    };
    auto add_inputs = [&](CLI::App* s) {
        s->add_option("--set", c.sets, "Input assignment port=value (hex unless --decimal)");
        s->add_flag("--decimal", c.decimal, "Read and print values in decimal");
        s->add_option("--iface", c.iface, "Interface descriptor of an image");
        s->add_option("--max-cycles", c.max_cycles, "Cycle budget")->check(CLI::PositiveNumber);
    };

    auto* a = app.add_subcommand("asm", "Assemble an Earth module");
    a->add_option("file", file, "Earth source")->required();
    a->add_option("-o,--output", c.output, "Image path");
    add_machine(a);
    add_build(a);

    auto* k = app.add_subcommand("compile", "Compile a Space module");
    k->add_option("file", file, "Space source")->required();
    k->add_option("-o,--output", c.output, "Image path");
    add_machine(k);
    add_build(k);

    auto* r = app.add_subcommand("run", "Simulate to termination and print outputs");
    r->add_option("file", file, "Image or source")->required();
    r->add_flag("--watch", c.watch, "Report busy or run bits set while already set");
    add_machine(r);
    add_build(r);
    add_inputs(r);

    auto* t = app.add_subcommand("trace", "Print the cycle trace");
    t->add_option("file", file, "Image or source")->required();
    t->add_option("--from", c.from, "First cycle");
    t->add_option("--to", c.to, "Last cycle");
    add_machine(t);
    add_build(t);
    add_inputs(t);

    auto* d = app.add_subcommand("disasm", "List an image");
    d->add_option("file", file, "Image or source")->required();
    d->add_option("--from", c.from, "First address");
    d->add_option("--to", c.to, "Last address");
    d->add_option("--iface", c.iface, "Interface descriptor of an image");
    add_machine(d);
    add_build(d);

    auto* x = app.add_subcommand("expand", "Show an expanded intermediate form");
    x->add_option("file", file, "Earth, Space or interstring source")->required();
    x->add_option("--scale", scale, "Cap deep/grow replicas and array sizes at N")->check(CLI::PositiveNumber);
    x->add_option("--set", c.sets, "Variable values for interstring evaluation");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    if (scale) c.scale = scale;

    try {
        if (*a) return cmd_asm(file, c);
        if (*k) return cmd_compile(file, c);
        if (*r) return cmd_run(file, c);
        if (*t) return cmd_trace(file, c);
        if (*d) return cmd_disasm(file, c);
        if (*x) return cmd_expand(file, c);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
