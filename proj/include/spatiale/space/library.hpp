#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "spatiale/earth/expand.hpp"
#include "spatiale/earth/parser.hpp"
#include "spatiale/space/parser.hpp"

#ifndef SPATIALE_STDLIB_DIR
#define SPATIALE_STDLIB_DIR "lib"
#endif
#ifndef SPATIALE_PROGRAMS_DIR
#define SPATIALE_PROGRAMS_DIR "programs"
#endif

namespace spatiale::space {

/// A library class: Earth source (kept flat) or Space source (kept parsed).
struct LibraryClass {
    enum class Kind { Earth, Space };
    std::string name;
    Kind kind = Kind::Earth;
    std::filesystem::path origin;
    std::shared_ptr<const earth::EarthAST> earth;
    std::shared_ptr<const SpaceAST> space;
};

/// Resolves class names to `<name>.earth` or `<name>.space` along a search path.
/// In-memory sources added with `add` take precedence.
class Library {
public:
    Library() = default;
    explicit Library(std::vector<std::filesystem::path> paths) : paths_(std::move(paths)) {}

    /// The shipped stdlib plus the sample programs.
    static Library standard() {
        return Library({std::filesystem::path(SPATIALE_STDLIB_DIR), std::filesystem::path(SPATIALE_PROGRAMS_DIR)});
    }

    void add_path(std::filesystem::path p) { paths_.push_back(std::move(p)); }
    const std::vector<std::filesystem::path>& paths() const noexcept { return paths_; }

    void add_earth(const std::string& name, const std::string& text) {
        cache_[name] = make_earth(name, text, {});
    }
    void add_space(const std::string& name, const std::string& text) {
        cache_[name] = make_space(name, text, {});
    }

    const LibraryClass& find(const std::string& name) const {
        if (auto it = cache_.find(name); it != cache_.end()) return it->second;
        for (const auto& dir : paths_) {
            for (const char* ext : {".earth", ".space"}) {
                auto file = dir / (name + ext);
                if (!std::filesystem::exists(file)) continue;
                std::ifstream in(file);
                std::stringstream ss;
                ss << in.rdbuf();
                LibraryClass c = std::string(ext) == ".earth" ? make_earth(name, ss.str(), file) : make_space(name, ss.str(), file);
                return cache_.emplace(name, std::move(c)).first->second;
            }
        }
        throw CompileError("library has no class '" + name + "'");
    }

private:
    std::vector<std::filesystem::path> paths_;
    mutable std::map<std::string, LibraryClass> cache_;

    static std::string context(const std::filesystem::path& f, const std::string& name) {
        return f.empty() ? "class " + name : f.string();
    }

    static LibraryClass make_earth(const std::string& name, const std::string& text, const std::filesystem::path& f) {
        LibraryClass c;
        c.name = name;
        c.kind = LibraryClass::Kind::Earth;
        c.origin = f;
        try {
            c.earth = std::make_shared<const earth::EarthAST>(earth::expand_replicators(earth::parse_earth(text)));
        } catch (const Error& e) {
            throw CompileError(context(f, name) + ": " + e.what());
        }
        return c;
    }

    static LibraryClass make_space(const std::string& name, const std::string& text, const std::filesystem::path& f) {
        LibraryClass c;
        c.name = name;
        c.kind = LibraryClass::Kind::Space;
        c.origin = f;
        try {
            c.space = std::make_shared<const SpaceAST>(parse_space(text));
        } catch (const Error& e) {
            throw CompileError(context(f, name) + ": " + e.what());
        }
        return c;
    }
};

} // namespace spatiale::space
