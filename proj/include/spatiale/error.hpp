#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace spatiale {

struct SourceLocation {
    std::size_t line = 0;
    std::size_t column = 0;
};

/// Base class for every toolchain (not machine) error.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EncodingError : public Error {
public:
    EncodingError(std::string field, const std::string& what)
        : Error(what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class LoadError : public Error {
public:
    using Error::Error;
};

class SyntaxError : public Error {
public:
    SyntaxError(SourceLocation loc, const std::string& msg)
        : Error("line " + std::to_string(loc.line) + ":" + std::to_string(loc.column) + ": " + msg),
          loc_(loc) {}
    SourceLocation location() const noexcept { return loc_; }

private:
    SourceLocation loc_;
};

class AssemblyError : public Error {
public:
    using Error::Error;
};

class CompileError : public Error {
public:
    using Error::Error;
};

class EvalError : public Error {
public:
    using Error::Error;
};

} // namespace spatiale
