#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qdbias {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed line in a text input. Line numbers are 1-based.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class AlignmentError : public Error {
public:
    using Error::Error;
};

enum class FormatErrorKind { bad_magic, bad_header, truncated, duplicate_key, non_finite, dimension_mismatch, io };

const char* to_string(FormatErrorKind kind) noexcept;

/// Failure while reading or writing an embedding file.
class FormatError : public Error {
public:
    FormatError(FormatErrorKind kind, const std::string& what)
        : Error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
    FormatErrorKind kind() const noexcept { return kind_; }

private:
    FormatErrorKind kind_;
};

class DegenerateVectorError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// Synthetic scenario cannot be generated as specified.
class SpecError : public Error {
public:
    using Error::Error;
};

/// Every structural problem found in a run configuration, collected in one pass.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> errors)
        : Error(join(errors)), errors_(std::move(errors)) {}
    const std::vector<std::string>& errors() const noexcept { return errors_; }

private:
    static std::string join(const std::vector<std::string>& errors) {
        std::string out;
        for (const auto& e : errors) {
            if (!out.empty()) out += "; ";
            out += e;
        }
        return out;
    }
    std::vector<std::string> errors_;
};

/// A pipeline stage failed; carries the stage name.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& cause)
        : Error("stage '" + stage + "' failed: " + cause), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

} // namespace qdbias
