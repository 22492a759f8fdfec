#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace stefan {

enum class ErrorKind {
    InvalidArgument,
    ConstraintViolation,
    NumericError,
    SingularSystem,
    SyntaxError,
    DomainError,
    IoError,
};

const char* to_string(ErrorKind kind);

/// Base of every error thrown by the library. The kind mirrors the error
/// categories of the public contracts so callers (and the CLI exit codes)
/// can dispatch without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& what)
        : Error(ErrorKind::InvalidArgument, what) {}
};

class ConstraintViolation : public Error {
public:
    explicit ConstraintViolation(const std::string& what)
        : Error(ErrorKind::ConstraintViolation, what) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what)
        : Error(ErrorKind::NumericError, what) {}
};

/// Raised when a per-level system fails the dominance check or hits a zero
/// pivot. `level` is the time index of the offending step.
class SingularSystem : public Error {
public:
    SingularSystem(int level, const std::string& what)
        : Error(ErrorKind::SingularSystem, what), level_(level) {}

    int level() const noexcept { return level_; }

private:
    int level_;
};

class SyntaxError : public Error {
public:
    SyntaxError(std::size_t offset, std::vector<std::string> expected,
                const std::string& what)
        : Error(ErrorKind::SyntaxError, what),
          offset_(offset), expected_(std::move(expected)) {}

    std::size_t offset() const noexcept { return offset_; }
    const std::vector<std::string>& expected() const noexcept { return expected_; }

private:
    std::size_t offset_;
    std::vector<std::string> expected_;
};

class DomainError : public Error {
public:
    DomainError(std::string function, double argument, const std::string& what)
        : Error(ErrorKind::DomainError, what),
          function_(std::move(function)), argument_(argument) {}

    const std::string& function() const noexcept { return function_; }
    double argument() const noexcept { return argument_; }

private:
    std::string function_;
    double argument_;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::IoError, what) {}
};

}  // namespace stefan
