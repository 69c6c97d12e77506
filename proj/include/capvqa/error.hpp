// Copyright (C) 2026 The capvqa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace capvqa {

/// Failure classes surfaced to the CLI as distinct exit codes.
enum class ErrorCategory { config, data, runtime };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

/// Malformed input document. `line` is 1-based, 0 when unknown.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(ErrorCategory::data, line ? what + " (line " + std::to_string(line) + ")" : what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

class JoinError : public Error {
public:
    explicit JoinError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(ErrorCategory::runtime, what) {}
};

class FusionError : public Error {
public:
    explicit FusionError(const std::string& what) : Error(ErrorCategory::runtime, what) {}
};

class PreconditionError : public Error {
public:
    explicit PreconditionError(const std::string& what) : Error(ErrorCategory::runtime, what) {}
};

class AdapterError : public Error {
public:
    AdapterError(const std::string& adapter, const std::string& what)
        : Error(ErrorCategory::runtime, "adapter '" + adapter + "': " + what), adapter_(adapter) {}

    const std::string& adapter() const noexcept { return adapter_; }

private:
    std::string adapter_;
};

inline int exit_code(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::config: return 2;
        case ErrorCategory::data: return 3;
        case ErrorCategory::runtime: return 4;
    }
    return 4;
}

} // namespace capvqa
