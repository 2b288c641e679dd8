#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace blindspot {

enum class ErrorKind {
    Validation,
    Argument,
    Shape,
    Format,
    Truncation,
    Pairing,
    Corruption,
    Numeric,
    UndefinedStatistic,
    Io,
    Dependency,
    Credential,
    Transport,
    Protocol,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library. The kind decides the CLI exit code.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// 0 success, 2 validation, 3 numeric failure, 4 I/O, 5 external service.
int exit_code_for(ErrorKind kind) noexcept;

} // namespace blindspot
