#include "blindspot/error.hpp"

namespace blindspot {

std::string_view to_string(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::Argument: return "argument error";
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Format: return "format error";
    case ErrorKind::Truncation: return "truncation error";
    case ErrorKind::Pairing: return "pairing error";
    case ErrorKind::Corruption: return "corruption error";
    case ErrorKind::Numeric: return "numeric error";
    case ErrorKind::UndefinedStatistic: return "undefined statistic";
    case ErrorKind::Io: return "I/O error";
    case ErrorKind::Dependency: return "dependency error";
    case ErrorKind::Credential: return "credential error";
    case ErrorKind::Transport: return "transport error";
    case ErrorKind::Protocol: return "protocol error";
    }
    return "error";
}

int exit_code_for(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::Validation:
    case ErrorKind::Argument:
    case ErrorKind::Shape:
    case ErrorKind::Pairing:
    case ErrorKind::Dependency:
    case ErrorKind::UndefinedStatistic:
        return 2;
    case ErrorKind::Numeric:
        return 3;
    case ErrorKind::Format:
    case ErrorKind::Truncation:
    case ErrorKind::Corruption:
    case ErrorKind::Io:
        return 4;
    case ErrorKind::Credential:
    case ErrorKind::Transport:
    case ErrorKind::Protocol:
        return 5;
    }
    return 1;
}

} // namespace blindspot
