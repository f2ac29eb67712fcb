#pragma once

#include <stdexcept>
#include <string>

namespace semidot {

enum class ErrorKind {
    InvalidArgument,
    SizeMismatch,
    NotZeroSum,
    Disconnected,
    NonPositive,
    Infeasible,
    NonConvergence,
    Io,
    Config,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::SizeMismatch: return "size mismatch";
    case ErrorKind::NotZeroSum: return "not zero-sum";
    case ErrorKind::Disconnected: return "disconnected";
    case ErrorKind::NonPositive: return "non-positive density";
    case ErrorKind::Infeasible: return "infeasible";
    case ErrorKind::NonConvergence: return "non-convergence";
    case ErrorKind::Io: return "io";
    case ErrorKind::Config: return "config";
    }
    return "error";
}

} // namespace semidot
