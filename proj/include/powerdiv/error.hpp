#pragma once

#include <stdexcept>
#include <string>

namespace powerdiv {

/// Failure categories. Each one maps to a distinct CLI exit code.
enum class ErrorKind {
    Usage,        // bad arguments, unknown bus or line
    Parse,        // malformed or invalid case data
    Convergence,  // Newton iteration failed
    Refused,      // analysis is meaningless for the given input (near-zero denominator)
    Singular,     // rank-deficient or singular linear system
    Io,           // file could not be read or written
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Usage: return "usage";
        case ErrorKind::Parse: return "parse";
        case ErrorKind::Convergence: return "convergence";
        case ErrorKind::Refused: return "refused";
        case ErrorKind::Singular: return "singular";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

}  // namespace powerdiv
