#pragma once

#include <stdexcept>
#include <string>

namespace homog {

// Error categories map onto CLI exit codes (input-type errors exit with 2).
enum class ErrorKind {
    InvalidParameter,
    Geometry,
    Mesh,
    Solver,
    Input,
    Fit,
    Pole,
    Precondition,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string &what)
        : std::runtime_error(what), m_kind(kind) {}
    ErrorKind kind() const { return m_kind; }
    const char *kind_name() const;

private:
    ErrorKind m_kind;
};

inline const char *Error::kind_name() const {
    switch (m_kind) {
        case ErrorKind::InvalidParameter: return "invalid_parameter";
        case ErrorKind::Geometry:         return "geometry";
        case ErrorKind::Mesh:             return "mesh";
        case ErrorKind::Solver:           return "solver";
        case ErrorKind::Input:            return "input";
        case ErrorKind::Fit:              return "fit";
        case ErrorKind::Pole:             return "pole";
        case ErrorKind::Precondition:     return "precondition";
    }
    return "unknown";
}

} // namespace homog
