// error.hpp: error kinds raised by the cylres library.
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cylres {

enum class ErrorKind {
    BraggResonance,
    InvalidContour,
    WeightTooSmall,
    DecayTooSlow,
    NearSingular,
    BoundaryZero,
    BoundViolation,
    DenominatorUnderflow,
    NotUpperHalfPlane,
    OutsideWindow,
    InvalidGrid,
    InvalidModel,
    MissingData,
    ConfigError,
};

inline std::string_view to_string(ErrorKind k) noexcept {
    switch (k) {
    case ErrorKind::BraggResonance: return "BraggResonance";
    case ErrorKind::InvalidContour: return "InvalidContour";
    case ErrorKind::WeightTooSmall: return "WeightTooSmall";
    case ErrorKind::DecayTooSlow: return "DecayTooSlow";
    case ErrorKind::NearSingular: return "NearSingular";
    case ErrorKind::BoundaryZero: return "BoundaryZero";
    case ErrorKind::BoundViolation: return "BoundViolation";
    case ErrorKind::DenominatorUnderflow: return "DenominatorUnderflow";
    case ErrorKind::NotUpperHalfPlane: return "NotUpperHalfPlane";
    case ErrorKind::OutsideWindow: return "OutsideWindow";
    case ErrorKind::InvalidGrid: return "InvalidGrid";
    case ErrorKind::InvalidModel: return "InvalidModel";
    case ErrorKind::MissingData: return "MissingData";
    case ErrorKind::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

/// Every failure the library reports carries one of the kinds above so the
/// CLI can map it onto an exit code and a machine-readable record.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace cylres
