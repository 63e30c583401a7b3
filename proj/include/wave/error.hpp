#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wave {

enum class ErrorCode {
    InvalidArgument,
    BadExtent,
    AnchorNotOnGrid,
    ShapeMismatch,
    MaxItersExceeded,
    LinearSolveFailed,
    StepUnderflow,
    NegativeSpeed,
    BracketNotFound,
    StepCollapse,
    ParameterNotMonotone,
    ExtentTooSmall,
    WrongFamily,
    ThresholdNotCrossed,
    NoRoot,
    WindowEmpty,
    GridMismatch,
    DomainError,
    SchemaMismatch,
    ConfigHashMismatch,
    Validation,
    Io,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::BadExtent: return "BadExtent";
    case ErrorCode::AnchorNotOnGrid: return "AnchorNotOnGrid";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::MaxItersExceeded: return "MaxItersExceeded";
    case ErrorCode::LinearSolveFailed: return "LinearSolveFailed";
    case ErrorCode::StepUnderflow: return "StepUnderflow";
    case ErrorCode::NegativeSpeed: return "NegativeSpeed";
    case ErrorCode::BracketNotFound: return "BracketNotFound";
    case ErrorCode::StepCollapse: return "StepCollapse";
    case ErrorCode::ParameterNotMonotone: return "ParameterNotMonotone";
    case ErrorCode::ExtentTooSmall: return "ExtentTooSmall";
    case ErrorCode::WrongFamily: return "WrongFamily";
    case ErrorCode::ThresholdNotCrossed: return "ThresholdNotCrossed";
    case ErrorCode::NoRoot: return "NoRoot";
    case ErrorCode::WindowEmpty: return "WindowEmpty";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::ConfigHashMismatch: return "ConfigHashMismatch";
    case ErrorCode::Validation: return "Validation";
    case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace wave
