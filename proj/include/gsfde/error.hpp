#pragma once

#include <stdexcept>
#include <string>

namespace gsfde {

enum class ErrorCode {
    InvalidSegment,
    InvalidInitialData,
    InvalidMeasure,
    NotInClass,          // measure lacks the requested exponential moment
    PreconditionViolation,
    InsufficientSample,
    UncertifiableCoefficients,
    InfeasibleEpsilon,
    DivisionDomain,
    DimensionMismatch,
    NumericalBlowup,
    InfeasibleConfiguration,
    ConfigError,
};

const char* to_string(ErrorCode code) noexcept;

/// Base error for the library. Every failure carries a machine-readable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

    ErrorCode code() const noexcept { return code_; }
    /// The message without the code prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

inline const char* to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::InvalidSegment: return "invalid-segment";
    case ErrorCode::InvalidInitialData: return "invalid-initial-data";
    case ErrorCode::InvalidMeasure: return "invalid-measure";
    case ErrorCode::NotInClass: return "not-in-N_m";
    case ErrorCode::PreconditionViolation: return "precondition-violation";
    case ErrorCode::InsufficientSample: return "insufficient-sample";
    case ErrorCode::UncertifiableCoefficients: return "uncertifiable-coefficients";
    case ErrorCode::InfeasibleEpsilon: return "infeasible-epsilon";
    case ErrorCode::DivisionDomain: return "division-domain";
    case ErrorCode::DimensionMismatch: return "dimension-mismatch";
    case ErrorCode::NumericalBlowup: return "numerical-blowup";
    case ErrorCode::InfeasibleConfiguration: return "infeasible-configuration";
    case ErrorCode::ConfigError: return "config-error";
    }
    return "unknown";
}

} // namespace gsfde
