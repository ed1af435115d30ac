#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gexp {

enum class ErrorCode {
    InvalidArgument,
    DimensionMismatch,
    NonFiniteValue,
    GridTooCoarse,
    PayoffGrowth,
    ObservationTimeMismatch,
    NonFiniteState,
    GainSingularity,
    BlowUp,
    NoFixedPoint,
    NonUniqueFixedPoint,
    SignConditionFailure,
    Condition39Violation,
    Config,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NonFiniteValue: return "NonFiniteValue";
        case ErrorCode::GridTooCoarse: return "GridTooCoarse";
        case ErrorCode::PayoffGrowth: return "PayoffGrowth";
        case ErrorCode::ObservationTimeMismatch: return "ObservationTimeMismatch";
        case ErrorCode::NonFiniteState: return "NonFiniteState";
        case ErrorCode::GainSingularity: return "GainSingularity";
        case ErrorCode::BlowUp: return "BlowUp";
        case ErrorCode::NoFixedPoint: return "NoFixedPoint";
        case ErrorCode::NonUniqueFixedPoint: return "NonUniqueFixedPoint";
        case ErrorCode::SignConditionFailure: return "SignConditionFailure";
        case ErrorCode::Condition39Violation: return "Condition39Violation";
        case ErrorCode::Config: return "Config";
    }
    return "Unknown";
}

/// Every library failure is reported through this type; `code()` is stable,
/// the message carries context for humans.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
    if (!cond) throw Error(code, what);
}

}  // namespace gexp
