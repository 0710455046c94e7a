#include "lsood/error.hpp"

namespace lsood {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
        case ErrorCode::NotSymmetric: return "NotSymmetric";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::DegeneratePlane: return "DegeneratePlane";
        case ErrorCode::NonFiniteValue: return "NonFiniteValue";
        case ErrorCode::EmptyClass: return "EmptyClass";
        case ErrorCode::ContainsOodRows: return "ContainsOodRows";
        case ErrorCode::UnknownClass: return "UnknownClass";
        case ErrorCode::EpsilonOutOfRange: return "EpsilonOutOfRange";
        case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::ConfigInvalid: return "ConfigInvalid";
        case ErrorCode::TooFewSamples: return "TooFewSamples";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::EmptyGroup: return "EmptyGroup";
        case ErrorCode::DegenerateRange: return "DegenerateRange";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::ParseError: return "ParseError";
    }
    return "Unknown";
}

ErrorCategory category_of(ErrorCode code) {
    switch (code) {
        case ErrorCode::ConfigInvalid:
        case ErrorCode::EpsilonOutOfRange:
            return ErrorCategory::Config;
        case ErrorCode::NotPositiveDefinite:
        case ErrorCode::NotSymmetric:
        case ErrorCode::DegeneratePlane:
        case ErrorCode::NonFiniteValue:
        case ErrorCode::NonFiniteLoss:
        case ErrorCode::DegenerateRange:
            return ErrorCategory::Numerical;
        default:
            return ErrorCategory::Data;
    }
}

}  // namespace lsood
