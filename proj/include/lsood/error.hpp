#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lsood {

enum class ErrorCode {
    // numerics
    NotPositiveDefinite,
    NotSymmetric,
    DimensionMismatch,
    DegeneratePlane,
    NonFiniteValue,
    // gaussian-ood
    EmptyClass,
    ContainsOodRows,
    UnknownClass,
    // trainer
    EpsilonOutOfRange,
    LabelOutOfRange,
    NonFiniteLoss,
    // bench
    ConfigInvalid,
    TooFewSamples,
    // metrics / viz
    EmptyInput,
    LengthMismatch,
    EmptyGroup,
    DegenerateRange,
    // io
    IoError,
    ParseError,
};

std::string_view to_string(ErrorCode code);

/// Coarse grouping used by the CLI to pick an exit status.
enum class ErrorCategory { Config, Data, Numerical };

ErrorCategory category_of(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace lsood
