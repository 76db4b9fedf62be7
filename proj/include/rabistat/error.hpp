#pragma once

#include <stdexcept>
#include <string>

namespace rabistat {

enum class ErrorCode {
    InvalidDimension,
    DimensionMismatch,
    InvalidParams,
    NonHermitian,
    EigensolverFailure,
    UndefinedStatistics,
    AmbiguousSteadyState,
    NonStationary,
    Stiffness,
    ZeroTransition,
    WindowTooShort,
    Config,
};

const char* to_string(ErrorCode code) noexcept;

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace rabistat
