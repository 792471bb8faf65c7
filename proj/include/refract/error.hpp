#pragma once

#include <stdexcept>
#include <string>

namespace refract {

/// Failure categories raised by the library. The CLI maps them onto exit codes.
enum class ErrorCode {
    Validation,
    Integrability,
    DegenerateModel,
    Domain,
    NotCompletelyMonotone,
    QuadratureFailure,
    Divergence,
    UnsupportedFamily,
    RepeatedPole,
    NotDifferentiable,
    DegenerateWeights,
};

const char* to_string(ErrorCode code);

/// True for errors caused by bad input rather than by a numerical breakdown.
bool is_input_error(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

} // namespace refract
