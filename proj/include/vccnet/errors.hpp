#ifndef VCCNET_ERRORS_HPP
#define VCCNET_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace vccnet {

enum class ErrorCode {
    EmptyTrajectory,
    WindowTooLong,
    BadThreshold,
    ShapeMismatch,
    KTooLarge,
    BadLayer,
    DivergenceDetected,
    Validation,
    Conflict,
    NotFound,
    Io,
    Config,
};

/// Stable machine-readable name, e.g. "EMPTY_TRAJECTORY".
std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace vccnet

#endif  // VCCNET_ERRORS_HPP
