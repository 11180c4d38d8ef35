#include "vccnet/errors.hpp"

namespace vccnet {

std::string_view error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::EmptyTrajectory: return "EMPTY_TRAJECTORY";
        case ErrorCode::WindowTooLong: return "WINDOW_TOO_LONG";
        case ErrorCode::BadThreshold: return "BAD_THRESHOLD";
        case ErrorCode::ShapeMismatch: return "SHAPE_MISMATCH";
        case ErrorCode::KTooLarge: return "K_TOO_LARGE";
        case ErrorCode::BadLayer: return "BAD_LAYER";
        case ErrorCode::DivergenceDetected: return "DIVERGENCE_DETECTED";
        case ErrorCode::Validation: return "VALIDATION";
        case ErrorCode::Conflict: return "CONFLICT";
        case ErrorCode::NotFound: return "NOT_FOUND";
        case ErrorCode::Io: return "IO";
        case ErrorCode::Config: return "CONFIG";
    }
    return "UNKNOWN";
}

}  // namespace vccnet
