#include "refract/error.hpp"

namespace refract {

const char* to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::Validation: return "ValidationError";
    case ErrorCode::Integrability: return "IntegrabilityError";
    case ErrorCode::DegenerateModel: return "DegenerateModel";
    case ErrorCode::Domain: return "DomainError";
    case ErrorCode::NotCompletelyMonotone: return "NotCompletelyMonotone";
    case ErrorCode::QuadratureFailure: return "QuadratureFailure";
    case ErrorCode::Divergence: return "DivergenceError";
    case ErrorCode::UnsupportedFamily: return "UnsupportedFamily";
    case ErrorCode::RepeatedPole: return "RepeatedPoleError";
    case ErrorCode::NotDifferentiable: return "NotDifferentiable";
    case ErrorCode::DegenerateWeights: return "DegenerateWeights";
    }
    return "Error";
}

bool is_input_error(ErrorCode code) {
    switch (code) {
    case ErrorCode::Validation:
    case ErrorCode::Integrability:
    case ErrorCode::DegenerateModel:
    case ErrorCode::Domain:
    case ErrorCode::NotCompletelyMonotone:
        return true;
    default:
        return false;
    }
}

} // namespace refract
