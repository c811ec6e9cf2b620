#include "elliptica/core.hpp"

namespace elliptica {

const char* error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonPositiveH: return "NonPositiveH";
    case ErrorCode::HExceedsSide: return "HExceedsSide";
    case ErrorCode::NonPositiveRadius: return "NonPositiveRadius";
    case ErrorCode::PathTooCloseToBoundary: return "PathTooCloseToBoundary";
    case ErrorCode::TargetUnreachable: return "TargetUnreachable";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::MissingDerivatives: return "MissingDerivatives";
    case ErrorCode::FormMismatch: return "FormMismatch";
    case ErrorCode::UntaggedBoundaryFacet: return "UntaggedBoundaryFacet";
    case ErrorCode::InvalidMesh: return "InvalidMesh";
    case ErrorCode::NonCoerciveForm: return "NonCoerciveForm";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::EmptySubset: return "EmptySubset";
    case ErrorCode::UnsupportedDimension: return "UnsupportedDimension";
    case ErrorCode::BallEscapesDomain: return "BallEscapesDomain";
    case ErrorCode::NotHarmonic: return "NotHarmonic";
    case ErrorCode::NotPositive: return "NotPositive";
    case ErrorCode::DegenerateFit: return "DegenerateFit";
    case ErrorCode::PointOnBoundary: return "PointOnBoundary";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::CoincidentPoints: return "CoincidentPoints";
    case ErrorCode::SingularCoefficientMatrix: return "SingularCoefficientMatrix";
    case ErrorCode::UnresolvedSingularity: return "UnresolvedSingularity";
    case ErrorCode::NontrivialDefect: return "NontrivialDefect";
    case ErrorCode::TestFunctionNotSupported: return "TestFunctionNotSupported";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::DegenerateField: return "DegenerateField";
    case ErrorCode::SupportTouchesBoundary: return "SupportTouchesBoundary";
    case ErrorCode::ChainInvalid: return "ChainInvalid";
    case ErrorCode::EmptyCauchyBoundary: return "EmptyCauchyBoundary";
    case ErrorCode::SingularNormalEquations: return "SingularNormalEquations";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::SubdomainUnresolved: return "SubdomainUnresolved";
    case ErrorCode::ConfigParseError: return "ConfigParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

double sphere_area(int n) {
  switch (n) {
    case 1: return 2.0;
    case 2: return 2.0 * kPi;
    case 3: return 4.0 * kPi;
    default: throw Error(ErrorCode::UnsupportedDimension, "n must be 1, 2 or 3");
  }
}

double ball_volume(int n) { return sphere_area(n) / n; }

}  // namespace elliptica
