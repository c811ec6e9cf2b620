#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace elliptica {

// Small fixed-capacity vectors; n is at most 3 everywhere in the library.
using Point = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;
using SmallMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;

enum class ErrorCode {
  InvalidArgument,
  NonPositiveH,
  HExceedsSide,
  NonPositiveRadius,
  PathTooCloseToBoundary,
  TargetUnreachable,
  NotSymmetric,
  NotPositiveDefinite,
  MissingDerivatives,
  FormMismatch,
  UntaggedBoundaryFacet,
  InvalidMesh,
  NonCoerciveForm,
  SingularSystem,
  ConvergenceFailure,
  ZeroVector,
  EmptySubset,
  UnsupportedDimension,
  BallEscapesDomain,
  NotHarmonic,
  NotPositive,
  DegenerateFit,
  PointOnBoundary,
  NonConvergence,
  CoincidentPoints,
  SingularCoefficientMatrix,
  UnresolvedSingularity,
  NontrivialDefect,
  TestFunctionNotSupported,
  InsufficientSamples,
  DegenerateField,
  SupportTouchesBoundary,
  ChainInvalid,
  EmptyCauchyBoundary,
  SingularNormalEquations,
  InsufficientData,
  SubdomainUnresolved,
  ConfigParseError,
  IoError,
};

const char* error_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what),
        code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline Point make_point(double x) {
  Point p(1);
  p << x;
  return p;
}
inline Point make_point(double x, double y) {
  Point p(2);
  p << x, y;
  return p;
}
inline Point make_point(double x, double y, double z) {
  Point p(3);
  p << x, y, z;
  return p;
}

constexpr double kPi = 3.14159265358979323846;

// |S^{n-1}|
double sphere_area(int n);
// |B(0,1)| in R^n
double ball_volume(int n);

}  // namespace elliptica
