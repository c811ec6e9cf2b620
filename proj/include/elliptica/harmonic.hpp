#pragma once

#include "elliptica/geometry.hpp"
#include "elliptica/operators.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace elliptica {

// Polynomial in n <= 3 variables with exact derivatives.
class Polynomial {
 public:
  struct Term {
    std::array<int, 3> e{};
    double c = 0.0;
  };

  explicit Polynomial(int n = 2) : n_(n) {}
  int dim() const { return n_; }
  int degree() const;
  const std::vector<Term>& terms() const { return terms_; }

  void add(const std::array<int, 3>& e, double c);
  Polynomial operator+(const Polynomial& o) const;
  Polynomial operator*(double s) const;
  Polynomial derivative(int k) const;
  Polynomial laplacian() const;
  double max_abs_coeff() const;

  double operator()(const Point& x) const;
  ScalarField field() const;

 private:
  int n_;
  std::vector<Term> terms_;
};

struct HarmonicSample {
  std::string name;
  int dim = 2;
  int degree = -1;            // polynomial degree; -1 for general fields
  bool homogeneous = false;   // homogeneous about the origin
  ScalarField field;
  double certificate = 0.0;   // max |Lap u| on the probe set

  double operator()(const Point& x) const { return field.value(x); }
};

// max |trace Hess u| over random probes in B(center, radius).
double harmonic_certificate(const ScalarField& u, int n, const Point& center, double radius,
                            int probes = 100, unsigned seed = 1);

// 2D: 1, Re z^k, Im z^k. 3D: real solid harmonics up to degree min(max_degree, 3)
// plus translated copies.
std::vector<HarmonicSample> harmonic_catalog(int n, int max_degree);
HarmonicSample from_polynomial(const std::string& name, const Polynomial& p, bool homogeneous);
HarmonicSample translate(const HarmonicSample& s, const Point& shift);
HarmonicSample combine(const std::vector<double>& coeffs, const std::vector<HarmonicSample>& parts);
// Wraps an arbitrary field; the certificate is computed on B(center, radius).
HarmonicSample sample_from_field(const std::string& name, const ScalarField& u, int n,
                                 const Point& center, double radius);
// "harmonic:deg3" (Re z^3), "re:k", "im:k", "const" in 2D.
HarmonicSample harmonic_by_name(const std::string& name, int n = 2);

enum class MeanForm { sphere, ball };

// |average over S(xi,r) or B(xi,r) - u(xi)|. The ball average divides by the true volume.
double mean_value_residual(const HarmonicSample& u, const Point& xi, double r, MeanForm form,
                           const std::optional<Domain>& domain = std::nullopt);
double mean_value_residual(const ScalarField& u, const Point& xi, double r, MeanForm form,
                           const std::optional<Domain>& domain = std::nullopt);

struct FrequencyProfile {
  Point center;
  std::vector<double> r, H, D, K, N, L;
  std::vector<double> D_flux;  // int_S u d_nu u, cross-check of D
  double max_flux_defect = 0.0;  // max |D - D_flux| / D
  bool degenerate = false;       // H or K vanished somewhere on the grid

  std::string to_csv() const;
};

FrequencyProfile frequency_profile(const HarmonicSample& u, const Point& xi,
                                   const std::vector<double>& radii,
                                   const std::optional<Domain>& domain = std::nullopt);

struct DerivativeIdentityReport {
  double dH_rel = 0.0;  // |H' - ((n-1)H/r + 2D)| / |H'|
  double dD_rel = 0.0;  // |D' - ((n-2)D/r + 2L)| / |D'|
};
DerivativeIdentityReport derivative_identity_check(const HarmonicSample& u, const Point& xi, double r);

struct DoublingReport {
  double ratio = 0.0;  // K(2r)/K(r)
  double bound = 0.0;  // 2^{2N(rbar)+n}
  double N_rbar = 0.0;
  bool holds = false;
};
DoublingReport doubling_check(const HarmonicSample& u, const Point& xi, double r, double rbar,
                              const std::optional<Domain>& domain = std::nullopt, double tol = 1e-6);

struct ThreeSphereReport {
  double theta = 0.0;
  double lhs = 0.0, rhs = 0.0;  // log-convexity form on H(r)/r^{n-1}
  double slack = 0.0;           // (rhs - lhs)/rhs
  bool holds = false;
  // Arithmetic-radius statements, reported only. Positive defect means violated.
  double alpha = 0.0;
  double three_ball_defect = 0.0;
  double three_sphere_defect = 0.0;
};
ThreeSphereReport three_sphere_check(const HarmonicSample& u, const Point& xi, double r1, double r2,
                                     double r3, const std::optional<Domain>& domain = std::nullopt,
                                     double tol = 1e-8);

// max/min of u over a grid on the closed ball B(xi, r); positivity checked on B(xi, 4r).
struct HarnackReport {
  double ratio = 0.0;
  double bound = 0.0;  // 3^n
  bool holds = false;
};
HarnackReport harnack_ratio(const ScalarField& u, int n, const Point& xi, double r,
                            const std::optional<Domain>& domain = std::nullopt);

struct VanishingOrder {
  double order = 0.0;
  double slope = 0.0;
};
VanishingOrder vanishing_order(const HarmonicSample& u, const Point& xi, const std::vector<double>& radii);

// Poisson integral on the disk B(center, R) from boundary data sampled at m points.
double poisson_disk(const ScalarFn& boundary_data, const Point& center, double R, const Point& x,
                    int m = 512);

struct PerronOptions {
  double h = 1.0 / 64;
  int max_sweeps = 5000;
  double tolerance = 1e-10;  // stop once the largest update falls below this
  bool throw_on_budget = true;
};

struct PerronSweep {
  int sweep = 0;
  double max_update = 0.0;
  double min_update = 0.0;
};

struct PerronResult {
  Point lo;
  double h = 0.0;
  int nx = 0, ny = 0;
  Eigen::MatrixXd values;  // values(i, j) at lo + (i h, j h)
  std::vector<char> active;  // unknown nodes (row-major i * ny + j)
  std::vector<PerronSweep> log;
  bool converged = false;

  double operator()(const Point& x) const;  // bilinear interpolation
  std::string log_csv() const;
};

PerronResult perron_solve(const Domain& domain, const ScalarFn& boundary_data,
                          const PerronOptions& opt = {});

}  // namespace elliptica
