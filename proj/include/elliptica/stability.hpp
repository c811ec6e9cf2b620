#pragma once

#include "elliptica/geometry.hpp"
#include "elliptica/operators.hpp"
#include "elliptica/variational.hpp"

#include <optional>
#include <string>
#include <vector>

namespace elliptica {

// exponential: phi = exp(lambda psi). quadratic: phi = (x_n - 1)^2 + |x'|^2, lambda enters as 1.
struct CarlemanWeight {
  enum class Family { exponential, quadratic };
  Family family = Family::exponential;
  double lambda = 1.0;
  ScalarField psi;  // exponential family only; gradient used when supplied

  double phi(const Point& x) const;
  Point grad_phi(const Point& x) const;
};

// psi = 9 - |x|^2.
CarlemanWeight exponential_weight(double lambda);
CarlemanWeight quadratic_weight();
// 4 / diam^2
double default_tau0(const Domain& domain);

struct CarlemanReport {
  std::vector<double> tau;
  std::vector<double> log_lhs, log_rhs;  // natural logs of both sides
  std::vector<double> ratio;             // RHS / LHS
  double min_grad_psi = 0.0;             // over the support (exponential family)
  double lhs_log_slope = 0.0, rhs_log_slope = 0.0;  // d log / d tau over the grid

  std::string to_csv() const;  // tau,LHS,RHS,ratio
};

// LHS = int (lambda^4 tau^3 phi^3 v^2 + lambda^2 tau phi |grad v|^2) e^{2 tau phi},
// RHS = int (L v)^2 e^{2 tau phi}, over the declared support of v.
CarlemanReport carleman_ratio(const EllipticOperator& op, const ScalarField& v, const CarlemanWeight& weight,
                              const std::vector<double>& taus, const Domain& domain);

struct CaccioppoliReport {
  double grad_inner = 0.0;  // int_{B(k rho)} |grad u|^2
  double u_outer = 0.0;     // int_{B(l rho)} u^2
  double Lu_outer = 0.0;    // int_{B(l rho)} (L u)^2
  double rhs = 0.0;         // u_outer / rho^2 + Lu_outer
  double constant = 0.0;    // rhs / grad_inner, infinite when grad_inner = 0
};
CaccioppoliReport caccioppoli_check(const EllipticOperator& op, const ScalarField& u, const Point& x, double rho,
                                    double k, double l, const Domain& domain);

// ||u||_{L^2(B(c, r))}
double ball_l2_norm(const ScalarField& u, const Point& c, double r);

struct RecursionBound {
  double C = 0.0;      // (2c)^{1/(1-gamma)}
  double bound = 0.0;  // C (eta0 + b)^{gamma^k}
};
RecursionBound recursion_bound(double eta0, double b, double c, double gamma, int k);
// eta_{k+1} = min(1, c (eta_k + b)^gamma), eta_0 given; k + 1 entries.
std::vector<double> recursion_sequence(double eta0, double b, double c, double gamma, int k);

struct PropagationStep {
  Point center;
  double n1 = 0.0, n2 = 0.0, n3 = 0.0;  // norms on B(x_k, r), B(x_k, 2r), B(x_k, 3r)
  double gamma = 0.0;                   // n2 = n3^{1-gamma} n1^gamma
};

struct PropagationReport {
  std::vector<PropagationStep> steps;
  double scale = 0.0;  // M = max_k n3
  double gamma = 0.0;  // exponent used in the recursion
  double c = 1.0;
  double b = 0.0;      // Lu_norm / M
  double eta0 = 0.0;
  double C = 0.0;
  double measured = 0.0;  // ||u||_{B(x_N, r)}
  double bound = 0.0;     // M C (eta0 + b)^{gamma^N}
  bool holds = false;
};

// gamma: supplied exponent, or the smallest per-step fit when absent.
PropagationReport smallness_propagation(const ScalarField& u, const BallChain& chain, const Domain& domain,
                                        double Lu_norm = 0.0, std::optional<double> gamma = std::nullopt);

struct CauchyData {
  ScalarFn u;     // trace on gamma0
  ScalarFn flux;  // outward normal derivative on gamma0
  double delta = 0.0;  // relative L^2(gamma0) noise level
  unsigned seed = 0;
};

struct CauchyOptions {
  double reg_weight = 1e-6;
  double pde_weight = 1.0;
};

struct CauchyInfo {
  double misfit = 0.0;      // weighted L^2(gamma0) trace and flux mismatch of the minimiser
  double noise_norm = 0.0;  // same norm of the injected noise
  double data_norm = 0.0;   // same norm of the clean data
  double h1_norm = 0.0;     // ||u_h||_{H^1}
};

// Least squares over P1 vertex values: trace and flux misfit on the gamma0 facets, the discrete
// Laplacian on interior vertices, and reg_weight ||u||_{H^1}^2.
FemField cauchy_complete(const SimplicialMesh& mesh, const CauchyData& data, const CauchyOptions& opt = {},
                         CauchyInfo* info = nullptr);

struct RegSweep {
  std::vector<double> reg, misfit, h1_norm;
  double noise_norm = 0.0;
  double model_floor = 0.0;  // misfit of the noise-free data at the smallest reg
  int corner = -1;       // L-curve corner: largest curvature of (ln misfit, ln h1_norm)
  int discrepancy = -1;  // largest reg with misfit <= tau sqrt(noise^2 + floor^2), else the smallest misfit
};

// Geometric sweep of reg_weight from reg_max down by factor per step.
RegSweep reg_sweep(const SimplicialMesh& mesh, const CauchyData& data, double reg_max = 1.0, double factor = 0.5,
                   int steps = 40, double tau = 1.5);

enum class Modulus { phi_beta, psi, power };
const char* modulus_name(Modulus m);

struct StabilityFit {
  std::vector<double> deltas, errors;
  Modulus modulus = Modulus::phi_beta;
  double C = 0.0;
  double beta = 0.0;      // exponent of the log modulus, or of the power law
  double residual = 0.0;  // RMS of log(e) - log(fit)
  double power_C = 0.0, power_exponent = 0.0, power_residual = 0.0;
  bool log_beats_power = false;
};

// Phi_beta(s) = |ln s|^{-beta} + s; Psi = Phi_{1/2}.
double phi_beta(double s, double beta);
StabilityFit stability_fit(const std::vector<double>& deltas, const std::vector<double>& errors,
                           Modulus modulus = Modulus::phi_beta);

struct ObservabilityReport {
  std::vector<double> lambda;
  std::vector<double> ratios;    // ||phi||_{L^2(omega)} / ||phi||_{L^2(Omega)}
  std::vector<double> neg_log;   // -ln ratio
  double kappa = 0.0, offset = 0.0, residual = 0.0;  // -ln ratio ~ kappa sqrt(lambda) + offset
  double curvature = 0.0;        // quadratic coefficient of the fit in sqrt(lambda)
  double omega_measure = 0.0;
};

// expected_measure: exact |omega|, compared with the mesh cells assigned to omega (1%).
ObservabilityReport observability_ratio(const AssembledSystem& sys, const Spectrum& spectrum,
                                        const std::function<bool(const Point&)>& in_omega,
                                        std::optional<double> expected_measure = std::nullopt);

}  // namespace elliptica
