#pragma once

#include "elliptica/geometry.hpp"
#include "elliptica/operators.hpp"

#include <Eigen/LU>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace elliptica {

// Levi parametrix H(x,y) = F_n(rho(x,y)) / d(y) of a nondivergence-form operator.
class Parametrix {
 public:
  explicit Parametrix(EllipticOperator op);

  const EllipticOperator& op() const { return op_; }
  int dim() const { return op_.dim; }

  double rho(const Point& x, const Point& y) const;
  double d(const Point& y) const;  // sqrt(det A(y))
  double value(const Point& x, const Point& y) const;
  Point grad(const Point& x, const Point& y) const;     // gradient in x
  SmallMat hess(const Point& x, const Point& y) const;  // Hessian in x

 private:
  struct Frozen {
    SmallMat Ainv;
    double d;
  };
  Frozen frozen(const Point& y) const;
  EllipticOperator op_;
};

// F_n(t): t^{2-n}/((n-2) w_n) for n >= 3, -ln(t)/(2 pi) for n = 2.
double fundamental_profile(int n, double t);
double rho(const EllipticOperator& op, const Point& x, const Point& y);

// K = sum (a^{ij}(x) - a^{ij}(y)) d_ij H + b(x).grad H + c(x) H, equal to L_x H off the diagonal.
double kernel_K(const Parametrix& P, const Point& x, const Point& y);

struct SandwichReport {
  int pairs = 0;
  int checked = 0;    // pairs inside the validity range of the bound
  int violations = 0;
  double worst = 0.0;  // largest relative excess over a bound
};
SandwichReport sandwich_check(const Parametrix& P, const std::vector<std::pair<Point, Point>>& pairs);

using KernelFn = std::function<double(const Point& x, const Point& z)>;

// Quadrature nodes over a domain with positive weights summing to its measure.
struct NodeSet {
  Domain domain = Domain::unit_square();
  Eigen::MatrixXd nodes;  // rows are points
  Eigen::VectorXd weights;
  double spacing = 0.0;   // max nearest-neighbour distance

  int size() const { return static_cast<int>(weights.size()); }
  Point node(int i) const { return nodes.row(i).transpose(); }
  // Affine least-squares interpolation weights of the nearest nodes, evaluated at x.
  std::vector<std::pair<int, double>> local_interpolation(const Point& x, int count = 8) const;
};

// Concentric rings r_k = (k - 1/2) dr about the centre, about 2 pi r_k / dr nodes per ring.
NodeSet disk_nodes(const Point& center, double radius, int rings);
// Cell centres of an m x m grid on a rectangle.
NodeSet grid_nodes(const Domain& rect, int m);

// Smooth cutoff: 1 on [0, 1/2], 0 on [1, inf).
double cutoff(double s);

// Integral of k(x, .) chi(|. - x|/delta) over B(x, delta) in the domain, by polar quadrature.
double local_polar_integral(const KernelFn& k, const Point& x, double delta, const Domain& domain,
                            bool absolute = false);

// Row r with r . sigma ~ int k(x, z) sigma(z) dz for nodal densities sigma.
Eigen::RowVectorXd singular_row(const NodeSet& ns, const KernelFn& k, const Point& x, double delta);

struct KernelGrid {
  std::string id;           // "K", "K_j", "G", or a caller label
  double alpha = 0.0;       // declared exponent: |k| <= C |x-y|^{-n+alpha}
  double delta = 0.0;
  std::shared_ptr<const NodeSet> nodes;
  Eigen::MatrixXd values;   // k(x_i, x_j); diagonal replaced by the average over the node cell
  Eigen::MatrixXd op;       // Nystrom matrix of sigma -> int k(., z) sigma(z) dz
};

// delta <= 0 selects 2 * spacing.
KernelGrid nystrom_assemble(const NodeSet& ns, const KernelFn& k, double alpha, double delta = 0.0,
                            const std::string& id = "K");
KernelGrid iterated_kernel(const KernelGrid& grid, int j);

struct SingularityFit {
  double exponent = 0.0;
  double constant = 0.0;
  double residual = 0.0;  // RMS in log space
  int samples = 0;
};

// RMS over directions of |k(y + r e, y)| on log-spaced r in [rmin, rmax], then a log-log fit.
SingularityFit fit_kernel_exponent(const KernelFn& k, const Point& y, double rmin, double rmax, int count = 16);
// Same fit on the grid column of the node closest to y, binning by distance.
SingularityFit fit_grid_exponent(const KernelGrid& grid, const Point& y, double rmin, double rmax, int bins = 10);

// max over sampled nodes of int_{B(x_i, delta)} |k(x_i, z)| dz.
double near_field_norm(const NodeSet& ns, const KernelFn& k, double delta, int stride = 1);

// Dense LU of I - A with a smallest-singular-value check.
class FredholmSolver {
 public:
  explicit FredholmSolver(const Eigen::MatrixXd& A, double defect_tol = 1e-6);
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
  double sigma_min() const { return sigma_min_; }
  double norm() const { return norm_; }

 private:
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  double sigma_min_ = 0.0;
  double norm_ = 0.0;
};

double spectral_radius_estimate(const Eigen::MatrixXd& A, int iterations = 200);

class FundamentalSolution {
 public:
  FundamentalSolution(const Parametrix& P, const NodeSet& ns, double delta = 0.0);

  const Parametrix& parametrix() const { return P_; }
  const NodeSet& nodes() const { return *nodes_; }
  const KernelGrid& kernel() const { return grid_; }
  bool trivial() const { return trivial_; }  // G == 0
  double sigma_min() const { return solver_ ? solver_->sigma_min() : 1.0; }
  double system_norm() const { return solver_ ? solver_->norm() : 1.0; }

  // G(., y) at the nodes; off-node targets solve one extra column.
  Eigen::VectorXd density(const Point& y) const;
  // G for every node target, one column per node.
  Eigen::MatrixXd density_matrix() const;
  double difference(const Point& x, const Point& y) const;  // F - H
  double operator()(const Point& x, const Point& y) const;

  std::string dump_csv(const Point& y, const std::vector<Point>& xs) const;

 private:
  Parametrix P_;
  std::shared_ptr<const NodeSet> nodes_;
  KernelGrid grid_;
  std::shared_ptr<FredholmSolver> solver_;
  bool trivial_ = false;
  mutable std::vector<std::pair<Point, Eigen::VectorXd>> cache_;
};

struct ParametrixResidual {
  double integral = 0.0;  // int (-P L*phi + L_x P phi)
  double phi_y = 0.0;
  double residual = 0.0;  // |integral - phi(y)|
  double relative = 0.0;  // residual / |phi(y)| (absolute when phi(y) = 0)
};

// phi must carry a support ball inside the domain.
ParametrixResidual verify_parametrix(const Parametrix& P, const ScalarField& phi, const Point& y,
                                     const Domain& domain);
// For F the L_x F term vanishes: integral = -int F L*phi.
ParametrixResidual verify_fundamental(const FundamentalSolution& F, const ScalarField& phi, const Point& y,
                                      const Domain& domain);

struct GrowthReport {
  bool identically_zero = false;
  SingularityFit fit;
};
GrowthReport verify_fundamental_growth(const FundamentalSolution& F, const Point& y, double rmin, double rmax,
                                       int count = 12);

}  // namespace elliptica
