#pragma once

#include "elliptica/core.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace elliptica {

using ScalarFn = std::function<double(const Point&)>;
using VectorFn = std::function<Point(const Point&)>;
using MatrixFn = std::function<SmallMat(const Point&)>;
// dA(x)[k] = d/dx_k A(x)
using MatrixDerivFn = std::function<std::vector<SmallMat>(const Point&)>;

struct Support {
  Point center;
  double radius = 0.0;
};

struct ScalarField {
  ScalarFn value;
  VectorFn grad;  // optional
  MatrixFn hess;  // optional
  int smoothness = -1;  // declared C^k class, -1 = unspecified
  std::optional<Support> support;
  bool allow_fd = true;

  double operator()(const Point& x) const { return value(x); }
  Point gradient(const Point& x) const;
  SmallMat hessian(const Point& x) const;
};

// Central differences with one Richardson step. step <= 0 picks the default:
// eps^(1/3)(1+|x|) for gradients, eps^(1/4)(1+|x|) for Hessians.
Point fd_gradient(const ScalarFn& f, const Point& x, double step = 0.0);
SmallMat fd_hessian(const ScalarFn& f, const Point& x, double step = 0.0);
// Jacobian-free divergence of a vector field.
double fd_divergence(const VectorFn& v, const Point& x, double step = 0.0);

// Smooth bump exp(1 - 1/(1 - s^2)), s = |x - c|/R, equal to 1 at c.
ScalarField bump(const Point& center, double radius);
ScalarField scaled(const ScalarField& f, double a);
ScalarField polynomial_field(int n, std::function<double(const Point&)> f, VectorFn g, MatrixFn h);

enum class Form { divergence, nondivergence };

// Nondivergence: Lu = a^{ij} d_ij u + b^i d_i u + c u.
// Divergence:    Lu = -d_i(a^{ij} d_j u + c^i u) + d^i d_i u + d u.
// Null lower-order slots mean zero.
struct EllipticOperator {
  int dim = 2;
  Form form = Form::nondivergence;
  std::string name;
  MatrixFn A;
  MatrixDerivFn dA;
  VectorFn b;   // nondivergence first order
  ScalarFn c;   // nondivergence zero order
  VectorFn ci;  // divergence c^i
  VectorFn di;  // divergence d^i
  ScalarFn d;   // divergence zero order
  bool constant_principal = false;
  double mu = 1.0;      // declared ellipticity constant
  double alpha = 1.0;   // declared Hoelder exponent
  double lambda = 0.0;  // declared Hoelder constant
  bool allow_fd = true;

  SmallMat coeff(const Point& x) const { return A(x); }
  std::vector<SmallMat> coeff_derivative(const Point& x) const;
  Point first_order(const Point& x) const;  // b (nondivergence) or d^i (divergence)
  double zero_order(const Point& x) const;  // c or d
  bool has_lower_order() const { return b || c || ci || di || d; }
};

EllipticOperator laplace(int n, Form form = Form::nondivergence);
EllipticOperator constant_operator(const SmallMat& A, const Point& b, double c,
                                   Form form = Form::nondivergence);
EllipticOperator diag_operator(double a, double b, Form form = Form::nondivergence);
// (1 + eps sin(pi x1) sin(pi x2)) I in 2D, with analytic derivatives.
EllipticOperator perturbed_identity(double eps, Form form = Form::divergence);
EllipticOperator isotropic(int n, double a_const, Form form);
// Parses "laplace", "diag(a,b)", "perturbed_identity(eps)".
EllipticOperator operator_preset(const std::string& spec, int n, Form form);

// Rewrites a divergence-form operator as N = -L with N in nondivergence form:
// A, b^j = d_i a^{ij} + c^j - d^j, c = d_i c^i - d.
EllipticOperator to_nondivergence(const EllipticOperator& div_op);

struct EllipticityBounds {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double max_asymmetry = 0.0;
};
EllipticityBounds ellipticity_bounds(const EllipticOperator& op, const std::vector<Point>& samples);

double apply_nondiv(const EllipticOperator& op, const ScalarField& u, const Point& x);
double apply_div(const EllipticOperator& op, const ScalarField& u, const Point& x);
// Applies op in its own form.
double apply(const EllipticOperator& op, const ScalarField& u, const Point& x);
// Formal adjoint of op in its own form.
double apply_adjoint(const EllipticOperator& op, const ScalarField& v, const Point& x);

}  // namespace elliptica
