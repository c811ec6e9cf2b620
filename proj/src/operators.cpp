#include "elliptica/operators.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <regex>

namespace elliptica {

namespace {

const double kEps = std::numeric_limits<double>::epsilon();

Point zeros(int n) { return Point::Zero(n); }

}  // namespace

Point fd_gradient(const ScalarFn& f, const Point& x, double step) {
  const int n = static_cast<int>(x.size());
  double h = step > 0 ? step : std::cbrt(kEps) * (1 + x.norm());
  auto central = [&](double hh) {
    Point g(n);
    for (int i = 0; i < n; ++i) {
      Point xp = x, xm = x;
      xp(i) += hh;
      xm(i) -= hh;
      g(i) = (f(xp) - f(xm)) / (2 * hh);
    }
    return g;
  };
  Point g1 = central(h), g2 = central(0.5 * h);
  return (4 * g2 - g1) / 3;
}

SmallMat fd_hessian(const ScalarFn& f, const Point& x, double step) {
  const int n = static_cast<int>(x.size());
  double h = step > 0 ? step : std::pow(kEps, 0.25) * (1 + x.norm());
  auto central = [&](double hh) {
    SmallMat H(n, n);
    const double f0 = f(x);
    for (int i = 0; i < n; ++i) {
      Point xp = x, xm = x;
      xp(i) += hh;
      xm(i) -= hh;
      H(i, i) = (f(xp) - 2 * f0 + f(xm)) / (hh * hh);
      for (int j = i + 1; j < n; ++j) {
        Point pp = x, pm = x, mp = x, mm = x;
        pp(i) += hh; pp(j) += hh;
        pm(i) += hh; pm(j) -= hh;
        mp(i) -= hh; mp(j) += hh;
        mm(i) -= hh; mm(j) -= hh;
        H(i, j) = H(j, i) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4 * hh * hh);
      }
    }
    return H;
  };
  SmallMat H1 = central(h), H2 = central(0.5 * h);
  return (4 * H2 - H1) / 3;
}

double fd_divergence(const VectorFn& v, const Point& x, double step) {
  const int n = static_cast<int>(x.size());
  double h = step > 0 ? step : std::cbrt(kEps) * (1 + x.norm());
  auto central = [&](double hh) {
    double s = 0;
    for (int i = 0; i < n; ++i) {
      Point xp = x, xm = x;
      xp(i) += hh;
      xm(i) -= hh;
      s += (v(xp)(i) - v(xm)(i)) / (2 * hh);
    }
    return s;
  };
  return (4 * central(0.5 * h) - central(h)) / 3;
}

Point ScalarField::gradient(const Point& x) const {
  if (grad) return grad(x);
  if (!allow_fd) throw Error(ErrorCode::MissingDerivatives, "no analytic gradient and FD disabled");
  return fd_gradient(value, x);
}

SmallMat ScalarField::hessian(const Point& x) const {
  if (hess) return hess(x);
  if (!allow_fd) throw Error(ErrorCode::MissingDerivatives, "no analytic Hessian and FD disabled");
  return fd_hessian(value, x);
}

ScalarField bump(const Point& center, double radius) {
  if (!(radius > 0)) throw Error(ErrorCode::NonPositiveRadius, "bump radius must be positive");
  const Point c = center;
  const double R2 = radius * radius;
  ScalarField f;
  f.value = [c, R2](const Point& x) {
    double q = 1 - (x - c).squaredNorm() / R2;
    return q > 0 ? std::exp(1 - 1 / q) : 0.0;
  };
  f.grad = [c, R2](const Point& x) -> Point {
    Point y = x - c;
    double q = 1 - y.squaredNorm() / R2;
    if (q <= 0) return zeros(static_cast<int>(x.size()));
    double phi = std::exp(1 - 1 / q);
    return phi * (-2.0 / (R2 * q * q)) * y;
  };
  f.hess = [c, R2](const Point& x) -> SmallMat {
    const int n = static_cast<int>(x.size());
    Point y = x - c;
    double q = 1 - y.squaredNorm() / R2;
    if (q <= 0) return SmallMat::Zero(n, n);
    double phi = std::exp(1 - 1 / q);
    Point g = (-2.0 / (R2 * q * q)) * y;
    SmallMat dg = SmallMat::Identity(n, n) * (-2.0 / (R2 * q * q)) -
                  (8.0 / (R2 * R2 * q * q * q)) * (y * y.transpose());
    return phi * (g * g.transpose() + dg);
  };
  f.smoothness = 1000;
  f.support = Support{c, radius};
  return f;
}

ScalarField scaled(const ScalarField& f, double a) {
  ScalarField g = f;
  g.value = [f, a](const Point& x) { return a * f.value(x); };
  if (f.grad) g.grad = [f, a](const Point& x) -> Point { return a * f.grad(x); };
  if (f.hess) g.hess = [f, a](const Point& x) -> SmallMat { return a * f.hess(x); };
  return g;
}

ScalarField polynomial_field(int, std::function<double(const Point&)> f, VectorFn g, MatrixFn h) {
  ScalarField s;
  s.value = std::move(f);
  s.grad = std::move(g);
  s.hess = std::move(h);
  s.smoothness = 1000;
  return s;
}

std::vector<SmallMat> EllipticOperator::coeff_derivative(const Point& x) const {
  const int n = static_cast<int>(x.size());
  if (constant_principal) return std::vector<SmallMat>(n, SmallMat::Zero(n, n));
  if (dA) return dA(x);
  if (!allow_fd) throw Error(ErrorCode::MissingDerivatives, "coefficient derivatives unavailable");
  std::vector<SmallMat> out(n, SmallMat::Zero(n, n));
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      Point g = fd_gradient([&](const Point& y) { return A(y)(i, j); }, x);
      for (int k = 0; k < n; ++k) out[k](i, j) = out[k](j, i) = g(k);
    }
  return out;
}

Point EllipticOperator::first_order(const Point& x) const {
  const VectorFn& f = form == Form::nondivergence ? b : di;
  return f ? f(x) : zeros(static_cast<int>(x.size()));
}

double EllipticOperator::zero_order(const Point& x) const {
  const ScalarFn& f = form == Form::nondivergence ? c : d;
  return f ? f(x) : 0.0;
}

EllipticOperator constant_operator(const SmallMat& A, const Point& b, double c, Form form) {
  EllipticOperator op;
  op.dim = static_cast<int>(A.rows());
  op.form = form;
  op.name = "constant";
  op.A = [A](const Point&) { return A; };
  op.constant_principal = true;
  Eigen::SelfAdjointEigenSolver<SmallMat> es(A);
  op.mu = std::max(es.eigenvalues().maxCoeff(), 1.0 / es.eigenvalues().minCoeff());
  if (b.size() > 0 && b.norm() > 0) {
    if (form == Form::nondivergence)
      op.b = [b](const Point&) { return b; };
    else
      op.di = [b](const Point&) { return b; };
  }
  if (c != 0) {
    if (form == Form::nondivergence)
      op.c = [c](const Point&) { return c; };
    else
      op.d = [c](const Point&) { return c; };
  }
  return op;
}

EllipticOperator laplace(int n, Form form) {
  EllipticOperator op = constant_operator(SmallMat::Identity(n, n), Point(), 0.0, form);
  op.name = "laplace";
  return op;
}

EllipticOperator diag_operator(double a, double b, Form form) {
  if (!(a > 0 && b > 0)) throw Error(ErrorCode::NotPositiveDefinite, "diag entries must be positive");
  SmallMat A = SmallMat::Zero(2, 2);
  A(0, 0) = a;
  A(1, 1) = b;
  EllipticOperator op = constant_operator(A, Point(), 0.0, form);
  op.name = "diag";
  return op;
}

EllipticOperator isotropic(int n, double a_const, Form form) {
  EllipticOperator op = constant_operator(SmallMat::Identity(n, n) * a_const, Point(), 0.0, form);
  op.name = "isotropic";
  return op;
}

EllipticOperator perturbed_identity(double eps, Form form) {
  if (!(std::abs(eps) < 1)) throw Error(ErrorCode::NotPositiveDefinite, "perturbation must satisfy |eps| < 1");
  EllipticOperator op;
  op.dim = 2;
  op.form = form;
  op.name = "perturbed_identity";
  op.A = [eps](const Point& x) -> SmallMat {
    double a = 1 + eps * std::sin(kPi * x(0)) * std::sin(kPi * x(1));
    return SmallMat::Identity(2, 2) * a;
  };
  op.dA = [eps](const Point& x) {
    double g0 = eps * kPi * std::cos(kPi * x(0)) * std::sin(kPi * x(1));
    double g1 = eps * kPi * std::sin(kPi * x(0)) * std::cos(kPi * x(1));
    return std::vector<SmallMat>{SmallMat::Identity(2, 2) * g0, SmallMat::Identity(2, 2) * g1};
  };
  op.mu = 1.0 / (1.0 - std::abs(eps));
  op.alpha = 1.0;
  op.lambda = std::abs(eps) * kPi * std::sqrt(2.0);
  return op;
}

EllipticOperator operator_preset(const std::string& spec, int n, Form form) {
  std::smatch m;
  static const std::regex diag_re(R"(^\s*diag\(\s*([-+0-9.eE]+)\s*,\s*([-+0-9.eE]+)\s*\)\s*$)");
  static const std::regex pert_re(R"(^\s*perturbed_identity\(\s*([-+0-9.eE]+)\s*\)\s*$)");
  if (spec == "laplace") return laplace(n, form);
  if (std::regex_match(spec, m, diag_re)) {
    if (n != 2) throw Error(ErrorCode::UnsupportedDimension, "diag(a,b) preset is 2D");
    return diag_operator(std::stod(m[1]), std::stod(m[2]), form);
  }
  if (std::regex_match(spec, m, pert_re)) {
    if (n != 2) throw Error(ErrorCode::UnsupportedDimension, "perturbed_identity preset is 2D");
    return perturbed_identity(std::stod(m[1]), form);
  }
  throw Error(ErrorCode::InvalidArgument,
              "unknown operator preset '" + spec + "' (laplace, diag(a,b), perturbed_identity(eps))");
}

namespace {

// m_j = sum_i d_i a^{ij}
Point column_divergence(const EllipticOperator& op, const Point& x) {
  const int n = static_cast<int>(x.size());
  Point m = zeros(n);
  if (op.constant_principal) return m;
  auto dA = op.coeff_derivative(x);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) m(j) += dA[i](i, j);
  return m;
}

double vector_div(const VectorFn& v, const Point& x) { return v ? fd_divergence(v, x) : 0.0; }

}  // namespace

EllipticOperator to_nondivergence(const EllipticOperator& div_op) {
  if (div_op.form != Form::divergence)
    throw Error(ErrorCode::FormMismatch, "to_nondivergence expects a divergence-form operator");
  EllipticOperator op = div_op;
  op.form = Form::nondivergence;
  op.name = div_op.name + "[nondiv]";
  op.ci = nullptr;
  op.di = nullptr;
  op.d = nullptr;
  const bool first = !div_op.constant_principal || div_op.ci || div_op.di;
  if (first) {
    EllipticOperator src = div_op;
    op.b = [src](const Point& x) -> Point {
      Point b = column_divergence(src, x);
      if (src.ci) b += src.ci(x);
      if (src.di) b -= src.di(x);
      return b;
    };
  }
  if (div_op.ci || div_op.d) {
    EllipticOperator src = div_op;
    op.c = [src](const Point& x) {
      double c = vector_div(src.ci, x);
      if (src.d) c -= src.d(x);
      return c;
    };
  }
  return op;
}

EllipticityBounds ellipticity_bounds(const EllipticOperator& op, const std::vector<Point>& samples) {
  if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "no sample points");
  EllipticityBounds out;
  out.lambda_min = std::numeric_limits<double>::infinity();
  out.lambda_max = -std::numeric_limits<double>::infinity();
  for (const Point& x : samples) {
    SmallMat A = op.A(x);
    double asym = (A - A.transpose()).cwiseAbs().maxCoeff();
    out.max_asymmetry = std::max(out.max_asymmetry, asym);
    if (asym > 1e-12 * std::max(1.0, A.cwiseAbs().maxCoeff()))
      throw Error(ErrorCode::NotSymmetric, "coefficient matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<SmallMat> es(A);
    out.lambda_min = std::min(out.lambda_min, es.eigenvalues().minCoeff());
    out.lambda_max = std::max(out.lambda_max, es.eigenvalues().maxCoeff());
  }
  if (!(out.lambda_min > 0)) throw Error(ErrorCode::NotPositiveDefinite, "coefficient matrix not positive definite");
  return out;
}

double apply_nondiv(const EllipticOperator& op, const ScalarField& u, const Point& x) {
  if (op.form != Form::nondivergence)
    throw Error(ErrorCode::FormMismatch, "apply_nondiv on a divergence-form operator");
  SmallMat A = op.A(x);
  SmallMat H = u.hessian(x);
  double v = (A.array() * H.array()).sum();
  if (op.b) v += op.b(x).dot(u.gradient(x));
  if (op.c) v += op.c(x) * u.value(x);
  return v;
}

double apply_div(const EllipticOperator& op, const ScalarField& u, const Point& x) {
  if (op.form != Form::divergence)
    throw Error(ErrorCode::FormMismatch, "apply_div on a nondivergence-form operator");
  SmallMat A = op.A(x);
  SmallMat H = u.hessian(x);
  Point g = u.gradient(x);
  double flux_div = (A.array() * H.array()).sum() + column_divergence(op, x).dot(g);
  if (op.ci) flux_div += op.ci(x).dot(g) + vector_div(op.ci, x) * u.value(x);
  double v = -flux_div;
  if (op.di) v += op.di(x).dot(g);
  if (op.d) v += op.d(x) * u.value(x);
  return v;
}

double apply(const EllipticOperator& op, const ScalarField& u, const Point& x) {
  return op.form == Form::nondivergence ? apply_nondiv(op, u, x) : apply_div(op, u, x);
}

double apply_adjoint(const EllipticOperator& op, const ScalarField& v, const Point& x) {
  SmallMat A = op.A(x);
  SmallMat H = v.hessian(x);
  Point g = v.gradient(x);
  const double val = v.value(x);
  const double second = (A.array() * H.array()).sum();
  Point m = column_divergence(op, x);
  double div_m = 0.0;
  if (!op.constant_principal) {
    EllipticOperator src = op;
    div_m = fd_divergence([src](const Point& y) { return column_divergence(src, y); }, x);
  }
  if (op.form == Form::nondivergence) {
    // sum d_ij(a^{ij} v) - d_i(b^i v) + c v
    double out = second + 2 * m.dot(g) + div_m * val;
    if (op.b) out += -op.b(x).dot(g) - vector_div(op.b, x) * val;
    if (op.c) out += op.c(x) * val;
    return out;
  }
  // -d_i(a^{ij} d_j v) + c^i d_i v - d_i(d^i v) + d v
  double out = -(second + m.dot(g));
  if (op.ci) out += op.ci(x).dot(g);
  if (op.di) out += -op.di(x).dot(g) - vector_div(op.di, x) * val;
  if (op.d) out += op.d(x) * val;
  return out;
}

}  // namespace elliptica
