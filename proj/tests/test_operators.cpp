#include <doctest.h>

#include "elliptica/operators.hpp"

#include <cmath>
#include <random>

using namespace elliptica;

namespace {

ScalarField saddle() {
  ScalarField u;
  u.value = [](const Point& x) { return x(0) * x(0) - x(1) * x(1); };
  u.grad = [](const Point& x) { return make_point(2 * x(0), -2 * x(1)); };
  u.hess = [](const Point&) {
    SmallMat H = SmallMat::Zero(2, 2);
    H(0, 0) = 2;
    H(1, 1) = -2;
    return H;
  };
  return u;
}

// smooth non-polynomial probe field without analytic derivatives
ScalarField wavy() {
  ScalarField u;
  u.value = [](const Point& x) { return std::sin(1.3 * x(0)) * std::exp(0.7 * x(1)) + x(0) * x(1) * x(1); };
  return u;
}

Point wavy_grad(const Point& x) {
  return make_point(1.3 * std::cos(1.3 * x(0)) * std::exp(0.7 * x(1)) + x(1) * x(1),
                    0.7 * std::sin(1.3 * x(0)) * std::exp(0.7 * x(1)) + 2 * x(0) * x(1));
}

SmallMat wavy_hess(const Point& x) {
  SmallMat H(2, 2);
  H(0, 0) = -1.69 * std::sin(1.3 * x(0)) * std::exp(0.7 * x(1));
  H(1, 1) = 0.49 * std::sin(1.3 * x(0)) * std::exp(0.7 * x(1)) + 2 * x(0);
  H(0, 1) = H(1, 0) = 0.91 * std::cos(1.3 * x(0)) * std::exp(0.7 * x(1)) + 2 * x(1);
  return H;
}

}  // namespace

TEST_CASE("ellipticity bounds") {
  std::vector<Point> pts;
  for (int i = 0; i <= 10; ++i)
    for (int j = 0; j <= 10; ++j) pts.push_back(make_point(i / 10.0, j / 10.0));
  auto b = ellipticity_bounds(laplace(2), pts);
  CHECK(b.lambda_min == 1.0);
  CHECK(b.lambda_max == 1.0);
  auto d = ellipticity_bounds(diag_operator(2.0, 0.5), pts);
  CHECK(d.lambda_min == doctest::Approx(0.5));
  CHECK(d.lambda_max == doctest::Approx(2.0));
  EllipticOperator var;
  var.dim = 2;
  var.A = [](const Point& x) -> SmallMat { return SmallMat::Identity(2, 2) * (1 + x(0) * x(0)); };
  auto v = ellipticity_bounds(var, pts);
  CHECK(v.lambda_min == doctest::Approx(1.0));
  CHECK(v.lambda_max == doctest::Approx(2.0));
  EllipticOperator bad;
  bad.A = [](const Point&) {
    SmallMat A(2, 2);
    A << 1, 0.5, 0.0, 1;
    return A;
  };
  CHECK_THROWS_AS(ellipticity_bounds(bad, pts), Error);
  EllipticOperator indef;
  indef.A = [](const Point&) {
    SmallMat A(2, 2);
    A << 1, 0, 0, -1;
    return A;
  };
  CHECK_THROWS_AS(ellipticity_bounds(indef, pts), Error);
  CHECK_THROWS_AS(ellipticity_bounds(laplace(2), {}), Error);
}

TEST_CASE("apply_nondiv examples") {
  Point x = make_point(0.3, -0.7);
  CHECK(apply_nondiv(laplace(2), saddle(), x) == doctest::Approx(0.0));
  auto op = constant_operator(SmallMat::Identity(2, 2), Point(), 1.0);
  ScalarField one;
  one.value = [](const Point&) { return 1.0; };
  one.grad = [](const Point& y) { return Point(Point::Zero(y.size())); };
  one.hess = [](const Point& y) { return SmallMat(SmallMat::Zero(y.size(), y.size())); };
  CHECK(apply_nondiv(op, one, x) == doctest::Approx(1.0));
  for (int n = 1; n <= 3; ++n) {
    ScalarField r2;
    r2.value = [](const Point& y) { return y.squaredNorm(); };
    Point y = Point::Constant(n, 0.4);
    CHECK(apply_nondiv(laplace(n), r2, y) == doctest::Approx(2.0 * n).epsilon(1e-7));
  }
  ScalarField no_deriv = wavy();
  no_deriv.allow_fd = false;
  CHECK_THROWS_AS(apply_nondiv(laplace(2), no_deriv, x), Error);
  CHECK_THROWS_AS(apply_nondiv(laplace(2, Form::divergence), saddle(), x), Error);
}

TEST_CASE("apply_div examples") {
  Point x = make_point(0.1, 0.9);
  auto L = laplace(2, Form::divergence);
  CHECK(apply_div(L, saddle(), x) == doctest::Approx(0.0));
  ScalarField sq;
  sq.value = [](const Point& y) { return y(0) * y(0); };
  sq.grad = [](const Point& y) { return make_point(2 * y(0), 0); };
  sq.hess = [](const Point&) {
    SmallMat H = SmallMat::Zero(2, 2);
    H(0, 0) = 2;
    return H;
  };
  CHECK(apply_div(L, sq, x) == doctest::Approx(-2.0));
}

TEST_CASE("constant coefficients: divergence equals minus nondivergence") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> U(-1, 1);
  SmallMat A(2, 2);
  A << 2.0, 0.3, 0.3, 1.0;
  auto nd = constant_operator(A, Point(), 0.0, Form::nondivergence);
  auto dv = constant_operator(A, Point(), 0.0, Form::divergence);
  for (int k = 0; k < 20; ++k) {
    double a = U(rng), b = U(rng), c = U(rng);
    ScalarField u;
    u.value = [=](const Point& y) { return std::sin(a * y(0) + b * y(1)) + c * y(0) * y(1); };
    Point x = make_point(U(rng), U(rng));
    CHECK(std::abs(apply_div(dv, u, x) + apply_nondiv(nd, u, x)) <= 1e-9);
  }
}

TEST_CASE("finite differences match analytic derivatives") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> U(-1, 1);
  ScalarField u = wavy();
  for (int k = 0; k < 20; ++k) {
    Point x = make_point(U(rng), U(rng));
    CHECK((fd_gradient(u.value, x, 1e-4) - wavy_grad(x)).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((fd_hessian(u.value, x, 1e-4) - wavy_hess(x)).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((fd_gradient(u.value, x) - wavy_grad(x)).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((fd_hessian(u.value, x) - wavy_hess(x)).cwiseAbs().maxCoeff() <= 1e-6);
  }
  auto b = bump(make_point(0.5, 0.5), 0.3);
  for (int k = 0; k < 20; ++k) {
    Point x = make_point(0.5 + 0.2 * U(rng), 0.5 + 0.2 * U(rng));
    CHECK((fd_gradient(b.value, x) - b.grad(x)).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((fd_hessian(b.value, x) - b.hess(x)).cwiseAbs().maxCoeff() <= 1e-5);
  }
}

TEST_CASE("perturbed identity and the nondivergence rewrite") {
  auto div_op = perturbed_identity(0.1, Form::divergence);
  CHECK(div_op.mu == doctest::Approx(1.0 / 0.9));
  std::vector<Point> pts;
  for (int i = 0; i <= 20; ++i)
    for (int j = 0; j <= 20; ++j) pts.push_back(make_point(i / 20.0, j / 20.0));
  auto eb = ellipticity_bounds(div_op, pts);
  CHECK(eb.lambda_min == doctest::Approx(1.0));
  CHECK(eb.lambda_max == doctest::Approx(1.1));
  auto nd = to_nondivergence(div_op);
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> U(0.05, 0.95);
  ScalarField u = wavy();
  u.grad = wavy_grad;
  u.hess = wavy_hess;
  for (int k = 0; k < 20; ++k) {
    Point x = make_point(U(rng), U(rng));
    CHECK(apply_nondiv(nd, u, x) == doctest::Approx(-apply_div(div_op, u, x)).epsilon(1e-9));
    // b = grad a for the isotropic divergence operator
    auto dA = div_op.dA(x);
    CHECK(nd.b(x)(0) == doctest::Approx(dA[0](0, 0)));
    CHECK(nd.b(x)(1) == doctest::Approx(dA[1](1, 1)));
  }
  CHECK_THROWS_AS(to_nondivergence(nd), Error);
  auto p = operator_preset("perturbed_identity(0.1)", 2, Form::divergence);
  CHECK(p.A(make_point(0.5, 0.5))(0, 0) == doctest::Approx(1.1));
  auto dg = operator_preset("diag(4,1)", 2, Form::nondivergence);
  CHECK(dg.A(make_point(0, 0))(0, 0) == 4.0);
  CHECK_THROWS_AS(operator_preset("helmholtz", 2, Form::divergence), Error);
}

TEST_CASE("adjoint satisfies the Green identity for compact support") {
  // int (L u) v = int u (L* v) when v has compact support; checked on a grid
  auto div_op = perturbed_identity(0.2, Form::divergence);
  auto nd = to_nondivergence(div_op);
  nd.b = [b = nd.b](const Point& x) -> Point { return b(x) + make_point(0.3 * x(1), -0.2); };
  nd.c = [](const Point& x) { return 0.5 + x(0); };
  auto v = bump(make_point(0.5, 0.5), 0.35);
  ScalarField u = wavy();
  u.grad = wavy_grad;
  u.hess = wavy_hess;
  const int N = 400;
  double lhs = 0, rhs = 0;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      Point x = make_point((i + 0.5) / N, (j + 0.5) / N);
      if ((x - make_point(0.5, 0.5)).norm() >= 0.35) continue;
      lhs += apply_nondiv(nd, u, x) * v(x);
      rhs += u(x) * apply_adjoint(nd, v, x);
    }
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-5));
  // divergence-form adjoint
  div_op.di = [](const Point& x) { return make_point(1.0 + x(1), 0.5); };
  div_op.d = [](const Point&) { return 2.0; };
  double l2 = 0, r2 = 0;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      Point x = make_point((i + 0.5) / N, (j + 0.5) / N);
      if ((x - make_point(0.5, 0.5)).norm() >= 0.35) continue;
      l2 += apply_div(div_op, u, x) * v(x);
      r2 += u(x) * apply_adjoint(div_op, v, x);
    }
  CHECK(l2 == doctest::Approx(r2).epsilon(1e-5));
}
