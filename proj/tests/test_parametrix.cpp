#include <doctest.h>

#include "elliptica/parametrix.hpp"

#include <cmath>
#include <algorithm>
#include <random>

using namespace elliptica;

namespace {

Point random_point(std::mt19937& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> U(lo, hi);
  Point p(n);
  for (int i = 0; i < n; ++i) p(i) = U(rng);
  return p;
}

EllipticOperator random_constant(std::mt19937& rng, int n) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  SmallMat B(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) B(i, j) = U(rng);
  SmallMat A = B * B.transpose() + 0.5 * SmallMat::Identity(n, n);
  return constant_operator(A, Point(), 0.0);
}

EllipticOperator varying_3d() {
  EllipticOperator op = constant_operator(SmallMat::Identity(3, 3), Point(), 0.0);
  op.constant_principal = false;
  op.A = [](const Point& x) {
    SmallMat A = SmallMat::Identity(3, 3) * (1.0 + 0.2 * std::sin(x(0) + 2 * x(1)));
    A(0, 1) = A(1, 0) = 0.1 * std::cos(x(2));
    return A;
  };
  op.mu = 1.6;
  return op;
}

EllipticOperator perturbed() { return to_nondivergence(perturbed_identity(0.1, Form::divergence)); }

}  // namespace

TEST_CASE("rho and closed-form values") {
  Parametrix P(diag_operator(4.0, 1.0));
  CHECK(P.rho(make_point(1, 0), make_point(0, 0)) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(P.d(make_point(0, 0)) == doctest::Approx(2.0));
  CHECK(rho(diag_operator(4.0, 1.0, Form::divergence), make_point(0, 1), make_point(0, 0)) ==
        doctest::Approx(1.0));

  Parametrix L3(laplace(3));
  Point x = make_point(0.3, -0.2, 0.5), y = make_point(0.1, 0.1, 0.1);
  CHECK(L3.value(x, y) == doctest::Approx(1.0 / (4 * kPi * (x - y).norm())).epsilon(1e-14));
  Parametrix L2(laplace(2));
  Point a = make_point(0.7, 0.1), b = make_point(0.2, 0.4);
  CHECK(L2.value(a, b) == doctest::Approx(-std::log((a - b).norm()) / (2 * kPi)).epsilon(1e-14));
  CHECK(fundamental_profile(3, 2.0) == doctest::Approx(1.0 / (8 * kPi)));
}

TEST_CASE("errors") {
  Parametrix L(laplace(2));
  CHECK_THROWS_AS(L.value(make_point(0.2, 0.2), make_point(0.2, 0.2)), Error);
  try {
    L.grad(make_point(0.2, 0.2), make_point(0.2, 0.2));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CoincidentPoints);
  }
  EllipticOperator degenerate = laplace(2);
  degenerate.A = [](const Point&) {
    SmallMat A = SmallMat::Zero(2, 2);
    A(0, 0) = 1;
    return A;
  };
  Parametrix D(degenerate);
  try {
    D.value(make_point(1, 0), make_point(0, 0));
    FAIL("expected SingularCoefficientMatrix");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularCoefficientMatrix);
  }
  try {
    Parametrix bad(laplace(2, Form::divergence));
    FAIL("expected FormMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::FormMismatch);
  }
}

TEST_CASE("derivatives match finite differences") {
  std::mt19937 rng(3);
  for (int n : {2, 3}) {
    Parametrix P(n == 2 ? perturbed() : varying_3d());
    for (int t = 0; t < 20; ++t) {
      Point x = random_point(rng, n, 0.1, 0.9), y = random_point(rng, n, 0.1, 0.9);
      if ((x - y).norm() < 0.2) continue;
      auto f = [&](const Point& z) { return P.value(z, y); };
      Point g = P.grad(x, y);
      CHECK((g - fd_gradient(f, x)).norm() <= 1e-7 * (1 + g.norm()));
      SmallMat H = P.hess(x, y);
      CHECK((H - fd_hessian(f, x)).norm() <= 1e-4 * (1 + H.norm()));
    }
  }
}

TEST_CASE("frozen operator annihilates the parametrix") {
  std::mt19937 rng(11);
  int pairs = 0;
  double worst = 0;
  for (int t = 0; pairs < 200; ++t) {
    int n = 2 + t % 2;
    EllipticOperator op = t % 4 < 2 ? random_constant(rng, n) : (n == 2 ? perturbed() : varying_3d());
    Parametrix P(op);
    Point x = random_point(rng, n, 0.0, 1.0), y = random_point(rng, n, 0.0, 1.0);
    if ((x - y).norm() < 1e-3) continue;
    SmallMat Ay = op.A(y), H = P.hess(x, y);
    worst = std::max(worst, std::abs(Ay.cwiseProduct(H).sum()) / (Ay.norm() * H.norm()));
    ++pairs;
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("sandwich bounds") {
  std::mt19937 rng(5);
  for (int n : {2, 3}) {
    for (int k = 0; k < 3; ++k) {
      EllipticOperator op = k == 0 ? random_constant(rng, n) : (n == 2 ? perturbed() : varying_3d());
      Parametrix P(op);
      std::vector<std::pair<Point, Point>> pairs;
      for (int t = 0; t < 100; ++t) pairs.emplace_back(random_point(rng, n, 0, 1), random_point(rng, n, 0, 1));
      auto rep = sandwich_check(P, pairs);
      CHECK(rep.pairs == 100);
      CHECK(rep.checked > 0);
      CHECK(rep.violations == 0);
    }
  }
}

TEST_CASE("rho symmetry defect and gradient scaling") {
  Parametrix P(perturbed());
  Point y = make_point(0.3, 0.45), e = make_point(0.6, 0.8);
  double prev = 1e300;
  for (double r : {1e-1, 1e-2, 1e-3, 1e-4}) {
    Point x = y + r * e;
    double defect = std::abs(P.rho(x, y) - P.rho(y, x)) / r;
    CHECK(defect < prev);
    prev = defect;
    double scaled = P.grad(x, y).norm() * r;
    CHECK(scaled <= std::pow(P.op().mu, 3) / (2 * kPi));
  }
  CHECK(prev < 1e-4);
}

TEST_CASE("kernel K") {
  Parametrix C(diag_operator(2.0, 0.5));
  CHECK(kernel_K(C, make_point(0.2, 0.3), make_point(0.7, 0.1)) == 0.0);

  Parametrix P(perturbed());
  KernelFn k = [&](const Point& x, const Point& z) { return kernel_K(P, x, z); };
  auto fit = fit_kernel_exponent(k, make_point(0.25, 0.4), 1e-3, 1e-1);
  CHECK(fit.exponent >= -1.2);
  CHECK(fit.exponent <= -0.8);

  // K agrees with L_x H computed by finite differences
  Point x = make_point(0.6, 0.7), y = make_point(0.3, 0.2);
  auto f = [&](const Point& z) { return P.value(z, y); };
  const auto& op = P.op();
  double lh = op.A(x).cwiseProduct(fd_hessian(f, x)).sum() + op.b(x).dot(fd_gradient(f, x));
  CHECK(kernel_K(P, x, y) == doctest::Approx(lh).epsilon(1e-4));
}

TEST_CASE("node sets, cutoff and interpolation") {
  auto ns = disk_nodes(make_point(0.1, -0.2), 0.5, 10);
  CHECK(ns.weights.sum() == doctest::Approx(kPi * 0.25).epsilon(1e-13));
  for (int i = 0; i < ns.size(); ++i) CHECK(ns.domain.contains(ns.node(i)));
  CHECK(ns.spacing > 0.05);
  CHECK(ns.spacing < 0.1);

  auto g = grid_nodes(Domain::rectangle(make_point(0, 0), make_point(2, 1)), 8);
  CHECK(g.size() == 64);
  CHECK(g.weights.sum() == doctest::Approx(2.0));

  CHECK(cutoff(0.3) == 1.0);
  CHECK(cutoff(1.2) == 0.0);
  CHECK(cutoff(0.75) == doctest::Approx(0.5));
  for (double s = 0.5; s < 1.0; s += 0.01) CHECK(cutoff(s) >= cutoff(s + 0.01));

  Point x = make_point(0.13, -0.07);
  double v = 0;
  for (const auto& [j, lam] : ns.local_interpolation(x)) {
    Point z = ns.node(j);
    v += lam * (2.0 + 3 * z(0) - z(1));
  }
  CHECK(v == doctest::Approx(2.0 + 3 * x(0) - x(1)).epsilon(1e-12));
}

TEST_CASE("singular rows") {
  auto ns = disk_nodes(make_point(0, 0), 1.0, 16);
  KernelFn one = [](const Point&, const Point&) { return 1.0; };
  for (int i : {0, 100, ns.size() - 1}) {
    auto row = singular_row(ns, one, ns.node(i), 0.2);
    CHECK(row.sum() == doctest::Approx(kPi).epsilon(2e-3));
  }
  KernelFn inv = [](const Point& x, const Point& z) { return 1.0 / (x - z).norm(); };
  auto row = singular_row(ns, inv, make_point(0, 0), 0.1);
  CHECK(row.sum() == doctest::Approx(2 * kPi).epsilon(2e-2));
  CHECK(local_polar_integral(inv, make_point(0, 0), 0.3, ns.domain, true) ==
        doctest::Approx(2 * kPi * 0.3).epsilon(1e-12));
  CHECK_THROWS_AS(nystrom_assemble(ns, inv, 1.0, 0.5 * ns.spacing), Error);
}

TEST_CASE("iterated kernels gain integrability") {
  auto ns = disk_nodes(make_point(0, 0), 0.5, 16);
  const Point c = make_point(0, 0);
  const double rmin = 3 * ns.spacing, rmax = 0.15;
  KernelFn strong = [](const Point& x, const Point& z) { return std::pow((x - z).norm(), -1.5); };
  KernelFn weak = [](const Point& x, const Point& z) { return std::pow((x - z).norm(), -0.5); };

  auto gs = nystrom_assemble(ns, strong, 0.5);
  CHECK(fit_grid_exponent(gs, c, rmin, rmax).exponent == doctest::Approx(-1.5).epsilon(0.02));
  auto gs2 = iterated_kernel(gs, 2);
  CHECK(gs2.id == "K_2");
  CHECK(gs2.alpha == 1.0);
  CHECK(fit_grid_exponent(gs2, c, rmin, rmax).exponent == doctest::Approx(-1.0).epsilon(0.2));

  auto gw2 = iterated_kernel(nystrom_assemble(ns, weak, 1.5), 2);
  CHECK(fit_grid_exponent(gw2, c, rmin, rmax).exponent >= -0.1);

  CHECK(iterated_kernel(gs, 1).values == gs.values);
  CHECK_THROWS_AS(iterated_kernel(gs, 0), Error);

  KernelFn inv = [](const Point& x, const Point& z) { return 1.0 / (x - z).norm(); };
  double d = 2 * ns.spacing;
  CHECK(near_field_norm(ns, inv, d, 5) / near_field_norm(ns, inv, d / 2, 5) == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("Fredholm solver") {
  auto ns = disk_nodes(make_point(0, 0), 0.1, 10);
  Parametrix P(constant_operator(SmallMat::Identity(2, 2), Point(), -50.0));
  KernelFn k = [&](const Point& x, const Point& z) { return kernel_K(P, x, z); };
  auto grid = nystrom_assemble(ns, k, 1.0);
  double rho = spectral_radius_estimate(grid.op);
  CHECK(rho < 1.0);
  FredholmSolver S(grid.op);
  Eigen::VectorXd f = grid.values.col(7);
  Eigen::VectorXd term = f, sum = f;
  for (int m = 0; m < 400; ++m) {
    term = grid.op * term;
    sum += term;
  }
  CHECK((S.solve(f) - sum).norm() <= 1e-6 * sum.norm());
  CHECK(S.sigma_min() > 1e-3);

  Eigen::VectorXd w = ns.weights;
  Eigen::MatrixXd defect = Eigen::VectorXd::Ones(w.size()) * (w.transpose() / w.sum());
  try {
    FredholmSolver bad(defect);
    FAIL("expected NontrivialDefect");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NontrivialDefect);
  }
}

TEST_CASE("parametrix residual for the Laplacian") {
  Parametrix L(laplace(2));
  Domain sq = Domain::unit_square();
  auto phi = bump(make_point(0.5, 0.5), 0.3);
  for (const Point& y : {make_point(0.5, 0.5), make_point(0.62, 0.41)}) {
    auto r = verify_parametrix(L, phi, y, sq);
    CHECK(r.relative <= 1e-3);
  }
  auto off = bump(make_point(0.9, 0.5), 0.3);
  try {
    verify_parametrix(L, off, make_point(0.5, 0.5), sq);
    FAIL("expected TestFunctionNotSupported");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TestFunctionNotSupported);
  }
}

TEST_CASE("constant coefficients give F == H") {
  auto ns = disk_nodes(make_point(0.5, 0.5), 0.4, 6);
  FundamentalSolution F(Parametrix(diag_operator(2.0, 1.0)), ns);
  CHECK(F.trivial());
  Point x = make_point(0.6, 0.3), y = make_point(0.5, 0.5);
  CHECK(F.difference(x, y) == 0.0);
  CHECK(F(x, y) == F.parametrix().value(x, y));
  auto g = verify_fundamental_growth(F, y, 2 * ns.spacing, 0.2);
  CHECK(g.identically_zero);
}

TEST_CASE("fundamental solution for a variable operator") {
  auto ns = disk_nodes(make_point(0.5, 0.5), 0.4, 12);
  FundamentalSolution F(Parametrix(perturbed()), ns);
  CHECK_FALSE(F.trivial());
  CHECK(F.sigma_min() > 1e-6 * F.system_norm());
  Point y = make_point(0.5, 0.5);
  auto phi = bump(y, 0.3);
  auto r = verify_fundamental(F, phi, y, ns.domain);
  CHECK(r.relative <= 2e-2);
  auto g = verify_fundamental_growth(F, y, 2 * ns.spacing, 0.2);
  CHECK_FALSE(g.identically_zero);
  CHECK(g.fit.exponent >= -2 + 2 - 0.3);

  // node target: the cached column agrees with the density matrix
  Eigen::MatrixXd G = F.density_matrix();
  CHECK((F.density(ns.node(40)) - G.col(40)).norm() <= 1e-10 * (1 + G.col(40).norm()));

  std::string csv = F.dump_csv(y, {make_point(0.6, 0.5), make_point(0.5, 0.7)});
  CHECK(csv.rfind("x1,x2,y1,y2,H,F,F_minus_H\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}
