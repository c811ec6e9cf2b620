#include <doctest.h>

#include "elliptica/variational.hpp"

#include <cmath>
#include <random>

using namespace elliptica;

namespace {

// eigenvalues of the P1 Dirichlet pencil on a uniform mesh of [0,1]
double p1_eigen_1d(int k, double h) {
  double c = std::cos(k * kPi * h);
  return 6.0 / (h * h) * (1 - c) / (2 + c);
}

double sinsin(const Point& x) { return std::sin(kPi * x(0)) * std::sin(kPi * x(1)); }

}  // namespace

TEST_CASE("Dirichlet Poisson converges at second order") {
  auto op = laplace(2, Form::divergence);
  BoundaryConditions bc;
  auto f = [](const Point& x) { return 2 * kPi * kPi * sinsin(x); };
  double prev = 0;
  for (double h : {1.0 / 8, 1.0 / 16, 1.0 / 32}) {
    auto mesh = build_rect_mesh(Domain::unit_square(), h);
    SolveInfo info;
    auto u = solve(assemble(mesh, op, bc, f), &info);
    CHECK(info.relative_residual < 1e-10);
    double e = l2_error(mesh, u.values(), sinsin);
    if (prev > 0) CHECK(prev / e == doctest::Approx(4.0).epsilon(0.1));
    prev = e;
  }
}

TEST_CASE("nonhomogeneous Dirichlet data reproduces linear functions") {
  auto mesh = build_rect_mesh(Domain::unit_square(), 0.125);
  BoundaryConditions bc;
  bc.dirichlet = [](const Point& x) { return 1 + 2 * x(0) - x(1); };
  auto u = solve(assemble(mesh, laplace(2, Form::divergence), bc, nullptr));
  for (int v = 0; v < mesh.num_vertices(); ++v)
    CHECK(u.values()(v) == doctest::Approx(bc.dirichlet(mesh.vertex(v))).epsilon(1e-12));
  CHECK(u(make_point(0.33, 0.71)) == doctest::Approx(1 + 0.66 - 0.71).epsilon(1e-12));
  CHECK_THROWS_AS(u(make_point(1.5, 0.5)), Error);
}

TEST_CASE("Robin and Neumann data in 1D") {
  // -u'' = -e^x, u = e^x; Robin u' n + u = g at both ends
  auto mesh = build_rect_mesh(Domain::interval(0, 1), 1.0 / 64, {}, BoundaryTag::robin);
  BoundaryConditions bc;
  bc.robin = [](const Point& x) { return x(0) > 0.5 ? 2 * std::exp(1.0) : 0.0; };
  auto f = [](const Point& x) { return -std::exp(x(0)); };
  auto u = solve(assemble(mesh, laplace(1, Form::divergence), bc, f));
  CHECK(l2_error(mesh, u.values(), [](const Point& x) { return std::exp(x(0)); }) < 1e-4);

  // mixed: Dirichlet at 0, Neumann flux u'(1) = e at 1
  auto mm = build_rect_mesh(Domain::interval(0, 1), 1.0 / 64, {{"right", BoundaryTag::neumann}});
  BoundaryConditions mixed;
  mixed.dirichlet = [](const Point&) { return 1.0; };
  mixed.neumann = [](const Point&) { return std::exp(1.0); };
  auto w = solve(assemble(mm, laplace(1, Form::divergence), mixed, f));
  CHECK(w.values()(mm.num_vertices() - 1) == doctest::Approx(std::exp(1.0)).epsilon(1e-4));
}

TEST_CASE("convection terms make the system nonsymmetric and still converge") {
  auto op = laplace(2, Form::divergence);
  op.di = [](const Point&) { return make_point(1.0, 0.5); };
  auto exact = sinsin;
  // -Lap u + d.grad u
  auto f = [](const Point& x) {
    return 2 * kPi * kPi * sinsin(x) + kPi * std::cos(kPi * x(0)) * std::sin(kPi * x(1)) +
           0.5 * kPi * std::sin(kPi * x(0)) * std::cos(kPi * x(1));
  };
  auto mesh = build_rect_mesh(Domain::unit_square(), 1.0 / 32);
  auto sys = assemble(mesh, op, {}, f);
  CHECK_FALSE(sys.symmetric);
  auto u = solve(sys);
  CHECK(l2_error(mesh, u.values(), exact) < 2e-3);
}

TEST_CASE("assembly rejects nondivergence operators") {
  auto mesh = build_rect_mesh(Domain::unit_square(), 0.25);
  try {
    assemble(mesh, laplace(2, Form::nondivergence), {}, nullptr);
    FAIL("expected FormMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::FormMismatch);
  }
}

TEST_CASE("pure Neumann problem is singular and compatibility is reported") {
  auto mesh = build_rect_mesh(Domain::unit_square(), 0.25, {}, BoundaryTag::neumann);
  auto sys = assemble(mesh, laplace(2, Form::divergence), {}, [](const Point&) { return 1.0; });
  CHECK_THROWS_AS(solve(sys), Error);
  CHECK(neumann_compatibility_defect(mesh, [](const Point&) { return 1.0; }, nullptr) ==
        doctest::Approx(1.0));
  CHECK(neumann_compatibility_defect(mesh, [](const Point&) { return 1.0; },
                                     [](const Point&) { return -0.25; }) == doctest::Approx(0.0));
}

TEST_CASE("eigenvalues match the closed-form discrete spectrum in 1D") {
  for (double h : {1.0 / 64, 1.0 / 512}) {
    auto mesh = build_rect_mesh(Domain::interval(0, 1), h);
    auto sys = assemble(mesh, laplace(1, Form::divergence), {}, nullptr);
    auto sp = eigensolve(sys, 5);
    for (int k = 1; k <= 5; ++k)
      CHECK(sp.eigenvalues(k - 1) == doctest::Approx(p1_eigen_1d(k, h)).epsilon(1e-9));
    CHECK(sp.residuals.maxCoeff() <= 1e-8);
    // M-orthonormal
    Eigen::MatrixXd G = sp.vectors.transpose() * (sys.M * sp.vectors);
    CHECK((G - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("unit square eigenvalues and min-max") {
  auto mesh = build_rect_mesh(Domain::unit_square(), 1.0 / 32);
  auto sys = assemble(mesh, laplace(2, Form::divergence), {}, nullptr);
  auto sp = eigensolve(sys, 4);
  CHECK(sp.eigenvalues(0) == doctest::Approx(2 * kPi * kPi).epsilon(0.01));
  CHECK(sp.eigenvalues(1) == doctest::Approx(5 * kPi * kPi).epsilon(0.02));
  CHECK(sp.eigenvalues(2) == doctest::Approx(5 * kPi * kPi).epsilon(0.02));
  CHECK(sp.residuals.maxCoeff() <= 1e-8);
  CHECK(rayleigh(sys, sp.vectors.col(0)) == doctest::Approx(sp.eigenvalues(0)).epsilon(1e-10));
  CHECK_THROWS_AS(rayleigh(sys, Eigen::VectorXd::Zero(sys.num_free())), Error);

  std::mt19937 rng(5);
  std::normal_distribution<double> N;
  std::vector<Eigen::MatrixXd> trials;
  for (int t = 0; t < 10; ++t) {
    Eigen::MatrixXd V(sys.num_free(), 3);
    for (int i = 0; i < V.rows(); ++i)
      for (int j = 0; j < 3; ++j) V(i, j) = N(rng);
    // perturbations of the eigenspace are the sharpest trials
    if (t % 2) V = sp.vectors.leftCols(3) + 1e-3 * V;
    trials.push_back(V);
  }
  auto rep = min_max_check(sys, sp, 3, trials);
  CHECK(rep.trials_bound);
  CHECK(rep.eigen_span_equal);
  for (double v : rep.trial_max) CHECK(v >= rep.lambda_m * (1 - 1e-8));
}

TEST_CASE("Poincare constant of the unit square") {
  auto mesh = build_rect_mesh(Domain::unit_square(), 1.0 / 16);
  auto rep = poincare_constant(mesh, true);
  double exact = 1 / (2 * kPi * kPi);
  CHECK(rep.constant < exact);
  CHECK(rep.constant == doctest::Approx(exact).epsilon(0.03));
  CHECK(rep.extrapolated == doctest::Approx(exact).epsilon(2e-3));
  CHECK(rep.constant <= rep.strip_bound);
  CHECK(rep.strip_bound == doctest::Approx(0.25));

  auto m1 = build_rect_mesh(Domain::interval(0, 1), 1.0 / 64);
  auto r1 = poincare_constant(m1, true);
  CHECK(r1.extrapolated == doctest::Approx(1 / (kPi * kPi)).epsilon(1e-8));
  CHECK(r1.extrapolated <= r1.interval_upper);
}

TEST_CASE("refinement keeps a valid mesh") {
  auto L = build_masked_mesh(Domain::l_shape(), 0.25);
  auto r = refine_mesh(L);
  r.validate();
  CHECK(r.num_cells() == 4 * L.num_cells());
  double area = 0;
  for (int c = 0; c < r.num_cells(); ++c) area += r.cell_measure(c);
  CHECK(area == doctest::Approx(0.75));
}

TEST_CASE("weak maximum principle") {
  auto mesh = build_masked_mesh(Domain::l_shape(), 1.0 / 16);
  auto op = laplace(2, Form::divergence);
  BoundaryConditions bc;
  bc.dirichlet = [](const Point& x) { return -x(0) * x(1); };
  auto u = solve(assemble(mesh, op, bc, [](const Point& x) { return -1 - x(0); }));
  auto rep = weak_max_check(mesh, u.values(), SourceSign::nonpositive);
  CHECK_FALSE(rep.violated);
  CHECK(rep.interior_max <= 1e-9);
  bc.dirichlet = [](const Point& x) { return x(0) * x(0) - x(1) * x(1); };
  auto h = solve(assemble(mesh, op, bc, nullptr));
  auto hr = weak_max_check(mesh, h.values());
  CHECK_FALSE(hr.violated);
  CHECK(hr.upper_margin >= 0);
  CHECK(hr.lower_margin >= 0);
  // a positive source pushes the interior maximum above the boundary maximum
  auto bump_sol = solve(assemble(mesh, op, {}, [](const Point&) { return 10.0; }));
  CHECK(weak_max_check(mesh, bump_sol.values(), SourceSign::nonpositive).violated);
}

TEST_CASE("Poincare-Wirtinger ratio over a subset") {
  auto mesh = build_rect_mesh(Domain::unit_square(), 1.0 / 16);
  auto left = [](const Point& x) { return x(0) < 0.5; };
  std::vector<ScalarFn> trials{[](const Point& x) { return x(0); },
                               [](const Point& x) { return std::cos(kPi * x(0)) + x(1); }};
  auto rep = poincare_wirtinger_check(mesh, left, trials);
  CHECK(rep.subset_measure == doctest::Approx(0.5));
  REQUIRE(rep.ratios.size() == 2);
  // u = x: mean over the left half is 1/4; |x - 1/4|^2 integrates to 7/48
  CHECK(rep.ratios[0] == doctest::Approx(std::sqrt(7.0 / 48)).epsilon(1e-3));
  try {
    poincare_wirtinger_check(mesh, [](const Point& x) { return x(0) > 2; }, trials);
    FAIL("expected EmptySubset");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptySubset);
  }
}

TEST_CASE("field export formats") {
  auto mesh = build_rect_mesh(Domain::unit_square(), 0.5);
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(9, 0, 8);
  auto js = field_to_json(v);
  CHECK(js.rfind("{\"0\":0.0,\"1\":1.0", 0) == 0);
  auto csv = field_to_csv(mesh, v);
  CHECK(csv.rfind("x,y,u\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 10);
  CHECK(csv.find('\r') == std::string::npos);
}
