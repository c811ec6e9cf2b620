#include <doctest.h>

#include "elliptica/harmonic.hpp"
#include "elliptica/variational.hpp"

#include <cmath>
#include <random>

using namespace elliptica;

namespace {

std::vector<double> grid(double a, double b, int m) {
  std::vector<double> r;
  for (int i = 0; i < m; ++i) r.push_back(a + (b - a) * i / (m - 1));
  return r;
}

HarmonicSample random_positive_mix(const std::vector<HarmonicSample>& cat, std::mt19937& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::uniform_int_distribution<size_t> pick(0, cat.size() - 1);
  std::vector<double> c;
  std::vector<HarmonicSample> parts;
  for (int k = 0; k < 4; ++k) {
    c.push_back(U(rng) + 0.05);
    parts.push_back(cat[pick(rng)]);
  }
  return combine(c, parts);
}

}  // namespace

TEST_CASE("catalog contents and certificates") {
  auto c2 = harmonic_catalog(2, 6);
  CHECK(c2.size() == 13);
  CHECK(c2[0].name == "const");
  CHECK(c2[0].degree == 0);
  int deg3 = 0;
  for (const auto& s : c2) {
    CHECK(s.certificate <= 1e-9);
    if (s.degree == 3) ++deg3;
  }
  CHECK(deg3 == 2);
  // Re z^3 = x^3 - 3 x y^2
  auto re3 = harmonic_by_name("harmonic:deg3");
  Point x = make_point(0.3, -0.4);
  CHECK(re3(x) == doctest::Approx(0.027 - 3 * 0.3 * 0.16));
  auto c3 = harmonic_catalog(3, 3);
  CHECK(c3.size() == 1 + 2 * 15);
  for (const auto& s : c3) CHECK(s.certificate <= 1e-9);
  CHECK_THROWS_AS(harmonic_catalog(4, 2), Error);
  Polynomial bad(2);
  bad.add({2, 0, 0}, 1.0);
  CHECK_THROWS_AS(from_polynomial("x^2", bad, true), Error);
}

TEST_CASE("polynomial derivatives agree with finite differences") {
  auto s = harmonic_catalog(3, 3)[9];
  Point x = make_point(0.2, -0.1, 0.3);
  CHECK((s.field.grad(x) - fd_gradient(s.field.value, x)).norm() < 1e-8);
  CHECK((s.field.hess(x) - fd_hessian(s.field.value, x)).norm() < 1e-6);
}

TEST_CASE("mean value residuals") {
  ScalarField one;
  one.value = [](const Point&) { return 1.0; };
  CHECK(mean_value_residual(one, make_point(0, 0), 0.5, MeanForm::sphere) < 1e-14);
  auto re2 = harmonic_by_name("re:2");
  for (double r : {0.1, 0.7, 2.0}) CHECK(mean_value_residual(re2, make_point(0, 0), r, MeanForm::sphere) <= 1e-12);
  ScalarField r2;
  r2.value = [](const Point& y) { return y.squaredNorm(); };
  CHECK(mean_value_residual(r2, make_point(0, 0), 0.6, MeanForm::sphere) == doctest::Approx(0.36));
  // ball average of |x|^2 over B(r) in 2D is r^2/2
  CHECK(mean_value_residual(r2, make_point(0, 0), 0.6, MeanForm::ball) == doctest::Approx(0.18));
  for (const auto& s : harmonic_catalog(2, 6))
    for (auto form : {MeanForm::sphere, MeanForm::ball})
      CHECK(mean_value_residual(s, make_point(0.2, -0.1), 0.5, form) <= 1e-10);
  for (const auto& s : harmonic_catalog(3, 3))
    CHECK(mean_value_residual(s, make_point(0.1, 0.0, -0.2), 0.4, MeanForm::ball) <= 1e-10);
  try {
    mean_value_residual(re2, make_point(0.5, 0.5), 0.6, MeanForm::sphere, Domain::unit_square());
    FAIL("expected BallEscapesDomain");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BallEscapesDomain);
  }
}

TEST_CASE("frequency of homogeneous entries equals the degree") {
  auto radii = grid(0.05, 1.0, 20);
  for (const auto& s : harmonic_catalog(2, 6)) {
    auto p = frequency_profile(s, make_point(0, 0), radii);
    if (s.degree == 0) continue;  // H > 0, D = 0
    for (double N : p.N) CHECK(N == doctest::Approx(s.degree).epsilon(1e-8));
  }
  for (const auto& s : harmonic_catalog(3, 3)) {
    if (!s.homogeneous || s.degree == 0) continue;
    auto p = frequency_profile(s, make_point(0, 0, 0), grid(0.1, 1.0, 5));
    for (double N : p.N) CHECK(N == doctest::Approx(s.degree).epsilon(1e-8));
  }
  // u = x1 in the plane: H(r) = pi r^3
  auto x1 = harmonic_by_name("re:1");
  auto p = frequency_profile(x1, make_point(0, 0), {0.5, 1.5});
  CHECK(p.H[0] == doctest::Approx(kPi * 0.125));
  CHECK(p.H[1] == doctest::Approx(kPi * 3.375));
  ScalarField r2;
  r2.value = [](const Point& y) { return y.squaredNorm(); };
  r2.hess = [](const Point&) { return SmallMat(2 * SmallMat::Identity(2, 2)); };
  auto bad = sample_from_field("r2", r2, 2, make_point(0, 0), 1.0);
  try {
    frequency_profile(bad, make_point(0, 0), {0.5});
    FAIL("expected NotHarmonic");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotHarmonic);
  }
}

TEST_CASE("profile invariants on random positive combinations") {
  std::mt19937 rng(21);
  auto cat2 = harmonic_catalog(2, 6);
  auto cat3 = harmonic_catalog(3, 3);
  auto radii = grid(0.05, 1.0, 20);
  for (int t = 0; t < 30; ++t) {
    bool three = t % 3 == 2;
    auto u = random_positive_mix(three ? cat3 : cat2, rng);
    Point xi = three ? make_point(0.1, 0.05, -0.1) : make_point(0.1, -0.2);
    auto p = frequency_profile(u, xi, radii);
    CHECK_FALSE(p.degenerate);
    CHECK(p.max_flux_defect <= 1e-8);
    for (size_t i = 0; i < radii.size(); ++i) {
      CHECK(p.K[i] <= radii[i] * p.H[i] * (1 + 1e-12));
      CHECK(p.D[i] * p.D[i] <= p.L[i] * p.H[i] * (1 + 1e-10));
      if (i > 0) CHECK(p.N[i] >= p.N[i - 1] - 1e-8);
    }
    auto di = derivative_identity_check(u, xi, 0.6);
    CHECK(di.dH_rel <= 1e-5);
    CHECK(di.dD_rel <= 1e-5);
  }
}

TEST_CASE("profile CSV export") {
  auto p = frequency_profile(harmonic_by_name("re:2"), make_point(0, 0), {0.5, 1.0});
  auto csv = p.to_csv();
  CHECK(csv.rfind("r,H,D,K,N,L\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("doubling") {
  for (const auto& s : harmonic_catalog(2, 6)) {
    auto rep = doubling_check(s, make_point(0, 0), 0.2, 0.8);
    CHECK(rep.holds);
    if (s.homogeneous) CHECK(rep.ratio == doctest::Approx(rep.bound).epsilon(1e-6));
    CHECK(rep.ratio == doctest::Approx(std::pow(2.0, 2 + 2 * s.degree)).epsilon(1e-8));
  }
  auto mix = combine({1.0, 1.0}, {harmonic_by_name("const"), harmonic_by_name("re:1")});
  auto rep = doubling_check(mix, make_point(0, 0), 0.1, 0.5);
  CHECK(rep.holds);
  CHECK(rep.ratio < rep.bound);
  CHECK_THROWS_AS(doubling_check(mix, make_point(0, 0), 0.3, 0.5), Error);
}

TEST_CASE("three-sphere log-convexity") {
  for (const auto& s : harmonic_catalog(2, 6)) {
    auto rep = three_sphere_check(s, make_point(0, 0), 0.1, 0.3, 0.9);
    CHECK(rep.holds);
    CHECK(std::abs(rep.slack) <= 1e-8);
  }
  auto mix = combine({1.0, 0.3}, {harmonic_by_name("re:1"), harmonic_by_name("re:4")});
  auto rep = three_sphere_check(mix, make_point(0, 0), 0.1, 0.3, 0.9);
  CHECK(rep.holds);
  CHECK(rep.slack > 0);
  // the arithmetic-radius three-ball form fails for homogeneous growth
  auto h = three_sphere_check(harmonic_by_name("re:3"), make_point(0, 0), 0.1, 0.3, 0.9);
  CHECK(h.alpha == doctest::Approx(0.25));
  CHECK(h.three_ball_defect > 0);
}

TEST_CASE("Harnack ratio") {
  ScalarField c;
  c.value = [](const Point&) { return 3.0; };
  CHECK(harnack_ratio(c, 2, make_point(0, 0), 0.1).ratio == doctest::Approx(1.0));
  ScalarField a;
  a.value = [](const Point& x) { return x(0) + 2; };
  auto rep = harnack_ratio(a, 2, make_point(0, 0), 0.25, Domain::disk(make_point(0, 0), 1.5));
  CHECK(rep.ratio == doctest::Approx(9.0 / 7));
  CHECK(rep.holds);
  ScalarField z;
  z.value = [](const Point& x) { return x(0) + 0.5; };
  try {
    harnack_ratio(z, 2, make_point(0, 0), 0.2);
    FAIL("expected NotPositive");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotPositive);
  }
  CHECK_THROWS_AS(harnack_ratio(a, 2, make_point(0, 0), 0.4, Domain::disk(make_point(0, 0), 1.5)), Error);
}

TEST_CASE("vanishing order") {
  auto radii = grid(0.01, 0.1, 10);
  for (int k = 1; k <= 5; ++k)
    CHECK(vanishing_order(harmonic_by_name("re:" + std::to_string(k)), make_point(0, 0), radii).order ==
          doctest::Approx(k).epsilon(0.01));
  auto mix = combine({1.0, 1.0}, {harmonic_by_name("const"), harmonic_by_name("re:2")});
  CHECK(std::abs(vanishing_order(mix, make_point(0, 0), radii).order) < 0.05);
  auto zero = combine({0.0}, {harmonic_by_name("re:1")});
  try {
    vanishing_order(zero, make_point(0, 0), radii);
    FAIL("expected DegenerateFit");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateFit);
  }
}

TEST_CASE("Poisson integral on the disk") {
  auto c = make_point(0.3, -0.2);
  CHECK(poisson_disk([](const Point&) { return 2.5; }, c, 0.7, c + make_point(0.2, 0.1)) ==
        doctest::Approx(2.5).epsilon(1e-13));
  auto cosd = [](const Point& y) { return y(0) / y.norm(); };
  for (double r : {0.1, 0.5, 0.9}) {
    double t = 0.7;
    auto x = make_point(r * std::cos(t), r * std::sin(t));
    CHECK(poisson_disk(cosd, make_point(0, 0), 1.0, x) == doctest::Approx(r * std::cos(t)).epsilon(1e-10));
  }
  auto g = [](const Point& y) { return std::exp(y(0)) * std::cos(y(1)); };
  double mean = 0;
  for (int j = 0; j < 512; ++j) {
    double t = 2 * kPi * j / 512;
    mean += g(make_point(std::cos(t), std::sin(t))) / 512;
  }
  CHECK(poisson_disk(g, make_point(0, 0), 1.0, make_point(0, 0)) == doctest::Approx(mean).epsilon(1e-14));
  CHECK_THROWS_AS(poisson_disk(g, make_point(0, 0), 1.0, make_point(1.0, 0)), Error);
}

TEST_CASE("Perron iteration") {
  PerronOptions opt;
  opt.h = 1.0 / 32;
  auto cst = perron_solve(Domain::unit_square(), [](const Point&) { return 0.7; }, opt);
  CHECK(cst.converged);
  CHECK(cst.log.size() == 1);
  CHECK(cst(make_point(0.4, 0.6)) == doctest::Approx(0.7));

  auto re2 = [](const Point& x) { return x(0) * x(0) - x(1) * x(1); };
  opt.h = 1.0 / 64;
  auto disk = perron_solve(Domain::disk(make_point(0, 0), 1.0), re2, opt);
  CHECK(disk.converged);
  for (const auto& s : disk.log) CHECK(s.min_update >= -1e-12);
  double err = 0;
  for (double r : {0.1, 0.3, 0.5, 0.7})
    for (int k = 0; k < 8; ++k) {
      auto x = make_point(r * std::cos(0.4 + k * kPi / 4), r * std::sin(0.4 + k * kPi / 4));
      err = std::max(err, std::abs(disk(x) - re2(x)));
      CHECK(std::abs(poisson_disk(re2, make_point(0, 0), 1.0, x) - re2(x)) < 1e-12);
    }
  CHECK(err <= 1e-3);
  opt.max_sweeps = 3;
  CHECK_THROWS_AS(perron_solve(Domain::disk(make_point(0, 0), 1.0), re2, opt), Error);
}

TEST_CASE("Perron on the L-shape agrees with the finite element solve") {
  PerronOptions opt;
  opt.h = 1.0 / 64;
  auto mesh = build_masked_mesh(Domain::l_shape(), 1.0 / 32);
  for (ScalarFn g : {ScalarFn([](const Point& x) { return x(0); }),
                     ScalarFn([](const Point& x) { return x(0) * x(0); })}) {
    auto p = perron_solve(Domain::l_shape(), g, opt);
    BoundaryConditions bc;
    bc.dirichlet = g;
    auto u = solve(assemble(mesh, laplace(2, Form::divergence), bc, nullptr));
    double err = 0;
    for (double x : {0.1, 0.25, 0.4})
      for (double y : {0.1, 0.3, 0.6, 0.9}) err = std::max(err, std::abs(p(make_point(x, y)) - u(make_point(x, y))));
    CHECK(err <= 1e-3);
  }
}
