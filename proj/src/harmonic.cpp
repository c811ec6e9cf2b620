#include "elliptica/harmonic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <random>
#include <sstream>

namespace elliptica {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double binom(int n, int k) {
  double r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

Polynomial multiply(const Polynomial& a, const Polynomial& b) {
  Polynomial out(a.dim());
  for (const auto& s : a.terms())
    for (const auto& t : b.terms())
      out.add({s.e[0] + t.e[0], s.e[1] + t.e[1], s.e[2] + t.e[2]}, s.c * t.c);
  return out;
}

// Re and Im of (x + i y)^k in n variables
std::pair<Polynomial, Polynomial> complex_power(int n, int k) {
  Polynomial re(n), im(n);
  for (int j = 0; j <= k; ++j) {
    double c = binom(k, j);
    std::array<int, 3> e{k - j, j, 0};
    switch (j % 4) {
      case 0: re.add(e, c); break;
      case 1: im.add(e, c); break;
      case 2: re.add(e, -c); break;
      case 3: im.add(e, -c); break;
    }
  }
  return {re, im};
}

void check_ball(const std::optional<Domain>& domain, const Point& xi, double r) {
  if (domain && domain->boundary_distance(xi) < r)
    throw Error(ErrorCode::BallEscapesDomain, "ball of radius " + fmt(r) + " leaves the domain");
}

struct Orders {
  int sphere, ball_radial, ball_angular;
};

// Quadrature orders that are exact for |u|^2 when u has the given degree.
Orders orders_for(int n, int degree) {
  if (degree < 0) return n == 2 ? Orders{256, 32, 256} : Orders{32, 24, 32};
  int d = degree;
  if (n == 2) return {std::max(8, 2 * d + 2), d + 2, std::max(8, 2 * d + 2)};
  return {std::max(4, d + 2), d + 3, std::max(4, d + 2)};
}

struct RadialData {
  double H = 0, D = 0, K = 0, L = 0, D_flux = 0;
};

RadialData radial_data(const HarmonicSample& u, const Point& xi, double r) {
  const int n = u.dim;
  Orders o = orders_for(n, u.degree);
  RadialData out;
  auto s = sphere_quadrature(xi, r, o.sphere);
  for (int i = 0; i < s.size(); ++i) {
    const Point& x = s.nodes[i];
    Point nu = (x - xi) / r;
    double v = u.field.value(x);
    double dn = u.field.gradient(x).dot(nu);
    out.H += s.weights[i] * v * v;
    out.L += s.weights[i] * dn * dn;
    out.D_flux += s.weights[i] * v * dn;
  }
  auto b = ball_quadrature(xi, r, o.ball_radial, o.ball_angular);
  for (int i = 0; i < b.size(); ++i) {
    const Point& x = b.nodes[i];
    double v = u.field.value(x);
    out.K += b.weights[i] * v * v;
    out.D += b.weights[i] * u.field.gradient(x).squaredNorm();
  }
  return out;
}

void require_harmonic(const HarmonicSample& u, const Point& xi, double r) {
  double cert = harmonic_certificate(u.field, u.dim, xi, r, 100, 7);
  double scale = 0;
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> U(-1, 1);
  for (int k = 0; k < 20; ++k) {
    Point x = xi;
    for (int i = 0; i < u.dim; ++i) x(i) += r * U(rng) / std::sqrt(double(u.dim));
    scale = std::max(scale, std::abs(u.field.value(x)));
  }
  double tol = (u.field.hess ? 1e-9 : 1e-5) * std::max(1.0, scale / (r * r));
  if (cert > tol) throw Error(ErrorCode::NotHarmonic, "|Lap u| = " + fmt(cert) + " on probes");
}

}  // namespace

// ---------------------------------------------------------------- Polynomial

int Polynomial::degree() const {
  int d = 0;
  for (const auto& t : terms_) d = std::max(d, t.e[0] + t.e[1] + t.e[2]);
  return d;
}

void Polynomial::add(const std::array<int, 3>& e, double c) {
  if (c == 0.0) return;
  for (auto& t : terms_)
    if (t.e == e) {
      t.c += c;
      return;
    }
  terms_.push_back({e, c});
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
  Polynomial r = *this;
  for (const auto& t : o.terms_) r.add(t.e, t.c);
  return r;
}

Polynomial Polynomial::operator*(double s) const {
  Polynomial r(n_);
  for (const auto& t : terms_) r.add(t.e, t.c * s);
  return r;
}

Polynomial Polynomial::derivative(int k) const {
  Polynomial r(n_);
  for (const auto& t : terms_) {
    if (t.e[k] == 0) continue;
    auto e = t.e;
    --e[k];
    r.add(e, t.c * t.e[k]);
  }
  return r;
}

Polynomial Polynomial::laplacian() const {
  Polynomial r(n_);
  for (int k = 0; k < n_; ++k) r = r + derivative(k).derivative(k);
  return r;
}

double Polynomial::max_abs_coeff() const {
  double m = 0;
  for (const auto& t : terms_) m = std::max(m, std::abs(t.c));
  return m;
}

double Polynomial::operator()(const Point& x) const {
  double pw[3][17];
  const int d = degree();
  for (int k = 0; k < 3; ++k) {
    pw[k][0] = 1.0;
    double xk = k < n_ ? x(k) : 0.0;
    for (int p = 1; p <= d; ++p) pw[k][p] = pw[k][p - 1] * xk;
  }
  double s = 0;
  for (const auto& t : terms_) s += t.c * pw[0][t.e[0]] * pw[1][t.e[1]] * pw[2][t.e[2]];
  return s;
}

ScalarField Polynomial::field() const {
  if (degree() > 16) throw Error(ErrorCode::InvalidArgument, "polynomial degree above 16");
  ScalarField f;
  const int n = n_;
  std::vector<Polynomial> g, h;
  for (int i = 0; i < n; ++i) g.push_back(derivative(i));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) h.push_back(g[i].derivative(j));
  Polynomial self = *this;
  f.value = [self](const Point& x) { return self(x); };
  f.grad = [g, n](const Point& x) {
    Point p(n);
    for (int i = 0; i < n; ++i) p(i) = g[i](x);
    return p;
  };
  f.hess = [h, n](const Point& x) {
    SmallMat H(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) H(i, j) = h[i * n + j](x);
    return H;
  };
  f.smoothness = 1000;
  return f;
}

// ---------------------------------------------------------------- catalog

double harmonic_certificate(const ScalarField& u, int n, const Point& center, double radius, int probes,
                            unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> U(-1, 1);
  double m = 0;
  for (int k = 0; k < probes; ++k) {
    Point x(n);
    do {
      for (int i = 0; i < n; ++i) x(i) = U(rng);
    } while (x.norm() > 1);
    x = center + radius * x;
    m = std::max(m, std::abs(u.hessian(x).trace()));
  }
  return m;
}

HarmonicSample from_polynomial(const std::string& name, const Polynomial& p, bool homogeneous) {
  HarmonicSample s;
  s.name = name;
  s.dim = p.dim();
  s.degree = p.degree();
  s.homogeneous = homogeneous;
  s.field = p.field();
  // the Laplacian is computed symbolically; the probe certificate confirms it numerically
  if (p.laplacian().max_abs_coeff() > 1e-12 * std::max(1.0, p.max_abs_coeff()))
    throw Error(ErrorCode::NotHarmonic, name + " has a nonzero symbolic Laplacian");
  s.certificate = harmonic_certificate(s.field, s.dim, Point::Zero(s.dim), 1.0);
  return s;
}

HarmonicSample translate(const HarmonicSample& s, const Point& shift) {
  HarmonicSample t = s;
  t.name = s.name + "@shift";
  t.homogeneous = false;
  ScalarField f = s.field;
  t.field.value = [f, shift](const Point& x) { return f.value(x - shift); };
  if (f.grad) t.field.grad = [f, shift](const Point& x) { return f.grad(x - shift); };
  if (f.hess) t.field.hess = [f, shift](const Point& x) { return f.hess(x - shift); };
  return t;
}

HarmonicSample combine(const std::vector<double>& coeffs, const std::vector<HarmonicSample>& parts) {
  if (coeffs.size() != parts.size() || parts.empty())
    throw Error(ErrorCode::InvalidArgument, "coefficient count must match the parts");
  HarmonicSample s;
  s.dim = parts[0].dim;
  s.name = "combination";
  s.degree = 0;
  bool analytic_grad = true, analytic_hess = true;
  for (const auto& p : parts) {
    if (p.dim != s.dim) throw Error(ErrorCode::InvalidArgument, "mixed dimensions");
    s.degree = p.degree < 0 || s.degree < 0 ? -1 : std::max(s.degree, p.degree);
    analytic_grad = analytic_grad && static_cast<bool>(p.field.grad);
    analytic_hess = analytic_hess && static_cast<bool>(p.field.hess);
    s.certificate += std::abs(coeffs[&p - &parts[0]]) * p.certificate;
  }
  auto fields = std::make_shared<std::vector<ScalarField>>();
  for (const auto& p : parts) fields->push_back(p.field);
  const int n = s.dim;
  s.field.value = [fields, coeffs](const Point& x) {
    double v = 0;
    for (size_t i = 0; i < coeffs.size(); ++i) v += coeffs[i] * (*fields)[i].value(x);
    return v;
  };
  if (analytic_grad)
    s.field.grad = [fields, coeffs, n](const Point& x) {
      Point g = Point::Zero(n);
      for (size_t i = 0; i < coeffs.size(); ++i) g += coeffs[i] * (*fields)[i].grad(x);
      return g;
    };
  if (analytic_hess)
    s.field.hess = [fields, coeffs, n](const Point& x) {
      SmallMat H = SmallMat::Zero(n, n);
      for (size_t i = 0; i < coeffs.size(); ++i) H += coeffs[i] * (*fields)[i].hess(x);
      return H;
    };
  return s;
}

HarmonicSample sample_from_field(const std::string& name, const ScalarField& u, int n, const Point& center,
                                 double radius) {
  HarmonicSample s;
  s.name = name;
  s.dim = n;
  s.field = u;
  s.certificate = harmonic_certificate(u, n, center, radius);
  return s;
}

std::vector<HarmonicSample> harmonic_catalog(int n, int max_degree) {
  if (n != 2 && n != 3) throw Error(ErrorCode::UnsupportedDimension, "harmonic catalog needs n = 2 or 3");
  if (max_degree < 0 || max_degree > 8)
    throw Error(ErrorCode::InvalidArgument, "max_degree must lie in [0, 8]");
  std::vector<HarmonicSample> out;
  Polynomial one(n);
  one.add({0, 0, 0}, 1.0);
  out.push_back(from_polynomial("const", one, true));
  if (n == 2) {
    for (int k = 1; k <= max_degree; ++k) {
      auto [re, im] = complex_power(2, k);
      out.push_back(from_polynomial("re:" + std::to_string(k), re, true));
      out.push_back(from_polynomial("im:" + std::to_string(k), im, true));
    }
    return out;
  }
  const Point shift = make_point(0.1, -0.2, 0.15);
  std::vector<HarmonicSample> base;
  for (int l = 1; l <= std::min(max_degree, 3); ++l)
    for (int m = 0; m <= l; ++m) {
      // (x+iy)^m sum_k c_k z^{l-m-2k} rho^{2k}, rho^2 = x^2 + y^2
      Polynomial q(3);
      double c = 1.0;
      for (int k = 0; l - m - 2 * k >= 0; ++k) {
        for (int s = 0; s <= k; ++s) q.add({2 * s, 2 * (k - s), l - m - 2 * k}, c * binom(k, s));
        c = -c * (l - m - 2 * k) * (l - m - 2 * k - 1) / (4.0 * (k + 1) * (k + 1 + m));
      }
      auto [re, im] = complex_power(3, m);
      std::string tag = "Y" + std::to_string(l) + std::to_string(m);
      base.push_back(from_polynomial(tag + "c", multiply(re, q), true));
      if (m > 0) base.push_back(from_polynomial(tag + "s", multiply(im, q), true));
    }
  for (const auto& b : base) out.push_back(b);
  for (const auto& b : base) out.push_back(translate(b, shift));
  return out;
}

HarmonicSample harmonic_by_name(const std::string& name, int n) {
  int max_deg = n == 2 ? 8 : 3;
  std::string key = name;
  if (key.rfind("harmonic:deg", 0) == 0) {
    int k = std::stoi(key.substr(12));
    if (k == 0) key = "const";
    else key = (n == 2 ? "re:" : "Y") + std::to_string(k) + (n == 2 ? "" : "0c");
  } else if (key.rfind("harmonic:", 0) == 0) {
    key = key.substr(9);
  }
  for (auto& s : harmonic_catalog(n, max_deg))
    if (s.name == key) return s;
  throw Error(ErrorCode::InvalidArgument, "unknown harmonic sample '" + name + "'");
}

// ---------------------------------------------------------------- identities

double mean_value_residual(const ScalarField& u, const Point& xi, double r, MeanForm form,
                           const std::optional<Domain>& domain) {
  HarmonicSample s;
  s.dim = static_cast<int>(xi.size());
  s.field = u;
  return mean_value_residual(s, xi, r, form, domain);
}

double mean_value_residual(const HarmonicSample& u, const Point& xi, double r, MeanForm form,
                           const std::optional<Domain>& domain) {
  check_ball(domain, xi, r);
  Orders o = orders_for(u.dim, u.degree);
  Quadrature q = form == MeanForm::sphere ? sphere_quadrature(xi, r, o.sphere)
                                          : ball_quadrature(xi, r, o.ball_radial, o.ball_angular);
  double avg = q.integrate(u.field.value) / q.carrier_measure;
  return std::abs(avg - u.field.value(xi));
}

std::string FrequencyProfile::to_csv() const {
  std::ostringstream os;
  os << "r,H,D,K,N,L\n";
  for (size_t i = 0; i < r.size(); ++i)
    os << fmt(r[i]) << ',' << fmt(H[i]) << ',' << fmt(D[i]) << ',' << fmt(K[i]) << ',' << fmt(N[i]) << ','
       << fmt(L[i]) << '\n';
  return os.str();
}

FrequencyProfile frequency_profile(const HarmonicSample& u, const Point& xi, const std::vector<double>& radii,
                                   const std::optional<Domain>& domain) {
  if (radii.empty()) throw Error(ErrorCode::InvalidArgument, "empty radius grid");
  for (size_t i = 0; i < radii.size(); ++i)
    if (!(radii[i] > 0) || (i > 0 && radii[i] <= radii[i - 1]))
      throw Error(ErrorCode::InvalidArgument, "radii must be positive and increasing");
  check_ball(domain, xi, radii.back());
  require_harmonic(u, xi, radii.back());
  FrequencyProfile p;
  p.center = xi;
  for (double r : radii) {
    RadialData d = radial_data(u, xi, r);
    p.r.push_back(r);
    p.H.push_back(d.H);
    p.D.push_back(d.D);
    p.K.push_back(d.K);
    p.L.push_back(d.L);
    p.D_flux.push_back(d.D_flux);
    const double floor = 1e-290;
    if (d.H <= floor || d.K <= floor) {
      p.degenerate = true;
      p.N.push_back(0.0);
      continue;
    }
    p.N.push_back(r * d.D / d.H);
    if (d.D > floor) p.max_flux_defect = std::max(p.max_flux_defect, std::abs(d.D - d.D_flux) / d.D);
  }
  return p;
}

DerivativeIdentityReport derivative_identity_check(const HarmonicSample& u, const Point& xi, double r) {
  const int n = u.dim;
  const double dr = 1e-3 * r;
  RadialData c = radial_data(u, xi, r);
  RadialData p1 = radial_data(u, xi, r + dr), m1 = radial_data(u, xi, r - dr);
  RadialData p2 = radial_data(u, xi, r + 2 * dr), m2 = radial_data(u, xi, r - 2 * dr);
  auto deriv = [&](double RadialData::*f) {
    return (8 * (p1.*f - m1.*f) - (p2.*f - m2.*f)) / (12 * dr);
  };
  double dH = deriv(&RadialData::H), dD = deriv(&RadialData::D);
  DerivativeIdentityReport rep;
  rep.dH_rel = std::abs(dH - ((n - 1) * c.H / r + 2 * c.D)) / std::max(std::abs(dH), 1e-300);
  rep.dD_rel = std::abs(dD - ((n - 2) * c.D / r + 2 * c.L)) / std::max(std::abs(dD), 1e-300);
  return rep;
}

DoublingReport doubling_check(const HarmonicSample& u, const Point& xi, double r, double rbar,
                              const std::optional<Domain>& domain, double tol) {
  if (!(r > 0 && 2 * r <= rbar)) throw Error(ErrorCode::InvalidArgument, "need 0 < 2r <= rbar");
  auto p = frequency_profile(u, xi, {r, 2 * r == rbar ? rbar : 2 * r}, domain);
  auto pb = frequency_profile(u, xi, {rbar}, domain);
  if (p.degenerate || pb.degenerate) throw Error(ErrorCode::DegenerateField, "u vanishes near xi");
  DoublingReport rep;
  rep.ratio = p.K[1] / p.K[0];
  rep.N_rbar = pb.N[0];
  rep.bound = std::pow(2.0, 2 * rep.N_rbar + u.dim);
  rep.holds = rep.ratio <= rep.bound * (1 + tol);
  return rep;
}

ThreeSphereReport three_sphere_check(const HarmonicSample& u, const Point& xi, double r1, double r2, double r3,
                                     const std::optional<Domain>& domain, double tol) {
  if (!(0 < r1 && r1 < r2 && r2 < r3)) throw Error(ErrorCode::InvalidArgument, "need 0 < r1 < r2 < r3");
  auto p = frequency_profile(u, xi, {r1, r2, r3}, domain);
  if (p.degenerate) throw Error(ErrorCode::DegenerateField, "u vanishes near xi");
  const int n = u.dim;
  ThreeSphereReport rep;
  rep.theta = std::log(r2 / r1) / std::log(r3 / r1);
  auto lnh = [&](int i) { return std::log(p.H[i]) - (n - 1) * std::log(p.r[i]); };
  double ll = lnh(1), lr = rep.theta * lnh(2) + (1 - rep.theta) * lnh(0);
  rep.lhs = std::exp(ll);
  rep.rhs = std::exp(lr);
  rep.slack = -std::expm1(ll - lr);
  rep.holds = ll <= lr + tol;

  rep.alpha = (r2 - r1) / (r3 - r1);
  const double a = rep.alpha;
  auto lnb = [&](int i) { return 0.5 * std::log(p.K[i]); };
  auto lns = [&](int i) { return 0.5 * std::log(p.H[i]); };
  rep.three_ball_defect = std::expm1(lnb(1) - (a * lnb(2) + (1 - a) * lnb(0)));
  double lfac = (n + 1) * (a * std::log(r2 / r3) + (1 - a) * std::log(r2 / r1));
  rep.three_sphere_defect = std::expm1(lns(1) - (lfac + a * lns(2) + (1 - a) * lns(0)));
  return rep;
}

HarnackReport harnack_ratio(const ScalarField& u, int n, const Point& xi, double r,
                            const std::optional<Domain>& domain) {
  if (!(r > 0)) throw Error(ErrorCode::NonPositiveRadius, "radius must be positive");
  if (domain && !(domain->boundary_distance(xi) > 4 * r))
    throw Error(ErrorCode::BallEscapesDomain, "B(xi, 4r) is not inside the domain");
  // grid of the cube [-R, R]^n restricted to the ball
  auto scan = [&](double R, double h, auto&& visit) {
    int m = static_cast<int>(std::ceil(R / h - 1e-9));
    std::array<int, 3> idx{};
    int total = 1;
    for (int i = 0; i < n; ++i) total *= 2 * m + 1;
    for (int t = 0; t < total; ++t) {
      int rem = t;
      Point x(n);
      for (int i = 0; i < n; ++i) {
        idx[i] = rem % (2 * m + 1) - m;
        rem /= 2 * m + 1;
        x(i) = idx[i] * h;
      }
      if (x.norm() <= R * (1 + 1e-12)) visit(xi + x);
    }
  };
  const double hp = n == 2 ? r / 50 : r / 10;
  scan(4 * r, hp, [&](const Point& x) {
    if (!(u.value(x) > 0)) throw Error(ErrorCode::NotPositive, "u is not positive on B(xi, 4r)");
  });
  double mx = -1e300, mn = 1e300;
  auto take = [&](const Point& x) {
    double v = u.value(x);
    mx = std::max(mx, v);
    mn = std::min(mn, v);
  };
  scan(r, n == 2 ? r / 50 : r / 20, take);
  auto s = sphere_quadrature(xi, r, n == 2 ? 400 : 40);
  for (const auto& x : s.nodes) take(x);
  HarnackReport rep;
  rep.ratio = mx / mn;
  rep.bound = std::pow(3.0, n);
  rep.holds = rep.ratio <= rep.bound;
  return rep;
}

VanishingOrder vanishing_order(const HarmonicSample& u, const Point& xi, const std::vector<double>& radii) {
  if (radii.size() < 2) throw Error(ErrorCode::InsufficientSamples, "need at least two radii");
  double rmin = *std::min_element(radii.begin(), radii.end());
  double rmax = *std::max_element(radii.begin(), radii.end());
  if (rmax < 10 * rmin * (1 - 1e-12)) throw Error(ErrorCode::InvalidArgument, "radii must span a decade");
  Orders o = orders_for(u.dim, u.degree);
  const double floor = 1e-280;
  std::vector<double> lx, ly;
  for (double r : radii) {
    auto q = ball_quadrature(xi, r, o.ball_radial, o.ball_angular);
    double K = q.integrate([&](const Point& x) {
      double v = u.field.value(x);
      return v * v;
    });
    if (K > floor) {
      lx.push_back(std::log(r));
      ly.push_back(std::log(K));
    }
  }
  if (lx.size() < 2)
    throw Error(ErrorCode::DegenerateFit, "K below floor at all radii: numerically infinite order");
  double mx = 0, my = 0;
  for (size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= lx.size();
  my /= ly.size();
  double sxy = 0, sxx = 0;
  for (size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  VanishingOrder v;
  v.slope = sxy / sxx;
  v.order = (v.slope - u.dim) / 2;
  return v;
}

double poisson_disk(const ScalarFn& g, const Point& c, double R, const Point& x, int m) {
  Point z = x - c;
  double rho2 = z.squaredNorm();
  if (!(std::sqrt(rho2) < R)) throw Error(ErrorCode::PointOnBoundary, "x is not strictly inside the disk");
  double s = 0;
  for (int j = 0; j < m; ++j) {
    double t = 2 * kPi * j / m;
    Point y = make_point(R * std::cos(t), R * std::sin(t));
    s += (R * R - rho2) / (z - y).squaredNorm() * g(c + y);
  }
  return s / m;
}

// ---------------------------------------------------------------- Perron

double PerronResult::operator()(const Point& x) const {
  double fx = (x(0) - lo(0)) / h, fy = (x(1) - lo(1)) / h;
  int i = std::clamp(static_cast<int>(std::floor(fx)), 0, nx - 2);
  int j = std::clamp(static_cast<int>(std::floor(fy)), 0, ny - 2);
  double a = fx - i, b = fy - j;
  return (1 - a) * (1 - b) * values(i, j) + a * (1 - b) * values(i + 1, j) + (1 - a) * b * values(i, j + 1) +
         a * b * values(i + 1, j + 1);
}

std::string PerronResult::log_csv() const {
  std::ostringstream os;
  os << "sweep,max_update,min_update\n";
  for (const auto& s : log) os << s.sweep << ',' << fmt(s.max_update) << ',' << fmt(s.min_update) << '\n';
  return os.str();
}

PerronResult perron_solve(const Domain& domain, const ScalarFn& g, const PerronOptions& opt) {
  if (domain.dim() != 2) throw Error(ErrorCode::UnsupportedDimension, "Perron iteration is 2D");
  if (!(opt.h > 0)) throw Error(ErrorCode::NonPositiveH, "grid spacing must be positive");
  PerronResult res;
  Point lo, hi;
  domain.bounding_box(lo, hi);
  res.h = opt.h;
  res.lo = lo;
  res.nx = static_cast<int>(std::ceil((hi(0) - lo(0)) / opt.h - 1e-9)) + 1;
  res.ny = static_cast<int>(std::ceil((hi(1) - lo(1)) / opt.h - 1e-9)) + 1;
  const int nx = res.nx, ny = res.ny;
  res.values.resize(nx, ny);
  res.active.assign(static_cast<size_t>(nx) * ny, 0);
  std::vector<double> dist(static_cast<size_t>(nx) * ny);
  double gmin = 1e300;
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) {
      Point x = make_point(lo(0) + i * opt.h, lo(1) + j * opt.h);
      double d = domain.boundary_distance(x);
      dist[i * ny + j] = d;
      // nodes closer than one grid step hold the data (discrete boundary layer)
      if (d >= opt.h) {
        res.active[i * ny + j] = 1;
      } else {
        res.values(i, j) = g(x);
        if (d > -2 * opt.h) gmin = std::min(gmin, res.values(i, j));
      }
    }

  // each active node is replaced by the circle mean of radius dist/2 of the bilinear interpolant
  struct Row {
    int node;
    std::vector<std::pair<int, double>> w;
  };
  std::vector<Row> rows;
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) {
      if (!res.active[i * ny + j]) continue;
      res.values(i, j) = gmin;
      double rho = 0.5 * dist[i * ny + j];
      int M = std::max(16, static_cast<int>(std::ceil(4 * kPi * rho / opt.h)));
      std::map<int, double> acc;
      for (int k = 0; k < M; ++k) {
        double t = 2 * kPi * (k + 0.5) / M;
        double fx = i + rho * std::cos(t) / opt.h, fy = j + rho * std::sin(t) / opt.h;
        int a0 = std::clamp(static_cast<int>(std::floor(fx)), 0, nx - 2);
        int b0 = std::clamp(static_cast<int>(std::floor(fy)), 0, ny - 2);
        double a = fx - a0, b = fy - b0;
        acc[a0 * ny + b0] += (1 - a) * (1 - b) / M;
        acc[(a0 + 1) * ny + b0] += a * (1 - b) / M;
        acc[a0 * ny + b0 + 1] += (1 - a) * b / M;
        acc[(a0 + 1) * ny + b0 + 1] += a * b / M;
      }
      Row row{i * ny + j, {}};
      for (auto& [k, w] : acc)
        if (w != 0.0) row.w.emplace_back(k, w);
      rows.push_back(std::move(row));
    }

  double* v = res.values.data();  // column-major: node (i, j) sits at i + j * nx
  auto at = [&](int id) -> double& { return v[(id / ny) + (id % ny) * nx]; };
  double last = 0;
  for (int sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
    double mx = 0, mn = 0;
    for (const auto& row : rows) {
      double s = 0;
      for (const auto& [k, w] : row.w) s += w * at(k);
      double& u = at(row.node);
      double du = s - u;
      u = s;
      mx = std::max(mx, std::abs(du));
      mn = std::min(mn, du);
    }
    res.log.push_back({sweep, mx, mn});
    last = mx;
    if (mx <= opt.tolerance) {
      res.converged = true;
      return res;
    }
  }
  if (opt.throw_on_budget)
    throw Error(ErrorCode::NonConvergence, "sweep budget exhausted; last update " + fmt(last));
  return res;
}

}  // namespace elliptica
