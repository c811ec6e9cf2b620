#include "elliptica/stability.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace elliptica {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Quadrature smooth_ball_rule(const Point& c, double r) {
  return c.size() == 2 ? ball_quadrature(c, r, 40, 96) : ball_quadrature(c, r, 24, 24);
}

void require_ball(const Domain& domain, const Point& c, double r) {
  if (domain.boundary_distance(c) < r * (1 - 1e-12))
    throw Error(ErrorCode::BallEscapesDomain, "B(" + fmt(c(0)) + ", ..., " + fmt(r) + ") leaves the domain");
}

double log_sum_exp(const std::vector<double>& logs, const std::vector<double>& coeffs) {
  double m = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < logs.size(); ++i)
    if (coeffs[i] > 0) m = std::max(m, logs[i]);
  if (!std::isfinite(m)) return -std::numeric_limits<double>::infinity();
  double s = 0;
  for (size_t i = 0; i < logs.size(); ++i)
    if (coeffs[i] > 0) s += coeffs[i] * std::exp(logs[i] - m);
  return m + std::log(s);
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t m = x.size();
  if (m < 2) return 0.0;
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / m;
  double my = std::accumulate(y.begin(), y.end(), 0.0) / m;
  double sxy = 0, sxx = 0;
  for (size_t i = 0; i < m; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx > 0 ? sxy / sxx : 0.0;
}

}  // namespace

// ---------------------------------------------------------------- Carleman

double CarlemanWeight::phi(const Point& x) const {
  if (family == Family::quadratic) {
    const int n = static_cast<int>(x.size());
    double s = (x(n - 1) - 1) * (x(n - 1) - 1);
    for (int i = 0; i + 1 < n; ++i) s += x(i) * x(i);
    return s;
  }
  return std::exp(lambda * psi(x));
}

Point CarlemanWeight::grad_phi(const Point& x) const {
  if (family == Family::quadratic) {
    Point g = 2 * x;
    g(x.size() - 1) = 2 * (x(x.size() - 1) - 1);
    return g;
  }
  return lambda * phi(x) * psi.gradient(x);
}

CarlemanWeight exponential_weight(double lambda) {
  if (!(lambda > 0)) throw Error(ErrorCode::InvalidArgument, "lambda must be positive");
  CarlemanWeight w;
  w.family = CarlemanWeight::Family::exponential;
  w.lambda = lambda;
  w.psi.value = [](const Point& x) { return 9.0 - x.squaredNorm(); };
  w.psi.grad = [](const Point& x) -> Point { return -2 * x; };
  w.psi.hess = [](const Point& x) -> SmallMat { return -2 * SmallMat::Identity(x.size(), x.size()); };
  w.psi.smoothness = 100;
  return w;
}

CarlemanWeight quadratic_weight() {
  CarlemanWeight w;
  w.family = CarlemanWeight::Family::quadratic;
  w.lambda = 1.0;
  return w;
}

double default_tau0(const Domain& domain) {
  double d = domain.diameter();
  return 4.0 / (d * d);
}

std::string CarlemanReport::to_csv() const {
  std::ostringstream os;
  os << "tau,LHS,RHS,ratio\n";
  for (size_t i = 0; i < tau.size(); ++i)
    os << fmt(tau[i]) << ',' << fmt(std::exp(log_lhs[i])) << ',' << fmt(std::exp(log_rhs[i])) << ','
       << fmt(ratio[i]) << '\n';
  return os.str();
}

CarlemanReport carleman_ratio(const EllipticOperator& op, const ScalarField& v, const CarlemanWeight& weight,
                              const std::vector<double>& taus, const Domain& domain) {
  if (!v.support) throw Error(ErrorCode::SupportTouchesBoundary, "v must declare a compact support");
  const Point c = v.support->center;
  const double R = v.support->radius;
  if (!(domain.boundary_distance(c) > R))
    throw Error(ErrorCode::SupportTouchesBoundary, "support of v reaches the boundary");
  for (double t : taus)
    if (!(t > 0)) throw Error(ErrorCode::InvalidArgument, "tau must be positive");
  Quadrature q = smooth_ball_rule(c, R);

  CarlemanReport rep;
  rep.min_grad_psi = std::numeric_limits<double>::infinity();
  const size_t m = q.nodes.size();
  std::vector<double> phi(m), v2(m), g2(m), lv2(m);
  double vmax = 0;
  for (size_t i = 0; i < m; ++i) {
    const Point& x = q.nodes[i];
    phi[i] = weight.phi(x);
    double vx = v(x);
    v2[i] = vx * vx;
    g2[i] = v.gradient(x).squaredNorm();
    double l = apply(op, v, x);
    lv2[i] = l * l;
    vmax = std::max(vmax, std::abs(vx));
    if (weight.family == CarlemanWeight::Family::exponential)
      rep.min_grad_psi = std::min(rep.min_grad_psi, weight.psi.gradient(x).norm());
  }
  if (vmax == 0.0) throw Error(ErrorCode::DegenerateField, "v vanishes identically; the ratio is undefined");
  if (weight.family == CarlemanWeight::Family::exponential) {
    // Newton on grad psi = 0 from the probe with the smallest gradient
    size_t best = 0;
    for (size_t i = 0; i < m; ++i)
      if (weight.psi.gradient(q.nodes[i]).norm() < weight.psi.gradient(q.nodes[best]).norm()) best = i;
    Point x = q.nodes[best];
    for (int it = 0; it < 30; ++it) {
      Point g = weight.psi.gradient(x);
      SmallMat H = weight.psi.hessian(x);
      if (!(std::abs(H.determinant()) > 0)) break;
      x -= H.lu().solve(g);
    }
    double gmax = 0;
    for (size_t i = 0; i < m; ++i) gmax = std::max(gmax, weight.psi.gradient(q.nodes[i]).norm());
    if ((x - c).norm() <= R && weight.psi.gradient(x).norm() <= 1e-8 * (1 + gmax)) rep.min_grad_psi = 0.0;
    if (!(rep.min_grad_psi > 0))
      throw Error(ErrorCode::InvalidArgument, "psi has a critical point on the support of v");
  }
  if (weight.family == CarlemanWeight::Family::quadratic) rep.min_grad_psi = 0.0;

  const double lam = weight.lambda;
  std::vector<double> logs(m), cl(m), cr(m);
  for (double tau : taus) {
    for (size_t i = 0; i < m; ++i) {
      logs[i] = 2 * tau * phi[i];
      cl[i] = q.weights[i] * (std::pow(lam, 4) * std::pow(tau, 3) * std::pow(phi[i], 3) * v2[i] +
                              lam * lam * tau * phi[i] * g2[i]);
      cr[i] = q.weights[i] * lv2[i];
    }
    double ll = log_sum_exp(logs, cl), lr = log_sum_exp(logs, cr);
    rep.tau.push_back(tau);
    rep.log_lhs.push_back(ll);
    rep.log_rhs.push_back(lr);
    rep.ratio.push_back(std::exp(lr - ll));
  }
  rep.lhs_log_slope = slope(rep.tau, rep.log_lhs);
  rep.rhs_log_slope = slope(rep.tau, rep.log_rhs);
  return rep;
}

// ---------------------------------------------------------------- Caccioppoli

CaccioppoliReport caccioppoli_check(const EllipticOperator& op, const ScalarField& u, const Point& x, double rho,
                                    double k, double l, const Domain& domain) {
  if (!(rho > 0)) throw Error(ErrorCode::NonPositiveRadius, "rho must be positive");
  if (!(k > 0 && k < l)) throw Error(ErrorCode::InvalidArgument, "need 0 < k < l");
  require_ball(domain, x, l * rho);
  CaccioppoliReport rep;
  Quadrature inner = smooth_ball_rule(x, k * rho), outer = smooth_ball_rule(x, l * rho);
  rep.grad_inner = inner.integrate([&](const Point& z) { return u.gradient(z).squaredNorm(); });
  rep.u_outer = outer.integrate([&](const Point& z) { return u(z) * u(z); });
  rep.Lu_outer = outer.integrate([&](const Point& z) {
    double v = apply(op, u, z);
    return v * v;
  });
  rep.rhs = rep.u_outer / (rho * rho) + rep.Lu_outer;
  rep.constant = rep.grad_inner > 0 ? rep.rhs / rep.grad_inner : std::numeric_limits<double>::infinity();
  return rep;
}

// ---------------------------------------------------------------- propagation of smallness

double ball_l2_norm(const ScalarField& u, const Point& c, double r) {
  Quadrature q = smooth_ball_rule(c, r);
  return std::sqrt(q.integrate([&](const Point& x) { return u(x) * u(x); }));
}

RecursionBound recursion_bound(double eta0, double b, double c, double gamma, int k) {
  if (!(gamma > 0 && gamma < 1)) throw Error(ErrorCode::InvalidArgument, "gamma must lie in (0, 1)");
  if (!(c >= 1)) throw Error(ErrorCode::InvalidArgument, "c must be >= 1");
  if (!(b >= 0) || !(eta0 >= 0) || k < 0) throw Error(ErrorCode::InvalidArgument, "need eta0, b >= 0, k >= 0");
  RecursionBound r;
  r.C = std::pow(2 * c, 1.0 / (1.0 - gamma));
  r.bound = r.C * std::pow(eta0 + b, std::pow(gamma, k));
  return r;
}

std::vector<double> recursion_sequence(double eta0, double b, double c, double gamma, int k) {
  std::vector<double> eta{eta0};
  for (int i = 0; i < k; ++i) eta.push_back(std::min(1.0, c * std::pow(eta.back() + b, gamma)));
  return eta;
}

PropagationReport smallness_propagation(const ScalarField& u, const BallChain& chain, const Domain& domain,
                                        double Lu_norm, std::optional<double> gamma) {
  const double r = chain.radius;
  if (chain.centers.empty() || !(r > 0)) throw Error(ErrorCode::ChainInvalid, "empty chain");
  for (int k = 0; k + 1 < chain.size(); ++k)
    if ((chain.centers[k + 1] - chain.centers[k]).norm() > r * (1 + 1e-12))
      throw Error(ErrorCode::ChainInvalid, "consecutive centers farther apart than r");
  for (const auto& x : chain.centers)
    if (domain.boundary_distance(x) <= 3 * r) throw Error(ErrorCode::ChainInvalid, "B(x_k, 3r) leaves the domain");

  PropagationReport rep;
  double gmin = 1.0;
  for (const auto& x : chain.centers) {
    PropagationStep s;
    s.center = x;
    s.n1 = ball_l2_norm(u, x, r);
    s.n2 = ball_l2_norm(u, x, 2 * r);
    s.n3 = ball_l2_norm(u, x, 3 * r);
    if (s.n1 > 0 && s.n3 > s.n1) s.gamma = std::log(s.n2 / s.n3) / std::log(s.n1 / s.n3);
    if (s.n3 > 0) gmin = std::min(gmin, s.gamma);
    rep.scale = std::max(rep.scale, s.n3);
    rep.steps.push_back(s);
  }
  rep.measured = rep.steps.back().n1;
  if (rep.scale == 0.0) {
    rep.holds = Lu_norm == 0.0;
    return rep;
  }
  rep.gamma = gamma.value_or(gmin);
  if (!(rep.gamma > 0 && rep.gamma < 1))
    throw Error(ErrorCode::DegenerateFit, "three-ball exponent " + fmt(rep.gamma) + " outside (0, 1)");
  rep.b = Lu_norm / rep.scale;
  rep.eta0 = rep.steps.front().n1 / rep.scale;
  auto rb = recursion_bound(rep.eta0, rep.b, rep.c, rep.gamma, chain.size() - 1);
  rep.C = rb.C;
  rep.bound = rep.scale * rb.bound;
  rep.holds = rep.measured <= rep.bound * (1 + 1e-12);
  return rep;
}

// ---------------------------------------------------------------- Cauchy completion

FemField cauchy_complete(const SimplicialMesh& mesh, const CauchyData& data, const CauchyOptions& opt,
                         CauchyInfo* info) {
  if (mesh.dim != 2) throw Error(ErrorCode::UnsupportedDimension, "Cauchy completion is 2D");
  if (!(opt.reg_weight > 0)) throw Error(ErrorCode::InvalidArgument, "reg_weight must be positive");
  const int V = mesh.num_vertices();

  std::map<std::pair<int, int>, int> edge_cell;
  for (int c = 0; c < mesh.num_cells(); ++c)
    for (int e = 0; e < 3; ++e) {
      int a = mesh.cells[c][e], b = mesh.cells[c][(e + 1) % 3];
      edge_cell[{std::min(a, b), std::max(a, b)}] = c;
    }

  struct Facet {
    int a, b, cell;
    double len;
    Point normal, mid;
  };
  std::vector<Facet> facets;
  std::map<int, double> trace_mass;
  for (const auto& f : mesh.boundary) {
    if (f.tag != BoundaryTag::gamma0) continue;
    Facet F;
    F.a = f.v[0];
    F.b = f.v[1];
    F.cell = edge_cell.at({std::min(F.a, F.b), std::max(F.a, F.b)});
    Point pa = mesh.vertex(F.a), pb = mesh.vertex(F.b);
    F.len = (pb - pa).norm();
    F.mid = 0.5 * (pa + pb);
    Point t = (pb - pa) / F.len;
    F.normal = make_point(t(1), -t(0));
    if (F.normal.dot(F.mid - mesh.centroid(F.cell)) < 0) F.normal = -F.normal;
    trace_mass[F.a] += F.len / 2;
    trace_mass[F.b] += F.len / 2;
    facets.push_back(F);
  }
  if (facets.empty()) throw Error(ErrorCode::EmptyCauchyBoundary, "no facet is tagged gamma0");

  // noisy data
  std::mt19937 rng(data.seed);
  std::normal_distribution<double> N01;
  std::vector<int> tnodes;
  std::vector<double> tval, tw;
  for (const auto& [i, m] : trace_mass) {
    tnodes.push_back(i);
    tval.push_back(data.u ? data.u(mesh.vertex(i)) : 0.0);
    tw.push_back(m);
  }
  std::vector<double> fval;
  for (const auto& F : facets) fval.push_back(data.flux ? data.flux(F.mid) : 0.0);
  double data2 = 0, inj2 = 0;
  auto perturb = [&](std::vector<double>& vals, const std::vector<double>& w) {
    double norm2 = 0, noise2 = 0;
    std::vector<double> xi(vals.size());
    for (size_t i = 0; i < vals.size(); ++i) {
      xi[i] = N01(rng);
      norm2 += w[i] * vals[i] * vals[i];
      noise2 += w[i] * xi[i] * xi[i];
    }
    data2 += norm2;
    if (data.delta <= 0 || norm2 == 0 || noise2 == 0) return;
    double s = data.delta * std::sqrt(norm2 / noise2);
    inj2 += s * s * noise2;
    for (size_t i = 0; i < vals.size(); ++i) vals[i] += s * xi[i];
  };
  perturb(tval, tw);
  std::vector<double> flen;
  for (const auto& F : facets) flen.push_back(F.len);
  perturb(fval, flen);

  BoundaryConditions natural;
  for (auto t : {BoundaryTag::dirichlet, BoundaryTag::neumann, BoundaryTag::robin, BoundaryTag::gamma0,
                 BoundaryTag::gamma})
    natural.kind[t] = BcKind::neumann;
  auto sys = assemble(mesh, laplace(2, Form::divergence), natural, nullptr);

  using Trip = Eigen::Triplet<double>;
  std::vector<Trip> rows;
  std::vector<double> rhs;
  int row = 0;
  for (size_t k = 0; k < tnodes.size(); ++k) {
    double s = std::sqrt(tw[k]);
    rows.emplace_back(row, tnodes[k], s);
    rhs.push_back(s * tval[k]);
    ++row;
  }
  for (size_t k = 0; k < facets.size(); ++k) {
    const auto& F = facets[k];
    const auto& cell = mesh.cells[F.cell];
    Point p0 = mesh.vertex(cell[0]), p1 = mesh.vertex(cell[1]), p2 = mesh.vertex(cell[2]);
    Eigen::Matrix2d J;
    J.col(0) = p1 - p0;
    J.col(1) = p2 - p0;
    Eigen::Matrix2d Jit = J.inverse().transpose();
    Eigen::Vector2d g[3] = {Jit * Eigen::Vector2d(-1, -1), Jit * Eigen::Vector2d(1, 0), Jit * Eigen::Vector2d(0, 1)};
    double s = std::sqrt(F.len);
    for (int j = 0; j < 3; ++j) rows.emplace_back(row, cell[j], s * g[j].dot(F.normal));
    rhs.push_back(s * fval[k]);
    ++row;
  }
  auto boundary = mesh.boundary_vertex_mask();
  Eigen::VectorXd lumped = sys.M_full * Eigen::VectorXd::Ones(V);
  for (int i = 0; i < V; ++i) {
    if (boundary[i]) continue;
    double s = opt.pde_weight / std::sqrt(lumped(i));
    for (SpMat::InnerIterator it(sys.K_full, i); it; ++it) rows.emplace_back(row, it.row(), s * it.value());
    rhs.push_back(0.0);
    ++row;
  }
  const int data_rows = static_cast<int>(tnodes.size() + facets.size());
  SpMat A(row, V);
  A.setFromTriplets(rows.begin(), rows.end());
  Eigen::VectorXd d = Eigen::Map<Eigen::VectorXd>(rhs.data(), row);
  SpMat N = SpMat(A.transpose() * A) + opt.reg_weight * SpMat(sys.K_full + sys.M_full);
  Eigen::SimplicialLDLT<SpMat> ldlt(N);
  if (ldlt.info() != Eigen::Success)
    throw Error(ErrorCode::SingularNormalEquations, "normal equations could not be factored");
  Eigen::VectorXd U = ldlt.solve(A.transpose() * d);
  if (ldlt.info() != Eigen::Success || !U.allFinite())
    throw Error(ErrorCode::SingularNormalEquations, "normal equations solve failed");
  if (info) {
    Eigen::VectorXd r = (A * U - d).head(data_rows);
    info->misfit = r.norm();
    info->noise_norm = std::sqrt(inj2);
    info->data_norm = std::sqrt(data2);
    info->h1_norm = std::sqrt(U.dot(sys.K_full * U) + U.dot(sys.M_full * U));
  }
  return FemField(std::make_shared<SimplicialMesh>(mesh), U);
}

RegSweep reg_sweep(const SimplicialMesh& mesh, const CauchyData& data, double reg_max, double factor, int steps,
                   double tau) {
  if (!(reg_max > 0 && factor > 0 && factor < 1) || steps < 3)
    throw Error(ErrorCode::InvalidArgument, "sweep needs reg_max > 0, factor in (0, 1), steps >= 3");
  RegSweep sw;
  double reg = reg_max;
  for (int s = 0; s < steps; ++s, reg *= factor) {
    CauchyInfo info;
    cauchy_complete(mesh, data, {reg, 1.0}, &info);
    sw.reg.push_back(reg);
    sw.misfit.push_back(info.misfit);
    sw.h1_norm.push_back(info.h1_norm);
    sw.noise_norm = info.noise_norm;
  }
  double best = -1e300;
  for (int s = 1; s + 1 < steps; ++s) {
    double x0 = std::log(sw.misfit[s - 1]), x1 = std::log(sw.misfit[s]), x2 = std::log(sw.misfit[s + 1]);
    double y0 = std::log(sw.h1_norm[s - 1]), y1 = std::log(sw.h1_norm[s]), y2 = std::log(sw.h1_norm[s + 1]);
    double dx = (x2 - x0) / 2, dy = (y2 - y0) / 2, ddx = x2 - 2 * x1 + x0, ddy = y2 - 2 * y1 + y0;
    double k = (dx * ddy - dy * ddx) / std::pow(dx * dx + dy * dy + 1e-300, 1.5);
    if (std::isfinite(k) && k > best) best = k, sw.corner = s;
  }
  CauchyData clean = data;
  clean.delta = 0.0;
  CauchyInfo ci;
  cauchy_complete(mesh, clean, {sw.reg.back(), 1.0}, &ci);
  sw.model_floor = ci.misfit;
  const double target = tau * std::hypot(sw.noise_norm, sw.model_floor);
  for (int s = 0; s < steps; ++s)
    if (sw.misfit[s] <= target) {
      sw.discrepancy = s;
      break;
    }
  if (sw.discrepancy < 0)
    sw.discrepancy = static_cast<int>(std::min_element(sw.misfit.begin(), sw.misfit.end()) - sw.misfit.begin());
  return sw;
}

// ---------------------------------------------------------------- stability moduli

const char* modulus_name(Modulus m) {
  switch (m) {
    case Modulus::phi_beta: return "phi_beta";
    case Modulus::psi: return "psi";
    case Modulus::power: return "power";
  }
  return "?";
}

double phi_beta(double s, double beta) {
  if (s <= 0) return 0.0;
  return std::pow(std::abs(std::log(s)), -beta) + s;
}

namespace {

struct LogFitResult {
  double lnC, residual;
};

// Best ln C for fixed shape g: mean of ln e - ln g.
LogFitResult fit_shape(const std::vector<double>& le, const std::vector<double>& lg) {
  double lnC = 0;
  for (size_t i = 0; i < le.size(); ++i) lnC += le[i] - lg[i];
  lnC /= le.size();
  double r2 = 0;
  for (size_t i = 0; i < le.size(); ++i) {
    double e = le[i] - lg[i] - lnC;
    r2 += e * e;
  }
  return {lnC, std::sqrt(r2 / le.size())};
}

}  // namespace

StabilityFit stability_fit(const std::vector<double>& deltas, const std::vector<double>& errors, Modulus modulus) {
  if (deltas.size() != errors.size()) throw Error(ErrorCode::InvalidArgument, "deltas and errors differ in length");
  if (deltas.size() < 5) throw Error(ErrorCode::InsufficientData, "need at least 5 pairs");
  for (size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0 && deltas[i] < 1)) throw Error(ErrorCode::InvalidArgument, "noise levels must lie in (0, 1)");
    if (i > 0 && !(deltas[i] < deltas[i - 1]))
      throw Error(ErrorCode::InvalidArgument, "noise levels must be strictly decreasing");
    if (!(errors[i] > 0)) throw Error(ErrorCode::InvalidArgument, "errors must be positive");
  }
  if (deltas.front() / deltas.back() < 100 * (1 - 1e-12))
    throw Error(ErrorCode::InsufficientData, "noise levels must span two decades");

  StabilityFit fit;
  fit.deltas = deltas;
  fit.errors = errors;
  fit.modulus = modulus;
  const size_t m = deltas.size();
  std::vector<double> le(m), ld(m);
  for (size_t i = 0; i < m; ++i) {
    le[i] = std::log(errors[i]);
    ld[i] = std::log(deltas[i]);
  }
  fit.power_exponent = slope(ld, le);
  {
    std::vector<double> lg(m);
    for (size_t i = 0; i < m; ++i) lg[i] = fit.power_exponent * ld[i];
    auto r = fit_shape(le, lg);
    fit.power_C = std::exp(r.lnC);
    fit.power_residual = r.residual;
  }
  auto log_modulus = [&](double beta) {
    std::vector<double> lg(m);
    for (size_t i = 0; i < m; ++i) lg[i] = std::log(phi_beta(deltas[i], beta));
    return fit_shape(le, lg);
  };
  if (modulus == Modulus::power) {
    fit.C = fit.power_C;
    fit.beta = fit.power_exponent;
    fit.residual = fit.power_residual;
  } else {
    double beta = 0.5;
    if (modulus == Modulus::phi_beta) {
      // coarse scan, then golden section around the best grid point
      const double lo = 0.01, hi = 5.0;
      const int G = 500;
      int best = 0;
      double bestr = 1e300;
      for (int g = 0; g <= G; ++g) {
        double r = log_modulus(lo + (hi - lo) * g / G).residual;
        if (r < bestr) bestr = r, best = g;
      }
      double a = lo + (hi - lo) * std::max(0, best - 1) / G, b = lo + (hi - lo) * std::min(G, best + 1) / G;
      const double gr = (std::sqrt(5.0) - 1) / 2;
      double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
      double f1 = log_modulus(x1).residual, f2 = log_modulus(x2).residual;
      for (int it = 0; it < 200 && b - a > 1e-12; ++it) {
        if (f1 < f2) {
          b = x2, x2 = x1, f2 = f1;
          x1 = b - gr * (b - a);
          f1 = log_modulus(x1).residual;
        } else {
          a = x1, x1 = x2, f1 = f2;
          x2 = a + gr * (b - a);
          f2 = log_modulus(x2).residual;
        }
      }
      beta = 0.5 * (a + b);
    }
    auto r = log_modulus(beta);
    fit.beta = beta;
    fit.C = std::exp(r.lnC);
    fit.residual = r.residual;
  }
  fit.log_beats_power = modulus != Modulus::power && fit.residual < fit.power_residual;
  return fit;
}

// ---------------------------------------------------------------- observability

ObservabilityReport observability_ratio(const AssembledSystem& sys, const Spectrum& spectrum,
                                        const std::function<bool(const Point&)>& in_omega,
                                        std::optional<double> expected_measure) {
  const auto& mesh = *sys.mesh;
  ObservabilityReport rep;
  rep.omega_measure = measure_of(mesh, in_omega);
  if (!(rep.omega_measure > 0)) throw Error(ErrorCode::SubdomainUnresolved, "no mesh cell lies in omega");
  if (expected_measure && std::abs(rep.omega_measure - *expected_measure) > 0.01 * *expected_measure)
    throw Error(ErrorCode::SubdomainUnresolved, "mesh cells in omega measure " + fmt(rep.omega_measure) +
                                                    " against " + fmt(*expected_measure));
  SpMat Mw = assemble_mass_on(mesh, in_omega);
  const int k = static_cast<int>(spectrum.eigenvalues.size());
  for (int m = 0; m < k; ++m) {
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(mesh.num_vertices());
    for (int i = 0; i < sys.num_free(); ++i) phi(sys.free_to_vertex[i]) = spectrum.vectors(i, m);
    double total = phi.dot(sys.M_full * phi);
    double part = phi.dot(Mw * phi);
    double ratio = std::sqrt(std::max(part, 0.0) / total);
    rep.lambda.push_back(spectrum.eigenvalues(m));
    rep.ratios.push_back(ratio);
    rep.neg_log.push_back(-std::log(ratio));
  }
  if (k >= 2) {
    std::vector<double> s(k);
    for (int m = 0; m < k; ++m) s[m] = std::sqrt(rep.lambda[m]);
    rep.kappa = slope(s, rep.neg_log);
    double ms = std::accumulate(s.begin(), s.end(), 0.0) / k;
    double my = std::accumulate(rep.neg_log.begin(), rep.neg_log.end(), 0.0) / k;
    rep.offset = my - rep.kappa * ms;
    double r2 = 0;
    for (int m = 0; m < k; ++m) {
      double e = rep.neg_log[m] - (rep.kappa * s[m] + rep.offset);
      r2 += e * e;
    }
    rep.residual = std::sqrt(r2 / k);
    if (k >= 3) {
      Eigen::MatrixXd X(k, 3);
      Eigen::VectorXd y(k);
      for (int m = 0; m < k; ++m) {
        X(m, 0) = 1;
        X(m, 1) = s[m];
        X(m, 2) = s[m] * s[m];
        y(m) = rep.neg_log[m];
      }
      rep.curvature = X.colPivHouseholderQr().solve(y)(2);
    }
  }
  return rep;
}

}  // namespace elliptica
