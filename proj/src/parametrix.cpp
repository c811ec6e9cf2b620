#include "elliptica/parametrix.hpp"

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

struct GaussRule {
  std::vector<double> x, w;  // on [0, 1]
};

const GaussRule& gauss01(int order) {
  static std::map<int, GaussRule> cache;
  auto it = cache.find(order);
  if (it != cache.end()) return it->second;
  GaussRule g;
  gauss_legendre(order, 0.0, 1.0, g.x, g.w);
  return cache.emplace(order, g).first->second;
}

// Radial nodes on [0, R] with panels refined geometrically toward 0.
struct RadialRule {
  std::vector<double> t, w;
};

RadialRule radial_rule(double R, int levels, int sub, int order) {
  RadialRule r;
  const auto& g = gauss01(order);
  auto panel = [&](double a, double b) {
    for (size_t q = 0; q < g.x.size(); ++q) {
      r.t.push_back(a + (b - a) * g.x[q]);
      r.w.push_back((b - a) * g.w[q]);
    }
  };
  double hi = R;
  for (int k = 0; k < levels; ++k) {
    double lo = hi / 2;
    for (int s = 0; s < sub; ++s) panel(lo + (hi - lo) * s / sub, lo + (hi - lo) * (s + 1) / sub);
    hi = lo;
  }
  panel(0.0, hi);
  return r;
}

// int over B(x, R) in the domain of f(z) * weight(|z - x|), polar about x.
template <class F, class W>
double polar_integral(const F& f, const Point& x, double R, const Domain& domain, const W& weight,
                      int angular = 48, int levels = 10, int sub = 1, int order = 6) {
  double s = 0;
  for (int a = 0; a < angular; ++a) {
    double th = 2 * kPi * (a + 0.5) / angular;
    Point dir = make_point(std::cos(th), std::sin(th));
    double ext = std::min(R, domain.ray_exit(x, dir));
    if (!(ext > 0)) continue;
    RadialRule rr = radial_rule(ext, levels, sub, order);
    for (size_t q = 0; q < rr.t.size(); ++q) {
      double t = rr.t[q];
      s += rr.w[q] * t * weight(t) * f(x + t * dir);
    }
  }
  return s * 2 * kPi / angular;
}

void require_2d(const NodeSet& ns) {
  if (ns.domain.dim() != 2) throw Error(ErrorCode::UnsupportedDimension, "node sets are 2D");
}

struct LogFit {
  double slope = 0, intercept = 0, rms = 0;
};

LogFit log_fit(const std::vector<double>& lx, const std::vector<double>& ly) {
  const size_t m = lx.size();
  double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / m;
  double my = std::accumulate(ly.begin(), ly.end(), 0.0) / m;
  double sxy = 0, sxx = 0;
  for (size_t i = 0; i < m; ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (!(sxx > 0)) throw Error(ErrorCode::DegenerateFit, "fit abscissae coincide");
  LogFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double r2 = 0;
  for (size_t i = 0; i < m; ++i) {
    double e = ly[i] - (f.intercept + f.slope * lx[i]);
    r2 += e * e;
  }
  f.rms = std::sqrt(r2 / m);
  return f;
}

}  // namespace

// ---------------------------------------------------------------- parametrix

double fundamental_profile(int n, double t) {
  if (n == 2) return -std::log(t) / (2 * kPi);
  return std::pow(t, 2 - n) / ((n - 2) * sphere_area(n));
}

Parametrix::Parametrix(EllipticOperator op) : op_(std::move(op)) {
  if (op_.form != Form::nondivergence)
    throw Error(ErrorCode::FormMismatch, "the parametrix is built from a nondivergence-form operator");
  if (op_.dim != 2 && op_.dim != 3) throw Error(ErrorCode::UnsupportedDimension, "parametrix needs n = 2 or 3");
}

Parametrix::Frozen Parametrix::frozen(const Point& y) const {
  SmallMat A = op_.A(y);
  double det = A.determinant();
  double scale = std::pow(A.cwiseAbs().maxCoeff(), A.rows());
  if (!std::isfinite(det) || !(det > 1e-14 * scale))
    throw Error(ErrorCode::SingularCoefficientMatrix, "A(y) is singular or indefinite");
  return {A.inverse(), std::sqrt(det)};
}

double Parametrix::rho(const Point& x, const Point& y) const {
  Point r = x - y;
  if (r.norm() == 0.0) throw Error(ErrorCode::CoincidentPoints, "x == y");
  auto f = frozen(y);
  return std::sqrt(r.dot(f.Ainv * r));
}

double rho(const EllipticOperator& op, const Point& x, const Point& y) {
  EllipticOperator copy = op;
  copy.form = Form::nondivergence;
  return Parametrix(copy).rho(x, y);
}

double Parametrix::d(const Point& y) const { return frozen(y).d; }

double Parametrix::value(const Point& x, const Point& y) const {
  return fundamental_profile(dim(), rho(x, y)) / d(y);
}

Point Parametrix::grad(const Point& x, const Point& y) const {
  Point r = x - y;
  if (r.norm() == 0.0) throw Error(ErrorCode::CoincidentPoints, "x == y");
  auto f = frozen(y);
  Point Br = f.Ainv * r;
  double rho = std::sqrt(r.dot(Br));
  const int n = dim();
  return -Br / (sphere_area(n) * f.d * std::pow(rho, n));
}

SmallMat Parametrix::hess(const Point& x, const Point& y) const {
  Point r = x - y;
  if (r.norm() == 0.0) throw Error(ErrorCode::CoincidentPoints, "x == y");
  auto f = frozen(y);
  Point Br = f.Ainv * r;
  double rho = std::sqrt(r.dot(Br));
  const int n = dim();
  double c = 1.0 / (sphere_area(n) * f.d * std::pow(rho, n));
  return -c * f.Ainv + (n * c / (rho * rho)) * (Br * Br.transpose());
}

double kernel_K(const Parametrix& P, const Point& x, const Point& y) {
  const auto& op = P.op();
  SmallMat diff = op.A(x) - op.A(y);
  double k = 0;
  if (diff.cwiseAbs().maxCoeff() != 0.0) k += (diff.cwiseProduct(P.hess(x, y))).sum();
  if (op.b) k += op.b(x).dot(P.grad(x, y));
  if (op.c) k += op.c(x) * P.value(x, y);
  if (k == 0.0 && (x - y).norm() == 0.0) throw Error(ErrorCode::CoincidentPoints, "x == y");
  return k;
}

SandwichReport sandwich_check(const Parametrix& P, const std::vector<std::pair<Point, Point>>& pairs) {
  SandwichReport rep;
  const int n = P.dim();
  const double mu = P.op().mu;
  const double w = sphere_area(n);
  for (const auto& [x, y] : pairs) {
    ++rep.pairs;
    double r = (x - y).norm();
    double H = P.value(x, y);
    double lo, hi;
    if (n >= 3) {
      double base = std::pow(r, 2 - n) / ((n - 2) * w);
      lo = base / std::pow(mu, n / 2.0);
      hi = base * std::pow(mu, n / 2.0);
    } else {
      if (!(mu * r < 1)) continue;
      lo = -std::log(mu * r) / (2 * kPi * mu);
      hi = -(mu / (2 * kPi)) * std::log(r / mu);
    }
    ++rep.checked;
    double excess = std::max((lo - H) / std::abs(lo), (H - hi) / std::abs(hi));
    rep.worst = std::max(rep.worst, excess);
    if (excess > 1e-12) ++rep.violations;
  }
  return rep;
}

// ---------------------------------------------------------------- node sets

NodeSet disk_nodes(const Point& center, double radius, int rings) {
  if (!(radius > 0)) throw Error(ErrorCode::NonPositiveRadius, "disk radius must be positive");
  if (rings < 1) throw Error(ErrorCode::InvalidArgument, "need at least one ring");
  NodeSet ns;
  ns.domain = Domain::disk(center, radius);
  const double dr = radius / rings;
  std::vector<Point> pts;
  std::vector<double> w;
  for (int k = 1; k <= rings; ++k) {
    double r = (k - 0.5) * dr;
    int m = std::max(3, static_cast<int>(std::lround(2 * kPi * r / dr)));
    double area = kPi * dr * dr * (k * k - (k - 1) * (k - 1)) / m;
    for (int j = 0; j < m; ++j) {
      double th = 2 * kPi * (j + 0.5 * (k % 2)) / m;
      pts.push_back(center + make_point(r * std::cos(th), r * std::sin(th)));
      w.push_back(area);
    }
  }
  ns.nodes.resize(static_cast<int>(pts.size()), 2);
  ns.weights.resize(static_cast<int>(pts.size()));
  for (size_t i = 0; i < pts.size(); ++i) {
    ns.nodes.row(static_cast<int>(i)) = pts[i].transpose();
    ns.weights(static_cast<int>(i)) = w[i];
  }
  double sp = 0;
  for (int i = 0; i < ns.size(); ++i) {
    double best = 1e300;
    for (int j = 0; j < ns.size(); ++j)
      if (j != i) best = std::min(best, (ns.nodes.row(i) - ns.nodes.row(j)).squaredNorm());
    sp = std::max(sp, best);
  }
  ns.spacing = std::sqrt(sp);
  return ns;
}

NodeSet grid_nodes(const Domain& rect, int m) {
  if (rect.kind() != Domain::Kind::rectangle || rect.dim() != 2)
    throw Error(ErrorCode::InvalidArgument, "grid nodes need a 2D rectangle");
  if (m < 1) throw Error(ErrorCode::InvalidArgument, "need m >= 1");
  NodeSet ns;
  ns.domain = rect;
  double hx = (rect.hi()(0) - rect.lo()(0)) / m, hy = (rect.hi()(1) - rect.lo()(1)) / m;
  ns.nodes.resize(m * m, 2);
  ns.weights = Eigen::VectorXd::Constant(m * m, hx * hy);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      ns.nodes.row(i * m + j) << rect.lo()(0) + (i + 0.5) * hx, rect.lo()(1) + (j + 0.5) * hy;
  ns.spacing = std::max(hx, hy);
  return ns;
}

std::vector<std::pair<int, double>> NodeSet::local_interpolation(const Point& x, int count) const {
  count = std::min(count, size());
  std::vector<int> idx(size());
  std::iota(idx.begin(), idx.end(), 0);
  auto dist = [&](int i) { return (nodes.row(i).transpose() - x).squaredNorm(); };
  std::partial_sort(idx.begin(), idx.begin() + count, idx.end(), [&](int a, int b) { return dist(a) < dist(b); });
  const int n = static_cast<int>(x.size());
  Eigen::MatrixXd V(count, n + 1);
  for (int r = 0; r < count; ++r) {
    V(r, 0) = 1.0;
    V.row(r).tail(n) = nodes.row(idx[r]) - x.transpose();
  }
  Eigen::MatrixXd G = V.transpose() * V;
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n + 1);
  e(0) = 1.0;
  Eigen::VectorXd lam = V * G.ldlt().solve(e);
  std::vector<std::pair<int, double>> out;
  for (int r = 0; r < count; ++r) out.emplace_back(idx[r], lam(r));
  return out;
}

double cutoff(double s) {
  if (s <= 0.5) return 1.0;
  if (s >= 1.0) return 0.0;
  double t = (s - 0.5) / 0.5;
  auto f = [](double u) { return u > 0 ? std::exp(-1.0 / u) : 0.0; };
  double a = f(1 - t), b = f(t);
  return a / (a + b);
}

double local_polar_integral(const KernelFn& k, const Point& x, double delta, const Domain& domain,
                            bool absolute) {
  auto f = [&](const Point& z) {
    double v = k(x, z);
    return absolute ? std::abs(v) : v;
  };
  if (absolute) return polar_integral(f, x, delta, domain, [](double) { return 1.0; });
  return polar_integral(f, x, delta, domain, [delta](double t) { return cutoff(t / delta); });
}

Eigen::RowVectorXd singular_row(const NodeSet& ns, const KernelFn& k, const Point& x, double delta) {
  require_2d(ns);
  const int N = ns.size();
  Eigen::RowVectorXd row(N);
  int self = -1;
  double scale = ns.domain.diameter();
  for (int j = 0; j < N; ++j)
    if ((ns.node(j) - x).norm() <= 1e-14 * scale) self = j;
  double S = 0;
  for (int j = 0; j < N; ++j) {
    if (j == self) {
      row(j) = 0;
      continue;
    }
    Point z = ns.node(j);
    double v = ns.weights(j) * k(x, z);
    row(j) = v;
    S += v * cutoff((z - x).norm() / delta);
  }
  // singularity subtraction with a locally constant density
  double corr = local_polar_integral(k, x, delta, ns.domain) - S;
  if (self >= 0) {
    row(self) += corr;
  } else {
    for (const auto& [j, lam] : ns.local_interpolation(x)) row(j) += lam * corr;
  }
  return row;
}

KernelGrid nystrom_assemble(const NodeSet& ns, const KernelFn& k, double alpha, double delta,
                            const std::string& id) {
  require_2d(ns);
  if (delta <= 0) delta = 2 * ns.spacing;
  if (delta < ns.spacing)
    throw Error(ErrorCode::UnresolvedSingularity, "delta " + fmt(delta) + " is below the node spacing");
  KernelGrid g;
  g.id = id;
  g.alpha = alpha;
  g.delta = delta;
  g.nodes = std::make_shared<NodeSet>(ns);
  const int N = ns.size();
  g.values.resize(N, N);
  g.op.resize(N, N);
  for (int i = 0; i < N; ++i) {
    Point x = ns.node(i);
    g.op.row(i) = singular_row(ns, k, x, delta);
    for (int j = 0; j < N; ++j)
      if (j != i) g.values(i, j) = k(x, ns.node(j));
    // average over a disk with the node's area
    double rc = std::sqrt(ns.weights(i) / kPi);
    double cell = polar_integral([&](const Point& z) { return k(x, z); }, x, rc, ns.domain,
                                 [](double) { return 1.0; });
    g.values(i, i) = cell / (kPi * rc * rc);
  }
  return g;
}

KernelGrid iterated_kernel(const KernelGrid& grid, int j) {
  if (j < 1) throw Error(ErrorCode::InvalidArgument, "iteration index must be >= 1");
  if (j == 1) return grid;
  KernelGrid out = grid;
  out.id = "K_" + std::to_string(j);
  out.alpha = j * grid.alpha;
  for (int m = 1; m < j; ++m) {
    out.values = grid.op * out.values;
    out.op = grid.op * out.op;
  }
  return out;
}

SingularityFit fit_kernel_exponent(const KernelFn& k, const Point& y, double rmin, double rmax, int count) {
  if (count < 2 || !(rmin > 0 && rmax > rmin))
    throw Error(ErrorCode::InsufficientSamples, "need at least two distinct radii");
  const int n = static_cast<int>(y.size());
  if (n != 2) throw Error(ErrorCode::UnsupportedDimension, "direction sampling is 2D");
  std::vector<double> lx, ly;
  for (int i = 0; i < count; ++i) {
    double r = rmin * std::pow(rmax / rmin, double(i) / (count - 1));
    double s = 0;
    const int M = 16;
    for (int a = 0; a < M; ++a) {
      double th = 2 * kPi * (a + 0.5) / M;
      double v = k(y + r * make_point(std::cos(th), std::sin(th)), y);
      s += v * v / M;
    }
    if (s > 0) {
      lx.push_back(std::log(r));
      ly.push_back(0.5 * std::log(s));
    }
  }
  if (lx.size() < 2) throw Error(ErrorCode::InsufficientSamples, "kernel vanishes on the sample radii");
  LogFit f = log_fit(lx, ly);
  return {f.slope, std::exp(f.intercept), f.rms, static_cast<int>(lx.size())};
}

SingularityFit fit_grid_exponent(const KernelGrid& grid, const Point& y, double rmin, double rmax, int bins) {
  const NodeSet& ns = *grid.nodes;
  int c = 0;
  double best = 1e300;
  for (int i = 0; i < ns.size(); ++i) {
    double d = (ns.node(i) - y).norm();
    if (d < best) best = d, c = i;
  }
  std::vector<double> sum(bins, 0.0), lr(bins, 0.0);
  std::vector<int> cnt(bins, 0);
  const double span = std::log(rmax / rmin);
  for (int i = 0; i < ns.size(); ++i) {
    if (i == c) continue;
    double d = (ns.node(i) - ns.node(c)).norm();
    if (d < rmin || d > rmax) continue;
    int b = std::min(bins - 1, static_cast<int>(std::log(d / rmin) / span * bins));
    double v = grid.values(i, c);
    sum[b] += v * v;
    lr[b] += std::log(d);
    ++cnt[b];
  }
  std::vector<double> lx, ly;
  for (int b = 0; b < bins; ++b)
    if (cnt[b] > 0 && sum[b] > 0) {
      lx.push_back(lr[b] / cnt[b]);
      ly.push_back(0.5 * std::log(sum[b] / cnt[b]));
    }
  if (lx.size() < 2) throw Error(ErrorCode::InsufficientSamples, "too few populated distance bins");
  LogFit f = log_fit(lx, ly);
  return {f.slope, std::exp(f.intercept), f.rms, static_cast<int>(lx.size())};
}

double near_field_norm(const NodeSet& ns, const KernelFn& k, double delta, int stride) {
  require_2d(ns);
  double m = 0;
  for (int i = 0; i < ns.size(); i += std::max(1, stride))
    m = std::max(m, local_polar_integral(k, ns.node(i), delta, ns.domain, true));
  return m;
}

// ---------------------------------------------------------------- Fredholm

FredholmSolver::FredholmSolver(const Eigen::MatrixXd& A, double defect_tol) {
  const int n = static_cast<int>(A.rows());
  if (A.cols() != n) throw Error(ErrorCode::InvalidArgument, "operator matrix must be square");
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n) - A;
  std::mt19937 rng(17);
  std::normal_distribution<double> N01;
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = N01(rng);
  v.normalize();
  for (int it = 0; it < 60; ++it) {
    Eigen::VectorXd w = M.transpose() * (M * v);
    norm_ = std::sqrt(w.norm());
    v = w / w.norm();
  }
  lu_.compute(M);
  for (int i = 0; i < n; ++i) v(i) = N01(rng);
  v.normalize();
  double lam = 0;
  for (int it = 0; it < 100; ++it) {
    Eigen::VectorXd w = lu_.solve(lu_.transpose().solve(v));
    double l = w.norm();
    if (!std::isfinite(l)) {
      lam = std::numeric_limits<double>::infinity();
      break;
    }
    v = w / l;
    if (std::abs(l - lam) <= 1e-10 * l) {
      lam = l;
      break;
    }
    lam = l;
  }
  sigma_min_ = std::isfinite(lam) ? 1.0 / std::sqrt(lam) : 0.0;
  if (!(sigma_min_ >= defect_tol * norm_))
    throw Error(ErrorCode::NontrivialDefect,
                "smallest singular value of I - A is " + fmt(sigma_min_) +
                    "; the null-space correction for a nontrivial defect is not implemented");
}

Eigen::VectorXd FredholmSolver::solve(const Eigen::VectorXd& rhs) const { return lu_.solve(rhs); }
Eigen::MatrixXd FredholmSolver::solve(const Eigen::MatrixXd& rhs) const { return lu_.solve(rhs); }

double spectral_radius_estimate(const Eigen::MatrixXd& A, int iterations) {
  const int n = static_cast<int>(A.rows());
  std::mt19937 rng(23);
  std::normal_distribution<double> N01;
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = N01(rng);
  v.normalize();
  double acc = 0;
  int counted = 0;
  for (int it = 0; it < iterations; ++it) {
    Eigen::VectorXd w = A * v;
    double l = w.norm();
    if (l == 0) return 0.0;
    if (it >= iterations / 2) {
      acc += std::log(l);
      ++counted;
    }
    v = w / l;
  }
  return std::exp(acc / counted);
}

// ---------------------------------------------------------------- fundamental solution

FundamentalSolution::FundamentalSolution(const Parametrix& P, const NodeSet& ns, double delta)
    : P_(P), nodes_(std::make_shared<NodeSet>(ns)) {
  require_2d(ns);
  if (P.dim() != 2) throw Error(ErrorCode::UnsupportedDimension, "the Nystrom pipeline is 2D");
  const auto& op = P.op();
  trivial_ = op.constant_principal && !op.has_lower_order();
  if (trivial_) return;
  Parametrix Pc = P_;
  grid_ = nystrom_assemble(ns, [Pc](const Point& x, const Point& z) { return kernel_K(Pc, x, z); }, op.alpha,
                           delta, "K");
  solver_ = std::make_shared<FredholmSolver>(grid_.op);
}

Eigen::VectorXd FundamentalSolution::density(const Point& y) const {
  const int N = nodes_->size();
  if (trivial_) return Eigen::VectorXd::Zero(N);
  for (const auto& [cy, g] : cache_)
    if (cy.size() == y.size() && (cy - y).norm() == 0.0) return g;
  Eigen::VectorXd rhs(N);
  int self = -1;
  for (int i = 0; i < N; ++i)
    if ((nodes_->node(i) - y).norm() <= 1e-14 * nodes_->domain.diameter()) self = i;
  if (self >= 0) {
    rhs = grid_.values.col(self);
  } else {
    for (int i = 0; i < N; ++i) rhs(i) = kernel_K(P_, nodes_->node(i), y);
  }
  Eigen::VectorXd g = solver_->solve(rhs);
  if (cache_.size() >= 4) cache_.erase(cache_.begin());
  cache_.emplace_back(y, g);
  return g;
}

Eigen::MatrixXd FundamentalSolution::density_matrix() const {
  const int N = nodes_->size();
  if (trivial_) return Eigen::MatrixXd::Zero(N, N);
  return solver_->solve(grid_.values);
}

double FundamentalSolution::difference(const Point& x, const Point& y) const {
  if (trivial_) return 0.0;
  Eigen::VectorXd g = density(y);
  Parametrix Pc = P_;
  auto H = [Pc](const Point& a, const Point& z) { return Pc.value(a, z); };
  return singular_row(*nodes_, H, x, grid_.delta).dot(g);
}

double FundamentalSolution::operator()(const Point& x, const Point& y) const {
  return P_.value(x, y) + difference(x, y);
}

std::string FundamentalSolution::dump_csv(const Point& y, const std::vector<Point>& xs) const {
  std::ostringstream os;
  os << "x1,x2,y1,y2,H,F,F_minus_H\n";
  for (const auto& x : xs) {
    double H = P_.value(x, y), D = difference(x, y);
    os << fmt(x(0)) << ',' << fmt(x(1)) << ',' << fmt(y(0)) << ',' << fmt(y(1)) << ',' << fmt(H) << ','
       << fmt(H + D) << ',' << fmt(D) << '\n';
  }
  return os.str();
}

namespace {

void require_support(const ScalarField& phi, const Domain& domain) {
  if (!phi.support)
    throw Error(ErrorCode::TestFunctionNotSupported, "test function must declare a compact support");
  if (domain.boundary_distance(phi.support->center) < phi.support->radius)
    throw Error(ErrorCode::TestFunctionNotSupported, "support of the test function leaves the domain");
}

// Polar quadrature about y covering the support of phi.
template <class F>
double integrate_about(const F& f, const Point& y, const ScalarField& phi, int angular, int levels, int sub,
                       int order) {
  double R = (y - phi.support->center).norm() + phi.support->radius;
  Domain whole = Domain::disk(y, R * (1 + 1e-12));
  return polar_integral(f, y, R, whole, [](double) { return 1.0; }, angular, levels, sub, order);
}

ParametrixResidual finish(double integral, double phi_y) {
  ParametrixResidual r;
  r.integral = integral;
  r.phi_y = phi_y;
  r.residual = std::abs(integral - phi_y);
  r.relative = phi_y != 0 ? r.residual / std::abs(phi_y) : r.residual;
  return r;
}

}  // namespace

ParametrixResidual verify_parametrix(const Parametrix& P, const ScalarField& phi, const Point& y,
                                     const Domain& domain) {
  require_support(phi, domain);
  const auto& op = P.op();
  const Point c = phi.support->center;
  const double R = phi.support->radius;
  auto f = [&](const Point& x) -> double {
    if ((x - c).norm() >= R || (x - y).norm() == 0.0) return 0.0;
    return -P.value(x, y) * apply_adjoint(op, phi, x) + kernel_K(P, x, y) * phi(x);
  };
  double I = integrate_about(f, y, phi, 96, 24, 4, 8);
  return finish(I, phi(y));
}

ParametrixResidual verify_fundamental(const FundamentalSolution& F, const ScalarField& phi, const Point& y,
                                      const Domain& domain) {
  require_support(phi, domain);
  const auto& P = F.parametrix();
  const auto& op = P.op();
  const Point c = phi.support->center;
  const double R = phi.support->radius;
  auto h_part = [&](const Point& x) -> double {
    if ((x - c).norm() >= R || (x - y).norm() == 0.0) return 0.0;
    return -P.value(x, y) * apply_adjoint(op, phi, x);
  };
  double I = integrate_about(h_part, y, phi, 96, 24, 4, 8);
  if (!F.trivial()) {
    // F - H is bounded and smooth away from y, so a coarser rule suffices
    auto g_part = [&](const Point& x) -> double {
      if ((x - c).norm() >= R) return 0.0;
      return -F.difference(x, y) * apply_adjoint(op, phi, x);
    };
    I += integrate_about(g_part, y, phi, 32, 4, 3, 6);
  }
  return finish(I, phi(y));
}

GrowthReport verify_fundamental_growth(const FundamentalSolution& F, const Point& y, double rmin, double rmax,
                                       int count) {
  GrowthReport rep;
  if (count < 3) throw Error(ErrorCode::InsufficientSamples, "need at least three radii");
  if (rmin < F.nodes().spacing)
    throw Error(ErrorCode::InvalidArgument, "samples must stay outside the node spacing");
  if (F.trivial()) {
    rep.identically_zero = true;
    return rep;
  }
  std::vector<double> lx, ly;
  for (int i = 0; i < count; ++i) {
    double r = rmin * std::pow(rmax / rmin, double(i) / (count - 1));
    double s = 0;
    const int M = 8;
    for (int a = 0; a < M; ++a) {
      double th = 2 * kPi * (a + 0.5) / M;
      double v = F.difference(y + r * make_point(std::cos(th), std::sin(th)), y);
      s += v * v / M;
    }
    if (s > 0) {
      lx.push_back(std::log(r));
      ly.push_back(0.5 * std::log(s));
    }
  }
  if (lx.empty()) {
    rep.identically_zero = true;
    return rep;
  }
  if (lx.size() < 3) throw Error(ErrorCode::InsufficientSamples, "too few nonzero samples");
  LogFit f = log_fit(lx, ly);
  rep.fit = {f.slope, std::exp(f.intercept), f.rms, static_cast<int>(lx.size())};
  return rep;
}

}  // namespace elliptica
