#include "elliptica/experiments.hpp"

#include "elliptica/geometry.hpp"
#include "elliptica/harmonic.hpp"
#include "elliptica/operators.hpp"
#include "elliptica/parametrix.hpp"
#include "elliptica/stability.hpp"
#include "elliptica/variational.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

namespace elliptica {

const char* version() { return "0.1.0"; }

namespace {

[[noreturn]] void bad_config(const std::string& msg) { throw Error(ErrorCode::ConfigParseError, msg); }

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Csv {
 public:
  explicit Csv(const std::string& header) { os_ << header << '\n'; }
  void row(std::initializer_list<double> values) {
    bool first = true;
    for (double v : values) {
      if (!first) os_ << ',';
      os_ << num(v);
      first = false;
    }
    os_ << '\n';
  }
  std::string str() const { return os_.str(); }

 private:
  std::ostringstream os_;
};

struct Run {
  Json results = Json::object();
  std::vector<Assertion> assertions;
  std::vector<std::pair<std::string, std::string>> files;

  // passed: value <= threshold unless given explicitly
  void check(const std::string& name, const std::string& invariant, double value, double threshold) {
    check(name, invariant, value, threshold, value <= threshold);
  }
  void check(const std::string& name, const std::string& invariant, double value, double threshold, bool passed) {
    assertions.push_back({name, invariant, passed, value, threshold});
  }
  void file(const std::string& name, std::string contents) { files.emplace_back(name, std::move(contents)); }
};

Json vec(const std::vector<double>& v) { return Json(v); }

// ---- parameter decoding

Point point_of(const Json& j, const std::string& key) {
  if (!j.is_array() || j.empty() || j.size() > 3) bad_config("'" + key + "' must be an array of 1 to 3 numbers");
  Point p(static_cast<int>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) bad_config("'" + key + "' must contain numbers");
    p(static_cast<int>(i)) = j[i].get<double>();
  }
  return p;
}

std::vector<double> numbers_of(const Json& j, const std::string& key) {
  std::vector<double> v;
  for (const auto& x : j) {
    if (!x.is_number()) bad_config("'" + key + "' must contain numbers");
    v.push_back(x.get<double>());
  }
  return v;
}

Domain domain_of(const Json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "unit_square") return Domain::unit_square();
    if (s == "interval") return Domain::interval(0, 1);
    if (s == "l_shape") return Domain::l_shape();
    if (s == "unit_disk") return Domain::disk(make_point(0, 0), 1.0);
    bad_config("unknown domain '" + s + "' (unit_square, interval, l_shape, unit_disk, or an object)");
  }
  if (j.is_object() && j.contains("type") && j["type"].is_string()) {
    const auto t = j["type"].get<std::string>();
    auto need = [&](const char* k) -> const Json& {
      if (!j.contains(k)) bad_config(std::string("domain of type '") + t + "' needs '" + k + "'");
      return j[k];
    };
    if (t == "rectangle") return Domain::rectangle(point_of(need("lo"), "lo"), point_of(need("hi"), "hi"));
    if (t == "interval") {
      if (!need("a").is_number() || !need("b").is_number()) bad_config("interval ends must be numbers");
      return Domain::interval(j["a"].get<double>(), j["b"].get<double>());
    }
    if (t == "disk") {
      if (!need("radius").is_number()) bad_config("disk radius must be a number");
      return Domain::disk(point_of(need("center"), "center"), j["radius"].get<double>());
    }
    bad_config("unknown domain type '" + t + "' (rectangle, interval, disk)");
  }
  bad_config("'domain' must be a name or an object with a 'type'");
}

std::string domain_label(const Json& j) { return j.is_string() ? j.get<std::string>() : j.dump(); }

HarmonicSample sample_of(const Json& j, const std::string& key) {
  if (j.is_string()) return harmonic_by_name(j.get<std::string>(), 2);
  if (j.is_array() && !j.empty()) {
    std::vector<double> c;
    std::vector<HarmonicSample> parts;
    for (const auto& t : j) {
      if (!t.is_array() || t.size() != 2 || !t[0].is_number() || !t[1].is_string())
        bad_config("'" + key + "' must be a sample name or a list of [coefficient, name] pairs");
      c.push_back(t[0].get<double>());
      parts.push_back(harmonic_by_name(t[1].get<std::string>(), 2));
    }
    return combine(c, parts);
  }
  bad_config("'" + key + "' must be a sample name or a list of [coefficient, name] pairs");
}

bool at_origin(const Point& p) { return p.norm() == 0.0; }

EllipticOperator preset(const Json& p, Form form, int n = 2) {
  return operator_preset(p["operator"].get<std::string>(), n, form);
}

// ---- experiments

void exp_solve(const Json& p, Run& run) {
  Domain dom = domain_of(p["domain"]);
  if (dom.kind() != Domain::Kind::rectangle || dom.dim() != 2) bad_config("solve needs a 2D rectangle domain");
  const double x0 = dom.lo()(0), y0 = dom.lo()(1);
  const double a = kPi / (dom.hi()(0) - x0), b = kPi / (dom.hi()(1) - y0);
  ScalarField u;
  u.value = [=](const Point& x) { return std::sin(a * (x(0) - x0)) * std::sin(b * (x(1) - y0)); };
  u.grad = [=](const Point& x) {
    const double s = std::sin(a * (x(0) - x0)), t = std::sin(b * (x(1) - y0));
    return make_point(a * std::cos(a * (x(0) - x0)) * t, b * s * std::cos(b * (x(1) - y0)));
  };
  u.hess = [=](const Point& x) {
    const double s = std::sin(a * (x(0) - x0)), t = std::sin(b * (x(1) - y0));
    const double cs = std::cos(a * (x(0) - x0)), ct = std::cos(b * (x(1) - y0));
    SmallMat H(2, 2);
    H << -a * a * s * t, a * b * cs * ct, a * b * cs * ct, -b * b * s * t;
    return H;
  };
  EllipticOperator op = preset(p, Form::divergence);
  ScalarFn f = [&](const Point& x) { return apply(op, u, x); };

  const int refinements = p["refinements"].get<int>();
  if (refinements < 1) bad_config("'refinements' must be at least 1");
  double h = p["h"].get<double>();
  std::vector<double> hs, errors, ratios, residuals;
  std::vector<double> dofs;
  FemField last;
  for (int i = 0; i <= refinements; ++i, h /= 2) {
    auto mesh = build_rect_mesh(dom, h);
    auto sys = assemble(mesh, op, {}, f);
    SolveInfo info;
    last = solve(sys, &info);
    hs.push_back(h);
    errors.push_back(l2_error(mesh, last.values(), u.value));
    residuals.push_back(info.relative_residual);
    dofs.push_back(sys.num_free());
    if (i > 0) ratios.push_back(errors[i - 1] / errors[i]);
  }
  for (size_t i = 0; i < ratios.size(); ++i) {
    const bool ok = ratios[i] >= 3.5 && ratios[i] <= 4.5;
    run.check("error ratio h=" + num(hs[i]) + " -> " + num(hs[i + 1]) + " in [3.5, 4.5]",
              "variational: the P1 L2 error of a smooth solution is O(h^2)", ratios[i], 4.0, ok);
  }
  run.results["h"] = vec(hs);
  run.results["dofs"] = vec(dofs);
  run.results["l2_error"] = vec(errors);
  run.results["ratios"] = vec(ratios);
  run.results["relative_residual"] = vec(residuals);
  run.file("solution.json", field_to_json(last.values()));
  run.file("solution.csv", field_to_csv(last.mesh(), last.values()));
  Csv conv("h,dofs,l2_error");
  for (size_t i = 0; i < hs.size(); ++i) conv.row({hs[i], dofs[i], errors[i]});
  run.file("convergence.csv", conv.str());
}

void exp_eig(const Json& p, Run& run) {
  Domain dom = domain_of(p["domain"]);
  if (dom.kind() != Domain::Kind::rectangle) bad_config("eig needs a rectangle or interval domain");
  const int k = p["k"].get<int>();
  if (k < 1) bad_config("'k' must be at least 1");
  const int n = dom.dim();
  Point side = dom.hi() - dom.lo();

  std::vector<double> exact;
  if (n == 1) {
    for (int i = 1; i <= k; ++i) exact.push_back(std::pow(i * kPi / side(0), 2));
  } else {
    for (int i = 1; i <= k + 2; ++i)
      for (int j = 1; j <= k + 2; ++j) exact.push_back(std::pow(i * kPi / side(0), 2) + std::pow(j * kPi / side(1), 2));
    std::sort(exact.begin(), exact.end());
    exact.resize(k);
  }

  auto mesh = build_rect_mesh(dom, p["h"].get<double>());
  auto sys = assemble(mesh, laplace(n, Form::divergence), {}, nullptr);
  auto spec = eigensolve(sys, k);
  std::vector<double> computed, rel;
  Csv csv("index,computed,exact,relative_error,residual");
  double worst = 0;
  for (int i = 0; i < k; ++i) {
    computed.push_back(spec.eigenvalues(i));
    rel.push_back(std::abs(computed[i] - exact[i]) / exact[i]);
    worst = std::max(worst, rel[i]);
    csv.row({double(i + 1), computed[i], exact[i], rel[i], spec.residuals(i)});
  }
  run.check("lambda_1 within 1% of the exact value", "variational: discrete Dirichlet eigenvalues converge to the exact spectrum",
            rel[0], 0.01);
  run.check("lambda_1..lambda_k within 2% of the exact values",
            "variational: discrete Dirichlet eigenvalues converge to the exact spectrum", worst, 0.02);
  run.results["eigenvalues"] = vec(computed);
  run.results["exact"] = vec(exact);
  run.results["relative_error"] = vec(rel);
  run.results["iterations"] = spec.iterations;

  Json pc;
  pc["constant"] = 1.0 / computed[0];
  pc["exact"] = 1.0 / exact[0];
  if (n == 1) {
    auto pr = poincare_constant(mesh, true);
    pc["extrapolated"] = pr.extrapolated;
    pc["lower"] = 1.0 / exact[0];
    pc["upper"] = pr.interval_upper;
    run.check("Poincare constant within 1% of 1/lambda_1", "variational: the best Poincare constant is 1/lambda_1",
              std::abs(pr.extrapolated - 1.0 / exact[0]) * exact[0], 0.01);
    // lower end of the bracket is attained, so allow discretisation noise of 1e-6 relative
    const bool in = pr.extrapolated >= (1.0 / exact[0]) * (1 - 1e-6) && pr.extrapolated <= pr.interval_upper;
    run.check("Poincare bracket (l/pi)^2 <= C <= l^2/8", "variational: Poincare constant bracket on an interval",
              pr.extrapolated, pr.interval_upper, in);
  } else {
    pc["strip_bound"] = std::pow(side.minCoeff() / 2, 2);
    run.check("Poincare constant below the strip bound", "variational: Poincare constant bounded by (width/2)^2",
              1.0 / computed[0], std::pow(side.minCoeff() / 2, 2));
  }
  run.results["poincare"] = pc;
  run.file("eigenvalues.csv", csv.str());
}

void exp_freq(const Json& p, Run& run) {
  auto u = sample_of(p["u"], "u");
  Point xi = point_of(p["center"], "center");
  const double r0 = p["r_min"].get<double>(), r1 = p["r_max"].get<double>();
  const int count = p["count"].get<int>();
  if (!(r0 > 0) || !(r1 > r0) || count < 2) bad_config("need 0 < r_min < r_max and count >= 2");
  std::vector<double> radii;
  for (int i = 0; i < count; ++i) radii.push_back(r0 + (r1 - r0) * i / (count - 1));
  auto prof = frequency_profile(u, xi, radii);

  double drop = 0;
  for (size_t i = 1; i < prof.N.size(); ++i) drop = std::max(drop, (prof.N[i - 1] - prof.N[i]) / std::max(1.0, std::abs(prof.N[i - 1])));
  run.check("N(r) nondecreasing", "harmonic: the frequency N(r) is nondecreasing in r", drop, 1e-8);
  if (u.homogeneous && at_origin(xi)) {
    double dev = 0;
    for (double N : prof.N) dev = std::max(dev, std::abs(N - u.degree));
    run.check("N(r) equals the degree " + std::to_string(u.degree),
              "harmonic: N is constant and equal to k for a homogeneous degree-k function", dev, 1e-6);
  }
  run.results["sample"] = u.name;
  run.results["N"] = vec(prof.N);
  run.results["max_flux_defect"] = prof.max_flux_defect;
  run.results["degenerate"] = prof.degenerate;
  run.file("frequency.csv", prof.to_csv());
}

void exp_threeball(const Json& p, Run& run) {
  auto u = sample_of(p["u"], "u");
  Point xi = point_of(p["center"], "center");
  auto r = numbers_of(p["radii"], "radii");
  if (r.size() != 3) bad_config("'radii' needs three values");
  auto ts = three_sphere_check(u, xi, r[0], r[1], r[2]);
  run.check("log-convexity of H(r)/r^{n-1}", "harmonic: ln(H(r)/r^{n-1}) is convex in ln r", -ts.slack, 1e-8, ts.holds);
  if (u.homogeneous && at_origin(xi))
    run.check("log-convexity is an equality for a homogeneous sample",
              "harmonic: three-sphere equality for homogeneous functions", std::abs(ts.slack), 1e-8);
  run.results["three_sphere"] = {{"theta", ts.theta},
                                 {"lhs", ts.lhs},
                                 {"rhs", ts.rhs},
                                 {"slack", ts.slack},
                                 {"alpha", ts.alpha},
                                 {"three_ball_defect", ts.three_ball_defect},
                                 {"three_sphere_defect", ts.three_sphere_defect}};

  Domain sq = Domain::unit_square();
  Point w0 = point_of(p["omega_center"], "omega_center"), target = point_of(p["target"], "target");
  const double wr = p["omega_radius"].get<double>(), cr = p["chain_radius"].get<double>();
  auto chain = ball_chain(sq, w0, wr, target, cr);
  auto prop = smallness_propagation(u.field, chain, sq);
  run.check("chain bound dominates the end-ball norm", "stability: propagated smallness bound dominates ||u||_{B(x_N,r)}",
            prop.measured, prop.bound, prop.holds);
  run.results["propagation"] = {{"balls", chain.size()}, {"gamma", prop.gamma}, {"scale", prop.scale},
                                {"eta0", prop.eta0},     {"C", prop.C},         {"measured", prop.measured},
                                {"bound", prop.bound}};
  Csv chain_csv("k,x1,x2,n1,n2,n3,gamma");
  for (size_t k = 0; k < prop.steps.size(); ++k) {
    const auto& s = prop.steps[k];
    chain_csv.row({double(k), s.center(0), s.center(1), s.n1, s.n2, s.n3, s.gamma});
  }
  run.file("chain.csv", chain_csv.str());

  const Json& rc = p["recursion"];
  for (const char* key : {"eta0", "b", "c", "gamma", "k"})
    if (!rc.contains(key) || !rc[key].is_number()) bad_config(std::string("'recursion' needs a number '") + key + "'");
  const double eta0 = rc["eta0"], b = rc["b"], c = rc["c"], gamma = rc["gamma"];
  const int K = rc["k"];
  auto seq = recursion_sequence(eta0, b, c, gamma, K);
  Csv rec("k,eta,bound");
  double excess = -1e300;
  double C = 0;
  for (int k = 0; k <= K; ++k) {
    auto rb = recursion_bound(eta0, b, c, gamma, k);
    C = rb.C;
    excess = std::max(excess, seq[k] - rb.bound);
    rec.row({double(k), seq[k], rb.bound});
  }
  const double C_exact = std::pow(2 * c, 1 / (1 - gamma));
  run.check("recursion constant C = (2c)^{1/(1-gamma)}", "stability: recursion bound constant", std::abs(C - C_exact), 0.0);
  run.check("recursion sequence below C (eta0 + b)^{gamma^k}", "stability: recursion bound dominates the sequence", excess, 0.0);
  run.results["recursion"] = {{"C", C}, {"eta", vec(seq)}};
  run.file("recursion.csv", rec.str());
}

void exp_doubling(const Json& p, Run& run) {
  auto u = sample_of(p["u"], "u");
  Point xi = point_of(p["center"], "center");
  auto rep = doubling_check(u, xi, p["r"].get<double>(), p["rbar"].get<double>());
  run.check("K(2r) <= 2^{2N(rbar)+n} K(r)", "harmonic: doubling bound from the frequency", rep.ratio / rep.bound, 1 + 1e-6);
  if (u.homogeneous && at_origin(xi))
    run.check("doubling equality for a homogeneous sample", "harmonic: doubling is sharp for homogeneous functions",
              std::abs(rep.ratio / rep.bound - 1), 1e-6);
  run.results = {{"sample", u.name}, {"ratio", rep.ratio}, {"bound", rep.bound}, {"N_rbar", rep.N_rbar}};
}

void exp_harnack(const Json& p, Run& run) {
  auto u = sample_of(p["u"], "u");
  Point xi = point_of(p["center"], "center");
  auto rep = harnack_ratio(u.field, 2, xi, p["r"].get<double>());
  run.check("max/min over B(r) <= 3^n", "harmonic: Harnack inequality for positive harmonic functions", rep.ratio, rep.bound);
  run.results = {{"sample", u.name}, {"ratio", rep.ratio}, {"bound", rep.bound}};
}

void exp_perron(const Json& p, Run& run) {
  Domain dom = domain_of(p["domain"]);
  if (dom.dim() != 2) bad_config("perron needs a 2D domain");
  ScalarFn g;
  const Json& data = p["data"];
  if (data.is_string() && data.get<std::string>() == "x1^2") {
    g = [](const Point& x) { return x(0) * x(0); };
  } else {
    auto s = sample_of(data, "data");
    g = s.field.value;
  }
  PerronOptions opt;
  opt.h = p["h"].get<double>();
  opt.max_sweeps = p["max_sweeps"].get<int>();
  opt.tolerance = p["tolerance"].get<double>();
  auto sol = perron_solve(dom, g, opt);

  std::vector<Point> probes;
  ScalarFn reference;
  std::string ref_name;
  if (dom.kind() == Domain::Kind::disk) {
    const Point c = dom.center();
    const double R = dom.radius();
    for (double r : {0.1, 0.3, 0.5, 0.7})
      for (int k = 0; k < 8; ++k)
        probes.push_back(c + R * r * make_point(std::cos(0.4 + k * kPi / 4), std::sin(0.4 + k * kPi / 4)));
    reference = [=](const Point& x) { return poisson_disk(g, c, R, x); };
    ref_name = "poisson_integral";
  } else {
    Point lo, hi;
    dom.bounding_box(lo, hi);
    const double margin = 0.05 * (hi - lo).minCoeff();
    for (int i = 1; i < 10; ++i)
      for (int j = 1; j < 10; ++j) {
        Point x = lo + make_point((hi(0) - lo(0)) * i / 10.0, (hi(1) - lo(1)) * j / 10.0);
        if (dom.boundary_distance(x) >= margin) probes.push_back(x);
      }
    const double fh = p["fem_h"].get<double>();
    auto mesh = std::make_shared<SimplicialMesh>(dom.kind() == Domain::Kind::rectangle ? build_rect_mesh(dom, fh)
                                                                                     : build_masked_mesh(dom, fh));
    BoundaryConditions bc;
    bc.dirichlet = g;
    auto fem = solve(assemble(*mesh, laplace(2, Form::divergence), bc, nullptr));
    reference = [fem](const Point& x) { return fem(x); };
    ref_name = "finite_elements";
  }
  Csv csv("x,y,perron,reference,abs_error");
  double err = 0;
  for (const auto& x : probes) {
    const double a = sol(x), b = reference(x);
    err = std::max(err, std::abs(a - b));
    csv.row({x(0), x(1), a, b, std::abs(a - b)});
  }
  run.check("Perron iteration converged", "harmonic: the Perron sequence is monotone and converges",
            double(sol.log.size()), double(opt.max_sweeps), sol.converged);
  run.check("sup error at probes <= 1e-3", "harmonic: the Perron solution is the harmonic extension of the data", err, 1e-3);
  run.results = {{"domain", domain_label(p["domain"])}, {"reference", ref_name}, {"sweeps", sol.log.size()},
                 {"probes", probes.size()},             {"max_error", err}};
  run.file("perron_log.csv", sol.log_csv());
  run.file("probes.csv", csv.str());
}

void exp_parametrix(const Json& p, Run& run) {
  const std::string opname = p["operator"].get<std::string>();
  EllipticOperator op = to_nondivergence(operator_preset(opname, 2, Form::divergence));
  Point y = point_of(p["center"], "center");
  const double R = p["radius"].get<double>();
  Domain disk = Domain::disk(y, R);

  // frozen-coefficient annihilation on random pairs
  {
    std::mt19937_64 rng(p["seed"].get<std::uint64_t>());
    std::uniform_real_distribution<double> U(0.0, 1.0);
    Parametrix P(op);
    const int pairs = p["pairs"].get<int>();
    double worst = 0;
    for (int t = 0; t < pairs;) {
      Point a = make_point(U(rng), U(rng)), b = make_point(U(rng), U(rng));
      if ((a - b).norm() < 1e-3) continue;
      SmallMat Ab = op.A(b), H = P.hess(a, b);
      worst = std::max(worst, std::abs(Ab.cwiseProduct(H).sum()) / (Ab.norm() * H.norm()));
      ++t;
    }
    run.check("frozen operator annihilates H off the diagonal", "parametrix: a^{ij}(y) d_ij H(., y) = 0 for x != y",
              worst, 1e-8);
    run.results["annihilation_worst"] = worst;
  }

  auto phi = bump(y, p["bump_radius"].get<double>());
  {
    auto r = verify_parametrix(Parametrix(laplace(2)), phi, y, disk);
    run.check("Laplacian parametrix residual", "parametrix: int(-H L*phi + L_x H phi) = phi(y)", r.relative, 1e-3);
    run.results["laplace_residual"] = r.relative;
  }
  {
    FundamentalSolution Fc(Parametrix(diag_operator(2.0, 1.0)), disk_nodes(y, R, 6));
    double dev = 0;
    for (const Point& x : {make_point(0.1, 0.0), make_point(-0.05, 0.2), make_point(0.15, -0.12)})
      dev = std::max(dev, std::abs(Fc(y + x, y) - Fc.parametrix().value(y + x, y)));
    run.check("constant coefficients give F == H", "parametrix: the correction vanishes for constant coefficients", dev,
              0.0, Fc.trivial() && dev == 0.0);
  }

  auto ns = disk_nodes(y, R, p["rings"].get<int>());
  FundamentalSolution F(Parametrix(op), ns);
  auto res = verify_fundamental(F, phi, y, ns.domain);
  run.check("fundamental solution residual", "parametrix: int F L*phi + phi(y) = 0", res.relative, 2e-2);
  auto growth = verify_fundamental_growth(F, y, 2 * ns.spacing, p["growth_rmax"].get<double>());
  if (growth.identically_zero) {
    run.check("F - H vanishes for constant coefficients", "parametrix: F - H = 0 when the correction is trivial", 0.0, 0.0,
              F.trivial());
  } else {
    run.check("growth exponent of |F - H| >= -n + 2 - 0.3", "parametrix: |F - H| = O(|x - y|^{-n+2+beta})",
              -growth.fit.exponent, 0.3);
  }
  run.results["nodes"] = ns.nodes.rows();
  run.results["spacing"] = ns.spacing;
  run.results["sigma_min"] = F.sigma_min();
  run.results["system_norm"] = F.system_norm();
  run.results["fundamental_residual"] = res.relative;
  run.results["growth_exponent"] = growth.identically_zero ? Json(nullptr) : Json(growth.fit.exponent);

  std::vector<Point> xs;
  const Point dir = make_point(std::cos(0.3), std::sin(0.3));
  for (int k = 0; k < 20; ++k) xs.push_back(y + 0.02 * std::pow(0.35 / 0.02, k / 19.0) * dir);
  run.file("fundamental.csv", F.dump_csv(y, xs));
}

void exp_carleman(const Json& p, Run& run) {
  Domain dom = domain_of(p["domain"]);
  EllipticOperator op = preset(p, Form::divergence, dom.dim());
  const double t0 = default_tau0(dom);
  const int m = p["tau_count"].get<int>();
  const double f0 = p["tau_min_factor"].get<double>(), f1 = p["tau_max_factor"].get<double>();
  if (m < 2 || !(f0 > 0) || !(f1 > f0)) bad_config("need tau_count >= 2 and 0 < tau_min_factor < tau_max_factor");
  std::vector<double> taus, far;
  for (int i = 0; i < m; ++i) taus.push_back(t0 * (f0 + (f1 - f0) * i / (m - 1)));
  for (int i = 0; i < 6; ++i) far.push_back(t0 * (50 + 10 * i));
  const double bound = p["bound"].get<double>();

  Json cases = Json::array();
  for (const auto& wname : p["weights"]) {
    if (!wname.is_string()) bad_config("'weights' must contain names");
    const auto w = wname.get<std::string>();
    CarlemanWeight weight;
    if (w == "exponential") weight = exponential_weight(p["lambda"].get<double>());
    else if (w == "quadratic") weight = quadratic_weight();
    else bad_config("unknown weight family '" + w + "' (exponential, quadratic)");
    int idx = 0;
    for (const auto& bj : p["bumps"]) {
      auto b = numbers_of(bj, "bumps");
      if (static_cast<int>(b.size()) != dom.dim() + 1) bad_config("each bump is [center..., radius]");
      Point c(dom.dim());
      for (int i = 0; i < dom.dim(); ++i) c(i) = b[i];
      auto v = bump(c, b.back());
      auto rep = carleman_ratio(op, v, weight, taus, dom);
      const std::string tag = w + " bump " + std::to_string(idx);
      double lo = std::numeric_limits<double>::infinity(), hi = 0;
      bool finite = true;
      for (double r : rep.ratio) {
        finite = finite && std::isfinite(r);
        lo = std::min(lo, r);
        hi = std::max(hi, r);
      }
      run.check(tag + ": ratio positive", "stability: the Carleman ratio RHS/LHS is positive", -lo, 0.0, lo > 0 && finite);
      run.check(tag + ": ratio bounded over [tau_min, tau_max]", "stability: the Carleman ratio stays bounded in tau",
                hi / lo, bound, finite && hi / lo <= bound);
      auto rep2 = carleman_ratio(op, scaled(v, 2.0), weight, taus, dom);
      double dev = 0;
      for (size_t i = 0; i < rep.ratio.size(); ++i) dev = std::max(dev, std::abs(rep2.ratio[i] / rep.ratio[i] - 1));
      run.check(tag + ": invariant under v -> 2v", "stability: the Carleman ratio is scale invariant", dev, 1e-12);
      auto fr = carleman_ratio(op, v, weight, far, dom);
      const double slope_gap = std::abs(fr.lhs_log_slope - fr.rhs_log_slope) / std::abs(fr.rhs_log_slope);
      run.check(tag + ": log-slopes agree at large tau", "stability: both Carleman sides grow at the same exponential rate",
                slope_gap, 0.05);
      cases.push_back({{"weight", w},
                       {"bump", b},
                       {"ratio_min", lo},
                       {"ratio_max", hi},
                       {"min_grad_psi", rep.min_grad_psi},
                       {"lhs_log_slope", fr.lhs_log_slope},
                       {"rhs_log_slope", fr.rhs_log_slope}});
      run.file("carleman_" + w + "_" + std::to_string(idx) + ".csv", rep.to_csv());
      ++idx;
    }
  }
  run.results["tau0"] = t0;
  run.results["tau"] = vec(taus);
  run.results["cases"] = cases;
}

// u = e^{pi x} cos(pi y)/10 + x y, Cauchy data on the bottom and left sides of the unit square
double cauchy_u(const Point& x) { return std::exp(kPi * x(0)) * std::cos(kPi * x(1)) / 10 + x(0) * x(1); }
double cauchy_flux(const Point& x) {
  if (x(1) < 1e-12) return kPi * std::exp(kPi * x(0)) * std::sin(kPi * x(1)) / 10 - x(0);
  return -(kPi * std::exp(kPi * x(0)) * std::cos(kPi * x(1)) / 10 + x(1));
}

void exp_cauchy(const Json& p, Run& run) {
  auto mesh = build_rect_mesh(Domain::unit_square(), p["h"].get<double>(),
                              {{"bottom", BoundaryTag::gamma0}, {"left", BoundaryTag::gamma0}}, BoundaryTag::gamma);
  auto deltas = numbers_of(p["deltas"], "deltas");
  const int seeds = p["seeds"].get<int>();
  if (seeds < 1) bad_config("'seeds' must be at least 1");
  const auto master = p["seed"].get<std::uint64_t>();
  const double reg_max = p["reg_max"].get<double>(), factor = p["reg_factor"].get<double>();
  const int steps = p["reg_steps"].get<int>();
  const double tau = p["tau"].get<double>();

  CauchyData clean;
  clean.u = cauchy_u;
  clean.flux = cauchy_flux;

  // noise-free data: error decreases with reg
  {
    std::vector<double> regs = {1e-1, 1e-2, 1e-3, 1e-4, 1e-5}, err;
    for (double reg : regs) err.push_back(l2_error(mesh, cauchy_complete(mesh, clean, {reg, 1.0}).values(), cauchy_u));
    double worst = -1e300;
    for (size_t i = 1; i < err.size(); ++i) worst = std::max(worst, err[i] - err[i - 1]);
    run.check("clean-data error decreases with reg", "stability: with delta = 0 the error decreases as reg decreases",
              worst, 0.0, worst < 0);
    run.results["clean_reg"] = vec(regs);
    run.results["clean_error"] = vec(err);
  }

  Csv runs("delta,seed,reg,corner_reg,error");
  Csv means("delta,mean_error");
  std::vector<double> mean_err;
  std::uint64_t index = 0;
  for (double d : deltas) {
    double e = 0;
    for (int s = 0; s < seeds; ++s, ++index) {
      CauchyData data = clean;
      data.delta = d;
      data.seed = static_cast<unsigned>(master + index);
      auto sw = reg_sweep(mesh, data, reg_max, factor, steps, tau);
      const double reg = sw.reg[sw.discrepancy];
      const double err = l2_error(mesh, cauchy_complete(mesh, data, {reg, 1.0}).values(), cauchy_u);
      runs.row({d, double(data.seed), reg, sw.corner >= 0 ? sw.reg[sw.corner] : 0.0, err});
      e += err / seeds;
    }
    mean_err.push_back(e);
    means.row({d, e});
  }
  auto fit = stability_fit(deltas, mean_err);
  auto psi = stability_fit(deltas, mean_err, Modulus::psi);
  run.check("log modulus fits better than a power law", "stability: Cauchy errors follow Phi_beta(delta)", fit.residual,
            fit.power_residual, fit.log_beats_power);
  run.check("fitted beta > 0", "stability: Cauchy errors follow Phi_beta(delta)", -fit.beta, 0.0, fit.beta > 0);
  run.results["deltas"] = vec(deltas);
  run.results["mean_error"] = vec(mean_err);
  run.results["fit"] = {{"C", fit.C},
                        {"beta", fit.beta},
                        {"residual", fit.residual},
                        {"power_C", fit.power_C},
                        {"power_exponent", fit.power_exponent},
                        {"power_residual", fit.power_residual},
                        {"psi_C", psi.C},
                        {"psi_residual", psi.residual}};
  run.file("cauchy.csv", runs.str());
  run.file("cauchy_mean.csv", means.str());
}

void exp_observability(const Json& p, Run& run) {
  Domain dom = domain_of(p["domain"]);
  if (dom.kind() != Domain::Kind::rectangle) bad_config("observability needs a rectangle or interval domain");
  const int n = dom.dim();
  Point lo = point_of(p["omega_lo"], "omega_lo"), hi = point_of(p["omega_hi"], "omega_hi");
  if (lo.size() != n || hi.size() != n) bad_config("omega_lo and omega_hi need one entry per dimension");
  double measure = 1;
  for (int i = 0; i < n; ++i) {
    const double a = std::max(lo(i), dom.lo()(i)), b = std::min(hi(i), dom.hi()(i));
    measure *= std::max(0.0, b - a);
  }
  auto in_omega = [lo, hi](const Point& x) {
    for (int i = 0; i < x.size(); ++i)
      if (!(x(i) > lo(i) && x(i) < hi(i))) return false;
    return true;
  };
  const int k = p["k"].get<int>();
  auto mesh = build_rect_mesh(dom, p["h"].get<double>());
  auto sys = assemble(mesh, laplace(n, Form::divergence), {}, nullptr);
  auto spec = eigensolve(sys, k);
  auto rep = observability_ratio(sys, spec, in_omega, measure);

  std::string header = "index,lambda,ratio,neg_log";
  std::vector<double> closed;
  if (n == 1) {
    header += ",closed_form";
    const double L = dom.hi()(0) - dom.lo()(0);
    const double a = std::max(lo(0), dom.lo()(0)) - dom.lo()(0), b = std::min(hi(0), dom.hi()(0)) - dom.lo()(0);
    double worst = 0;
    for (int j = 1; j <= k; ++j) {
      const double w = j * kPi / L;
      const double part = (b - a) / 2 - (std::sin(2 * w * b) - std::sin(2 * w * a)) / (4 * w);
      closed.push_back(std::sqrt(part / (L / 2)));
      worst = std::max(worst, std::abs(rep.ratios[j - 1] / closed.back() - 1));
    }
    run.check("eigenfunction ratios match the closed form to 1%", "stability: observability ratio of sin(k pi x / l)", worst,
              0.01);
  }
  run.check("regression slope finite", "stability: -ln ratio grows at most linearly in sqrt(lambda)",
            std::abs(rep.kappa), std::numeric_limits<double>::max(), std::isfinite(rep.kappa));
  std::ostringstream rows;
  rows << header << '\n';
  for (int j = 0; j < k; ++j) {
    rows << num(j + 1) << ',' << num(rep.lambda[j]) << ',' << num(rep.ratios[j]) << ',' << num(rep.neg_log[j]);
    if (n == 1) rows << ',' << num(closed[j]);
    rows << '\n';
  }
  run.results = {{"lambda", vec(rep.lambda)}, {"ratios", vec(rep.ratios)}, {"kappa", rep.kappa},
                 {"offset", rep.offset},      {"residual", rep.residual}, {"curvature", rep.curvature},
                 {"omega_measure", rep.omega_measure}};
  run.file("observability.csv", rows.str());
}

using Runner = void (*)(const Json&, Run&);

struct Entry {
  ExperimentSpec spec;
  Runner run;
};

const std::vector<Entry>& entries() {
  static const std::vector<Entry> list = [] {
    std::vector<Entry> e;
    auto add = [&](const char* id, const char* ref, const char* summary, Json defaults, Runner r, bool stochastic = false) {
      e.push_back({{id, ref, summary, std::move(defaults), stochastic}, r});
    };
    add("solve", "Weak solutions of the Dirichlet problem; P1 finite element convergence",
        "Manufactured sin*sin solution on a rectangle; L2 error ratios under h -> h/2.",
        {{"domain", "unit_square"}, {"operator", "laplace"}, {"h", 0.125}, {"refinements", 3}}, exp_solve);
    add("eig", "Dirichlet spectrum of the Laplacian on a rectangle, sum (k_i pi / l_i)^2; best Poincare constant",
        "First k Dirichlet eigenvalues against the exact values, and the Poincare constant 1/lambda_1.",
        {{"domain", "unit_square"}, {"h", 0.015625}, {"k", 4}}, exp_eig);
    add("freq", "Frequency function of a harmonic function and its monotonicity",
        "Profiles H, D, K, N over a radius grid.",
        {{"u", "harmonic:deg3"}, {"center", {0, 0}}, {"r_min", 0.05}, {"r_max", 1.0}, {"count", 20}}, exp_freq);
    add("threeball", "Three-sphere inequality and propagation of smallness along a chain of balls",
        "Log-convexity of H, chain bound for the end ball, recursion bound arithmetic.",
        {{"u", Json::array({Json::array({1.0, "re:2"}), Json::array({0.5, "im:3"}), Json::array({0.2, "const"})})},
         {"center", {0, 0}},
         {"radii", {0.2, 0.4, 0.8}},
         {"omega_center", {0.2, 0.2}},
         {"omega_radius", 0.06},
         {"target", {0.8, 0.8}},
         {"chain_radius", 0.05},
         {"recursion", {{"eta0", 0.1}, {"b", 0.01}, {"c", 2.0}, {"gamma", 0.5}, {"k", 6}}}},
        exp_threeball);
    add("doubling", "Doubling inequality with constant 2^{2N + n} from the frequency",
        "K(2r)/K(r) against the frequency bound.",
        {{"u", "re:3"}, {"center", {0, 0}}, {"r", 0.2}, {"rbar", 0.8}}, exp_doubling);
    add("harnack", "Harnack inequality max u <= 3^n min u on B(r) when u > 0 on B(4r)",
        "Max/min ratio of a positive harmonic function.",
        {{"u", Json::array({Json::array({2.0, "const"}), Json::array({0.5, "re:1"}), Json::array({0.3, "im:2"})})},
         {"center", {0, 0}},
         {"r", 0.2}},
        exp_harnack);
    add("perron", "Perron's method for the Dirichlet problem via circle means",
        "Perron iteration against the Poisson integral (disk) or finite elements.",
        {{"domain", "unit_disk"},
         {"data", "re:2"},
         {"h", 0.015625},
         {"max_sweeps", 5000},
         {"tolerance", 1e-10},
         {"fem_h", 0.03125}},
        exp_perron);
    add("parametrix", "Levi parametrix and the fundamental solution of a variable-coefficient operator",
        "Frozen-coefficient identities, parametrix residual, and the Nystrom fundamental solution.",
        {{"operator", "perturbed_identity(0.1)"},
         {"center", {0.5, 0.5}},
         {"radius", 0.4},
         {"rings", 22},
         {"bump_radius", 0.3},
         {"growth_rmax", 0.2},
         {"pairs", 200},
         {"seed", 0}},
        exp_parametrix, true);
    add("carleman", "Carleman estimate with exponential and quadratic weights",
        "RHS/LHS ratio of the weighted inequality over a tau grid for bump fields.",
        {{"domain", "unit_square"},
         {"operator", "laplace"},
         {"lambda", 0.25},
         {"tau_min_factor", 1.0},
         {"tau_max_factor", 8.0},
         {"tau_count", 8},
         {"bound", 10.0},
         {"weights", Json::array({"exponential", "quadratic"})},
         {"bumps",
          {{0.5, 0.5, 0.3}, {0.3, 0.6, 0.2}, {0.7, 0.3, 0.15}, {0.4, 0.4, 0.25}, {0.6, 0.7, 0.2}}}},
        exp_carleman);
    add("cauchy", "Logarithmic stability of the Cauchy problem, modulus Phi_beta(s) = |ln s|^{-beta} + s",
        "Regularised Cauchy completion under noise; fit of the mean error against delta.",
        {{"h", 0.03125},
         {"deltas", {1e-1, 3.1622776601683794e-2, 1e-2, 3.1622776601683794e-3, 1e-3, 3.1622776601683794e-4, 1e-4}},
         {"seeds", 10},
         {"seed", 0},
         {"reg_max", 1.0},
         {"reg_factor", 0.5},
         {"reg_steps", 40},
         {"tau", 1.5}},
        exp_cauchy, true);
    add("observability", "Observability of eigenfunctions from a subdomain, ratio >= e^{-kappa sqrt(lambda)}",
        "L2(omega)/L2(Omega) ratios of Dirichlet eigenfunctions.",
        {{"domain", "interval"}, {"h", 0.004}, {"k", 10}, {"omega_lo", Json::array({0.3})}, {"omega_hi", Json::array({0.7})}},
        exp_observability);
    return e;
  }();
  return list;
}

const Entry& entry(const std::string& id) {
  for (const auto& e : entries())
    if (e.spec.id == id) return e;
  std::string ids;
  for (const auto& e : entries()) ids += (ids.empty() ? "" : ", ") + e.spec.id;
  bad_config("unknown experiment '" + id + "'; valid ids: " + ids);
}

bool flexible(const std::string& key) { return key == "u" || key == "data" || key == "domain"; }

bool same_kind(const Json& def, const Json& v) {
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_number()) return v.is_number();
  return def.type() == v.type();
}

std::string utc_now() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

}  // namespace

const std::vector<ExperimentSpec>& experiment_catalog() {
  static const std::vector<ExperimentSpec> specs = [] {
    std::vector<ExperimentSpec> s;
    for (const auto& e : entries()) s.push_back(e.spec);
    return s;
  }();
  return specs;
}

const ExperimentSpec& experiment_spec(const std::string& id) { return entry(id).spec; }

std::string catalog_text() {
  std::ostringstream os;
  for (const auto& s : experiment_catalog()) {
    os << s.id << '\n';
    os << "  reproduces: " << s.reference << '\n';
    os << "  " << s.summary << '\n';
    if (s.stochastic) os << "  stochastic: takes a seed\n";
    os << "  parameters:\n";
    for (const auto& [k, v] : s.defaults.items()) os << "    " << k << " = " << v.dump() << '\n';
  }
  return os.str();
}

bool ExperimentOutput::passed() const { return report.value("passed", false); }

Json parse_config(const std::string& text) {
  try {
    Json j = Json::parse(text);
    if (!j.is_object()) bad_config("config must be a JSON object");
    return j;
  } catch (const Json::exception& e) {
    bad_config(std::string("invalid JSON: ") + e.what());
  }
}

Json resolve_parameters(const Json& config, std::optional<std::uint64_t> seed) {
  if (!config.is_object()) bad_config("config must be a JSON object");
  if (!config.contains("experiment") || !config["experiment"].is_string()) bad_config("config needs an 'experiment' id");
  const auto& spec = experiment_spec(config["experiment"].get<std::string>());
  Json params = spec.defaults;
  for (const auto& [k, v] : config.items()) {
    if (k == "experiment" || k == "out") continue;
    if (!spec.defaults.contains(k)) {
      std::string keys;
      for (const auto& [dk, dv] : spec.defaults.items()) keys += (keys.empty() ? "" : ", ") + dk;
      bad_config("unknown parameter '" + k + "' for experiment '" + spec.id + "' (accepted: " + keys + ")");
    }
    const Json& def = spec.defaults[k];
    if (!(flexible(k) && (v.is_string() || v.is_array() || v.is_object())) && !same_kind(def, v))
      bad_config("parameter '" + k + "' has the wrong type (default " + def.dump() + ")");
    params[k] = v;
  }
  if (spec.stochastic) {
    if (seed) params["seed"] = *seed;
    if (!params.contains("seed") || !params["seed"].is_number_integer() || params["seed"].get<std::int64_t>() < 0)
      bad_config("experiment '" + spec.id + "' needs a nonnegative integer seed");
  }
  for (const char* k : {"h", "fem_h", "r", "rbar", "radius", "bump_radius"})
    if (params.contains(k) && !(params[k].get<double>() > 0)) bad_config(std::string("'") + k + "' must be positive");
  return params;
}

ExperimentOutput run_experiment(const Json& config, std::optional<std::uint64_t> seed) {
  const auto t0 = std::chrono::steady_clock::now();
  Json params = resolve_parameters(config, seed);
  const Entry& e = entry(config["experiment"].get<std::string>());
  Run run;
  e.run(params, run);

  ExperimentOutput out;
  bool all = true;
  Json asserts = Json::array();
  for (const auto& a : run.assertions) {
    all = all && a.passed;
    asserts.push_back(
        {{"name", a.name}, {"invariant", a.invariant}, {"passed", a.passed}, {"value", a.value}, {"threshold", a.threshold}});
  }
  Json files = Json::array();
  for (const auto& f : run.files) files.push_back(f.first);
  out.report = {{"schema", "1"},        {"experiment", e.spec.id}, {"reference", e.spec.reference},
                {"parameters", params}, {"results", run.results}, {"assertions", asserts},
                {"files", files},       {"passed", all}};
  out.files = std::move(run.files);
  out.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

int run_to_directory(const std::string& config_path, const std::string& out_dir, std::optional<std::uint64_t> seed,
                     std::ostream& out, std::ostream& err) {
  namespace fs = std::filesystem;
  try {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read config '" + config_path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    Json config = parse_config(buf.str());

    std::string dir = out_dir;
    if (dir.empty()) dir = config.contains("out") && config["out"].is_string() ? config["out"].get<std::string>() : "out";
    const std::string started = utc_now();
    auto result = run_experiment(config, seed);

    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create '" + dir + "': " + ec.message());
    auto write = [&](const std::string& name, const std::string& text) {
      std::ofstream f(fs::path(dir) / name, std::ios::binary);
      f << text;
      if (!f) throw Error(ErrorCode::IoError, "cannot write '" + (fs::path(dir) / name).string() + "'");
    };
    for (const auto& [name, text] : result.files) write(name, text);
    write("report.json", result.report.dump(2) + "\n");
    Json meta = {{"schema", "1"},
                 {"experiment", result.report["experiment"]},
                 {"version", version()},
                 {"started_utc", started},
                 {"finished_utc", utc_now()},
                 {"elapsed_seconds", result.elapsed_seconds},
                 {"seed", seed ? Json(*seed) : Json(nullptr)}};
    write("metadata.json", meta.dump(2) + "\n");

    for (const auto& a : result.report["assertions"])
      out << (a["passed"].get<bool>() ? "PASS " : "FAIL ") << a["name"].get<std::string>() << " (value "
          << a["value"].get<double>() << ", threshold " << a["threshold"].get<double>() << ")\n";
    out << "report: " << (fs::path(dir) / "report.json").string() << '\n';
    return result.passed() ? 0 : 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
  } catch (const Json::exception& e) {
    err << "error: ConfigParseError: " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return 1;
}

}  // namespace elliptica
