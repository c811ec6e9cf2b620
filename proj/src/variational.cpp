#include "elliptica/variational.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <random>
#include <sstream>

namespace elliptica {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

struct CellGeom {
  int nv = 3;           // vertices per cell
  int idx[3]{};
  double measure = 0.0;
  Point grad[3];        // gradients of the barycentric shape functions
  Point p[3];
};

CellGeom cell_geom(const SimplicialMesh& m, int c) {
  CellGeom g;
  const auto& cell = m.cells[c];
  if (m.dim == 1) {
    g.nv = 2;
    g.idx[0] = cell[0];
    g.idx[1] = cell[1];
    g.p[0] = m.vertex(cell[0]);
    g.p[1] = m.vertex(cell[1]);
    double L = g.p[1](0) - g.p[0](0);
    g.measure = std::abs(L);
    g.grad[0] = make_point(-1.0 / L);
    g.grad[1] = make_point(1.0 / L);
    return g;
  }
  for (int k = 0; k < 3; ++k) {
    g.idx[k] = cell[k];
    g.p[k] = m.vertex(cell[k]);
  }
  Eigen::Matrix2d J;
  J.col(0) = g.p[1] - g.p[0];
  J.col(1) = g.p[2] - g.p[0];
  g.measure = 0.5 * std::abs(J.determinant());
  Eigen::Matrix2d Ji = J.inverse();
  g.grad[1] = Ji.row(0).transpose();
  g.grad[2] = Ji.row(1).transpose();
  g.grad[0] = -(g.grad[1] + g.grad[2]);
  return g;
}

// Quadrature points on a cell as (point, weight, shape values).
struct CellQuad {
  Point x;
  double w;
  double phi[3];
};

std::vector<CellQuad> cell_quadrature(const SimplicialMesh& m, const CellGeom& g) {
  std::vector<CellQuad> out;
  if (m.dim == 1) {
    std::vector<double> t, w;
    gauss_legendre(3, 0.0, 1.0, t, w);
    for (size_t q = 0; q < t.size(); ++q) {
      CellQuad cq;
      cq.x = g.p[0] + t[q] * (g.p[1] - g.p[0]);
      cq.w = w[q] * g.measure;
      cq.phi[0] = 1 - t[q];
      cq.phi[1] = t[q];
      cq.phi[2] = 0;
      out.push_back(cq);
    }
    return out;
  }
  const auto& r = triangle_rule_deg5();
  for (int q = 0; q < 7; ++q) {
    CellQuad cq;
    cq.x = r.bary[q][0] * g.p[0] + r.bary[q][1] * g.p[1] + r.bary[q][2] * g.p[2];
    cq.w = r.weight[q] * g.measure;
    for (int k = 0; k < 3; ++k) cq.phi[k] = r.bary[q][k];
    out.push_back(cq);
  }
  return out;
}

// Points on a boundary facet with weights and the two shape values.
struct FacetQuad {
  Point x;
  double w;
  double phi[2];
};

std::vector<FacetQuad> facet_quadrature(const SimplicialMesh& m, const BoundaryFacet& f) {
  std::vector<FacetQuad> out;
  if (m.dim == 1) {
    out.push_back({m.vertex(f.v[0]), 1.0, {1.0, 0.0}});
    return out;
  }
  Point a = m.vertex(f.v[0]), b = m.vertex(f.v[1]);
  double len = (b - a).norm();
  std::vector<double> t, w;
  gauss_legendre(3, 0.0, 1.0, t, w);
  for (size_t q = 0; q < t.size(); ++q) {
    Point x = a + t[q] * (b - a);
    out.push_back({x, w[q] * len, {1 - t[q], t[q]}});
  }
  return out;
}

SpMat from_triplets(int n, const Triplets& t) {
  SpMat A(n, n);
  A.setFromTriplets(t.begin(), t.end());
  A.makeCompressed();
  return A;
}

bool barycentric(const SimplicialMesh& m, int c, const Point& x, double bc[3]) {
  const double tol = 1e-12;
  const auto& cell = m.cells[c];
  if (m.dim == 1) {
    double a = m.vertices(cell[0], 0), b = m.vertices(cell[1], 0);
    double t = (x(0) - a) / (b - a);
    bc[0] = 1 - t;
    bc[1] = t;
    bc[2] = 0;
    return t >= -tol && t <= 1 + tol;
  }
  Point p0 = m.vertex(cell[0]);
  Eigen::Matrix2d J;
  J.col(0) = m.vertex(cell[1]) - p0;
  J.col(1) = m.vertex(cell[2]) - p0;
  Eigen::Vector2d l = J.inverse() * (x - p0);
  bc[1] = l(0);
  bc[2] = l(1);
  bc[0] = 1 - l(0) - l(1);
  return bc[0] >= -tol && bc[1] >= -tol && bc[2] >= -tol;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

BcKind BoundaryConditions::kind_of(BoundaryTag t) const {
  auto it = kind.find(t);
  if (it != kind.end()) return it->second;
  switch (t) {
    case BoundaryTag::dirichlet:
    case BoundaryTag::gamma:
      return BcKind::dirichlet;
    case BoundaryTag::robin:
      return BcKind::robin;
    case BoundaryTag::neumann:
    case BoundaryTag::gamma0:
      return BcKind::neumann;
  }
  return BcKind::dirichlet;
}

Eigen::VectorXd AssembledSystem::expand(const Eigen::VectorXd& free_values) const {
  Eigen::VectorXd u = dirichlet_values;
  for (int i = 0; i < num_free(); ++i) u(free_to_vertex[i]) = free_values(i);
  return u;
}

Eigen::VectorXd AssembledSystem::restrict_vector(const Eigen::VectorXd& full) const {
  Eigen::VectorXd r(num_free());
  for (int i = 0; i < num_free(); ++i) r(i) = full(free_to_vertex[i]);
  return r;
}

SpMat AssembledSystem::restrict_matrix(const SpMat& full) const {
  Triplets t;
  for (int k = 0; k < full.outerSize(); ++k)
    for (SpMat::InnerIterator it(full, k); it; ++it) {
      int i = vertex_to_free[it.row()], j = vertex_to_free[it.col()];
      if (i >= 0 && j >= 0) t.emplace_back(i, j, it.value());
    }
  return from_triplets(num_free(), t);
}

AssembledSystem assemble(const SimplicialMesh& mesh, const EllipticOperator& op,
                         const BoundaryConditions& bc, const ScalarFn& f) {
  if (op.form != Form::divergence)
    throw Error(ErrorCode::FormMismatch, "variational assembly needs a divergence-form operator");
  if (op.dim != mesh.dim) throw Error(ErrorCode::InvalidArgument, "operator and mesh dimension differ");
  if (mesh.dim != 1 && mesh.dim != 2)
    throw Error(ErrorCode::UnsupportedDimension, "P1 assembly supports n = 1, 2");
  mesh.validate();

  AssembledSystem sys;
  sys.mesh = std::make_shared<SimplicialMesh>(mesh);
  sys.symmetric = !(op.ci || op.di);
  const int nv = mesh.num_vertices();
  Triplets tk, tm;
  Eigen::VectorXd F = Eigen::VectorXd::Zero(nv);

  for (int c = 0; c < mesh.num_cells(); ++c) {
    CellGeom g = cell_geom(mesh, c);
    Point xb = mesh.centroid(c);
    SmallMat A = op.A(xb);
    Point ci = op.ci ? op.ci(xb) : Point(Point::Zero(mesh.dim));
    Point di = op.di ? op.di(xb) : Point(Point::Zero(mesh.dim));
    double d = op.d ? op.d(xb) : 0.0;
    const double mdiag = g.nv == 3 ? g.measure / 6.0 : g.measure / 3.0;
    const double moff = g.nv == 3 ? g.measure / 12.0 : g.measure / 6.0;
    const double mean = g.measure / g.nv;  // integral of one shape function
    for (int i = 0; i < g.nv; ++i)
      for (int j = 0; j < g.nv; ++j) {
        double mass = i == j ? mdiag : moff;
        // row i = test function, column j = trial function
        double k = g.measure * g.grad[i].dot(A * g.grad[j]);
        k += ci.dot(g.grad[i]) * mean;  // int c^i phi_j d_i phi_i
        k += di.dot(g.grad[j]) * mean;  // int d^i d_i phi_j phi_i
        k += d * mass;
        tk.emplace_back(g.idx[i], g.idx[j], k);
        tm.emplace_back(g.idx[i], g.idx[j], mass);
      }
    if (f)
      for (const auto& q : cell_quadrature(mesh, g)) {
        double fv = f(q.x);
        for (int i = 0; i < g.nv; ++i) F(g.idx[i]) += q.w * fv * q.phi[i];
      }
  }

  std::vector<char> is_dir(nv, 0);
  for (const auto& fc : mesh.boundary) {
    BcKind kind = bc.kind_of(fc.tag);
    int nf = mesh.dim == 1 ? 1 : 2;
    if (kind == BcKind::dirichlet) {
      for (int k = 0; k < nf; ++k) is_dir[fc.v[k]] = 1;
      continue;
    }
    const ScalarFn& g = kind == BcKind::neumann ? bc.neumann : bc.robin;
    for (const auto& q : facet_quadrature(mesh, fc)) {
      double gv = g ? g(q.x) : 0.0;
      for (int i = 0; i < nf; ++i) {
        F(fc.v[i]) += q.w * gv * q.phi[i];
        if (kind == BcKind::robin)
          for (int j = 0; j < nf; ++j)
            tk.emplace_back(fc.v[i], fc.v[j], bc.robin_alpha * q.w * q.phi[i] * q.phi[j]);
      }
    }
  }

  sys.K_full = from_triplets(nv, tk);
  sys.M_full = from_triplets(nv, tm);
  sys.F_full = F;
  sys.vertex_to_free.assign(nv, -1);
  sys.dirichlet_values = Eigen::VectorXd::Zero(nv);
  for (int v = 0; v < nv; ++v) {
    if (is_dir[v]) {
      sys.dirichlet_values(v) = bc.dirichlet ? bc.dirichlet(mesh.vertex(v)) : 0.0;
    } else {
      sys.vertex_to_free[v] = static_cast<int>(sys.free_to_vertex.size());
      sys.free_to_vertex.push_back(v);
    }
  }
  sys.K = sys.restrict_matrix(sys.K_full);
  sys.M = sys.restrict_matrix(sys.M_full);
  Eigen::VectorXd lift = sys.K_full * sys.dirichlet_values;
  sys.load = sys.restrict_vector(F - lift);
  return sys;
}

SpMat assemble_mass_on(const SimplicialMesh& mesh, const std::function<bool(const Point&)>& in_set) {
  Triplets tm;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    if (!in_set(mesh.centroid(c))) continue;
    CellGeom g = cell_geom(mesh, c);
    const double mdiag = g.nv == 3 ? g.measure / 6.0 : g.measure / 3.0;
    const double moff = g.nv == 3 ? g.measure / 12.0 : g.measure / 6.0;
    for (int i = 0; i < g.nv; ++i)
      for (int j = 0; j < g.nv; ++j) tm.emplace_back(g.idx[i], g.idx[j], i == j ? mdiag : moff);
  }
  return from_triplets(mesh.num_vertices(), tm);
}

double measure_of(const SimplicialMesh& mesh, const std::function<bool(const Point&)>& in_set) {
  double s = 0;
  for (int c = 0; c < mesh.num_cells(); ++c)
    if (in_set(mesh.centroid(c))) s += std::abs(mesh.cell_measure(c));
  return s;
}

double FemField::operator()(const Point& x) const {
  const auto& m = *mesh_;
  double bc[3];
  for (int c = 0; c < m.num_cells(); ++c) {
    if (!barycentric(m, c, x, bc)) continue;
    int nv = m.dim == 1 ? 2 : 3;
    double s = 0;
    for (int k = 0; k < nv; ++k) s += bc[k] * values_(m.cells[c][k]);
    return s;
  }
  throw Error(ErrorCode::InvalidArgument, "point outside the mesh");
}

ScalarField FemField::as_field() const {
  ScalarField f;
  FemField copy = *this;
  f.value = [copy](const Point& x) { return copy(x); };
  f.smoothness = 0;
  f.allow_fd = false;
  return f;
}

FemField solve(const AssembledSystem& sys, SolveInfo* info) {
  Eigen::VectorXd x;
  if (sys.num_free() == 0) {
    x.resize(0);
  } else if (sys.symmetric) {
    Eigen::SimplicialLDLT<SpMat> ldlt(sys.K);
    if (ldlt.info() != Eigen::Success)
      throw Error(ErrorCode::SingularSystem, "LDLT factorization failed");
    if (ldlt.vectorD().minCoeff() <= 0.0)
      throw Error(ErrorCode::NonCoerciveForm, "stiffness matrix is not positive definite");
    x = ldlt.solve(sys.load);
  } else {
    Eigen::SparseLU<SpMat> lu;
    lu.compute(sys.K);
    if (lu.info() != Eigen::Success) throw Error(ErrorCode::SingularSystem, "LU factorization failed");
    x = lu.solve(sys.load);
    if (lu.info() != Eigen::Success) throw Error(ErrorCode::SingularSystem, "LU solve failed");
  }
  double rel = 0.0;
  if (sys.num_free() > 0) {
    double bn = sys.load.norm();
    rel = (sys.K * x - sys.load).norm() / (bn > 0 ? bn : 1.0);
    if (!std::isfinite(rel) || rel > 1e-8)
      throw Error(ErrorCode::SingularSystem, "linear solve residual " + fmt(rel));
  }
  if (info) info->relative_residual = rel;
  return FemField(sys.mesh, sys.expand(x));
}

Spectrum eigensolve(const AssembledSystem& sys, int k, const EigenOptions& opt) {
  const int n = sys.num_free();
  if (!sys.symmetric) throw Error(ErrorCode::NotSymmetric, "eigensolve needs a symmetric form");
  if (k < 1 || k > n) throw Error(ErrorCode::InvalidArgument, "need 1 <= k <= free dofs");
  Spectrum out;
  auto residuals = [&](const Eigen::VectorXd& lam, const Eigen::MatrixXd& V) {
    Eigen::VectorXd r(k);
    for (int i = 0; i < k; ++i) {
      Eigen::VectorXd Mv = sys.M * V.col(i);
      r(i) = (sys.K * V.col(i) - lam(i) * Mv).norm() / (std::abs(lam(i)) * Mv.norm());
    }
    return r;
  };

  if (n <= 300) {
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(sys.K),
                                                                 Eigen::MatrixXd(sys.M));
    if (es.info() != Eigen::Success) throw Error(ErrorCode::ConvergenceFailure, "dense eigensolve failed");
    out.eigenvalues = es.eigenvalues().head(k);
    out.vectors = es.eigenvectors().leftCols(k);
    out.residuals = residuals(out.eigenvalues, out.vectors);
    return out;
  }

  Eigen::SimplicialLDLT<SpMat> ldlt(sys.K);
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0)
    throw Error(ErrorCode::NonCoerciveForm, "stiffness matrix is not positive definite");
  const int p = std::min(n, opt.block > 0 ? opt.block : std::max(2 * k, k + 8));
  std::mt19937 rng(opt.seed);
  std::normal_distribution<double> N01;
  Eigen::MatrixXd X(n, p);
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < n; ++i) X(i, j) = N01(rng);

  for (int it = 1; it <= opt.max_iterations; ++it) {
    Eigen::MatrixXd Y = ldlt.solve(sys.M * X);
    Eigen::MatrixXd Kr = Y.transpose() * (sys.K * Y);
    Eigen::MatrixXd Mr = Y.transpose() * (sys.M * Y);
    Kr = 0.5 * (Kr + Kr.transpose());
    Mr = 0.5 * (Mr + Mr.transpose());
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Kr, Mr);
    if (es.info() != Eigen::Success)
      throw Error(ErrorCode::ConvergenceFailure, "Rayleigh-Ritz step failed");
    X = Y * es.eigenvectors();
    Eigen::VectorXd lam = es.eigenvalues();
    Eigen::VectorXd r = residuals(lam, X);
    out.iterations = it;
    if (r.maxCoeff() <= opt.tolerance) {
      out.eigenvalues = lam.head(k);
      out.vectors = X.leftCols(k);
      out.residuals = r;
      return out;
    }
  }
  throw Error(ErrorCode::ConvergenceFailure, "subspace iteration did not reach the tolerance");
}

double rayleigh(const AssembledSystem& sys, const Eigen::VectorXd& v) {
  double den = v.dot(sys.M * v);
  if (!(den > 0.0)) throw Error(ErrorCode::ZeroVector, "Rayleigh quotient of the zero vector");
  return v.dot(sys.K * v) / den;
}

namespace {

double max_on_span(const AssembledSystem& sys, const Eigen::MatrixXd& V) {
  Eigen::MatrixXd Kr = V.transpose() * (sys.K * V);
  Eigen::MatrixXd Mr = V.transpose() * (sys.M * V);
  Kr = 0.5 * (Kr + Kr.transpose());
  Mr = 0.5 * (Mr + Mr.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(Mr);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::ZeroVector, "trial subspace is rank deficient");
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Kr, Mr);
  return es.eigenvalues().maxCoeff();
}

}  // namespace

MinMaxReport min_max_check(const AssembledSystem& sys, const Spectrum& spectrum, int m,
                           const std::vector<Eigen::MatrixXd>& trials, double tol) {
  if (m < 1 || m > spectrum.eigenvalues.size())
    throw Error(ErrorCode::InvalidArgument, "m outside the computed spectrum");
  MinMaxReport rep;
  rep.m = m;
  rep.lambda_m = spectrum.eigenvalues(m - 1);
  for (const auto& V : trials) {
    if (V.cols() != m || V.rows() != sys.num_free())
      throw Error(ErrorCode::InvalidArgument, "trial subspace must be free dofs x m");
    double mx = max_on_span(sys, V);
    rep.trial_max.push_back(mx);
    if (mx < rep.lambda_m * (1 - tol)) rep.trials_bound = false;
  }
  rep.eigen_span_max = max_on_span(sys, spectrum.vectors.leftCols(m));
  rep.eigen_span_equal = std::abs(rep.eigen_span_max - rep.lambda_m) <= tol * rep.lambda_m;
  return rep;
}

SimplicialMesh refine_mesh(const SimplicialMesh& mesh) {
  SimplicialMesh out;
  out.dim = mesh.dim;
  std::vector<Eigen::RowVectorXd> verts;
  for (int i = 0; i < mesh.num_vertices(); ++i) verts.push_back(mesh.vertices.row(i));
  std::map<std::pair<int, int>, int> mid;
  auto midpoint = [&](int a, int b) {
    auto key = std::minmax(a, b);
    auto it = mid.find(key);
    if (it != mid.end()) return it->second;
    int id = static_cast<int>(verts.size());
    verts.push_back(0.5 * (mesh.vertices.row(a) + mesh.vertices.row(b)));
    mid.emplace(key, id);
    return id;
  };
  for (const auto& c : mesh.cells) {
    if (mesh.dim == 1) {
      int m = midpoint(c[0], c[1]);
      out.cells.push_back({c[0], m, -1});
      out.cells.push_back({m, c[1], -1});
    } else {
      int ab = midpoint(c[0], c[1]), bc = midpoint(c[1], c[2]), ca = midpoint(c[2], c[0]);
      out.cells.push_back({c[0], ab, ca});
      out.cells.push_back({ab, c[1], bc});
      out.cells.push_back({ca, bc, c[2]});
      out.cells.push_back({ab, bc, ca});
    }
  }
  for (const auto& f : mesh.boundary) {
    if (mesh.dim == 1) {
      out.boundary.push_back(f);
      continue;
    }
    int m = midpoint(f.v[0], f.v[1]);
    out.boundary.push_back({{f.v[0], m}, f.tag});
    out.boundary.push_back({{m, f.v[1]}, f.tag});
  }
  out.vertices.resize(static_cast<int>(verts.size()), mesh.dim);
  for (size_t i = 0; i < verts.size(); ++i) out.vertices.row(static_cast<int>(i)) = verts[i];
  return out;
}

PoincareReport poincare_constant(const SimplicialMesh& mesh, bool extrapolate) {
  BoundaryConditions bc;
  for (auto t : {BoundaryTag::dirichlet, BoundaryTag::neumann, BoundaryTag::robin,
                 BoundaryTag::gamma0, BoundaryTag::gamma})
    bc.kind[t] = BcKind::dirichlet;
  auto op = laplace(mesh.dim, Form::divergence);
  PoincareReport rep;
  auto sys = assemble(mesh, op, bc, nullptr);
  rep.lambda1 = eigensolve(sys, 1).eigenvalues(0);
  rep.constant = 1.0 / rep.lambda1;
  Eigen::RowVectorXd lo = mesh.vertices.colwise().minCoeff(), hi = mesh.vertices.colwise().maxCoeff();
  rep.width = (hi - lo).minCoeff();
  rep.strip_bound = 0.25 * rep.width * rep.width;
  rep.interval_upper = rep.width * rep.width / 8.0;
  if (extrapolate) {
    auto fine = assemble(refine_mesh(mesh), op, bc, nullptr);
    double l2 = eigensolve(fine, 1).eigenvalues(0);
    rep.extrapolated = 3.0 / (4.0 * l2 - rep.lambda1);
  }
  return rep;
}

MaxPrincipleReport weak_max_check(const SimplicialMesh& mesh, const Eigen::VectorXd& u,
                                  SourceSign sign, double tol) {
  if (u.size() != mesh.num_vertices()) throw Error(ErrorCode::InvalidArgument, "field size mismatch");
  auto mask = mesh.boundary_vertex_mask();
  const double inf = std::numeric_limits<double>::infinity();
  MaxPrincipleReport rep;
  rep.interior_max = rep.boundary_max = -inf;
  rep.interior_min = rep.boundary_min = inf;
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    if (mask[v]) {
      rep.boundary_max = std::max(rep.boundary_max, u(v));
      rep.boundary_min = std::min(rep.boundary_min, u(v));
    } else {
      rep.interior_max = std::max(rep.interior_max, u(v));
      rep.interior_min = std::min(rep.interior_min, u(v));
    }
  }
  if (rep.interior_max == -inf) rep.interior_max = rep.interior_min = rep.boundary_max;
  rep.upper_margin = rep.boundary_max - rep.interior_max;
  rep.lower_margin = rep.interior_min - rep.boundary_min;
  double gmax = u.maxCoeff();
  for (int v = 0; v < mesh.num_vertices(); ++v)
    if (u(v) >= gmax - tol) rep.argmax.push_back(v);
  if (sign != SourceSign::nonnegative && rep.upper_margin < -tol) rep.violated = true;
  if (sign != SourceSign::nonpositive && rep.lower_margin < -tol) rep.violated = true;
  return rep;
}

Eigen::VectorXd interpolate(const SimplicialMesh& mesh, const ScalarFn& f) {
  Eigen::VectorXd v(mesh.num_vertices());
  for (int i = 0; i < mesh.num_vertices(); ++i) v(i) = f(mesh.vertex(i));
  return v;
}

PoincareWirtingerReport poincare_wirtinger_check(const SimplicialMesh& mesh,
                                                 const std::function<bool(const Point&)>& in_E,
                                                 const std::vector<ScalarFn>& trials) {
  PoincareWirtingerReport rep;
  rep.subset_measure = measure_of(mesh, in_E);
  rep.domain_measure = measure_of(mesh, [](const Point&) { return true; });
  if (rep.subset_measure <= 0.0) throw Error(ErrorCode::EmptySubset, "subset E has zero measure");
  BoundaryConditions natural;
  for (auto t : {BoundaryTag::dirichlet, BoundaryTag::neumann, BoundaryTag::robin,
                 BoundaryTag::gamma0, BoundaryTag::gamma})
    natural.kind[t] = BcKind::neumann;
  auto sys = assemble(mesh, laplace(mesh.dim, Form::divergence), natural, nullptr);
  SpMat ME = assemble_mass_on(mesh, in_E);
  Eigen::VectorXd one = Eigen::VectorXd::Ones(mesh.num_vertices());
  for (const auto& f : trials) {
    Eigen::VectorXd u = interpolate(mesh, f);
    double mean_E = one.dot(ME * u) / rep.subset_measure;
    Eigen::VectorXd w = u - mean_E * one;
    double grad2 = u.dot(sys.K_full * u);
    if (!(grad2 > 1e-14 * std::max(1.0, u.squaredNorm())))
      throw Error(ErrorCode::DegenerateField, "trial function has zero gradient");
    double ratio = std::sqrt(w.dot(sys.M_full * w) / grad2);
    rep.ratios.push_back(ratio);
    rep.sup_ratio = std::max(rep.sup_ratio, ratio);
  }
  return rep;
}

double neumann_compatibility_defect(const SimplicialMesh& mesh, const ScalarFn& f, const ScalarFn& g) {
  double s = 0;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    CellGeom cg = cell_geom(mesh, c);
    if (f)
      for (const auto& q : cell_quadrature(mesh, cg)) s += q.w * f(q.x);
  }
  if (g)
    for (const auto& fc : mesh.boundary)
      for (const auto& q : facet_quadrature(mesh, fc)) s += q.w * g(q.x);
  return s;
}

double l2_error(const SimplicialMesh& mesh, const Eigen::VectorXd& u, const ScalarFn& exact) {
  double s = 0;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    CellGeom cg = cell_geom(mesh, c);
    for (const auto& q : cell_quadrature(mesh, cg)) {
      double uh = 0;
      for (int k = 0; k < cg.nv; ++k) uh += q.phi[k] * u(cg.idx[k]);
      double e = uh - (exact ? exact(q.x) : 0.0);
      s += q.w * e * e;
    }
  }
  return std::sqrt(s);
}

double l2_norm(const SimplicialMesh& mesh, const Eigen::VectorXd& u) {
  return l2_error(mesh, u, nullptr);
}

std::string field_to_json(const Eigen::VectorXd& values) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (int i = 0; i < values.size(); ++i) j[std::to_string(i)] = values(i);
  return j.dump();
}

std::string field_to_csv(const SimplicialMesh& mesh, const Eigen::VectorXd& values) {
  std::ostringstream os;
  os << (mesh.dim == 1 ? "x,u\n" : "x,y,u\n");
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    for (int k = 0; k < mesh.dim; ++k) os << fmt(mesh.vertices(i, k)) << ',';
    os << fmt(values(i)) << '\n';
  }
  return os.str();
}

}  // namespace elliptica
