#include "elliptica/geometry.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace elliptica {

namespace {

double seg_distance(const Point& p, const Point& a, const Point& b) {
  Point ab = b - a;
  double t = (p - a).dot(ab) / ab.squaredNorm();
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

double cross2(const Point& a, const Point& b) { return a(0) * b(1) - a(1) * b(0); }

}  // namespace

Domain Domain::rectangle(const Point& lo, const Point& hi) {
  if (lo.size() != hi.size() || lo.size() < 1 || lo.size() > 3)
    throw Error(ErrorCode::InvalidArgument, "rectangle corners must share a dimension in 1..3");
  for (int i = 0; i < lo.size(); ++i)
    if (!(hi(i) > lo(i))) throw Error(ErrorCode::InvalidArgument, "rectangle has nonpositive side");
  Domain d;
  d.kind_ = Kind::rectangle;
  d.dim_ = static_cast<int>(lo.size());
  d.a_ = lo;
  d.b_ = hi;
  return d;
}

Domain Domain::interval(double a, double b) { return rectangle(make_point(a), make_point(b)); }

Domain Domain::unit_square() { return rectangle(make_point(0, 0), make_point(1, 1)); }

Domain Domain::disk(const Point& center, double radius) {
  if (!(radius > 0)) throw Error(ErrorCode::NonPositiveRadius, "disk radius must be positive");
  Domain d;
  d.dim_ = static_cast<int>(center.size());
  d.kind_ = d.dim_ == 3 ? Kind::ball : Kind::disk;
  d.a_ = center;
  d.r1_ = radius;
  return d;
}

Domain Domain::ball(const Point& center, double radius) {
  if (center.size() != 3) throw Error(ErrorCode::InvalidArgument, "ball expects a 3D center");
  return disk(center, radius);
}

Domain Domain::annulus(const Point& center, double r_inner, double r_outer) {
  if (!(r_inner > 0 && r_inner < r_outer))
    throw Error(ErrorCode::InvalidArgument, "annulus needs 0 < r_inner < r_outer");
  if (center.size() != 2) throw Error(ErrorCode::UnsupportedDimension, "annulus is 2D");
  Domain d;
  d.kind_ = Kind::annulus;
  d.dim_ = 2;
  d.a_ = center;
  d.r0_ = r_inner;
  d.r1_ = r_outer;
  return d;
}

Domain Domain::polygon(std::vector<Point> vertices) {
  if (vertices.size() < 3) throw Error(ErrorCode::InvalidArgument, "polygon needs 3 vertices");
  double area2 = 0;
  for (size_t i = 0; i < vertices.size(); ++i) {
    if (vertices[i].size() != 2) throw Error(ErrorCode::InvalidArgument, "polygon is 2D");
    area2 += cross2(vertices[i], vertices[(i + 1) % vertices.size()]);
  }
  if (!(area2 > 0)) throw Error(ErrorCode::InvalidArgument, "polygon must be counterclockwise");
  // simple: no two non-adjacent edges intersect
  const size_t m = vertices.size();
  for (size_t i = 0; i < m; ++i)
    for (size_t j = i + 1; j < m; ++j) {
      if (j == i + 1 || (i == 0 && j == m - 1)) continue;
      const Point &p = vertices[i], &p2 = vertices[(i + 1) % m];
      const Point &q = vertices[j], &q2 = vertices[(j + 1) % m];
      double d1 = cross2(p2 - p, q - p), d2 = cross2(p2 - p, q2 - p);
      double d3 = cross2(q2 - q, p - q), d4 = cross2(q2 - q, p2 - q);
      if (d1 * d2 < 0 && d3 * d4 < 0)
        throw Error(ErrorCode::InvalidArgument, "polygon is not simple");
    }
  Domain d;
  d.kind_ = Kind::polygon;
  d.dim_ = 2;
  d.poly_ = std::move(vertices);
  return d;
}

Domain Domain::l_shape() {
  return polygon({make_point(0, 0), make_point(1, 0), make_point(1, 0.5), make_point(0.5, 0.5),
                  make_point(0.5, 1), make_point(0, 1)});
}

double Domain::measure() const {
  switch (kind_) {
    case Kind::rectangle: return (b_ - a_).prod();
    case Kind::disk:
    case Kind::ball: return ball_volume(dim_) * std::pow(r1_, dim_);
    case Kind::annulus: return kPi * (r1_ * r1_ - r0_ * r0_);
    case Kind::polygon: {
      double s = 0;
      for (size_t i = 0; i < poly_.size(); ++i) s += cross2(poly_[i], poly_[(i + 1) % poly_.size()]);
      return 0.5 * s;
    }
  }
  return 0;
}

double Domain::diameter() const {
  switch (kind_) {
    case Kind::rectangle: return (b_ - a_).norm();
    case Kind::disk:
    case Kind::ball:
    case Kind::annulus: return 2 * r1_;
    case Kind::polygon: {
      double d = 0;
      for (auto& p : poly_)
        for (auto& q : poly_) d = std::max(d, (p - q).norm());
      return d;
    }
  }
  return 0;
}

bool Domain::contains(const Point& x) const { return boundary_distance(x) > 0; }

double Domain::boundary_distance(const Point& x) const {
  switch (kind_) {
    case Kind::rectangle: {
      bool inside = true;
      double din = std::numeric_limits<double>::infinity();
      double out2 = 0;
      for (int i = 0; i < dim_; ++i) {
        double lo = x(i) - a_(i), hi = b_(i) - x(i);
        din = std::min({din, lo, hi});
        if (lo < 0) { inside = false; out2 += lo * lo; }
        if (hi < 0) { inside = false; out2 += hi * hi; }
      }
      return inside ? din : -std::sqrt(out2);
    }
    case Kind::disk:
    case Kind::ball: return r1_ - (x - a_).norm();
    case Kind::annulus: {
      double r = (x - a_).norm();
      return std::min(r1_ - r, r - r0_);
    }
    case Kind::polygon: {
      double d = std::numeric_limits<double>::infinity();
      bool inside = false;
      const size_t m = poly_.size();
      for (size_t i = 0, j = m - 1; i < m; j = i++) {
        const Point &pi = poly_[i], &pj = poly_[j];
        d = std::min(d, seg_distance(x, pj, pi));
        if (((pi(1) > x(1)) != (pj(1) > x(1))) &&
            (x(0) < (pj(0) - pi(0)) * (x(1) - pi(1)) / (pj(1) - pi(1)) + pi(0)))
          inside = !inside;
      }
      return inside ? d : -d;
    }
  }
  return 0;
}

double Domain::ray_exit(const Point& x, const Point& dir) const {
  const double inf = std::numeric_limits<double>::infinity();
  switch (kind_) {
    case Kind::rectangle: {
      double t = inf;
      for (int i = 0; i < dim_; ++i) {
        if (dir(i) > 0) t = std::min(t, (b_(i) - x(i)) / dir(i));
        if (dir(i) < 0) t = std::min(t, (a_(i) - x(i)) / dir(i));
      }
      return std::max(t, 0.0);
    }
    case Kind::disk:
    case Kind::ball:
    case Kind::annulus: {
      Point p = x - a_;
      double pd = p.dot(dir), pp = p.squaredNorm();
      double disc = pd * pd - pp + r1_ * r1_;
      double t = -pd + std::sqrt(std::max(disc, 0.0));
      if (kind_ == Kind::annulus) {
        double di = pd * pd - pp + r0_ * r0_;
        if (di > 0) {
          double t1 = -pd - std::sqrt(di);
          if (t1 > 0) t = std::min(t, t1);
        }
      }
      return std::max(t, 0.0);
    }
    case Kind::polygon: {
      double t = inf;
      const size_t m = poly_.size();
      for (size_t i = 0; i < m; ++i) {
        Point e = poly_[(i + 1) % m] - poly_[i];
        double den = cross2(dir, e);
        if (std::abs(den) < 1e-300) continue;
        Point w = poly_[i] - x;
        double s = cross2(w, e) / den;   // along the ray
        double u = cross2(w, dir) / den;  // along the edge
        if (s > 1e-14 && u >= -1e-14 && u <= 1 + 1e-14) t = std::min(t, s);
      }
      return t == inf ? 0.0 : t;
    }
  }
  return 0;
}

void Domain::bounding_box(Point& lo, Point& hi) const {
  switch (kind_) {
    case Kind::rectangle:
      lo = a_;
      hi = b_;
      return;
    case Kind::disk:
    case Kind::ball:
    case Kind::annulus:
      lo = a_.array() - r1_;
      hi = a_.array() + r1_;
      return;
    case Kind::polygon:
      lo = poly_[0];
      hi = poly_[0];
      for (auto& p : poly_) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
      }
      return;
  }
}

const char* tag_name(BoundaryTag t) {
  switch (t) {
    case BoundaryTag::dirichlet: return "dirichlet";
    case BoundaryTag::neumann: return "neumann";
    case BoundaryTag::robin: return "robin";
    case BoundaryTag::gamma0: return "gamma0";
    case BoundaryTag::gamma: return "gamma";
  }
  return "dirichlet";
}

BoundaryTag parse_tag(const std::string& s) {
  if (s == "dirichlet") return BoundaryTag::dirichlet;
  if (s == "neumann") return BoundaryTag::neumann;
  if (s == "robin") return BoundaryTag::robin;
  if (s == "gamma0") return BoundaryTag::gamma0;
  if (s == "gamma") return BoundaryTag::gamma;
  throw Error(ErrorCode::InvalidArgument, "unknown boundary tag '" + s + "'");
}

double SimplicialMesh::cell_measure(int c) const {
  const auto& t = cells[c];
  if (dim == 1) return vertices(t[1], 0) - vertices(t[0], 0);
  Point a = vertex(t[0]), b = vertex(t[1]), d = vertex(t[2]);
  return 0.5 * cross2(b - a, d - a);
}

Point SimplicialMesh::centroid(int c) const {
  const auto& t = cells[c];
  if (dim == 1) return 0.5 * (vertex(t[0]) + vertex(t[1]));
  return (vertex(t[0]) + vertex(t[1]) + vertex(t[2])) / 3.0;
}

std::vector<char> SimplicialMesh::boundary_vertex_mask() const {
  std::vector<char> mask(num_vertices(), 0);
  for (auto& f : boundary) {
    mask[f.v[0]] = 1;
    mask[f.v[1]] = 1;
  }
  return mask;
}

void SimplicialMesh::validate() const {
  const int nv = num_vertices();
  std::map<std::pair<int, int>, int> facet_count;
  for (int c = 0; c < num_cells(); ++c) {
    const auto& t = cells[c];
    for (int k = 0; k <= dim; ++k)
      if (t[k] < 0 || t[k] >= nv) throw Error(ErrorCode::InvalidMesh, "cell index out of range");
    if (!(cell_measure(c) > 0)) throw Error(ErrorCode::InvalidMesh, "cell with nonpositive area");
    if (dim == 1) {
      facet_count[{t[0], t[0]}]++;
      facet_count[{t[1], t[1]}]++;
    } else {
      for (int k = 0; k < 3; ++k) {
        int a = t[k], b = t[(k + 1) % 3];
        facet_count[{std::min(a, b), std::max(a, b)}]++;
      }
    }
  }
  std::map<std::pair<int, int>, int> tagged;
  for (auto& f : boundary) tagged[{std::min(f.v[0], f.v[1]), std::max(f.v[0], f.v[1])}]++;
  for (auto& [key, n] : facet_count) {
    if (n > 2) throw Error(ErrorCode::InvalidMesh, "nonconforming facet shared by >2 cells");
    if (n == 1) {
      auto it = tagged.find(key);
      if (it == tagged.end())
        throw Error(ErrorCode::UntaggedBoundaryFacet,
                    "facet (" + std::to_string(key.first) + "," + std::to_string(key.second) + ")");
      if (it->second != 1) throw Error(ErrorCode::InvalidMesh, "boundary facet tagged twice");
    }
  }
  for (auto& [key, n] : tagged) {
    auto it = facet_count.find(key);
    if (it == facet_count.end() || it->second != 1)
      throw Error(ErrorCode::InvalidMesh, "tag on a facet that is not on the boundary");
  }
}

SimplicialMesh build_rect_mesh(const Domain& rect, double h, const SideTags& tags,
                               BoundaryTag fallback) {
  if (rect.kind() != Domain::Kind::rectangle || rect.dim() > 2)
    throw Error(ErrorCode::InvalidArgument, "build_rect_mesh expects a 1D or 2D rectangle");
  if (!(h > 0)) throw Error(ErrorCode::NonPositiveH, "h must be positive");
  Point side = rect.hi() - rect.lo();
  if (h > side.minCoeff()) throw Error(ErrorCode::HExceedsSide, "h exceeds the shortest side");
  auto tag_of = [&](const char* name) {
    auto it = tags.find(name);
    return it == tags.end() ? fallback : it->second;
  };

  SimplicialMesh m;
  m.dim = rect.dim();
  if (m.dim == 1) {
    const int nx = static_cast<int>(std::ceil(side(0) / h - 1e-9));
    m.vertices.resize(nx + 1, 1);
    for (int i = 0; i <= nx; ++i) m.vertices(i, 0) = rect.lo()(0) + side(0) * i / nx;
    for (int i = 0; i < nx; ++i) m.cells.push_back({i, i + 1, -1});
    m.boundary.push_back({{0, 0}, tag_of("left")});
    m.boundary.push_back({{nx, nx}, tag_of("right")});
    return m;
  }
  const int nx = static_cast<int>(std::ceil(side(0) / h - 1e-9));
  const int ny = static_cast<int>(std::ceil(side(1) / h - 1e-9));
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  m.vertices.resize((nx + 1) * (ny + 1), 2);
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      m.vertices(id(i, j), 0) = rect.lo()(0) + side(0) * i / nx;
      m.vertices(id(i, j), 1) = rect.lo()(1) + side(1) * j / ny;
    }
  m.cells.reserve(2 * nx * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      m.cells.push_back({a, b, c});
      m.cells.push_back({a, c, d});
    }
  for (int i = 0; i < nx; ++i) m.boundary.push_back({{id(i, 0), id(i + 1, 0)}, tag_of("bottom")});
  for (int j = 0; j < ny; ++j) m.boundary.push_back({{id(nx, j), id(nx, j + 1)}, tag_of("right")});
  for (int i = nx; i > 0; --i) m.boundary.push_back({{id(i, ny), id(i - 1, ny)}, tag_of("top")});
  for (int j = ny; j > 0; --j) m.boundary.push_back({{id(0, j), id(0, j - 1)}, tag_of("left")});
  return m;
}

SimplicialMesh build_masked_mesh(const Domain& domain, double h, BoundaryTag tag) {
  if (domain.dim() != 2) throw Error(ErrorCode::UnsupportedDimension, "masked mesh is 2D");
  if (!(h > 0)) throw Error(ErrorCode::NonPositiveH, "h must be positive");
  Point lo, hi;
  domain.bounding_box(lo, hi);
  const int nx = static_cast<int>(std::ceil((hi(0) - lo(0)) / h - 1e-9));
  const int ny = static_cast<int>(std::ceil((hi(1) - lo(1)) / h - 1e-9));
  const double hx = (hi(0) - lo(0)) / nx, hy = (hi(1) - lo(1)) / ny;
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  auto pos = [&](int k) { return make_point(lo(0) + hx * (k % (nx + 1)), lo(1) + hy * (k / (nx + 1))); };
  std::vector<std::array<int, 3>> cells;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      for (auto t : {std::array<int, 3>{a, b, c}, std::array<int, 3>{a, c, d}}) {
        Point g = (pos(t[0]) + pos(t[1]) + pos(t[2])) / 3.0;
        if (domain.contains(g)) cells.push_back(t);
      }
    }
  if (cells.empty()) throw Error(ErrorCode::InvalidMesh, "mask removed every cell");
  std::vector<int> remap((nx + 1) * (ny + 1), -1);
  int nv = 0;
  for (auto& t : cells)
    for (int k = 0; k < 3; ++k)
      if (remap[t[k]] < 0) remap[t[k]] = nv++;
  SimplicialMesh m;
  m.dim = 2;
  m.vertices.resize(nv, 2);
  for (size_t k = 0; k < remap.size(); ++k)
    if (remap[k] >= 0) m.vertices.row(remap[k]) = pos(static_cast<int>(k)).transpose();
  std::map<std::pair<int, int>, std::pair<int, int>> edges;  // key -> (count, oriented first)
  std::map<std::pair<int, int>, std::array<int, 2>> oriented;
  for (auto& t : cells) {
    std::array<int, 3> r{remap[t[0]], remap[t[1]], remap[t[2]]};
    m.cells.push_back(r);
    for (int k = 0; k < 3; ++k) {
      int a = r[k], b = r[(k + 1) % 3];
      auto key = std::make_pair(std::min(a, b), std::max(a, b));
      edges[key].first++;
      oriented[key] = {a, b};
    }
  }
  for (auto& [key, cnt] : edges)
    if (cnt.first == 1) m.boundary.push_back({oriented[key], tag});
  return m;
}

SimplicialMesh scale_mesh(const SimplicialMesh& m, double factor) {
  if (!(factor > 0)) throw Error(ErrorCode::InvalidArgument, "scale factor must be positive");
  SimplicialMesh s = m;
  s.vertices *= factor;
  return s;
}

std::string mesh_to_json(const SimplicialMesh& m) {
  nlohmann::json j;
  j["dim"] = m.dim;
  auto& V = j["vertices"] = nlohmann::json::array();
  for (int i = 0; i < m.num_vertices(); ++i) {
    auto row = nlohmann::json::array();
    for (int k = 0; k < m.dim; ++k) row.push_back(m.vertices(i, k));
    V.push_back(row);
  }
  auto& C = j["cells"] = nlohmann::json::array();
  for (auto& t : m.cells) {
    auto row = nlohmann::json::array();
    for (int k = 0; k <= m.dim; ++k) row.push_back(t[k]);
    C.push_back(row);
  }
  auto& B = j["boundary"] = nlohmann::json::array();
  for (auto& f : m.boundary) {
    nlohmann::json e;
    if (m.dim == 1)
      e["facet"] = {f.v[0]};
    else
      e["facet"] = {f.v[0], f.v[1]};
    e["tag"] = tag_name(f.tag);
    B.push_back(e);
  }
  return j.dump();
}

SimplicialMesh mesh_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::ConfigParseError, std::string("mesh JSON: ") + e.what());
  }
  SimplicialMesh m;
  const auto& V = j.at("vertices");
  if (V.empty()) throw Error(ErrorCode::InvalidMesh, "mesh has no vertices");
  m.dim = j.contains("dim") ? j["dim"].get<int>() : static_cast<int>(V[0].size());
  m.vertices.resize(static_cast<Eigen::Index>(V.size()), m.dim);
  for (size_t i = 0; i < V.size(); ++i)
    for (int k = 0; k < m.dim; ++k) m.vertices(static_cast<Eigen::Index>(i), k) = V[i][k].get<double>();
  for (auto& c : j.at("cells")) {
    std::array<int, 3> t{-1, -1, -1};
    for (int k = 0; k <= m.dim; ++k) t[k] = c[k].get<int>();
    m.cells.push_back(t);
  }
  for (auto& b : j.at("boundary")) {
    BoundaryFacet f;
    const auto& fv = b.at("facet");
    f.v[0] = fv[0].get<int>();
    f.v[1] = fv.size() > 1 ? fv[1].get<int>() : f.v[0];
    f.tag = parse_tag(b.at("tag").get<std::string>());
    m.boundary.push_back(f);
  }
  return m;
}

double Quadrature::weight_sum() const {
  double s = 0;
  for (double w : weights) s += w;
  return s;
}

double Quadrature::integrate(const std::function<double(const Point&)>& f) const {
  double s = 0;
  for (size_t i = 0; i < weights.size(); ++i) s += weights[i] * f(nodes[i]);
  return s;
}

void gauss_legendre(int order, double a, double b, std::vector<double>& x, std::vector<double>& w) {
  if (order < 1) throw Error(ErrorCode::InvalidArgument, "quadrature order must be >= 1");
  const int n = order;
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double pp = 1;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1, p2 = 0;
      for (int j = 1; j <= n; ++j) {
        double p3 = p2;
        p2 = p1;
        p1 = ((2 * j - 1) * z * p2 - (j - 1) * p3) / j;
      }
      pp = n * (z * p1 - p2) / (z * z - 1);
      double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) < 1e-15) {
        // one more derivative evaluation at the converged node
        p1 = 1, p2 = 0;
        for (int j = 1; j <= n; ++j) {
          double p3 = p2;
          p2 = p1;
          p1 = ((2 * j - 1) * z * p2 - (j - 1) * p3) / j;
        }
        pp = n * (z * p1 - p2) / (z * z - 1);
        break;
      }
    }
    double wi = 2 / ((1 - z * z) * pp * pp);
    x[i] = mid - half * z;
    x[n - 1 - i] = mid + half * z;
    w[i] = half * wi;
    w[n - 1 - i] = half * wi;
  }
}

Quadrature ball_quadrature(const Point& center, double r, int radial_order, int angular_order) {
  if (!(r > 0)) throw Error(ErrorCode::NonPositiveRadius, "ball radius must be positive");
  if (radial_order < 1 || angular_order < 1)
    throw Error(ErrorCode::InvalidArgument, "quadrature orders must be >= 1");
  const int n = static_cast<int>(center.size());
  Quadrature q;
  q.carrier_measure = ball_volume(n) * std::pow(r, n);
  std::vector<double> rx, rw;
  if (n == 1) {
    gauss_legendre(radial_order, -r, r, rx, rw);
    for (int i = 0; i < radial_order; ++i) {
      q.nodes.push_back(center + make_point(rx[i]));
      q.weights.push_back(rw[i]);
    }
    q.exact_degree = 2 * radial_order - 1;
    return q;
  }
  gauss_legendre(radial_order, 0, r, rx, rw);
  if (n == 2) {
    const int M = angular_order;
    for (int i = 0; i < radial_order; ++i)
      for (int j = 0; j < M; ++j) {
        double t = 2 * kPi * j / M;
        q.nodes.push_back(center + make_point(rx[i] * std::cos(t), rx[i] * std::sin(t)));
        q.weights.push_back(rw[i] * rx[i] * 2 * kPi / M);
      }
    q.exact_degree = std::min(2 * radial_order - 2, M - 1);
    return q;
  }
  if (n != 3) throw Error(ErrorCode::UnsupportedDimension, "ball quadrature supports n <= 3");
  std::vector<double> cx, cw;
  gauss_legendre(angular_order, -1, 1, cx, cw);
  const int M = 2 * angular_order;
  for (int i = 0; i < radial_order; ++i)
    for (int k = 0; k < angular_order; ++k) {
      double st = std::sqrt(1 - cx[k] * cx[k]);
      for (int j = 0; j < M; ++j) {
        double ph = 2 * kPi * j / M;
        q.nodes.push_back(center + rx[i] * make_point(st * std::cos(ph), st * std::sin(ph), cx[k]));
        q.weights.push_back(rw[i] * rx[i] * rx[i] * cw[k] * 2 * kPi / M);
      }
    }
  q.exact_degree = std::min(2 * radial_order - 3, 2 * angular_order - 1);
  return q;
}

Quadrature sphere_quadrature(const Point& center, double r, int order) {
  if (!(r > 0)) throw Error(ErrorCode::NonPositiveRadius, "sphere radius must be positive");
  if (order < 1) throw Error(ErrorCode::InvalidArgument, "quadrature order must be >= 1");
  const int n = static_cast<int>(center.size());
  Quadrature q;
  q.carrier_measure = sphere_area(n) * std::pow(r, n - 1);
  if (n == 1) {
    q.nodes = {center + make_point(-r), center + make_point(r)};
    q.weights = {1.0, 1.0};
    q.exact_degree = 1;
    return q;
  }
  if (n == 2) {
    for (int j = 0; j < order; ++j) {
      double t = 2 * kPi * j / order;
      q.nodes.push_back(center + make_point(r * std::cos(t), r * std::sin(t)));
      q.weights.push_back(2 * kPi * r / order);
    }
    q.exact_degree = order - 1;
    return q;
  }
  if (n != 3) throw Error(ErrorCode::UnsupportedDimension, "sphere quadrature supports n <= 3");
  std::vector<double> cx, cw;
  gauss_legendre(order, -1, 1, cx, cw);
  const int M = 2 * order;
  for (int k = 0; k < order; ++k) {
    double st = std::sqrt(1 - cx[k] * cx[k]);
    for (int j = 0; j < M; ++j) {
      double ph = 2 * kPi * j / M;
      q.nodes.push_back(center + r * make_point(st * std::cos(ph), st * std::sin(ph), cx[k]));
      q.weights.push_back(r * r * cw[k] * 2 * kPi / M);
    }
  }
  q.exact_degree = 2 * order - 1;
  return q;
}

Quadrature annulus_quadrature(const Point& center, double r_inner, double r_outer,
                              int radial_order, int angular_order) {
  if (!(r_inner > 0 && r_outer > r_inner))
    throw Error(ErrorCode::NonPositiveRadius, "annulus needs 0 < r_inner < r_outer");
  if (center.size() != 2) throw Error(ErrorCode::UnsupportedDimension, "annulus is 2D");
  std::vector<double> rx, rw;
  gauss_legendre(radial_order, r_inner, r_outer, rx, rw);
  Quadrature q;
  q.carrier_measure = kPi * (r_outer * r_outer - r_inner * r_inner);
  for (int i = 0; i < radial_order; ++i)
    for (int j = 0; j < angular_order; ++j) {
      double t = 2 * kPi * j / angular_order;
      q.nodes.push_back(center + make_point(rx[i] * std::cos(t), rx[i] * std::sin(t)));
      q.weights.push_back(rw[i] * rx[i] * 2 * kPi / angular_order);
    }
  q.exact_degree = std::min(2 * radial_order - 2, angular_order - 1);
  return q;
}

const TriangleRule& triangle_rule_deg5() {
  static const TriangleRule rule = [] {
    TriangleRule r{};
    const double a1 = 0.059715871789770, b1 = 0.470142064105115;
    const double a2 = 0.797426985353087, b2 = 0.101286507323456;
    const double w0 = 0.225, w1 = 0.132394152788506, w2 = 0.125939180544827;
    r.bary[0] = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    r.weight[0] = w0;
    r.bary[1] = {a1, b1, b1};
    r.bary[2] = {b1, a1, b1};
    r.bary[3] = {b1, b1, a1};
    r.bary[4] = {a2, b2, b2};
    r.bary[5] = {b2, a2, b2};
    r.bary[6] = {b2, b2, a2};
    for (int k = 1; k <= 3; ++k) r.weight[k] = w1;
    for (int k = 4; k <= 6; ++k) r.weight[k] = w2;
    return r;
  }();
  return rule;
}

namespace {

double path_min_distance(const Domain& domain, const std::vector<Point>& path) {
  double d = std::numeric_limits<double>::infinity();
  const double diam = domain.diameter();
  for (size_t s = 0; s + 1 < path.size(); ++s) {
    double len = (path[s + 1] - path[s]).norm();
    int samples = std::max(2, static_cast<int>(std::ceil(2000 * len / diam)));
    for (int i = 0; i <= samples; ++i) {
      Point p = path[s] + (path[s + 1] - path[s]) * (static_cast<double>(i) / samples);
      d = std::min(d, domain.boundary_distance(p));
    }
  }
  return d;
}

}  // namespace

BallChain ball_chain(const Domain& domain, const Point& omega_center, double omega_radius,
                     const Point& target, double r, const std::vector<Point>& path_in,
                     std::optional<double> margin) {
  if (!(r > 0)) throw Error(ErrorCode::NonPositiveRadius, "chain radius must be positive");
  if (r > omega_radius) throw Error(ErrorCode::InvalidArgument, "B(omega_center, r) must lie in omega");
  if (!domain.contains(target)) throw Error(ErrorCode::TargetUnreachable, "target lies outside the domain");
  std::vector<Point> path = path_in;
  if (path.empty()) path = {omega_center, target};
  if ((path.front() - omega_center).norm() > 1e-12 || (path.back() - target).norm() > 1e-12)
    throw Error(ErrorCode::InvalidArgument, "path must run from omega_center to target");
  BallChain chain;
  chain.radius = r;
  chain.margin = margin.value_or(1e-3 * domain.diameter());
  if (path_min_distance(domain, path) - 3 * r <= chain.margin)
    throw Error(ErrorCode::PathTooCloseToBoundary, "3r plus margin exceeds the path clearance");

  chain.centers.push_back(omega_center);
  size_t seg = 0;
  Point cur = path[0];
  const int max_steps = 1000000;
  while ((target - chain.centers.back()).norm() >= r) {
    if (chain.size() > max_steps) throw Error(ErrorCode::TargetUnreachable, "step budget exhausted");
    const Point& xk = chain.centers.back();
    bool found = false;
    while (seg + 1 < path.size()) {
      // first s in [0,1] with |cur + s (q - cur) - xk| = r, leaving the ball
      Point q = path[seg + 1];
      Point d = q - cur, p = cur - xk;
      double A = d.squaredNorm(), B = 2 * p.dot(d), C = p.squaredNorm() - r * r;
      if (A > 0) {
        double disc = B * B - 4 * A * C;
        if (disc >= 0) {
          double s = (-B + std::sqrt(disc)) / (2 * A);
          if (s >= 0 && s <= 1) {
            cur = cur + s * d;
            found = true;
            break;
          }
        }
      }
      cur = q;
      ++seg;
    }
    if (!found) throw Error(ErrorCode::TargetUnreachable, "path ended before reaching the target");
    chain.centers.push_back(cur);
  }
  return chain;
}

ChainCheck check_chain(const BallChain& chain, const Domain& domain, const Point& omega_center,
                       double omega_radius, const Point& target) {
  ChainCheck c;
  if (chain.centers.empty()) return c;
  const double r = chain.radius;
  c.start_in_omega = (chain.centers.front() - omega_center).norm() + r <= omega_radius * (1 + 1e-12);
  c.target_in_last = (target - chain.centers.back()).norm() < r;
  c.nested = true;
  for (int k = 0; k + 1 < chain.size(); ++k)
    if ((chain.centers[k + 1] - chain.centers[k]).norm() > r * (1 + 1e-12)) c.nested = false;
  c.contained = true;
  for (auto& x : chain.centers)
    if (!(domain.boundary_distance(x) - 3 * r > 0)) c.contained = false;
  return c;
}

}  // namespace elliptica
