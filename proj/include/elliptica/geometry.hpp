#pragma once

#include "elliptica/core.hpp"

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace elliptica {

class Domain {
 public:
  enum class Kind { rectangle, disk, ball, annulus, polygon };

  // n = lo.size(); n == 1 gives an interval.
  static Domain rectangle(const Point& lo, const Point& hi);
  static Domain interval(double a, double b);
  static Domain unit_square();
  static Domain disk(const Point& center, double radius);
  static Domain ball(const Point& center, double radius);  // n = 3
  static Domain annulus(const Point& center, double r_inner, double r_outer);
  static Domain polygon(std::vector<Point> vertices);
  static Domain l_shape();  // (0,1)^2 minus [1/2,1]^2

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  double measure() const;
  double diameter() const;
  bool contains(const Point& x) const;
  // Positive inside, negative outside, magnitude = distance to the boundary.
  double boundary_distance(const Point& x) const;
  // Distance from an interior x to the boundary along a unit direction.
  double ray_exit(const Point& x, const Point& dir) const;
  void bounding_box(Point& lo, Point& hi) const;

  const Point& lo() const { return a_; }
  const Point& hi() const { return b_; }
  const Point& center() const { return a_; }
  double radius() const { return r1_; }
  double inner_radius() const { return r0_; }
  const std::vector<Point>& vertices() const { return poly_; }

 private:
  Kind kind_ = Kind::rectangle;
  int dim_ = 2;
  Point a_, b_;
  double r0_ = 0.0, r1_ = 0.0;
  std::vector<Point> poly_;
};

enum class BoundaryTag { dirichlet, neumann, robin, gamma0, gamma };

const char* tag_name(BoundaryTag t);
BoundaryTag parse_tag(const std::string& s);

struct BoundaryFacet {
  std::array<int, 2> v{};  // 1D facets use v[0] == v[1]
  BoundaryTag tag = BoundaryTag::dirichlet;
};

struct SimplicialMesh {
  int dim = 2;
  Eigen::MatrixXd vertices;               // rows are points
  std::vector<std::array<int, 3>> cells;  // 1D cells leave the third index at -1
  std::vector<BoundaryFacet> boundary;

  int num_vertices() const { return static_cast<int>(vertices.rows()); }
  int num_cells() const { return static_cast<int>(cells.size()); }
  Point vertex(int i) const { return vertices.row(i).transpose(); }
  double cell_measure(int c) const;  // signed
  Point centroid(int c) const;
  std::vector<char> boundary_vertex_mask() const;

  // Checks positive orientation, conformity, and that every boundary facet
  // carries exactly one tag. Throws InvalidMesh / UntaggedBoundaryFacet.
  void validate() const;
};

// Sides are named left/right (x) and bottom/top (y); untagged sides default.
using SideTags = std::map<std::string, BoundaryTag>;

SimplicialMesh build_rect_mesh(const Domain& rect, double h, const SideTags& tags = {},
                               BoundaryTag fallback = BoundaryTag::dirichlet);

// Structured grid over the bounding box keeping cells whose centroid lies in
// the domain. Exact for polygons aligned with the grid (e.g. the L-shape).
SimplicialMesh build_masked_mesh(const Domain& domain, double h,
                                 BoundaryTag tag = BoundaryTag::dirichlet);

SimplicialMesh scale_mesh(const SimplicialMesh& m, double factor);

std::string mesh_to_json(const SimplicialMesh& m);
SimplicialMesh mesh_from_json(const std::string& text);

struct Quadrature {
  std::vector<Point> nodes;
  std::vector<double> weights;
  double carrier_measure = 0.0;
  int exact_degree = 0;

  int size() const { return static_cast<int>(weights.size()); }
  double weight_sum() const;
  double integrate(const std::function<double(const Point&)>& f) const;
};

// Gauss-Legendre on [a,b].
void gauss_legendre(int order, double a, double b, std::vector<double>& x,
                    std::vector<double>& w);

Quadrature ball_quadrature(const Point& center, double r, int radial_order, int angular_order);
Quadrature sphere_quadrature(const Point& center, double r, int order);
Quadrature annulus_quadrature(const Point& center, double r_inner, double r_outer,
                              int radial_order, int angular_order);

// Degree-5 seven point rule on the reference triangle, barycentric coordinates.
struct TriangleRule {
  std::array<std::array<double, 3>, 7> bary;
  std::array<double, 7> weight;  // sums to 1
};
const TriangleRule& triangle_rule_deg5();

struct BallChain {
  std::vector<Point> centers;
  double radius = 0.0;
  double margin = 0.0;

  int size() const { return static_cast<int>(centers.size()); }
};

struct ChainCheck {
  bool start_in_omega = false;
  bool target_in_last = false;
  bool nested = false;
  bool contained = false;
  bool all() const { return start_in_omega && target_in_last && nested && contained; }
};

// path: optional polyline from omega_center to target; default is the segment.
BallChain ball_chain(const Domain& omega_domain, const Point& omega_center, double omega_radius,
                     const Point& target, double r, const std::vector<Point>& path = {},
                     std::optional<double> margin = std::nullopt);

ChainCheck check_chain(const BallChain& chain, const Domain& domain, const Point& omega_center,
                       double omega_radius, const Point& target);

}  // namespace elliptica
