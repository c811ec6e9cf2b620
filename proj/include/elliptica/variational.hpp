#pragma once

#include "elliptica/geometry.hpp"
#include "elliptica/operators.hpp"

#include <Eigen/Sparse>

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace elliptica {

enum class BcKind { dirichlet, neumann, robin };

struct BoundaryConditions {
  ScalarFn dirichlet;  // g on Dirichlet facets; null means 0
  ScalarFn neumann;    // conormal flux on Neumann facets
  ScalarFn robin;      // g in a grad u . nu + robin_alpha u = g
  double robin_alpha = 1.0;
  // Tags not listed fall back to: dirichlet->dirichlet, neumann->neumann,
  // robin->robin, gamma0->neumann, gamma->dirichlet.
  std::map<BoundaryTag, BcKind> kind;

  BcKind kind_of(BoundaryTag t) const;
};

using SpMat = Eigen::SparseMatrix<double>;

struct AssembledSystem {
  std::shared_ptr<const SimplicialMesh> mesh;
  SpMat K_full, M_full;  // all vertices; K_full includes Robin boundary mass
  Eigen::VectorXd F_full;
  std::vector<int> free_to_vertex;
  std::vector<int> vertex_to_free;  // -1 on Dirichlet vertices
  Eigen::VectorXd dirichlet_values;  // full length, zero on free vertices
  SpMat K, M;            // free x free
  Eigen::VectorXd load;  // free, with the Dirichlet lift moved to the right side
  bool symmetric = true;

  int num_free() const { return static_cast<int>(free_to_vertex.size()); }
  Eigen::VectorXd expand(const Eigen::VectorXd& free_values) const;
  Eigen::VectorXd restrict_vector(const Eigen::VectorXd& full) const;
  SpMat restrict_matrix(const SpMat& full) const;
};

// The bilinear form is a(u,v) = int A grad u . grad v + c^i u d_i v + d^i d_i u v + d u v
// for a divergence-form operator.
AssembledSystem assemble(const SimplicialMesh& mesh, const EllipticOperator& op,
                         const BoundaryConditions& bc, const ScalarFn& f);

// Mass matrix restricted to cells whose centroid satisfies the predicate.
SpMat assemble_mass_on(const SimplicialMesh& mesh, const std::function<bool(const Point&)>& in_set);
double measure_of(const SimplicialMesh& mesh, const std::function<bool(const Point&)>& in_set);

class FemField {
 public:
  FemField() = default;
  FemField(std::shared_ptr<const SimplicialMesh> mesh, Eigen::VectorXd values)
      : mesh_(std::move(mesh)), values_(std::move(values)) {}

  const SimplicialMesh& mesh() const { return *mesh_; }
  std::shared_ptr<const SimplicialMesh> mesh_ptr() const { return mesh_; }
  const Eigen::VectorXd& values() const { return values_; }
  // P1 interpolation; throws InvalidArgument outside the mesh.
  double operator()(const Point& x) const;
  ScalarField as_field() const;

 private:
  std::shared_ptr<const SimplicialMesh> mesh_;
  Eigen::VectorXd values_;
};

struct SolveInfo {
  double relative_residual = 0.0;
};

FemField solve(const AssembledSystem& system, SolveInfo* info = nullptr);

struct Spectrum {
  Eigen::VectorXd eigenvalues;  // ascending
  Eigen::MatrixXd vectors;      // free dofs x k, M-orthonormal
  Eigen::VectorXd residuals;    // |K v - lambda M v| / (lambda |M v|)
  int iterations = 0;
};

struct EigenOptions {
  double tolerance = 1e-10;
  int max_iterations = 1000;
  int block = 0;  // 0 picks max(2k, k + 8)
  unsigned seed = 12345;
};

Spectrum eigensolve(const AssembledSystem& system, int k, const EigenOptions& opt = {});

double rayleigh(const AssembledSystem& system, const Eigen::VectorXd& v);

struct MinMaxReport {
  int m = 0;
  double lambda_m = 0.0;
  std::vector<double> trial_max;  // max Rayleigh quotient over each trial subspace
  bool trials_bound = true;       // every trial max >= lambda_m - tol
  double eigen_span_max = 0.0;    // max over the span of the first m eigenvectors
  bool eigen_span_equal = true;
};

MinMaxReport min_max_check(const AssembledSystem& system, const Spectrum& spectrum, int m,
                           const std::vector<Eigen::MatrixXd>& trials, double tol = 1e-8);

struct PoincareReport {
  double constant = 0.0;      // 1/lambda_1
  double lambda1 = 0.0;
  double width = 0.0;         // thinnest coordinate slab containing the domain
  double strip_bound = 0.0;   // (width/2)^2
  double interval_upper = 0.0;  // width^2/8, the elementary bound in 1D
  double extrapolated = 0.0;  // Richardson estimate from the mesh and its refinement (0 if skipped)
};

PoincareReport poincare_constant(const SimplicialMesh& mesh, bool extrapolate = false);

SimplicialMesh refine_mesh(const SimplicialMesh& mesh);

enum class SourceSign { zero, nonpositive, nonnegative };

struct MaxPrincipleReport {
  double interior_max = 0.0, interior_min = 0.0;
  double boundary_max = 0.0, boundary_min = 0.0;
  double upper_margin = 0.0;  // boundary_max - interior_max
  double lower_margin = 0.0;  // interior_min - boundary_min
  std::vector<int> argmax;    // every vertex attaining the global max
  bool violated = false;
};

// Source sign refers to f in -div(A grad u) = f.
MaxPrincipleReport weak_max_check(const SimplicialMesh& mesh, const Eigen::VectorXd& u,
                                  SourceSign sign = SourceSign::zero, double tol = 1e-9);

struct PoincareWirtingerReport {
  double subset_measure = 0.0;
  double domain_measure = 0.0;
  std::vector<double> ratios;
  double sup_ratio = 0.0;
};

PoincareWirtingerReport poincare_wirtinger_check(const SimplicialMesh& mesh,
                                                 const std::function<bool(const Point&)>& in_E,
                                                 const std::vector<ScalarFn>& trials);

// Pure Neumann compatibility defect: int f + int g over the boundary.
double neumann_compatibility_defect(const SimplicialMesh& mesh, const ScalarFn& f, const ScalarFn& g);

double l2_error(const SimplicialMesh& mesh, const Eigen::VectorXd& u, const ScalarFn& exact);
double l2_norm(const SimplicialMesh& mesh, const Eigen::VectorXd& u);
Eigen::VectorXd interpolate(const SimplicialMesh& mesh, const ScalarFn& f);

std::string field_to_json(const Eigen::VectorXd& values);
std::string field_to_csv(const SimplicialMesh& mesh, const Eigen::VectorXd& values);

}  // namespace elliptica
