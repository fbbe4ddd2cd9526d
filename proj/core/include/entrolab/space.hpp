#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "entrolab/errors.hpp"

namespace entrolab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

enum class Boundary { neumann, periodic };

/// Scalar function given by its values on the nodes of one MeasureSpace.
/// Fields carry the id of the space they were created on; every operation
/// checks that id so that fields from different spaces cannot be mixed.
struct Field {
  Vector values;
  std::uint64_t space_id = 0;

  Index size() const { return values.size(); }
  double operator[](Index i) const { return values[i]; }
};

/// One axis of a tensor grid. Neumann axes have n nodes spanning [0, length]
/// with spacing length/(n-1) and half cells at both ends; periodic axes have
/// n nodes with spacing length/n and no boundary.
struct GridAxis {
  Index n = 0;
  double length = 0.0;
  Boundary boundary = Boundary::neumann;

  double spacing() const {
    return boundary == Boundary::neumann ? length / double(n - 1) : length / double(n);
  }
};

/// Finite metric measure space carrying a Markov generator.
///
/// The generator is the weighted-graph Laplacian
///   (L f)(x) = (1/m_x) sum_y w_xy (f(y) - f(x)),
/// which is self-adjoint in L^2(m) and mass preserving by construction.
/// Interval and rectangle grids are special cases whose couplings w are the
/// usual second-difference stencils (Neumann ends via reflection, with half
/// cell measures so that self-adjointness is exact, not just O(h)).
///
/// The carre du champ and its iterate are
///   Gamma(f,g)  = (1/2)(L(fg) - f Lg - g Lf),
///   Gamma2(f)   = (1/2) L Gamma(f,f) - Gamma(f, Lf),
/// and the discrete Hessian quadratic form acting on a test function h is
///   Hess_h(f)   = Gamma(f, Gamma(f,h)) - (1/2) Gamma(h, Gamma(f,f)).
class MeasureSpace {
public:
  enum class Kind { grid1d, grid2d, graph };

  struct Edge {
    Index i = 0;
    Index j = 0;
    double weight = 0.0;
  };

  Kind kind() const { return kind_; }
  Index size() const { return measure_.size(); }
  std::uint64_t id() const { return id_; }

  /// Reference measure m (node weights, all positive).
  const Vector& measure() const { return measure_; }
  const Vector& log_measure() const;
  double total_mass() const { return total_mass_; }

  /// Nominal curvature-dimension tag (K, N) used by diagnostic thresholds.
  double curvature_k() const { return curvature_k_; }
  double dimension_n() const { return dimension_n_; }

  /// Grid axes (size 1 or 2); throws UnsupportedSpace for graphs.
  const std::vector<GridAxis>& axes() const;
  /// Per-node coordinate along the given axis (grids only).
  const Vector& coordinate(int axis) const;

  /// Symmetric couplings w_xy, one entry per unordered pair (i < j).
  const std::vector<Edge>& edges() const { return edges_; }

  /// Dense generator matrix (built on first use and cached).
  const Matrix& generator() const;
  /// Dense metric (built on first use and cached). Grids use the product
  /// metric of per-axis arc distances; graphs use shortest paths with edge
  /// length w^{-1/2}.
  const Matrix& distance() const;

  /// Wraps values as a field of this space; rejects wrong sizes and
  /// non-finite entries.
  Field field(Vector values) const;
  Field constant(double value) const;
  /// Throws SpaceMismatch unless the field belongs to this space.
  void check(const Field& f) const;

  Field apply_generator(const Field& f) const;
  Field gamma(const Field& f, const Field& g) const;
  Field gamma2(const Field& f) const;
  Field hessian_form(const Field& h, const Field& f) const;
  /// Squared Hilbert-Schmidt norm of the coordinate Hessian, assembled from
  /// second-difference stencils; grids only.
  Field hessian_hs_norm_sq(const Field& f) const;

  /// integral of f dm
  double integrate(const Field& f) const;
  /// inner product <f,g> in L^2(m)
  double inner(const Field& f, const Field& g) const;

  /// Raw-vector versions of the calculus ops, used by log-domain code that
  /// legitimately carries -inf entries. No finiteness checks.
  Vector apply_generator_raw(const Vector& f) const;
  Vector gamma_raw(const Vector& f, const Vector& g) const;

  std::string to_json() const;
  static MeasureSpace from_json(const std::string& text);
  void save(const std::string& path) const;
  static MeasureSpace load(const std::string& path);

  friend MeasureSpace build_interval_grid(Index n, double length, Boundary boundary);
  friend MeasureSpace build_rectangle_grid(GridAxis x, GridAxis y);
  friend MeasureSpace build_weighted_graph(Index nodes, const std::vector<Edge>& edges,
                                           const Vector& measure, double curvature_k,
                                           double dimension_n);

private:
  MeasureSpace() = default;
  void finalize();

  Kind kind_ = Kind::graph;
  std::uint64_t id_ = 0;
  Vector measure_;
  std::vector<Edge> edges_;
  std::vector<GridAxis> axes_;
  std::vector<Vector> coords_;
  double curvature_k_ = 0.0;
  double dimension_n_ = 1.0;
  double total_mass_ = 0.0;

  // adjacency in CRS-like form for O(E) calculus sweeps
  std::vector<Index> adj_offset_;
  std::vector<Index> adj_node_;
  std::vector<double> adj_weight_;

  mutable Vector log_measure_;
  mutable Matrix generator_;
  mutable Matrix distance_;
};

/// Uniform 1d grid on [0, length]. Neumann: n nodes, spacing length/(n-1),
/// end cells of width spacing/2. Periodic: n nodes on a circle of
/// circumference length, spacing length/n.
MeasureSpace build_interval_grid(Index n, double length, Boundary boundary);

/// Tensor product of two 1d axes; node (ix, iy) has flat index iy*nx + ix.
MeasureSpace build_rectangle_grid(GridAxis x, GridAxis y);

/// Connected weighted graph with explicit node measure. Edge weights must be
/// positive; the nominal (K, N) tag is only used for diagnostic thresholds.
MeasureSpace build_weighted_graph(Index nodes, const std::vector<MeasureSpace::Edge>& edges,
                                  const Vector& measure, double curvature_k = 0.0,
                                  double dimension_n = 1.0);

/// integral of rho log rho dm with 0 log 0 = 0; rho must be nonnegative.
double relative_entropy(const MeasureSpace& space, const Field& rho);

} // namespace entrolab
