#pragma once

#include <string>
#include <vector>

#include "entrolab/space.hpp"

namespace entrolab {

/// Exact displacement interpolation between two densities on a 1d Neumann
/// grid, held as the monotone (quantile) coupling in closed form.
///
/// Each density is read as a piecewise-constant function on the node cells.
/// `segments` partitions mass space [0,1] so finely that both inverse CDFs
/// are linear on every piece; all derived quantities (densities, potentials,
/// Wasserstein distances, integrals of piecewise-linear observables) are then
/// exact integrals, smooth in t, with no re-binning noise.
///
/// This module is the ground-truth side of the convergence tests: it reads
/// only marginals and the space, never the diffusion-based interpolation.
struct ReferenceGeodesic {
  struct Segment {
    double qa = 0.0, qb = 0.0; // mass interval
    double a0 = 0.0, b0 = 0.0; // positions at qa, qb under the left marginal
    double a1 = 0.0, b1 = 0.0; // positions under the right marginal
  };

  Vector tgrid;
  std::vector<Vector> mu;  // node densities w.r.t. m at each tgrid entry
  std::vector<Vector> phi; // velocity potentials, m-weighted zero mean
  Vector monotone_map;     // per-node target coordinate T(x)
  double w2 = 0.0;
  std::vector<Segment> segments;
  /// max over tgrid of |d/dt int x dmu_t - int Gamma(x, phi_t) dmu_t|; the
  /// left side is exact, so this pins the sign and the spatial accuracy of
  /// the reconstructed potentials.
  double velocity_identity_residual = 0.0;
  std::uint64_t space_id = 0;

  /// mu_t re-binned to node cells (mass-conservative overlap projection).
  Vector density_at(const MeasureSpace& space, double t) const;
  /// Velocity potential at any t: node-wise cumulative integral of the
  /// displacement field, m-weighted zero mean.
  Vector potential_at(const MeasureSpace& space, double t) const;
  /// Exact int h dmu_t for h read as piecewise linear between nodes.
  double integrate(const MeasureSpace& space, const Field& h, double t) const;
  /// Exact W2 between mu_t and the grid density rho (as cell densities).
  double w2_to(const MeasureSpace& space, const Field& rho, double t) const;
};

/// Builds the geodesic; quantile_cells = 0 picks 16 * n cells (the stored
/// partition additionally splits at every CDF breakpoint of either marginal,
/// which makes the representation exact rather than sampled).
/// Periodic grids are rejected: the quantile method needs an ordered line.
ReferenceGeodesic quantile_geodesic_1d(const MeasureSpace& space, const Field& rho0,
                                       const Field& rho1, const Vector& tgrid,
                                       Index quantile_cells = 0);

/// W2 between two densities on a 1d Neumann grid, by the same exact quantile
/// integral (symmetric in its arguments to the last bit).
double w2_distance_1d(const MeasureSpace& space, const Field& rho0, const Field& rho1);

/// Exact solution of a small discrete transport LP.
struct ExactPlan {
  double cost = 0.0; // optimal objective; equals W2^2 when cost = d^2
  Matrix plan;
  Vector dual_u, dual_v;
  double duality_gap = 0.0; // primal minus dual objective at the solution
  std::string method;       // "enumeration" or "simplex"
};

/// Solves min <plan, cost> over couplings of (mu, nu). Tiny instances are
/// done by exhaustive basis enumeration (every spanning tree of the bipartite
/// support, keeping a dual-feasible optimal one); larger ones up to 30x30 by
/// the transportation simplex with Bland's rule. Throws InvalidArgument when
/// the instance is too large.
ExactPlan exact_ot_small(const Vector& mu, const Vector& nu, const Matrix& cost);

/// Transport-cost gaps of a family of feasible plans against the exact
/// optimum: gap_k = <plan_k, cost> - exact_cost.
struct CrossValidation {
  std::vector<double> gaps;
  bool nonnegative = false; // all gaps >= -1e-10
  bool decreasing = false;  // nonincreasing along the list
};
CrossValidation cross_validate(const std::vector<Matrix>& plans, const Matrix& cost,
                               double exact_cost);

} // namespace entrolab
