#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "entrolab/lattice_kernel.hpp"

namespace entrolab {

struct SinkhornOptions {
  /// Target for the weighted max-norm marginal residual
  /// max_x m_x |f h(g) - rho0| (and symmetrically).
  double tolerance = 1e-9;
  Index max_iterations = 50000;
  bool record_history = true;
  /// Constant initial guess g = c (log_c = log c); kept at 0 for the
  /// bit-exact swap symmetry of the default run.
  double initial_log_g = 0.0;
  /// Warm start (log f, log g); overrides initial_log_g and disables the
  /// internal eps cascade.
  std::optional<std::pair<Vector, Vector>> warm_start;
  /// Cold solves below this eps first run a few cheap coarse-eps stages and
  /// hand the result down as a warm start. Set to 0 to disable.
  double cascade_below_eps = 0.1;
};

/// Solution (f, g) of the system rho0 = f h_{eps/2} g, rho1 = g h_{eps/2} f,
/// stored in log form: exp(log_f) can exceed double range for small eps.
/// Zero-marginal nodes carry log_f = -inf exactly.
struct SchrodingerSolution {
  Vector log_f;
  Vector log_g;
  double eps = 0.0;
  Index iterations = 0;
  double marginal_residual = 0.0;
  /// Common value of int f dm = int g dm (the gauge normalization).
  double gauge = 0.0;
  bool converged = false;
  std::vector<double> residual_history;
  std::uint64_t space_id = 0;
};

/// Symmetric log-domain Sinkhorn for the Schrödinger system. Both fields are
/// refreshed from the previous sweep, followed by two exact shifts: a regauge
/// making int f dm = int g dm and a plan-mass shift removing the symmetric
/// constant mode. Every sweep operation commutes with swapping the marginals,
/// so solving (rho1, rho0) returns the swapped fields bit for bit.
/// Non-convergence at max_iterations is reported via converged=false and the
/// residual history, not an exception.
SchrodingerSolution solve_schrodinger_system(const MeasureSpace& space, const Field& rho0,
                                             const Field& rho1, double eps,
                                             const SinkhornOptions& opts = {});

/// Same, with a spectral operator for graph spaces (ignored on grids).
SchrodingerSolution solve_schrodinger_system(const MeasureSpace& space, const HeatOperator& op,
                                             const Field& rho0, const Field& rho1, double eps,
                                             const SinkhornOptions& opts = {});

/// Dense entropic plan gamma(x,y) = f(x) r_{eps/2}(x,y) g(y) m_x m_y.
/// half_kernel must be the log kernel at time eps/2.
Matrix entropic_plan(const MeasureSpace& space, const LogHeatKernel& half_kernel,
                     const SchrodingerSolution& sol);

/// H(gamma | R_eps) = sum gamma log(gamma / (r_{eps/2} m x m)), 0 log 0 = 0.
double plan_relative_entropy(const MeasureSpace& space, const LogHeatKernel& half_kernel,
                             const Matrix& plan);

} // namespace entrolab
