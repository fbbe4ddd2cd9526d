#pragma once

#include "entrolab/heat.hpp"
#include "entrolab/space.hpp"

namespace entrolab {

/// log I_n(z) for integer order n >= 0, z >= 0, accurate also where I_n(z)
/// itself would overflow or underflow. Uses the scaled Bessel function where
/// its value is representable and uniform large-order asymptotics beyond.
double log_bessel_i(Index order, double z);

/// log of the continuous-time lattice heat kernel e^{-2 tau} I_k(2 tau):
/// the transition weight across k lattice steps at diffusion time tau.
double log_lattice_green(Index hops, double tau);

/// Heat kernel of one space held in log form, log r_t(x,y), together with
/// log-sum-exp application. This is the backend for small-eps transport work:
/// far-field kernel values like e^{-500} are exact in the log domain, whereas
/// the spectral kernel returns them as +-1e-15 cancellation noise.
///
/// Grid spaces get an exact construction: the kernel of the 1d stencil
/// Laplacian is the infinite-lattice kernel summed over boundary images
/// (periodic translates, or reflections for Neumann ends, whose half cells
/// make the image sum exact), and 2d tensor grids add per-axis logs. Graphs
/// fall back to the spectral kernel with entries floored at a tiny positive
/// multiple of the largest entry before taking logs.
class LogHeatKernel {
public:
  LogHeatKernel(Matrix log_r, Vector log_m, double t, std::uint64_t space_id)
      : log_r_(std::move(log_r)), log_m_(std::move(log_m)), t_(t), space_id_(space_id) {}

  const Matrix& log_kernel() const { return log_r_; }
  double time() const { return t_; }
  std::uint64_t space_id() const { return space_id_; }
  Index size() const { return log_m_.size(); }

  /// out_x = log sum_y exp(log_r(x,y) + log m_y + log_field_y).
  /// -inf entries are legitimate (exact zeros) and propagate correctly.
  Vector apply(const Vector& log_field) const;

private:
  Matrix log_r_;
  Vector log_m_;
  double t_;
  std::uint64_t space_id_;
};

/// Exact log kernel for grid spaces; throws UnsupportedSpace for graphs.
LogHeatKernel make_log_heat_kernel(const MeasureSpace& space, double t);

/// Log kernel for any space: grids use the lattice construction, graphs the
/// spectral kernel of op.
LogHeatKernel make_log_heat_kernel(const MeasureSpace& space, const HeatOperator& op, double t);

} // namespace entrolab
