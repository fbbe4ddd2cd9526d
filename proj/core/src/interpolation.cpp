#include "entrolab/interpolation.hpp"

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <ostream>

#include "entrolab/detail/parallel.hpp"
#include "entrolab/lattice_kernel.hpp"
#include "entrolab/report.hpp"

namespace entrolab {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

using KernelFactory = std::function<LogHeatKernel(double)>;

InterpolationCurve build_curve(const MeasureSpace& space, const SchrodingerSolution& sol,
                               Index time_steps, int workers, const KernelFactory& kernel_at) {
  if (sol.space_id != space.id()) {
    throw SpaceMismatch("interpolate: solution belongs to a different space");
  }
  if (!sol.converged) {
    throw InvalidArgument("interpolate: solution did not converge");
  }
  if (time_steps < 16) {
    throw InvalidArgument("interpolate: need at least 16 time steps");
  }
  const Index j_steps = time_steps;
  const Index n = space.size();
  const double eps = sol.eps;

  InterpolationCurve curve;
  curve.eps = eps;
  curve.space_id = space.id();
  curve.tgrid = Vector::LinSpaced(j_steps + 1, 0.0, 1.0);
  curve.log_u.assign(j_steps + 1, Vector());
  curve.log_v.assign(j_steps + 1, Vector());
  curve.log_u[0] = sol.log_f;
  curve.log_v[j_steps] = sol.log_g;

  // The kernel at time t_k eps/2 serves both ends of the curve: it carries
  // log f to slot k and log g to slot J-k, so each kernel is built once.
  detail::parallel_for(j_steps, workers, [&](Index idx) {
    const Index k = idx + 1;
    const LogHeatKernel kernel = kernel_at(curve.tgrid[k] * eps / 2.0);
    curve.log_u[k] = kernel.apply(sol.log_f);
    curve.log_v[j_steps - k] = kernel.apply(sol.log_g);
  });

  curve.rho.assign(j_steps + 1, Vector());
  curve.phi.assign(j_steps + 1, Vector());
  curve.psi.assign(j_steps + 1, Vector());
  curve.theta.assign(j_steps + 1, Vector());
  curve.accel.assign(j_steps + 1, Vector());
  curve.accel_defined.assign(j_steps + 1, Eigen::Array<bool, Eigen::Dynamic, 1>());

  for (Index k = 0; k <= j_steps; ++k) {
    const Vector log_rho = curve.log_u[k] + curve.log_v[k];
    curve.rho[k] = log_rho.array().exp().matrix();
    curve.phi[k] = eps * curve.log_u[k];
    curve.psi[k] = eps * curve.log_v[k];
    curve.theta[k] = 0.5 * (curve.psi[k] - curve.phi[k]);

    // accel needs log rho on the full generator stencil; nodes whose stencil
    // touches a zero of rho stay NaN and are masked out.
    Eigen::Array<bool, Eigen::Dynamic, 1> finite(n);
    for (Index x = 0; x < n; ++x) finite[x] = std::isfinite(log_rho[x]);
    Eigen::Array<bool, Eigen::Dynamic, 1> defined = finite;
    for (const auto& e : space.edges()) {
      if (!finite[e.i]) defined[e.j] = false;
      if (!finite[e.j]) defined[e.i] = false;
    }
    Vector sanitized = log_rho;
    for (Index x = 0; x < n; ++x) {
      if (!finite[x]) sanitized[x] = 0.0;
    }
    const Vector lap = space.apply_generator_raw(sanitized);
    const Vector gam = space.gamma_raw(sanitized, sanitized);
    Vector acc = Vector::Constant(n, kNan);
    const double scale = -eps * eps / 8.0;
    for (Index x = 0; x < n; ++x) {
      if (defined[x]) acc[x] = scale * (2.0 * lap[x] + gam[x]);
    }
    curve.accel[k] = std::move(acc);
    curve.accel_defined[k] = std::move(defined);
  }
  return curve;
}

void check_curve(const MeasureSpace& space, const InterpolationCurve& curve) {
  if (curve.space_id != space.id()) {
    throw SpaceMismatch("curve belongs to a different space");
  }
  if (curve.time_steps() < 16) {
    throw InvalidArgument("curve has too few time steps");
  }
}

/// (v L u - u L v)(x), evaluated as rho_x sum_y (w/m_x)(e^{du} - e^{dv}) with
/// du = log u_y - log u_x. Differences of log fields stay bounded where rho
/// is positive, so this cannot overflow even when u itself would.
Vector semigroup_flux(const MeasureSpace& space, const Vector& log_u, const Vector& log_v,
                      const Vector& rho) {
  const Vector& m = space.measure();
  Vector flux = Vector::Zero(space.size());
  for (const auto& e : space.edges()) {
    if (rho[e.i] > 0.0) {
      flux[e.i] += e.weight / m[e.i] *
                   (std::exp(log_u[e.j] - log_u[e.i]) - std::exp(log_v[e.j] - log_v[e.i]));
    }
    if (rho[e.j] > 0.0) {
      flux[e.j] += e.weight / m[e.j] *
                   (std::exp(log_u[e.i] - log_u[e.j]) - std::exp(log_v[e.i] - log_v[e.j]));
    }
  }
  flux.array() *= rho.array();
  return flux;
}

std::vector<Index> stride_ladder(Index j_steps) {
  std::vector<Index> strides;
  for (Index s : {Index(1), Index(2), Index(4), Index(8)}) {
    if (2 * s <= j_steps) strides.push_back(s);
  }
  return strides;
}

} // namespace

ResidualOrderReport fit_order_report(std::vector<double> steps, std::vector<double> residuals) {
  if (steps.size() != residuals.size() || steps.size() < 2) {
    throw InvalidArgument("fit_order_report: need matching step/residual lists, length >= 2");
  }
  ResidualOrderReport report;
  report.steps = std::move(steps);
  report.residuals = std::move(residuals);
  report.finest_residual = report.residuals.front();
  double max_res = 0.0;
  for (double r : report.residuals) max_res = std::max(max_res, r);
  if (max_res <= 1e-12) {
    // already at rounding level, a slope fit would measure noise
    report.order = kInf;
    return report;
  }
  const double count = double(report.steps.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < report.steps.size(); ++i) {
    const double x = std::log(report.steps[i]);
    const double y = std::log(std::max(report.residuals[i], 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  report.order = (count * sxy - sx * sy) / (count * sxx - sx * sx);
  return report;
}

Vector curve_time_derivative(const MeasureSpace& space, const InterpolationCurve& curve,
                             Index k) {
  check_curve(space, curve);
  if (k < 0 || k > curve.time_steps()) {
    throw InvalidArgument("curve_time_derivative: time index out of range");
  }
  return (curve.eps / 2.0) *
         semigroup_flux(space, curve.log_u[std::size_t(k)], curve.log_v[std::size_t(k)],
                        curve.rho[std::size_t(k)]);
}

Vector log_laplace_ratio(const MeasureSpace& space, const Vector& log_u) {
  if (log_u.size() != space.size()) {
    throw SpaceMismatch("log_laplace_ratio: field size does not match the space");
  }
  const Vector& m = space.measure();
  const Index n = space.size();
  Vector out = Vector::Zero(n);
  for (const auto& e : space.edges()) {
    out[e.i] += e.weight / m[e.i] * std::expm1(log_u[e.j] - log_u[e.i]);
    out[e.j] += e.weight / m[e.j] * std::expm1(log_u[e.i] - log_u[e.j]);
  }
  for (Index x = 0; x < n; ++x) {
    if (!std::isfinite(log_u[x])) out[x] = kNan;
  }
  return out;
}

InterpolationCurve interpolate(const MeasureSpace& space, const SchrodingerSolution& sol,
                               Index time_steps, int workers) {
  return build_curve(space, sol, time_steps, workers,
                     [&](double t) { return make_log_heat_kernel(space, t); });
}

InterpolationCurve interpolate(const MeasureSpace& space, const HeatOperator& op,
                               const SchrodingerSolution& sol, Index time_steps, int workers) {
  return build_curve(space, sol, time_steps, workers,
                     [&](double t) { return make_log_heat_kernel(space, op, t); });
}

SemigroupDerivativeReport verify_semigroup_derivative(const MeasureSpace& space,
                                                      const InterpolationCurve& curve) {
  check_curve(space, curve);
  const Index j_steps = curve.time_steps();
  const double dt = 1.0 / double(j_steps);
  const double eps = curve.eps;
  const Vector& m = space.measure();

  std::vector<Vector> rhs(j_steps + 1);
  double flux_integral_max = 0.0;
  for (Index k = 0; k <= j_steps; ++k) {
    const Vector flux = semigroup_flux(space, curve.log_u[k], curve.log_v[k], curve.rho[k]);
    flux_integral_max = std::max(flux_integral_max, std::abs(m.dot(flux)));
    rhs[k] = (eps / 2.0) * flux;
  }

  SemigroupDerivativeReport report;
  report.flux_integral_max = flux_integral_max;
  std::vector<double> steps, residuals;
  for (Index s : stride_ladder(j_steps)) {
    const double h = double(s) * dt;
    double res = 0.0;
    for (Index k = s; k + s <= j_steps; ++k) {
      const Vector fd = (curve.rho[k + s] - curve.rho[k - s]) / (2.0 * h);
      res = std::max(res, (fd - rhs[k]).cwiseAbs().maxCoeff());
    }
    steps.push_back(h);
    residuals.push_back(res);
  }
  report.rho_equation = fit_order_report(std::move(steps), std::move(residuals));
  return report;
}

ContinuityReport verify_continuity_equation(const MeasureSpace& space,
                                            const InterpolationCurve& curve,
                                            const std::vector<Field>& testfields) {
  check_curve(space, curve);
  const Index j_steps = curve.time_steps();
  const double dt = 1.0 / double(j_steps);
  const double eps = curve.eps;
  const Vector& m = space.measure();

  std::vector<Vector> flux(j_steps + 1);
  for (Index k = 0; k <= j_steps; ++k) {
    flux[k] = semigroup_flux(space, curve.log_u[k], curve.log_v[k], curve.rho[k]);
  }

  ContinuityReport report;
  for (const Field& h : testfields) {
    space.check(h);
    Vector integral(j_steps + 1);
    for (Index k = 0; k <= j_steps; ++k) {
      integral[k] = (m.array() * h.values.array() * curve.rho[k].array()).sum();
    }
    double gamma_res = 0.0;
    double exact_res = 0.0;
    for (Index k = 1; k < j_steps; ++k) {
      const double fd = (integral[k + 1] - integral[k - 1]) / (2.0 * dt);
      const Vector gam = space.gamma_raw(h.values, curve.theta[k]);
      const double gamma_rhs = (m.array() * curve.rho[k].array() * gam.array()).sum();
      const double exact_rhs =
          (eps / 2.0) * (m.array() * h.values.array() * flux[k].array()).sum();
      gamma_res = std::max(gamma_res, std::abs(fd - gamma_rhs));
      exact_res = std::max(exact_res, std::abs(fd - exact_rhs));
    }
    report.gamma_form_max_residual.push_back(gamma_res);
    report.exact_form_max_residual.push_back(exact_res);
  }
  return report;
}

HjbReport verify_hjb(const MeasureSpace& space, const InterpolationCurve& curve) {
  check_curve(space, curve);
  const Index j_steps = curve.time_steps();
  const double dt = 1.0 / double(j_steps);
  const double eps = curve.eps;
  const std::vector<Index> strides = stride_ladder(j_steps);
  // every stride is measured over the same interior window; near t = 0 and
  // t = 1 the time derivatives of log u blow up, so a per-stride window would
  // compare residuals taken on different singular neighborhoods
  Index window = 2;
  for (Index s : strides) window = std::max(window, s);

  HjbReport report;
  report.window_delta = double(window) * dt;

  std::vector<Vector> ratio_u(j_steps + 1), ratio_v(j_steps + 1);
  for (Index k = window; k + window <= j_steps; ++k) {
    ratio_u[k] = log_laplace_ratio(space, curve.log_u[k]);
    ratio_v[k] = log_laplace_ratio(space, curve.log_v[k]);
  }

  std::vector<double> steps, residuals;
  for (Index s : strides) {
    const Index lo = window;
    if (lo + lo > j_steps) continue;
    const double h = double(s) * dt;
    double res = 0.0;
    for (Index k = lo; k + lo <= j_steps; ++k) {
      const Vector fd_phi = (curve.phi[k + s] - curve.phi[k - s]) / (2.0 * h);
      const Vector fd_psi = (curve.psi[k + s] - curve.psi[k - s]) / (2.0 * h);
      const double scale = eps * eps / 2.0;
      res = std::max(res, (fd_phi - scale * ratio_u[k]).cwiseAbs().maxCoeff());
      res = std::max(res, (fd_psi + scale * ratio_v[k]).cwiseAbs().maxCoeff());
    }
    steps.push_back(h);
    residuals.push_back(res);
  }
  report.exact_form = fit_order_report(std::move(steps), std::move(residuals));

  double res_phi = 0.0;
  double res_psi = 0.0;
  for (Index k = window; k + window <= j_steps; ++k) {
    const Vector fd_phi = (curve.phi[k + 1] - curve.phi[k - 1]) / (2.0 * dt);
    const Vector fd_psi = (curve.psi[k + 1] - curve.psi[k - 1]) / (2.0 * dt);
    const Vector rhs_phi = 0.5 * space.gamma_raw(curve.phi[k], curve.phi[k]) +
                           (eps / 2.0) * space.apply_generator_raw(curve.phi[k]);
    const Vector rhs_psi = 0.5 * space.gamma_raw(curve.psi[k], curve.psi[k]) +
                           (eps / 2.0) * space.apply_generator_raw(curve.psi[k]);
    res_phi = std::max(res_phi, (fd_phi - rhs_phi).cwiseAbs().maxCoeff());
    res_psi = std::max(res_psi, (fd_psi + rhs_psi).cwiseAbs().maxCoeff());
  }
  report.gamma_form_max_residual_phi = res_phi;
  report.gamma_form_max_residual_psi = res_psi;
  return report;
}

void write_curve_csv(const MeasureSpace& space, const InterpolationCurve& curve,
                     std::ostream& out) {
  check_curve(space, curve);
  const Index j_steps = curve.time_steps();
  const Index n = space.size();
  const bool use_coordinate = space.kind() == MeasureSpace::Kind::grid1d;
  out << "t,x,rho,phi,psi,theta,accel\n";
  for (Index k = 0; k <= j_steps; ++k) {
    const std::string t = format_double(curve.tgrid[k]);
    for (Index x = 0; x < n; ++x) {
      const double coord = use_coordinate ? space.coordinate(0)[x] : double(x);
      out << t << ',' << format_double(coord) << ',' << format_double(curve.rho[k][x]) << ','
          << format_double(curve.phi[k][x]) << ',' << format_double(curve.psi[k][x]) << ','
          << format_double(curve.theta[k][x]) << ',' << format_double(curve.accel[k][x])
          << '\n';
    }
  }
}

} // namespace entrolab
