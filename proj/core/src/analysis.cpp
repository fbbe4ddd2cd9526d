#include "entrolab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "entrolab/errors.hpp"
#include "entrolab/lattice_kernel.hpp"

namespace entrolab {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void check_curve(const MeasureSpace& space, const InterpolationCurve& curve, const char* what) {
  if (curve.space_id != space.id()) {
    throw SpaceMismatch(std::string(what) + ": curve belongs to a different space");
  }
  if (curve.time_steps() < 16) {
    throw InvalidArgument(std::string(what) + ": curve has fewer than 16 time steps");
  }
}

// Window integrals interpolate profiles that are undefined at t = 0 and
// t = 1, so the window must start at or after the first interior sample.
void check_window(double delta, Index j_steps, const char* what) {
  if (!(delta > 0.0) || !(delta < 0.5)) {
    throw InvalidArgument(std::string(what) + ": window delta must lie in (0, 1/2)");
  }
  if (delta * static_cast<double>(j_steps) < 1.0) {
    throw InvalidArgument(std::string(what) +
                          ": window delta must cover at least one time step (delta >= 1/J)");
  }
}

std::vector<Index> stride_ladder(Index j_steps) {
  std::vector<Index> out;
  for (Index s : {Index{1}, Index{2}, Index{4}, Index{8}}) {
    if (2 * s <= j_steps) out.push_back(s);
  }
  return out;
}

Vector log_density(const InterpolationCurve& curve, Index k) {
  return curve.log_u[k] + curve.log_v[k];
}

// Gamma2(f) = (1/2) L Gamma(f,f) - Gamma(f, Lf), composed from the raw
// primitives so the same rounding path serves every recombination of the
// arguments (the parallelogram identity then holds to rounding).
Vector gamma2_of(const MeasureSpace& space, const Vector& f) {
  Vector g = space.gamma_raw(f, f);
  Vector lf = space.apply_generator_raw(f);
  return 0.5 * space.apply_generator_raw(g) - space.gamma_raw(f, lf);
}

double density_weighted(const MeasureSpace& space, const Vector& rho, const Vector& integrand) {
  return (space.measure().array() * rho.array() * integrand.array()).sum();
}

// Integral over [a, b] of the piecewise-linear interpolant through the
// interior samples (t_k, prof[k]), k = 1..J-1; [a, b] must sit inside
// [t_1, t_{J-1}], which check_window guarantees.
double integrate_window(const Vector& tgrid, const Vector& prof, double a, double b) {
  const Index j = tgrid.size() - 1;
  double total = 0.0;
  for (Index k = 1; k + 1 <= j - 1; ++k) {
    const double t0 = tgrid[k];
    const double t1 = tgrid[k + 1];
    const double lo = std::max(t0, a);
    const double hi = std::min(t1, b);
    if (hi <= lo) continue;
    const double slope = (prof[k + 1] - prof[k]) / (t1 - t0);
    const double vlo = prof[k] + slope * (lo - t0);
    const double vhi = prof[k] + slope * (hi - t0);
    total += 0.5 * (vlo + vhi) * (hi - lo);
  }
  return total;
}

// E1 integrand profile: int (Gamma2(theta) + (eps^2/4) Gamma2(log rho)) rho dm.
Vector e1_profile(const MeasureSpace& space, const InterpolationCurve& curve) {
  const Index j = curve.time_steps();
  const double quarter_eps_sq = 0.25 * curve.eps * curve.eps;
  Vector e1 = Vector::Constant(j + 1, kNan);
  for (Index k = 1; k < j; ++k) {
    Vector lr = log_density(curve, k);
    Vector integrand = gamma2_of(space, curve.theta[k]) + quarter_eps_sq * gamma2_of(space, lr);
    e1[k] = density_weighted(space, curve.rho[k], integrand);
  }
  return e1;
}

// int Gamma(h, accel) rho dm as an edge sum; edges touching a node where the
// acceleration is undefined carry no flux.
double masked_acceleration_integral(const MeasureSpace& space, const InterpolationCurve& curve,
                                    const Field& h, Index k) {
  const Vector& a = curve.accel[k];
  const Vector& rho = curve.rho[k];
  const auto& defined = curve.accel_defined[k];
  double total = 0.0;
  for (const auto& e : space.edges()) {
    if (!defined[e.i] || !defined[e.j]) continue;
    total += 0.5 * e.weight * (h[e.j] - h[e.i]) * (a[e.j] - a[e.i]) * (rho[e.i] + rho[e.j]);
  }
  return total;
}

}  // namespace

Vector entropy_profile(const MeasureSpace& space, const InterpolationCurve& curve) {
  check_curve(space, curve, "entropy_profile");
  const Index j = curve.time_steps();
  const Vector& m = space.measure();
  Vector h(j + 1);
  for (Index k = 0; k <= j; ++k) {
    Vector lr = log_density(curve, k);
    double acc = 0.0;
    for (Index x = 0; x < lr.size(); ++x) {
      // log rho = -inf marks rho = 0, where the integrand vanishes
      if (std::isfinite(lr[x])) acc += m[x] * std::exp(lr[x]) * lr[x];
    }
    h[k] = acc;
  }
  return h;
}

FirstDerivativeReport entropy_first_derivative(const MeasureSpace& space,
                                               const InterpolationCurve& curve) {
  check_curve(space, curve, "entropy_first_derivative");
  const Index j = curve.time_steps();
  const double dt = 1.0 / static_cast<double>(j);
  const Vector& m = space.measure();

  FirstDerivativeReport rep;
  rep.gamma_form = Vector::Constant(j + 1, kNan);
  rep.quadratic_form = Vector::Constant(j + 1, kNan);
  rep.flux_form = Vector::Constant(j + 1, kNan);

  for (Index k = 1; k < j; ++k) {
    rep.gamma_form[k] = m.dot(space.gamma_raw(curve.rho[k], curve.theta[k]));

    Vector gq = space.gamma_raw(curve.psi[k], curve.psi[k]) -
                space.gamma_raw(curve.phi[k], curve.phi[k]);
    rep.quadratic_form[k] = (0.5 / curve.eps) * density_weighted(space, curve.rho[k], gq);

    Vector rdot = curve_time_derivative(space, curve, k);
    Vector lr = log_density(curve, k);
    double acc = 0.0;
    for (Index x = 0; x < rdot.size(); ++x) {
      // rdot is exactly zero where rho vanishes; skip so that an underflowed
      // log density cannot turn the vanishing term into 0 * inf
      if (rdot[x] != 0.0) acc += m[x] * rdot[x] * lr[x];
    }
    rep.flux_form[k] = acc;
  }

  Vector h = entropy_profile(space, curve);
  for (Index k = 1; k < j; ++k) {
    rep.form_gap_max =
        std::max(rep.form_gap_max, std::abs(rep.gamma_form[k] - rep.quadratic_form[k]));
    const double fd = (h[k + 1] - h[k - 1]) / (2.0 * dt);
    rep.fd_vs_gamma_max = std::max(rep.fd_vs_gamma_max, std::abs(fd - rep.gamma_form[k]));
  }

  // all strides share the widest window so the fit compares errors on a
  // common time set; the endpoint neighborhoods have larger high-order time
  // derivatives and would otherwise pollute the small strides only
  const std::vector<Index> ladder = stride_ladder(j);
  const Index shared = ladder.empty() ? Index(1) : ladder.back();
  std::vector<double> steps, residuals;
  for (Index s : ladder) {
    double res = 0.0;
    for (Index k = shared; k + shared <= j; ++k) {
      const double fd = (h[k + s] - h[k - s]) / (2.0 * static_cast<double>(s) * dt);
      res = std::max(res, std::abs(fd - rep.flux_form[k]));
    }
    steps.push_back(static_cast<double>(s) * dt);
    residuals.push_back(res);
  }
  rep.fd_vs_flux = fit_order_report(std::move(steps), std::move(residuals));
  return rep;
}

SecondDerivativeReport entropy_second_derivative(const MeasureSpace& space,
                                                 const InterpolationCurve& curve) {
  check_curve(space, curve, "entropy_second_derivative");
  const Index j = curve.time_steps();
  const double dt = 1.0 / static_cast<double>(j);

  SecondDerivativeReport rep;
  rep.e1 = e1_profile(space, curve);
  rep.e2 = Vector::Constant(j + 1, kNan);
  for (Index k = 1; k < j; ++k) {
    Vector integrand = gamma2_of(space, curve.phi[k]) + gamma2_of(space, curve.psi[k]);
    rep.e2[k] = 0.5 * density_weighted(space, curve.rho[k], integrand);
    rep.parallelogram_gap_max =
        std::max(rep.parallelogram_gap_max, std::abs(rep.e1[k] - rep.e2[k]));
  }

  Vector h = entropy_profile(space, curve);
  {
    // stride-1 residual over the whole interior; the headline number whose
    // decay is tracked under joint space-time refinement
    double res = 0.0;
    for (Index k = 1; k < j; ++k) {
      const double fd = (h[k + 1] - 2.0 * h[k] + h[k - 1]) / (dt * dt);
      res = std::max(res, std::abs(fd - rep.e1[k]));
    }
    rep.fd_vs_e1_max = res;
  }
  // shared window across strides, as in the first-derivative fit; note that
  // at a fixed grid the fit usually sits on the O(h^2) chain-rule floor of
  // the closed form, so the order is informative only under refinement in n
  const std::vector<Index> ladder = stride_ladder(j);
  const Index shared = ladder.empty() ? Index(1) : ladder.back();
  std::vector<double> steps, residuals;
  for (Index s : ladder) {
    double res = 0.0;
    for (Index k = shared; k + shared <= j; ++k) {
      const double denom = static_cast<double>(s) * dt;
      const double fd = (h[k + s] - 2.0 * h[k] + h[k - s]) / (denom * denom);
      res = std::max(res, std::abs(fd - rep.e1[k]));
    }
    steps.push_back(static_cast<double>(s) * dt);
    residuals.push_back(res);
  }
  rep.fd_vs_e1 = fit_order_report(std::move(steps), std::move(residuals));
  return rep;
}

ConvexityReport convexity_and_window_bound(const MeasureSpace& space,
                                           const InterpolationCurve& curve, double delta) {
  check_curve(space, curve, "convexity_and_window_bound");
  if (space.curvature_k() != 0.0) {
    throw InvalidArgument(
        "convexity_and_window_bound: the flat-space entropy bounds need curvature tag K = 0, "
        "space reports K = " +
        std::to_string(space.curvature_k()));
  }
  const Index j = curve.time_steps();
  check_window(delta, j, "convexity_and_window_bound");
  const double dt = 1.0 / static_cast<double>(j);

  ConvexityReport rep;
  rep.log_mass = std::log(space.total_mass());
  Vector h = entropy_profile(space, curve);
  h.array() += rep.log_mass;  // entropy relative to the normalized measure

  rep.min_second_difference = std::numeric_limits<double>::infinity();
  for (Index k = 1; k < j; ++k) {
    const double d2 = (h[k + 1] - 2.0 * h[k] + h[k - 1]) / (dt * dt);
    rep.min_second_difference = std::min(rep.min_second_difference, d2);
  }
  // allowed slack: relative term for the chain-rule gap, absolute floor for
  // the rounding of nearly equal entropies amplified by 1/dt^2
  rep.convexity_threshold = 1e-6 * h.cwiseAbs().maxCoeff() + 1e-13 / (dt * dt);
  rep.convex = rep.min_second_difference >= -rep.convexity_threshold;

  Vector e1 = e1_profile(space, curve);
  rep.window_integral = integrate_window(curve.tgrid, e1, delta, 1.0 - delta);
  rep.window_bound = h[j] / (1.0 - delta) + h[0] / delta;
  rep.margin = rep.window_bound - rep.window_integral;
  rep.bounded = rep.margin >= 0.0;
  return rep;
}

SecondOrderIntegrals second_order_integrals(const MeasureSpace& space,
                                            const InterpolationCurve& curve, double delta) {
  check_curve(space, curve, "second_order_integrals");
  if (space.kind() == MeasureSpace::Kind::graph) {
    throw UnsupportedSpace("second_order_integrals: Hessian integrals need a grid space");
  }
  const Index j = curve.time_steps();
  check_window(delta, j, "second_order_integrals");

  const double eps_sq = curve.eps * curve.eps;
  Vector hess_prof = Vector::Constant(j + 1, kNan);
  Vector lap_prof = Vector::Constant(j + 1, kNan);
  for (Index k = 1; k < j; ++k) {
    Vector lr = log_density(curve, k);
    Field theta = space.field(curve.theta[k]);
    Field logrho = space.field(lr);
    Vector hess = space.hessian_hs_norm_sq(theta).values +
                  eps_sq * space.hessian_hs_norm_sq(logrho).values;
    Vector lt = space.apply_generator_raw(curve.theta[k]);
    Vector ll = space.apply_generator_raw(lr);
    Vector lap = lt.array().square() + eps_sq * ll.array().square();
    hess_prof[k] = density_weighted(space, curve.rho[k], hess);
    lap_prof[k] = density_weighted(space, curve.rho[k], lap);
  }

  SecondOrderIntegrals out;
  out.i_hess = integrate_window(curve.tgrid, hess_prof, delta, 1.0 - delta);
  out.i_lap = integrate_window(curve.tgrid, lap_prof, delta, 1.0 - delta);
  return out;
}

double acceleration_flux(const MeasureSpace& space, const InterpolationCurve& curve,
                         const Field& h, double delta) {
  check_curve(space, curve, "acceleration_flux");
  space.check(h);
  const Index j = curve.time_steps();
  check_window(delta, j, "acceleration_flux");

  Vector prof = Vector::Constant(j + 1, kNan);
  for (Index k = 1; k < j; ++k) {
    prof[k] = masked_acceleration_integral(space, curve, h, k);
  }
  return integrate_window(curve.tgrid, prof, delta, 1.0 - delta);
}

FixedEpsSecondDerivativeReport fixed_eps_second_derivative_check(const MeasureSpace& space,
                                                                 const InterpolationCurve& curve,
                                                                 const Field& h) {
  check_curve(space, curve, "fixed_eps_second_derivative_check");
  space.check(h);
  const Index j = curve.time_steps();
  const double dt = 1.0 / static_cast<double>(j);
  const Vector& m = space.measure();

  Vector observable(j + 1);
  for (Index k = 0; k <= j; ++k) {
    observable[k] = (m.array() * h.values.array() * curve.rho[k].array()).sum();
  }

  Vector formula = Vector::Constant(j + 1, kNan);
  for (Index k = 1; k < j; ++k) {
    Field theta = space.field(curve.theta[k]);
    Vector hess = space.hessian_form(h, theta).values;
    formula[k] = density_weighted(space, curve.rho[k], hess) +
                 masked_acceleration_integral(space, curve, h, k);
  }

  FixedEpsSecondDerivativeReport rep;
  // shared window across strides; at a fixed grid the fit tends to sit on
  // the O(h^2) chain-rule floor of the formula, so the per-resolution order
  // is informative only under joint refinement of (n, time steps) -- the
  // per-level scalar to track is finest_residual
  const std::vector<Index> ladder = stride_ladder(j);
  const Index shared = ladder.empty() ? Index(1) : ladder.back();
  std::vector<double> steps, residuals;
  for (Index s : ladder) {
    double res = 0.0;
    for (Index k = shared; k + shared <= j; ++k) {
      const double denom = static_cast<double>(s) * dt;
      const double fd = (observable[k + s] - 2.0 * observable[k] + observable[k - s]) /
                        (denom * denom);
      res = std::max(res, std::abs(fd - formula[k]));
    }
    steps.push_back(static_cast<double>(s) * dt);
    residuals.push_back(res);
  }
  rep.fd_vs_formula = fit_order_report(std::move(steps), std::move(residuals));
  for (Index k = 1; k < j; ++k) {
    rep.formula_scale = std::max(rep.formula_scale, std::abs(formula[k]));
  }
  rep.max_relative_deviation =
      rep.fd_vs_formula.finest_residual / std::max(rep.formula_scale, 1e-300);
  return rep;
}

GeodesicFormulaReport geodesic_formula_check(const MeasureSpace& space,
                                             const ReferenceGeodesic& ref, const Field& h,
                                             double delta) {
  if (ref.space_id != space.id()) {
    throw SpaceMismatch("geodesic_formula_check: geodesic belongs to a different space");
  }
  space.check(h);
  if (!(delta > 0.0) || !(delta < 0.5)) {
    throw InvalidArgument("geodesic_formula_check: window delta must lie in (0, 1/2)");
  }
  const Index j = ref.tgrid.size() - 1;
  if (j < 8) {
    throw InvalidArgument("geodesic_formula_check: time grid needs at least 8 steps");
  }
  const double dt = (ref.tgrid[j] - ref.tgrid[0]) / static_cast<double>(j);
  for (Index k = 0; k <= j; ++k) {
    if (std::abs(ref.tgrid[k] - (ref.tgrid[0] + static_cast<double>(k) * dt)) > 1e-9) {
      throw InvalidArgument("geodesic_formula_check: time grid must be uniform");
    }
  }
  const Vector& m = space.measure();

  Vector observable(j + 1);
  for (Index k = 0; k <= j; ++k) {
    observable[k] = ref.integrate(space, h, ref.tgrid[k]);
  }

  // centers inside the window; differences may reach outside it
  std::vector<Index> centers;
  Vector formula = Vector::Constant(j + 1, kNan);
  for (Index k = 0; k <= j; ++k) {
    const double t = ref.tgrid[k];
    if (t < delta - 1e-12 || t > 1.0 - delta + 1e-12) continue;
    centers.push_back(k);
    Field phi = space.field(ref.phi[k]);
    Vector hess = space.hessian_form(h, phi).values;
    formula[k] = (m.array() * ref.mu[k].array() * hess.array()).sum();
  }
  if (centers.empty()) {
    throw InvalidArgument("geodesic_formula_check: window contains no time samples");
  }

  GeodesicFormulaReport rep;
  std::vector<double> steps, residuals;
  for (Index s : stride_ladder(j)) {
    double res = -1.0;
    for (Index k : centers) {
      if (k < s || k + s > j) continue;
      const double denom = static_cast<double>(s) * dt;
      const double fd = (observable[k + s] - 2.0 * observable[k] + observable[k - s]) /
                        (denom * denom);
      res = std::max(res, std::abs(fd - formula[k]));
    }
    if (res < 0.0) continue;
    steps.push_back(static_cast<double>(s) * dt);
    residuals.push_back(res);
  }
  rep.fd_vs_formula = fit_order_report(std::move(steps), std::move(residuals));
  for (Index k : centers) {
    rep.formula_scale = std::max(rep.formula_scale, std::abs(formula[k]));
  }
  rep.max_relative_deviation =
      rep.fd_vs_formula.finest_residual / std::max(rep.formula_scale, 1e-300);
  return rep;
}

EpsSweepReport convergence_report(const MeasureSpace& space,
                                  const std::vector<InterpolationCurve>& curves,
                                  const ReferenceGeodesic& ref, double delta,
                                  const std::vector<Field>& testfields) {
  if (curves.empty()) {
    throw InvalidArgument("convergence_report: no curves");
  }
  if (ref.space_id != space.id()) {
    throw SpaceMismatch("convergence_report: geodesic belongs to a different space");
  }
  const Index j = curves.front().time_steps();
  for (std::size_t i = 0; i < curves.size(); ++i) {
    check_curve(space, curves[i], "convergence_report");
    if (curves[i].time_steps() != j) {
      throw InvalidArgument("convergence_report: curves must share one time grid");
    }
    if (i > 0 && !(curves[i].eps < curves[i - 1].eps)) {
      throw InvalidArgument("convergence_report: eps must be strictly descending");
    }
  }
  check_window(delta, j, "convergence_report");
  for (const Field& h : testfields) space.check(h);

  const Vector& m = space.measure();
  const Index k_mid = j / 2;
  const double t_mid = curves.front().tgrid[k_mid];
  Vector oracle_phi = ref.potential_at(space, t_mid);
  Vector mu_mid = ref.density_at(space, t_mid);

  EpsSweepReport rep;
  rep.delta = delta;
  for (const InterpolationCurve& curve : curves) {
    rep.eps_list.push_back(curve.eps);
    EpsSummary s;
    s.eps = curve.eps;
    s.nodes = space.size();
    s.time_steps = j;

    for (Index k = 0; k <= j; ++k) {
      s.sup_density = std::max(s.sup_density, curve.rho[k].maxCoeff());
    }

    const Matrix& dist = space.distance();
    for (Index k = 0; k <= j; ++k) {
      if (curve.tgrid[k] < delta - 1e-12) continue;
      const Vector& phi = curve.phi[k];
      for (const auto& e : space.edges()) {
        s.lipschitz_phi =
            std::max(s.lipschitz_phi, std::abs(phi[e.i] - phi[e.j]) / dist(e.i, e.j));
      }
    }

    for (Index k = 0; k <= j; ++k) {
      s.w2_deviation =
          std::max(s.w2_deviation, ref.w2_to(space, space.field(curve.rho[k]), curve.tgrid[k]));
    }

    // phi^eps converges to minus the velocity potential; compare the
    // time-scaled potentials modulo an additive constant, in L2(mu_t)
    Vector dev = -t_mid * (curve.phi[k_mid] + oracle_phi);
    dev.array() -= m.dot(dev) / space.total_mass();
    s.potential_deviation = std::sqrt((m.array() * mu_mid.array() * dev.array().square()).sum());

    s.entropy = entropy_profile(space, curve);
    SecondOrderIntegrals so = second_order_integrals(space, curve, delta);
    s.i_hess = so.i_hess;
    s.i_lap = so.i_lap;
    for (const Field& h : testfields) {
      s.acceleration_flux.push_back(acceleration_flux(space, curve, h, delta));
    }
    rep.summaries.push_back(std::move(s));
  }
  return rep;
}

HeatEstimateReport heat_estimate_diagnostics(const MeasureSpace& space, const Field& f,
                                             const std::vector<double>& tlist, double tol) {
  if (space.kind() == MeasureSpace::Kind::graph) {
    throw UnsupportedSpace("heat_estimate_diagnostics: exact kernels need a grid space");
  }
  if (space.curvature_k() != 0.0) {
    throw InvalidArgument("heat_estimate_diagnostics: the estimates assume curvature tag K = 0");
  }
  space.check(f);
  if ((f.values.array() < 0.0).any()) {
    throw InvalidArgument("heat_estimate_diagnostics: data must be nonnegative");
  }
  const double sup_f = f.values.maxCoeff();
  if (!(sup_f > 0.0)) {
    throw InvalidArgument("heat_estimate_diagnostics: data must not vanish identically");
  }
  if (tlist.empty()) {
    throw InvalidArgument("heat_estimate_diagnostics: no sample times");
  }

  Vector log_f = f.values.array().log();
  const double log_sup = std::log(sup_f);
  const double n_dim = space.dimension_n();

  HeatEstimateReport rep;
  rep.tol = tol;
  for (double t : tlist) {
    if (!(t > 0.0)) {
      throw InvalidArgument("heat_estimate_diagnostics: sample times must be positive");
    }
    LogHeatKernel kernel = make_log_heat_kernel(space, t);
    Vector log_u = kernel.apply(log_f);
    Vector grad_sq = space.gamma_raw(log_u, log_u);
    Vector ratio = log_laplace_ratio(space, log_u);

    HeatEstimateSample sample;
    sample.t = t;
    sample.max_liyau_margin = -std::numeric_limits<double>::infinity();
    sample.max_hamilton_margin = -std::numeric_limits<double>::infinity();
    for (Index x = 0; x < log_u.size(); ++x) {
      // relative to the bound N/(2t): point data saturates the bound exactly
      // (equality for the Gaussian kernel), so the honest slack is a fraction
      // of the bound, not an absolute amount on a t-dependent scale
      const double bound = n_dim / (2.0 * t);
      const double liyau = (grad_sq[x] - ratio[x] - bound) / bound;
      sample.max_liyau_margin = std::max(sample.max_liyau_margin, liyau);
      if (liyau > tol) ++sample.liyau_violations;

      const double hamilton = t * grad_sq[x] - (1.0 + tol) * (log_sup - log_u[x]);
      sample.max_hamilton_margin = std::max(sample.max_hamilton_margin, hamilton);
      if (hamilton > tol) ++sample.hamilton_violations;
    }
    rep.total_violations += sample.liyau_violations + sample.hamilton_violations;
    rep.samples.push_back(sample);
  }
  return rep;
}

}  // namespace entrolab
