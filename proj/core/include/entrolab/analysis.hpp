#pragma once

#include <vector>

#include "entrolab/interpolation.hpp"
#include "entrolab/ot_reference.hpp"

namespace entrolab {

/// Relative entropy along a curve: H(t) = int rho_t log rho_t dm with
/// 0 log 0 = 0, evaluated from the log-domain fields so that underflowing
/// densities still contribute their exact (vanishing) terms.
Vector entropy_profile(const MeasureSpace& space, const InterpolationCurve& curve);

/// dH/dt closed forms at interior times (NaN at the endpoints):
///   gamma_form      int Gamma(rho, theta) dm
///   quadratic_form  (1/2 eps) int (Gamma(psi,psi) - Gamma(phi,phi)) rho dm
///   flux_form       int (d rho/dt) log rho dm, the exact time derivative
/// The first two carry a spatial chain-rule gap O(h^2); the flux form is the
/// derivative of H(t) exactly, so its FD comparison shows pure Delta-t order.
struct FirstDerivativeReport {
  Vector gamma_form, quadratic_form, flux_form;
  double form_gap_max = 0.0;       // max |gamma_form - quadratic_form|
  double fd_vs_gamma_max = 0.0;    // stride-1 FD vs gamma_form, sup
  ResidualOrderReport fd_vs_flux;  // stride ladder vs flux_form
};
FirstDerivativeReport entropy_first_derivative(const MeasureSpace& space,
                                               const InterpolationCurve& curve);

/// d^2H/dt^2 closed forms at interior times (NaN at the endpoints):
///   E1 = int (Gamma2(theta) + (eps^2/4) Gamma2(log rho)) rho dm
///   E2 = (1/2) int (Gamma2(phi) + Gamma2(psi)) rho dm
/// E1 = E2 is exact (parallelogram identity of the quadratic form Gamma2
/// under phi,psi = sum/difference recombination), independent of resolution.
struct SecondDerivativeReport {
  Vector e1, e2;
  double parallelogram_gap_max = 0.0;
  double fd_vs_e1_max = 0.0;      // stride-1 second differences vs E1, sup
  ResidualOrderReport fd_vs_e1;   // stride ladder (plateaus at the h^2 gap)
};
SecondDerivativeReport entropy_second_derivative(const MeasureSpace& space,
                                                 const InterpolationCurve& curve);

/// Convexity of H(t) and the entropy window bound for flat (K = 0) spaces.
/// Entropies are shifted to the normalized reference measure m / m(X)
/// (H + log m(X)); the second-derivative integrand is invariant under that
/// joint rescaling, so the bound is evaluated in the measure-normalized form.
struct ConvexityReport {
  double min_second_difference = 0.0;
  double convexity_threshold = 0.0; // allowed negative slack
  bool convex = false;
  double window_integral = 0.0; // int_delta^{1-delta} E1 dt
  double window_bound = 0.0;    // H~(1)/(1-delta) + H~(0)/delta
  double margin = 0.0;          // bound minus integral
  bool bounded = false;
  double log_mass = 0.0; // log m(X) shift that was applied
};
ConvexityReport convexity_and_window_bound(const MeasureSpace& space,
                                           const InterpolationCurve& curve, double delta);

/// Time-space integrals of second-order quantities over the window
/// [delta, 1-delta]:
///   i_hess = int int (|Hess theta|_HS^2 + eps^2 |Hess log rho|_HS^2) rho dm dt
///   i_lap  = int int ((L theta)^2    + eps^2 (L log rho)^2)       rho dm dt
struct SecondOrderIntegrals {
  double i_hess = 0.0;
  double i_lap = 0.0;
};
SecondOrderIntegrals second_order_integrals(const MeasureSpace& space,
                                            const InterpolationCurve& curve, double delta);

/// A = int int_delta^{1-delta} Gamma(h, a_t) rho_t dt dm; edges touching a
/// node where the acceleration is undefined are excluded.
double acceleration_flux(const MeasureSpace& space, const InterpolationCurve& curve,
                         const Field& h, double delta);

/// Fixed-eps second derivative of t -> int h rho_t dm against the closed form
///   int Hess_h(theta) rho dm + int Gamma(h, a_t) rho dm
/// checked by stride-coarsened second differences at interior times.
struct FixedEpsSecondDerivativeReport {
  ResidualOrderReport fd_vs_formula;
  double max_relative_deviation = 0.0; // finest stride, relative to formula scale
  double formula_scale = 0.0;          // sup |formula|
};
FixedEpsSecondDerivativeReport fixed_eps_second_derivative_check(
    const MeasureSpace& space, const InterpolationCurve& curve, const Field& h);

/// Same second-derivative comparison on the exact-geodesic side:
/// FD of t -> int h dmu_t (exact quantile integrals) against
/// int Hess_h(phi_t) dmu_t. Uses the geodesic's own uniform tgrid, restricted
/// to [delta, 1-delta].
struct GeodesicFormulaReport {
  ResidualOrderReport fd_vs_formula;
  double max_relative_deviation = 0.0;
  double formula_scale = 0.0;
};
GeodesicFormulaReport geodesic_formula_check(const MeasureSpace& space,
                                             const ReferenceGeodesic& ref, const Field& h,
                                             double delta = 0.1);

/// Per-eps summary of one interpolation against the exact geodesic.
struct EpsSummary {
  double eps = 0.0;
  Index nodes = 0;
  Index time_steps = 0;
  double sup_density = 0.0;
  double lipschitz_phi = 0.0;        // max adjacent-node slope of phi, t in [delta, 1]
  double w2_deviation = 0.0;         // sup_t W2(rho_t m, mu_t)
  double potential_deviation = 0.0;  // at t = 1/2, mod additive constant
  Vector entropy;                    // H(t) profile
  double i_hess = 0.0, i_lap = 0.0;
  std::vector<double> acceleration_flux; // per test field
};

struct EpsSweepReport {
  std::vector<double> eps_list; // strictly descending
  std::vector<EpsSummary> summaries;
  double delta = 0.0;
};

/// Assembles the sweep report: all curves must share the space and time grid,
/// with eps strictly descending. The potential comparison follows the sign
/// convention pinned by the oracle's velocity identity: -t phi^eps_t is
/// matched against t phi_t at t = 1/2 in the mu_t-weighted L2 distance
/// modulo additive constants.
EpsSweepReport convergence_report(const MeasureSpace& space,
                                  const std::vector<InterpolationCurve>& curves,
                                  const ReferenceGeodesic& ref, double delta,
                                  const std::vector<Field>& testfields);

/// Li-Yau and Hamilton estimates for log-heat flows from nonnegative data on
/// flat grids, with a small calibration slack tol:
///   Gamma(log u, log u) - (L u)/u       <= N/(2t) * (1 + tol)
///   t Gamma(log u, log u)               <= (1+tol) log(sup f / u) + tol
/// d/dt log u = (L u)/u holds exactly, so no time differencing enters.
/// The gradient bound slack is relative: point data saturates N/(2t) exactly,
/// so its discretization error lives on the scale of the bound itself.
struct HeatEstimateSample {
  double t = 0.0;
  double max_liyau_margin = 0.0;    // max_x (lhs - N/(2t)) / (N/(2t))
  double max_hamilton_margin = 0.0; // max_x (lhs - (1+tol) rhs), slack not applied
  Index liyau_violations = 0;       // entries beyond the slack
  Index hamilton_violations = 0;
};
struct HeatEstimateReport {
  std::vector<HeatEstimateSample> samples;
  Index total_violations = 0;
  double tol = 0.0;
};
HeatEstimateReport heat_estimate_diagnostics(const MeasureSpace& space, const Field& f,
                                             const std::vector<double>& tlist,
                                             double tol = 1e-3);

} // namespace entrolab
