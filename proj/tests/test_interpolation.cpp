#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "entrolab/interpolation.hpp"

using namespace entrolab;

namespace {

Field gaussian(const MeasureSpace& g, double center, double width) {
  const Vector& x = g.coordinate(0);
  Vector v(g.size());
  for (Index i = 0; i < g.size(); ++i) {
    const double d = (x[i] - center) / width;
    v[i] = std::exp(-0.5 * d * d);
  }
  v /= g.measure().dot(v);
  return g.field(v);
}

struct Setup {
  MeasureSpace space;
  SchrodingerSolution sol;
  double eps;
};

Setup make_setup(Index n, Index seed_center, double eps) {
  MeasureSpace g = build_interval_grid(n, 8.0, Boundary::neumann);
  Field r0 = gaussian(g, 2.5, 0.6);
  Field r1 = gaussian(g, 5.5, 0.5 + 0.1 * double(seed_center));
  SchrodingerSolution sol = solve_schrodinger_system(g, r0, r1, eps);
  REQUIRE(sol.converged);
  return Setup{std::move(g), std::move(sol), eps};
}

}  // namespace

TEST_CASE("curve endpoints reproduce the marginals") {
  Setup s = make_setup(100, 1, 0.3);
  InterpolationCurve c = interpolate(s.space, s.sol, 32);
  CHECK(c.time_steps() == 32);
  CHECK(c.tgrid[0] == 0.0);
  CHECK(c.tgrid[32] == 1.0);
  // uniform time grid
  for (Index k = 0; k + 1 <= 32; ++k) {
    CHECK(c.tgrid[k + 1] - c.tgrid[k] == doctest::Approx(1.0 / 32).epsilon(1e-13));
  }
  Field r0 = gaussian(s.space, 2.5, 0.6);
  Field r1 = gaussian(s.space, 5.5, 0.6);
  // endpoint error is the solver residual divided by the cell measure
  const double slack = 1e-9 / s.space.measure().minCoeff() + 1e-12;
  CHECK((c.rho.front() - r0.values).cwiseAbs().maxCoeff() < slack);
  CHECK((c.rho.back() - r1.values).cwiseAbs().maxCoeff() < slack);
}

TEST_CASE("potentials sum to eps log rho at every sample") {
  Setup s = make_setup(100, 1, 0.25);
  InterpolationCurve c = interpolate(s.space, s.sol, 32);
  double worst = 0.0;
  for (Index k = 0; k <= 32; ++k) {
    for (Index i = 0; i < s.space.size(); ++i) {
      const double r = c.rho[k][i];
      if (r > 0.0) {
        worst = std::max(worst,
                         std::abs(c.phi[k][i] + c.psi[k][i] - s.eps * std::log(r)));
      }
    }
  }
  CHECK(worst <= 1e-10);
  // theta is the antisymmetric half
  for (Index k = 0; k <= 32; ++k) {
    CHECK((c.theta[k] - 0.5 * (c.psi[k] - c.phi[k])).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("mass is conserved along the curve") {
  Setup s = make_setup(120, 0, 0.1);
  InterpolationCurve c = interpolate(s.space, s.sol, 32);
  const Vector& m = s.space.measure();
  for (Index k = 0; k <= 32; ++k) {
    CHECK(std::abs(m.dot(c.rho[k]) - 1.0) <= 1e-10);
  }
}

TEST_CASE("swapping the marginals reverses the curve bit for bit") {
  MeasureSpace g = build_interval_grid(90, 8.0, Boundary::neumann);
  Field r0 = gaussian(g, 2.5, 0.6), r1 = gaussian(g, 5.5, 0.6);
  SchrodingerSolution ab = solve_schrodinger_system(g, r0, r1, 0.2);
  SchrodingerSolution ba = solve_schrodinger_system(g, r1, r0, 0.2);
  InterpolationCurve cab = interpolate(g, ab, 16);
  InterpolationCurve cba = interpolate(g, ba, 16);
  for (Index k = 0; k <= 16; ++k) {
    CHECK((cab.rho[k] - cba.rho[16 - k]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((cab.theta[k] + cba.theta[16 - k]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("worker count does not change a single bit") {
  Setup s = make_setup(80, 2, 0.3);
  InterpolationCurve one = interpolate(s.space, s.sol, 16, 1);
  InterpolationCurve four = interpolate(s.space, s.sol, 16, 4);
  for (Index k = 0; k <= 16; ++k) {
    CHECK((one.rho[k] - four.rho[k]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((one.phi[k] - four.phi[k]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((one.accel[k].array().isNaN() == four.accel[k].array().isNaN()).all());
  }
}

TEST_CASE("semigroup time derivative holds at second order") {
  Setup s = make_setup(100, 1, 0.2);
  InterpolationCurve c = interpolate(s.space, s.sol, 64);
  SemigroupDerivativeReport rep = verify_semigroup_derivative(s.space, c);
  CHECK(rep.flux_integral_max < 1e-11);
  CHECK(rep.rho_equation.order > 1.5);
  CHECK(rep.rho_equation.finest_residual < 1e-2);
}

TEST_CASE("continuity equation residuals shrink with the mesh") {
  const double eps = 0.2;
  std::vector<double> gamma_res;
  for (Index n : {Index(60), Index(120)}) {
    MeasureSpace g = build_interval_grid(n, 8.0, Boundary::neumann);
    Field r0 = gaussian(g, 2.5, 0.6), r1 = gaussian(g, 5.5, 0.6);
    SchrodingerSolution sol = solve_schrodinger_system(g, r0, r1, eps);
    InterpolationCurve c = interpolate(g, sol, 64);
    std::vector<Field> fields = {g.field(Vector(g.coordinate(0))),
                                 g.field(Vector(g.coordinate(0).array().sin()))};
    ContinuityReport rep = verify_continuity_equation(g, c, fields);
    REQUIRE(rep.gamma_form_max_residual.size() == 2);
    REQUIRE(rep.exact_form_max_residual.size() == 2);
    // the exact form is limited only by time differencing
    CHECK(rep.exact_form_max_residual[0] < 1e-2);
    gamma_res.push_back(rep.gamma_form_max_residual[0]);
  }
  // the gamma form carries the O(h^2) chain-rule gap
  CHECK(gamma_res[1] < 0.5 * gamma_res[0]);
}

TEST_CASE("hjb residuals show clean time order on the interior window") {
  Setup s = make_setup(100, 1, 0.25);
  InterpolationCurve c = interpolate(s.space, s.sol, 64);
  HjbReport rep = verify_hjb(s.space, c);
  // the window is set by the largest stride so all strides share it
  CHECK(rep.window_delta == doctest::Approx(8.0 / 64));
  CHECK(rep.exact_form.order > 1.5);
  CHECK(std::isfinite(rep.gamma_form_max_residual_phi));
  CHECK(std::isfinite(rep.gamma_form_max_residual_psi));
}

TEST_CASE("acceleration mask marks exactly the NaN nodes") {
  MeasureSpace g = build_interval_grid(90, 6.0, Boundary::neumann);
  // indicator block left marginal: rho_0 vanishes outside the block
  Vector v = Vector::Zero(g.size());
  const Vector& x = g.coordinate(0);
  double mass = 0.0;
  for (Index i = 0; i < g.size(); ++i)
    if (x[i] >= 1.0 && x[i] <= 2.0) mass += g.measure()[i];
  for (Index i = 0; i < g.size(); ++i)
    if (x[i] >= 1.0 && x[i] <= 2.0) v[i] = 1.0 / mass;
  SchrodingerSolution sol = solve_schrodinger_system(g, g.field(v), gaussian(g, 4.5, 0.5), 0.3);
  REQUIRE(sol.converged);
  InterpolationCurve c = interpolate(g, sol, 16);
  bool saw_undefined = false;
  for (Index k = 0; k <= 16; ++k) {
    for (Index i = 0; i < g.size(); ++i) {
      CHECK(c.accel_defined[k][i] == !std::isnan(c.accel[k][i]));
      if (!c.accel_defined[k][i]) saw_undefined = true;
      if (c.accel_defined[k][i]) CHECK(std::isfinite(c.accel[k][i]));
    }
    // interior times smooth everything out: fully defined away from t = 0
    if (k >= 2 && k <= 14) CHECK(c.accel_defined[k].all());
  }
  CHECK(saw_undefined);  // the t = 0 block edge must be masked
}

TEST_CASE("log laplace ratio handles zeros and constants") {
  MeasureSpace g = build_interval_grid(40, 4.0, Boundary::neumann);
  Vector zero_log = Vector::Zero(g.size());  // u = 1
  CHECK(log_laplace_ratio(g, zero_log).cwiseAbs().maxCoeff() < 1e-13);
  Vector with_hole = Vector::Zero(g.size());
  with_hole[5] = -std::numeric_limits<double>::infinity();
  Vector out = log_laplace_ratio(g, with_hole);
  CHECK(std::isnan(out[5]));
  CHECK(std::isfinite(out[20]));
}

TEST_CASE("curve csv is stable across calls") {
  Setup s = make_setup(50, 1, 0.3);
  InterpolationCurve c = interpolate(s.space, s.sol, 16);
  std::ostringstream a, b;
  write_curve_csv(s.space, c, a);
  write_curve_csv(s.space, c, b);
  CHECK(a.str() == b.str());
  CHECK(a.str().substr(0, 31) == "t,x,rho,phi,psi,theta,accel\n0,0");
  // one row per (time, node) pair plus the header
  Index rows = 0;
  for (char ch : a.str())
    if (ch == '\n') ++rows;
  CHECK(rows == 1 + 17 * 50);
}

TEST_CASE("interpolation input validation") {
  Setup s = make_setup(60, 1, 0.3);
  CHECK_THROWS_AS(interpolate(s.space, s.sol, 8), InvalidArgument);
  MeasureSpace other = build_interval_grid(60, 8.0, Boundary::neumann);
  CHECK_THROWS_AS(interpolate(other, s.sol, 32), SpaceMismatch);
}
