#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "entrolab/schrodinger.hpp"

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

struct TwoPoint {
  MeasureSpace space;
  double m0, m1, w;

  // closed-form heat kernel of the 2-node chain: one nonzero eigenvalue
  double r(double t, int x, int y) const {
    const double S = m0 + m1;
    const double lam = w * (1.0 / m0 + 1.0 / m1);
    const double e1x = x == 0 ? std::sqrt(m1 / (m0 * S)) : -std::sqrt(m0 / (m1 * S));
    const double e1y = y == 0 ? std::sqrt(m1 / (m0 * S)) : -std::sqrt(m0 / (m1 * S));
    return 1.0 / S + std::exp(-lam * t) * e1x * e1y;
  }
};

TwoPoint make_two_point() {
  std::vector<MeasureSpace::Edge> edges = {{0, 1, 1.3}};
  Vector m(2);
  m << 0.7, 1.1;
  return TwoPoint{build_weighted_graph(2, edges, m), 0.7, 1.1, 1.3};
}

}  // namespace

TEST_CASE("two point system against a hand-rolled closed form") {
  TwoPoint tp = make_two_point();
  const MeasureSpace& g = tp.space;
  Vector r0(2), r1(2);
  r0 << 0.8, 0.4;   // integrates to 1 against m
  r1 << 0.25, 0.75;
  const double eps = 0.8;
  const double t = eps / 2;

  // plain-double Sinkhorn on the closed-form kernel, run to the fixed point
  Vector f = Vector::Ones(2), v = Vector::Ones(2);
  for (int it = 0; it < 2000; ++it) {
    for (int x = 0; x < 2; ++x) {
      double acc = 0.0;
      for (int y = 0; y < 2; ++y) acc += tp.r(t, x, y) * v[y] * g.measure()[y];
      f[x] = r0[x] / acc;
    }
    for (int y = 0; y < 2; ++y) {
      double acc = 0.0;
      for (int x = 0; x < 2; ++x) acc += tp.r(t, x, y) * f[x] * g.measure()[x];
      v[y] = r1[y] / acc;
    }
  }
  Matrix expect(2, 2);
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      expect(x, y) = f[x] * tp.r(t, x, y) * v[y] * g.measure()[x] * g.measure()[y];

  HeatOperator op = spectral_decompose(g);
  SinkhornOptions opts;
  opts.tolerance = 1e-12;
  SchrodingerSolution sol = solve_schrodinger_system(g, op, g.field(r0), g.field(r1), eps, opts);
  CHECK(sol.converged);
  CHECK(sol.marginal_residual <= 1e-12);
  Matrix plan = entropic_plan(g, make_log_heat_kernel(g, op, t), sol);
  // the plan is gauge invariant and its entrywise error is bounded by the
  // marginal residual, so the two solvers must agree to the driven tolerance
  CHECK((plan - expect).cwiseAbs().maxCoeff() < 5e-12);
}

TEST_CASE("grid solve meets its residual target and its gauge") {
  MeasureSpace g = build_interval_grid(100, 8.0, Boundary::neumann);
  Field r0 = gaussian(g, 2.5, 0.6), r1 = gaussian(g, 5.5, 0.6);
  SchrodingerSolution sol = solve_schrodinger_system(g, r0, r1, 0.3);
  CHECK(sol.converged);
  CHECK(sol.marginal_residual <= 1e-9);
  CHECK(sol.iterations > 0);
  CHECK(!sol.residual_history.empty());
  CHECK(sol.residual_history.back() <= 1e-9);

  // gauge normalization int f dm = int g dm
  const Vector& m = g.measure();
  double intf = 0.0, intg = 0.0;
  for (Index i = 0; i < g.size(); ++i) {
    intf += m[i] * std::exp(sol.log_f[i]);
    intg += m[i] * std::exp(sol.log_g[i]);
  }
  CHECK(intf == doctest::Approx(intg).epsilon(1e-11));
  CHECK(sol.gauge == doctest::Approx(intf).epsilon(1e-11));

  // plan marginals reproduce the inputs
  Matrix plan = entropic_plan(g, make_log_heat_kernel(g, 0.15), sol);
  Vector row = plan.rowwise().sum(), col = plan.colwise().sum();
  double worst = 0.0;
  for (Index i = 0; i < g.size(); ++i) {
    worst = std::max(worst, std::abs(row[i] - r0[i] * m[i]));
    worst = std::max(worst, std::abs(col[i] - r1[i] * m[i]));
  }
  CHECK(worst <= 1.1e-9);
}

TEST_CASE("swapping the marginals swaps the potentials bit for bit") {
  MeasureSpace g = build_interval_grid(80, 6.0, Boundary::neumann);
  Field r0 = gaussian(g, 2.0, 0.5), r1 = gaussian(g, 4.0, 0.7);
  SchrodingerSolution ab = solve_schrodinger_system(g, r0, r1, 0.25);
  SchrodingerSolution ba = solve_schrodinger_system(g, r1, r0, 0.25);
  CHECK(ab.converged);
  CHECK(ba.converged);
  CHECK((ab.log_f - ba.log_g).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ab.log_g - ba.log_f).cwiseAbs().maxCoeff() == 0.0);
  CHECK(ab.iterations == ba.iterations);
}

TEST_CASE("shifted initial guess lands on the same plan") {
  MeasureSpace g = build_interval_grid(80, 6.0, Boundary::neumann);
  Field r0 = gaussian(g, 2.0, 0.5), r1 = gaussian(g, 4.5, 0.6);
  const double eps = 0.3;
  SchrodingerSolution base = solve_schrodinger_system(g, r0, r1, eps);
  SinkhornOptions opts;
  opts.initial_log_g = 1.25;
  SchrodingerSolution shifted = solve_schrodinger_system(g, r0, r1, eps, opts);
  CHECK(shifted.converged);
  // the per-sweep normalization kills both constant modes, so the converged
  // potentials themselves match, not just the plan
  CHECK((base.log_f - shifted.log_f).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((base.log_g - shifted.log_g).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("large eps decouples the marginals") {
  MeasureSpace g = build_interval_grid(60, 4.0, Boundary::neumann);
  Field r0 = gaussian(g, 1.2, 0.4), r1 = gaussian(g, 2.8, 0.4);
  const double eps = 1e4;
  SchrodingerSolution sol = solve_schrodinger_system(g, r0, r1, eps);
  CHECK(sol.converged);
  Matrix plan = entropic_plan(g, make_log_heat_kernel(g, eps / 2), sol);
  const Vector& m = g.measure();
  double worst = 0.0;
  for (Index x = 0; x < g.size(); ++x)
    for (Index y = 0; y < g.size(); ++y)
      worst = std::max(worst,
                       std::abs(plan(x, y) - r0[x] * m[x] * r1[y] * m[y]));
  // mixing time of the grid is ~1, so at t = 5000 the kernel is the
  // projection onto constants and the optimal coupling is independence
  CHECK(worst < 1e-10);

  // relative entropy of the optimal plan never exceeds a competitor's
  LogHeatKernel k = make_log_heat_kernel(g, eps / 2);
  Matrix product(g.size(), g.size());
  for (Index x = 0; x < g.size(); ++x)
    for (Index y = 0; y < g.size(); ++y) product(x, y) = r0[x] * m[x] * r1[y] * m[y];
  CHECK(plan_relative_entropy(g, k, plan) <=
        plan_relative_entropy(g, k, product) + 1e-12);
}

TEST_CASE("zero marginal regions carry exact minus infinity") {
  MeasureSpace g = build_interval_grid(90, 6.0, Boundary::neumann);
  Vector v = Vector::Zero(g.size());
  const Vector& x = g.coordinate(0);
  double mass = 0.0;
  for (Index i = 0; i < g.size(); ++i)
    if (x[i] >= 1.0 && x[i] <= 2.5) mass += g.measure()[i];
  for (Index i = 0; i < g.size(); ++i)
    if (x[i] >= 1.0 && x[i] <= 2.5) v[i] = 1.0 / mass;
  Field block = g.field(v);
  Field r1 = gaussian(g, 4.5, 0.5);
  SchrodingerSolution sol = solve_schrodinger_system(g, block, r1, 0.4);
  CHECK(sol.converged);
  const double inf = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < g.size(); ++i) {
    if (block[i] == 0.0) {
      CHECK(sol.log_f[i] == -inf);
    } else {
      CHECK(std::isfinite(sol.log_f[i]));
    }
    CHECK(std::isfinite(sol.log_g[i]));
  }
}

TEST_CASE("running out of iterations reports instead of throwing") {
  MeasureSpace g = build_interval_grid(70, 6.0, Boundary::neumann);
  Field r0 = gaussian(g, 1.5, 0.4), r1 = gaussian(g, 4.5, 0.4);
  SinkhornOptions opts;
  opts.max_iterations = 2;
  SchrodingerSolution sol = solve_schrodinger_system(g, r0, r1, 0.3, opts);
  CHECK(!sol.converged);
  CHECK(sol.iterations == 2);
  CHECK(sol.marginal_residual > 1e-9);
}

TEST_CASE("small eps converges through the cascade") {
  MeasureSpace g = build_interval_grid(120, 8.0, Boundary::neumann);
  Field r0 = gaussian(g, 2.5, 0.6), r1 = gaussian(g, 5.5, 0.6);
  SchrodingerSolution sol = solve_schrodinger_system(g, r0, r1, 0.02);
  CHECK(sol.converged);
  CHECK(sol.marginal_residual <= 1e-9);

  // a warm start from a neighboring eps must also converge, without cascade
  SinkhornOptions warm;
  warm.warm_start = std::make_pair(sol.log_f, sol.log_g);
  SchrodingerSolution again = solve_schrodinger_system(g, r0, r1, 0.025, warm);
  CHECK(again.converged);
}

TEST_CASE("input validation") {
  MeasureSpace g = build_interval_grid(50, 4.0, Boundary::neumann);
  Field r0 = gaussian(g, 1.0, 0.3), r1 = gaussian(g, 3.0, 0.3);
  CHECK_THROWS_AS(solve_schrodinger_system(g, r0, r1, 0.0), InvalidArgument);
  CHECK_THROWS_AS(solve_schrodinger_system(g, r0, r1, -1.0), InvalidArgument);
  MeasureSpace other = build_interval_grid(50, 4.0, Boundary::neumann);
  CHECK_THROWS_AS(solve_schrodinger_system(other, r0, r1, 0.1), SpaceMismatch);

  std::vector<MeasureSpace::Edge> edges = {{0, 1, 1.0}, {1, 2, 1.0}};
  Vector m = Vector::Ones(3);
  MeasureSpace graph = build_weighted_graph(3, edges, m);
  Vector u = Vector::Ones(3) / 3.0;
  CHECK_THROWS_AS(solve_schrodinger_system(graph, graph.field(u), graph.field(u), 0.1),
                  UnsupportedSpace);
}
