#include "entrolab/schrodinger.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace entrolab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log rho with exact -inf at zeros; rejects negative or non-normalized input
Vector log_density(const MeasureSpace& space, const Field& rho, const char* name) {
  space.check(rho);
  const Index n = rho.size();
  Vector out(n);
  double mass = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double r = rho.values[i];
    if (r < 0.0) throw InvalidArgument(std::string(name) + " has a negative entry");
    mass += space.measure()[i] * r;
    out[i] = r > 0.0 ? std::log(r) : kNegInf;
  }
  if (std::abs(mass - 1.0) > 1e-8)
    throw InvalidArgument(std::string(name) + " is not a probability density (mass " +
                          std::to_string(mass) + ")");
  return out;
}

// log int exp(v) dm; -inf entries are exact zeros
double lse_m(const Vector& log_m, const Vector& v) {
  const Index n = v.size();
  double mx = kNegInf;
  for (Index i = 0; i < n; ++i) mx = std::max(mx, log_m[i] + v[i]);
  if (mx == kNegInf) return kNegInf;
  double sum = 0.0;
  for (Index i = 0; i < n; ++i) sum += std::exp(log_m[i] + v[i] - mx);
  return mx + std::log(sum);
}

double weighted_residual(const Vector& m, const Vector& log_marginal, const Vector& rho) {
  double worst = 0.0;
  for (Index i = 0; i < m.size(); ++i) {
    const double est = log_marginal[i] == kNegInf ? 0.0 : std::exp(log_marginal[i]);
    worst = std::max(worst, m[i] * std::abs(est - rho[i]));
  }
  return worst;
}

struct StageResult {
  Vector log_f, log_g;
  Index iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

// One Sinkhorn run at fixed eps. Every operation in the sweep commutes with
// swapping (rho0, rho1) together with (F, G): apply/lse are order-stable
// sums, c is swap-invariant, s maps to -s exactly (IEEE negation), so the
// swapped problem produces bitwise-swapped iterates.
StageResult run_sweeps(const MeasureSpace& space, const LogHeatKernel& kernel,
                       const Vector& log_rho0, const Vector& log_rho1, const Vector& rho0,
                       const Vector& rho1, Vector F, Vector G, double tol, Index max_iter,
                       std::vector<double>* history) {
  const Vector& m = space.measure();
  const Vector& log_m = space.log_measure();
  StageResult st;
  Vector A, B;
  for (Index it = 1; it <= max_iter; ++it) {
    A = kernel.apply(G);
    B = kernel.apply(F);
    // symmetric plan-mass shift: removes the constant mode Jacobi flips
    const double log_mass0 = lse_m(log_m, F + A);
    const double log_mass1 = lse_m(log_m, G + B);
    const double c = -0.25 * (log_mass0 + log_mass1);
    F.array() += c;
    G.array() += c;
    A.array() += c;
    B.array() += c;
    st.iterations = it;
    st.residual = std::max(weighted_residual(m, F + A, rho0), weighted_residual(m, G + B, rho1));
    if (history) history->push_back(st.residual);
    if (st.residual <= tol) {
      st.converged = true;
      break;
    }
    if (it == max_iter) break;
    Vector Fn = log_rho0 - A;
    Vector Gn = log_rho1 - B;
    // antisymmetric regauge: keeps int f dm = int g dm
    const double s = 0.5 * (lse_m(log_m, Gn) - lse_m(log_m, Fn));
    Fn.array() += s;
    Gn.array() -= s;
    F = std::move(Fn);
    G = std::move(Gn);
  }
  st.log_f = std::move(F);
  st.log_g = std::move(G);
  return st;
}

SchrodingerSolution solve_impl(const MeasureSpace& space,
                               const std::function<LogHeatKernel(double)>& kernel_at,
                               const Field& rho0, const Field& rho1, double eps,
                               const SinkhornOptions& opts) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw InvalidArgument("eps must be positive");
  if (!(opts.tolerance > 0.0)) throw InvalidArgument("tolerance must be positive");
  if (opts.max_iterations < 1) throw InvalidArgument("max_iterations must be >= 1");
  const Vector log_rho0 = log_density(space, rho0, "rho0");
  const Vector log_rho1 = log_density(space, rho1, "rho1");
  const Index n = space.size();

  SchrodingerSolution sol;
  sol.eps = eps;
  sol.space_id = space.id();

  Vector F, G;
  std::vector<double> stage_eps;
  if (opts.warm_start) {
    if (opts.warm_start->first.size() != n || opts.warm_start->second.size() != n)
      throw InvalidArgument("warm start size mismatch");
    F = opts.warm_start->first;
    G = opts.warm_start->second;
    stage_eps = {eps};
  } else {
    F = Vector::Zero(n);
    G = Vector::Constant(n, opts.initial_log_g);
    double e = eps;
    stage_eps = {e};
    while (e < opts.cascade_below_eps) {
      e *= 4.0;
      stage_eps.push_back(e);
    }
    std::reverse(stage_eps.begin(), stage_eps.end());
  }

  std::vector<double>* history = opts.record_history ? &sol.residual_history : nullptr;
  for (std::size_t k = 0; k < stage_eps.size(); ++k) {
    const double e = stage_eps[k];
    const bool final_stage = (k + 1 == stage_eps.size());
    const double tol = final_stage ? opts.tolerance : std::max(opts.tolerance, 1e-6);
    const LogHeatKernel kernel = kernel_at(e / 2.0);
    StageResult st = run_sweeps(space, kernel, log_rho0, log_rho1, rho0.values, rho1.values,
                                std::move(F), std::move(G), tol, opts.max_iterations, history);
    F = std::move(st.log_f);
    G = std::move(st.log_g);
    sol.iterations += st.iterations;
    if (final_stage) {
      sol.converged = st.converged;
      sol.marginal_residual = st.residual;
    }
  }
  const double log_gauge = lse_m(space.log_measure(), F);
  sol.gauge = std::exp(log_gauge);
  sol.log_f = std::move(F);
  sol.log_g = std::move(G);
  return sol;
}

} // namespace

SchrodingerSolution solve_schrodinger_system(const MeasureSpace& space, const Field& rho0,
                                             const Field& rho1, double eps,
                                             const SinkhornOptions& opts) {
  if (space.kind() == MeasureSpace::Kind::graph)
    throw UnsupportedSpace("graph spaces need the overload taking a HeatOperator");
  return solve_impl(
      space, [&](double t) { return make_log_heat_kernel(space, t); }, rho0, rho1, eps, opts);
}

SchrodingerSolution solve_schrodinger_system(const MeasureSpace& space, const HeatOperator& op,
                                             const Field& rho0, const Field& rho1, double eps,
                                             const SinkhornOptions& opts) {
  if (op.space_id() != space.id()) throw SpaceMismatch("heat operator belongs to another space");
  return solve_impl(
      space, [&](double t) { return make_log_heat_kernel(space, op, t); }, rho0, rho1, eps, opts);
}

Matrix entropic_plan(const MeasureSpace& space, const LogHeatKernel& half_kernel,
                     const SchrodingerSolution& sol) {
  if (sol.space_id != space.id() || half_kernel.space_id() != space.id())
    throw SpaceMismatch("plan inputs belong to different spaces");
  if (!sol.converged) throw InvalidArgument("entropic_plan needs a converged solution");
  if (std::abs(half_kernel.time() - sol.eps / 2.0) > 1e-12 * sol.eps)
    throw InvalidArgument("kernel time must be eps/2");
  const Index n = space.size();
  const Vector& log_m = space.log_measure();
  const Matrix& log_r = half_kernel.log_kernel();
  Matrix plan(n, n);
  for (Index y = 0; y < n; ++y) {
    const double gy = sol.log_g[y] + log_m[y];
    for (Index x = 0; x < n; ++x) {
      const double e = sol.log_f[x] + log_m[x] + log_r(x, y) + gy;
      plan(x, y) = e == kNegInf ? 0.0 : std::exp(e);
    }
  }
  return plan;
}

double plan_relative_entropy(const MeasureSpace& space, const LogHeatKernel& half_kernel,
                             const Matrix& plan) {
  if (half_kernel.space_id() != space.id()) throw SpaceMismatch("kernel belongs to another space");
  const Index n = space.size();
  if (plan.rows() != n || plan.cols() != n) throw InvalidArgument("plan size mismatch");
  const Vector& log_m = space.log_measure();
  const Matrix& log_r = half_kernel.log_kernel();
  double acc = 0.0;
  for (Index y = 0; y < n; ++y)
    for (Index x = 0; x < n; ++x) {
      const double g = plan(x, y);
      if (g < 0.0) throw InvalidArgument("plan has a negative entry");
      if (g == 0.0) continue;
      acc += g * (std::log(g) - log_r(x, y) - log_m[x] - log_m[y]);
    }
  return acc;
}

} // namespace entrolab
