#include "entrolab/lattice_kernel.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_sf_bessel.h>

#include <cmath>
#include <limits>
#include <vector>

namespace entrolab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// GSL must report through status codes, not the aborting default handler.
const bool kGslHandlerOff = [] {
  gsl_set_error_handler_off();
  return true;
}();

// Uniform large-order expansion of log I_nu(z) (Debye), valid uniformly in
// z/nu; the three polynomial corrections leave an O(nu^-4) error in the log.
double log_bessel_i_uniform(double nu, double z) {
  const double r = z / nu;
  const double s = std::sqrt(1.0 + r * r);
  const double eta = s + std::log(r / (1.0 + s));
  const double t = 1.0 / s;
  const double t2 = t * t;
  const double u1 = t * (3.0 - 5.0 * t2) / 24.0;
  const double u2 = t2 * (81.0 - t2 * (462.0 - 385.0 * t2)) / 1152.0;
  const double u3 =
      t * t2 * (30375.0 - t2 * (369603.0 - t2 * (765765.0 - 425425.0 * t2))) / 414720.0;
  return nu * eta - 0.5 * std::log(2.0 * M_PI * nu) - 0.25 * std::log1p(r * r) +
         std::log1p(u1 / nu + (u2 + u3 / nu) / (nu * nu));
}

} // namespace

double log_bessel_i(Index order, double z) {
  (void)kGslHandlerOff;
  if (order < 0) throw InvalidArgument("log_bessel_i needs order >= 0");
  if (!(z >= 0.0) || !std::isfinite(z)) throw InvalidArgument("log_bessel_i needs finite z >= 0");
  if (z == 0.0) return order == 0 ? 0.0 : kNegInf;

  gsl_sf_result res;
  const int status = gsl_sf_bessel_In_scaled_e(int(order), z, &res);
  if (status == GSL_SUCCESS && res.val > 1e-280) return std::log(res.val) + z;
  // scaled value at or below the underflow range: the order dominates z,
  // where the uniform expansion is accurate
  return log_bessel_i_uniform(double(order), z);
}

double log_lattice_green(Index hops, double tau) {
  if (!(tau >= 0.0)) throw InvalidArgument("log_lattice_green needs tau >= 0");
  const Index k = hops >= 0 ? hops : -hops;
  if (tau == 0.0) return k == 0 ? 0.0 : kNegInf;
  return log_bessel_i(k, 2.0 * tau) - 2.0 * tau;
}

namespace {

// memoized |hops| -> log G_hops(tau)
class GreenTable {
public:
  explicit GreenTable(double tau) : tau_(tau) {}

  double operator()(Index hops) {
    const std::size_t k = std::size_t(hops >= 0 ? hops : -hops);
    while (values_.size() <= k) values_.push_back(log_lattice_green(Index(values_.size()), tau_));
    return values_[k];
  }

private:
  double tau_;
  std::vector<double> values_;
};

// Online log-sum-exp accumulator.
struct LogSum {
  double mx = kNegInf;
  double sum = 0.0; // sum of exp(term - mx)

  void add(double term) {
    if (term == kNegInf) return;
    if (term <= mx) {
      sum += std::exp(term - mx);
    } else {
      sum = sum * std::exp(mx - term) + 1.0;
      mx = term;
    }
  }
  double value() const { return mx == kNegInf ? kNegInf : mx + std::log(sum); }
};

// Adds log G(base - w*period) over all integers w. Terms decay monotonically
// away from the dominant image, so each direction stops once 60 nats below
// the running maximum.
void add_image_arm(LogSum& acc, GreenTable& green, Index base, Index period) {
  const Index wstar = Index(std::llround(double(base) / double(period)));
  for (Index w = wstar;; ++w) {
    const double term = green(base - w * period);
    acc.add(term);
    if (w > wstar && term < acc.mx - 60.0) break;
  }
  for (Index w = wstar - 1;; --w) {
    const double term = green(base - w * period);
    acc.add(term);
    if (term < acc.mx - 60.0) break;
  }
}

// log r_t(i,j) for one grid axis, r_t the kernel density with respect to the
// axis node measure. Neumann ends reflect: the image set of source j is its
// orbit under translations by 2(n-1) and negation, each distinct image once;
// endpoint orbits are half the size, matching their half cells, which is what
// makes the reflected kernel exactly self-adjoint. The value-symmetric result
// is mirrored from the lower triangle so the matrix is symmetric bitwise.
Matrix axis_log_kernel(const GridAxis& ax, double t) {
  const Index n = ax.n;
  const double h = ax.spacing();
  const double tau = t / (h * h);
  GreenTable green(tau);
  Matrix out(n, n);
  if (ax.boundary == Boundary::periodic) {
    // one log per separation
    std::vector<double> by_sep(static_cast<std::size_t>(n));
    const double log_m = std::log(h);
    for (Index sep = 0; sep < n; ++sep) {
      LogSum acc;
      add_image_arm(acc, green, sep, n);
      by_sep[std::size_t(sep)] = acc.value() - log_m;
    }
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j <= i; ++j) {
        const double v = by_sep[std::size_t(i - j)];
        out(i, j) = v;
        out(j, i) = v;
      }
  } else {
    const Index period = 2 * (n - 1);
    for (Index j = 0; j < n; ++j) {
      const double log_m = std::log(j == 0 || j == n - 1 ? 0.5 * h : h);
      for (Index i = j; i < n; ++i) {
        LogSum acc;
        add_image_arm(acc, green, i - j, period);
        if (j != 0 && j != n - 1) add_image_arm(acc, green, i + j, period);
        out(i, j) = acc.value() - log_m;
        out(j, i) = out(i, j);
      }
    }
  }
  return out;
}

Matrix grid_log_kernel(const MeasureSpace& space, double t) {
  const auto& axes = space.axes();
  if (axes.size() == 1) return axis_log_kernel(axes[0], t);
  const Matrix kx = axis_log_kernel(axes[0], t);
  const Matrix ky = axis_log_kernel(axes[1], t);
  const Index nx = axes[0].n;
  const Index n = space.size();
  Matrix out(n, n);
  for (Index b = 0; b < n; ++b) {
    const Index bx = b % nx, by = b / nx;
    for (Index a = 0; a < n; ++a) out(a, b) = kx(a % nx, bx) + ky(a / nx, by);
  }
  return out;
}

} // namespace

LogHeatKernel make_log_heat_kernel(const MeasureSpace& space, double t) {
  if (!(t > 0.0)) throw InvalidArgument("log heat kernel needs t > 0");
  if (space.kind() == MeasureSpace::Kind::graph)
    throw UnsupportedSpace("lattice log kernel needs a grid space; pass a HeatOperator for graphs");
  return LogHeatKernel(grid_log_kernel(space, t), space.log_measure(), t, space.id());
}

LogHeatKernel make_log_heat_kernel(const MeasureSpace& space, const HeatOperator& op, double t) {
  if (space.kind() != MeasureSpace::Kind::graph) return make_log_heat_kernel(space, t);
  if (!(t > 0.0)) throw InvalidArgument("log heat kernel needs t > 0");
  Matrix r = heat_kernel(space, op, t);
  // relative floor: far-field spectral entries are cancellation noise, and
  // flooring keeps logs finite without touching the resolved near field
  const double floor = r.maxCoeff() * 1e-250;
  Matrix log_r = (r.array().max(floor)).log();
  for (Index i = 0; i < log_r.rows(); ++i)
    for (Index j = 0; j < i; ++j) log_r(j, i) = log_r(i, j);
  return LogHeatKernel(std::move(log_r), space.log_measure(), t, space.id());
}

Vector LogHeatKernel::apply(const Vector& log_field) const {
  const Index n = size();
  if (log_field.size() != n) throw InvalidArgument("log field size mismatch");
  const Vector base = log_m_ + log_field;
  Vector out(n);
  Vector tmp(n);
  for (Index x = 0; x < n; ++x) {
    tmp = log_r_.col(x) + base; // symmetric kernel: column x is row x
    const double mx = tmp.maxCoeff();
    if (!std::isfinite(mx)) {
      out[x] = kNegInf; // all-zero integrand (or an overflow already upstream)
      continue;
    }
    out[x] = mx + std::log((tmp.array() - mx).exp().sum());
  }
  return out;
}

} // namespace entrolab
