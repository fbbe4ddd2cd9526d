#include "entrolab/heat.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <ostream>

#include "entrolab/report.hpp"

namespace entrolab {

HeatOperator spectral_decompose(const MeasureSpace& space) {
  const Index n = space.size();
  const Vector& m = space.measure();
  const Vector sqrt_m = m.array().sqrt();

  // S = D L D^{-1} with D = diag(sqrt m); assembled entrywise from the edge
  // couplings so it is symmetric to the last bit
  Matrix s = Matrix::Zero(n, n);
  for (const auto& e : space.edges()) {
    const double v = e.weight / (sqrt_m[e.i] * sqrt_m[e.j]);
    s(e.i, e.j) = v;
    s(e.j, e.i) = v;
    s(e.i, e.i) -= e.weight / m[e.i];
    s(e.j, e.j) -= e.weight / m[e.j];
  }

  Eigen::SelfAdjointEigenSolver<Matrix> solver(s);
  if (solver.info() != Eigen::Success)
    throw SolverFailure("self-adjoint eigensolver failed on a space with " +
                        std::to_string(n) + " nodes");

  // eigenvalues of S ascend and are <= 0; flip to eigenvalues of -L
  Vector lambda(n);
  Matrix funcs(n, n);
  for (Index k = 0; k < n; ++k) {
    const Index src = n - 1 - k;
    lambda[k] = -solver.eigenvalues()[src];
    funcs.col(k) = solver.eigenvectors().col(src).cwiseQuotient(sqrt_m);
  }
  const double scale = std::max(lambda.maxCoeff(), 1.0);
  for (Index k = 0; k < n; ++k) {
    if (std::abs(lambda[k]) <= 1e-12 * scale) lambda[k] = 0.0;
    if (lambda[k] < 0.0) lambda[k] = 0.0;
    // deterministic sign: largest-magnitude entry positive
    Index imax = 0;
    funcs.col(k).cwiseAbs().maxCoeff(&imax);
    if (funcs(imax, k) < 0.0) funcs.col(k) = -funcs.col(k);
  }
  return HeatOperator(std::move(lambda), std::move(funcs), space.id());
}

double HeatOperator::reconstruction_residual(const MeasureSpace& space) const {
  const Matrix& gen = space.generator();
  const Matrix residual = gen * eigenfunctions_ + eigenfunctions_ * eigenvalues_.asDiagonal();
  return residual.norm() / gen.norm();
}

Field heat_flow(const MeasureSpace& space, const HeatOperator& op, const Field& f, double t) {
  space.check(f);
  if (op.space_id() != space.id()) throw SpaceMismatch("heat operator belongs to another space");
  if (!(t >= 0.0)) throw InvalidArgument("heat_flow needs t >= 0");
  const Vector coeff =
      op.eigenfunctions().transpose() * (space.measure().array() * f.values.array()).matrix();
  const Vector damped = coeff.array() * (-t * op.eigenvalues().array()).exp();
  return Field{op.eigenfunctions() * damped, space.id()};
}

Matrix heat_kernel(const MeasureSpace& space, const HeatOperator& op, double t) {
  if (op.space_id() != space.id()) throw SpaceMismatch("heat operator belongs to another space");
  if (!(t > 0.0)) throw InvalidArgument("heat_kernel needs t > 0");
  const Vector w = (-t * op.eigenvalues().array()).exp();
  Matrix r = op.eigenfunctions() * w.asDiagonal() * op.eigenfunctions().transpose();
  // exact kernels are strictly positive; negative far-field roundoff -> 0
  return r.cwiseMax(0.0);
}

void write_spectrum_csv(const HeatOperator& op, std::ostream& out) {
  out << "k,lambda\n";
  for (Index k = 0; k < op.size(); ++k)
    out << k << ',' << format_double(op.eigenvalues()[k]) << '\n';
}

} // namespace entrolab
