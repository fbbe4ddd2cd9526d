#pragma once

#include <iosfwd>

#include "entrolab/space.hpp"

namespace entrolab {

/// Spectral form of the heat semigroup e^{tL}.
///
/// The generator is symmetrized by conjugation with diag(sqrt(m)), decomposed
/// with a dense self-adjoint eigensolver, and mapped back, which yields
/// eigenvalues lambda_k of -L (ascending, lambda_0 = 0) and eigenfunctions
/// that are orthonormal in L^2(m) with e_0 constant.
class HeatOperator {
public:
  HeatOperator(Vector eigenvalues, Matrix eigenfunctions, std::uint64_t space_id)
      : eigenvalues_(std::move(eigenvalues)), eigenfunctions_(std::move(eigenfunctions)),
        space_id_(space_id) {}

  const Vector& eigenvalues() const { return eigenvalues_; }
  /// Column k is the eigenfunction for eigenvalues()[k].
  const Matrix& eigenfunctions() const { return eigenfunctions_; }
  std::uint64_t space_id() const { return space_id_; }
  Index size() const { return eigenvalues_.size(); }

  /// Relative Frobenius residual of L e_k = -lambda_k e_k; O(n^3), meant for
  /// audits and tests rather than hot paths.
  double reconstruction_residual(const MeasureSpace& space) const;

private:
  Vector eigenvalues_;
  Matrix eigenfunctions_;
  std::uint64_t space_id_;
};

HeatOperator spectral_decompose(const MeasureSpace& space);

/// h_t f via the spectral sum; t must be nonnegative.
Field heat_flow(const MeasureSpace& space, const HeatOperator& op, const Field& f, double t);

/// Dense kernel r_t(x,y) of h_t with respect to m, i.e.
/// (h_t f)(x) = sum_y r_t(x,y) f(y) m_y. Symmetric; tiny negative roundoff
/// in the far field is flushed to zero. t must be positive. For uniformly
/// accurate far-field values on grids use LogHeatKernel instead.
Matrix heat_kernel(const MeasureSpace& space, const HeatOperator& op, double t);

/// CSV rows "k,lambda".
void write_spectrum_csv(const HeatOperator& op, std::ostream& out);

} // namespace entrolab
