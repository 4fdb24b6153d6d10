#pragma once

// Validated density operators plus random-state generators for the
// property-test suites.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "complex_matrix.hpp"
#include "errors.hpp"
#include "hermitian_eig.hpp"
#include "rng.hpp"

namespace qkdcrit {

/// A density operator: Hermitian, unit trace, positive semidefinite.
/// Construction validates all three (tolerances below); use from_trusted for
/// matrices that are PSD by construction (e.g. block-diagonal assembly of
/// already-validated blocks) where a full eigensolve would be wasteful.
class DensityOperator {
public:
  static constexpr double kTraceTol = 1e-9;
  static constexpr double kPsdTol = 1e-9;

  explicit DensityOperator(const ComplexMatrix& m) : m_(m.hermitized()) {
    validate(m);
  }

  static DensityOperator from_trusted(ComplexMatrix m) {
    DensityOperator d;
    d.m_ = std::move(m);
    return d;
  }

  /// Maximally mixed state I/d.
  static DensityOperator maximally_mixed(std::size_t dim) {
    ComplexMatrix m = ComplexMatrix::identity(dim);
    m *= cplx(1.0 / static_cast<double>(dim), 0.0);
    return from_trusted(std::move(m));
  }

  /// Pure state |v><v| (v is normalized internally).
  static DensityOperator pure(const std::vector<cplx>& v) {
    double n2 = 0.0;
    for (const auto& c : v) n2 += std::norm(c);
    if (n2 <= 0.0) throw NotStateError("pure state: zero vector");
    return from_trusted(ComplexMatrix::outer(v, /*normalize=*/true));
  }

  const ComplexMatrix& matrix() const { return m_; }
  std::size_t dim() const { return m_.rows(); }

private:
  DensityOperator() = default;

  void validate(const ComplexMatrix& raw) const {
    if (!raw.is_square()) throw NotStateError("density operator must be square");
    if (raw.rows() == 0) throw NotStateError("density operator is empty");
    if (raw.rows() > kMaxDim)
      throw DimensionCapError("density operator dimension exceeds cap");
    double scale = std::max(1.0, raw.max_abs());
    if (!raw.is_hermitian(1e-10 * scale))
      throw NotHermitianError("density operator is not Hermitian");
    double tr = m_.trace().real();
    if (std::abs(tr - 1.0) > kTraceTol)
      throw NotStateError("density operator trace " + std::to_string(tr) +
                          " is not 1");
    Spectrum s = hermitian_eig(m_);
    if (!s.values.empty() && s.values.back() < -kPsdTol)
      throw NotStateError("density operator has eigenvalue " +
                          std::to_string(s.values.back()));
  }

  ComplexMatrix m_;
};

/// Random density operator from the Ginibre ensemble: G G^dagger / Tr.
/// rank < dim gives a rank-deficient state (G is dim x rank).
inline DensityOperator random_density(std::size_t dim, Rng& rng,
                                      std::size_t rank = 0) {
  if (rank == 0) rank = dim;
  ComplexMatrix g(dim, rank);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < rank; ++j)
      g(i, j) = cplx(rng.normal(), rng.normal());
  ComplexMatrix rho = g * g.adjoint();
  double tr = rho.trace().real();
  if (tr <= 0.0) return DensityOperator::maximally_mixed(dim);
  rho *= cplx(1.0 / tr, 0.0);
  return DensityOperator(rho.hermitized());
}

/// Random pure-state ket, Haar-distributed.
inline std::vector<cplx> random_ket(std::size_t dim, Rng& rng) {
  std::vector<cplx> v(dim);
  double n2 = 0.0;
  for (auto& c : v) {
    c = cplx(rng.normal(), rng.normal());
    n2 += std::norm(c);
  }
  double inv = 1.0 / std::sqrt(n2);
  for (auto& c : v) c *= inv;
  return v;
}

}  // namespace qkdcrit
