#pragma once

// Eigendecomposition of Hermitian matrices via cyclic Jacobi with complex
// (phase-carrying) rotations.  Hand-rolled on purpose: the dimensions in
// this codebase are small, Jacobi is backward-stable, and carrying a full
// linear-algebra dependency for 64x64 Hermitian problems is not worth it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "complex_matrix.hpp"
#include "errors.hpp"

namespace qkdcrit {

/// Eigensystem of a Hermitian matrix.  Eigenvalues are sorted descending;
/// eigenvectors are the columns of `vectors` in matching order, so
/// A = V diag(values) V^dagger.
struct Spectrum {
  std::vector<double> values;
  ComplexMatrix vectors;

  /// V diag(f(values)) V^dagger.
  ComplexMatrix assemble(const std::vector<double>& diag) const {
    std::size_t n = values.size();
    ComplexMatrix out(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        cplx sum = 0.0;
        for (std::size_t k = 0; k < n; ++k)
          sum += vectors(i, k) * diag[k] * std::conj(vectors(j, k));
        out(i, j) = sum;
      }
    return out;
  }

  ComplexMatrix reconstruct() const { return assemble(values); }
};

/// Full eigensystem of a Hermitian matrix.  Throws NotHermitianError if the
/// input fails the Hermiticity tolerance; roundoff-level asymmetry below the
/// tolerance is scrubbed before iterating.
inline Spectrum hermitian_eig(const ComplexMatrix& input,
                              double hermiticity_tol = 1e-10) {
  if (!input.is_square())
    throw DimensionMismatchError("hermitian_eig: matrix not square");
  const std::size_t n = input.rows();
  if (n == 0) return Spectrum{{}, ComplexMatrix(0, 0)};
  if (n > kMaxDim)
    throw DimensionCapError("hermitian_eig: dimension exceeds cap");

  // Tolerance is relative to the matrix scale (absolute for tiny matrices).
  double scale = std::max(1.0, input.max_abs());
  if (!input.is_hermitian(hermiticity_tol * scale))
    throw NotHermitianError("hermitian_eig: matrix is not Hermitian");

  ComplexMatrix a = input.hermitized();
  ComplexMatrix v = ComplexMatrix::identity(n);

  auto off_norm = [&]() {
    double s = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) s += std::norm(a(p, q));
    return std::sqrt(2.0 * s);
  };

  const double frob = std::max(1.0, a.frobenius_norm());
  const double stop = 1e-14 * frob;
  const int max_sweeps = 64;

  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    if (off_norm() <= stop) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const cplx apq = a(p, q);
        const double r = std::abs(apq);
        if (r <= 1e-300) {
          a(p, q) = 0.0;
          a(q, p) = 0.0;
          continue;
        }
        const double app = a(p, p).real();
        const double aqq = a(q, q).real();
        // Skip rotations that cannot move anything at working precision.
        if (r <= 1e-18 * (std::abs(app) + std::abs(aqq))) continue;

        const cplx phase = apq / r;  // e^{i arg(apq)}
        const double tau = (aqq - app) / (2.0 * r);
        // Smaller-magnitude root of t^2 - 2 tau t - 1 = 0 for a stable
        // rotation angle: t = tau - sign(tau) sqrt(1 + tau^2), computed
        // without cancellation.
        const double t = (tau >= 0.0)
                             ? -1.0 / (tau + std::sqrt(1.0 + tau * tau))
                             : 1.0 / (-tau + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;

        // A <- U^dagger A U with U acting on the (p,q) plane:
        //   U(p,p)=c, U(p,q)=-s*phase, U(q,p)=s*conj(phase), U(q,q)=c.
        for (std::size_t k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const cplx akp = a(k, p);
          const cplx akq = a(k, q);
          a(k, p) = akp * c + akq * s * std::conj(phase);
          a(k, q) = -akp * s * phase + akq * c;
          a(p, k) = std::conj(a(k, p));
          a(q, k) = std::conj(a(k, q));
        }
        const double delta = 2.0 * r * s * c;
        a(p, p) = app * c * c + aqq * s * s + delta;
        a(q, q) = app * s * s + aqq * c * c - delta;
        a(p, q) = 0.0;
        a(q, p) = 0.0;

        // Accumulate V <- V U (same column transformation).
        for (std::size_t k = 0; k < n; ++k) {
          const cplx vkp = v(k, p);
          const cplx vkq = v(k, q);
          v(k, p) = vkp * c + vkq * s * std::conj(phase);
          v(k, q) = -vkp * s * phase + vkq * c;
        }
      }
    }
  }
  if (sweep == max_sweeps && off_norm() > stop * 100.0)
    throw Error("hermitian_eig: Jacobi sweeps did not converge");

  Spectrum spec;
  spec.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) spec.values[i] = a(i, i).real();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return spec.values[x] > spec.values[y];
  });

  std::vector<double> sorted(n);
  ComplexMatrix vs(n, n);
  for (std::size_t c2 = 0; c2 < n; ++c2) {
    sorted[c2] = spec.values[order[c2]];
    for (std::size_t r2 = 0; r2 < n; ++r2) vs(r2, c2) = v(r2, order[c2]);
  }
  spec.values = std::move(sorted);
  spec.vectors = std::move(vs);
  return spec;
}

}  // namespace qkdcrit
