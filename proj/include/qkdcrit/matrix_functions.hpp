#pragma once

// Spectral matrix functions built on hermitian_eig: trace norm, PSD square
// root, Uhlmann fidelity, and the fidelity/trace-distance sandwich bounds.

#include <cmath>
#include <vector>

#include "complex_matrix.hpp"
#include "errors.hpp"
#include "hermitian_eig.hpp"

namespace qkdcrit {

/// Schatten 1-norm of a Hermitian matrix: sum of |eigenvalues|.
inline double trace_norm(const ComplexMatrix& a) {
  Spectrum s = hermitian_eig(a);
  double sum = 0.0;
  for (double v : s.values) sum += std::abs(v);
  return sum;
}

/// Positive and negative parts of a Hermitian matrix (A = P - N, P,N >= 0).
struct JordanParts {
  ComplexMatrix positive;
  ComplexMatrix negative;
  double positive_trace = 0.0;  // sum of positive eigenvalues
};

inline JordanParts jordan_decomposition(const ComplexMatrix& a) {
  Spectrum s = hermitian_eig(a);
  std::size_t n = s.values.size();
  std::vector<double> pos(n, 0.0), neg(n, 0.0);
  JordanParts out;
  for (std::size_t i = 0; i < n; ++i) {
    if (s.values[i] > 0.0) {
      pos[i] = s.values[i];
      out.positive_trace += s.values[i];
    } else {
      neg[i] = -s.values[i];
    }
  }
  out.positive = s.assemble(pos);
  out.negative = s.assemble(neg);
  return out;
}

/// Matrix sign(A) for Hermitian A (eigenvalues mapped to +/-1; zero stays 0).
inline ComplexMatrix matrix_sign(const ComplexMatrix& a, double zero_tol = 0.0) {
  Spectrum s = hermitian_eig(a);
  std::vector<double> sg(s.values.size());
  for (std::size_t i = 0; i < sg.size(); ++i) {
    if (s.values[i] > zero_tol)
      sg[i] = 1.0;
    else if (s.values[i] < -zero_tol)
      sg[i] = -1.0;
    else
      sg[i] = 0.0;
  }
  return s.assemble(sg);
}

/// |A| = sqrt(A^2) for Hermitian A.
inline ComplexMatrix matrix_abs(const ComplexMatrix& a) {
  Spectrum s = hermitian_eig(a);
  std::vector<double> ab(s.values.size());
  for (std::size_t i = 0; i < ab.size(); ++i) ab[i] = std::abs(s.values[i]);
  return s.assemble(ab);
}

/// Square root of a positive semidefinite Hermitian matrix.  Eigenvalues in
/// [-clamp_tol, 0) are treated as roundoff and clamped to zero; anything
/// more negative throws NotStateError.  Eigenvalues below lambda_max * 1e-13
/// are zeroed as well: the square root turns roundoff-level eigenvalues
/// (~1e-16) into 1e-8-magnitude spurious modes otherwise, which is exactly
/// the amplification that breaks downstream 1e-9 tolerances on
/// rank-deficient inputs.
inline ComplexMatrix matrix_sqrt_psd(const ComplexMatrix& a,
                                     double clamp_tol = 1e-10) {
  Spectrum s = hermitian_eig(a);
  const double top = s.values.empty() ? 0.0 : std::max(s.values.front(), 0.0);
  const double cut = top * 1e-13;
  std::vector<double> rt(s.values.size());
  for (std::size_t i = 0; i < rt.size(); ++i) {
    double v = s.values[i];
    if (v < -clamp_tol)
      throw NotStateError("matrix_sqrt_psd: eigenvalue " + std::to_string(v) +
                          " below PSD tolerance");
    rt[i] = v > cut ? std::sqrt(v) : 0.0;
  }
  return s.assemble(rt);
}

/// Smallest eigenvalue of a Hermitian matrix.
inline double min_eigenvalue(const ComplexMatrix& a) {
  Spectrum s = hermitian_eig(a);
  return s.values.empty() ? 0.0 : s.values.back();
}

/// Largest eigenvalue of a Hermitian matrix.
inline double max_eigenvalue(const ComplexMatrix& a) {
  Spectrum s = hermitian_eig(a);
  return s.values.empty() ? 0.0 : s.values.front();
}

/// Uhlmann fidelity F(rho, sigma) = (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
/// Squared convention; F in [0,1] with F=1 iff rho == sigma.
inline double fidelity(const ComplexMatrix& rho, const ComplexMatrix& sigma) {
  if (rho.rows() != sigma.rows() || rho.cols() != sigma.cols())
    throw DimensionMismatchError("fidelity: dimensions differ");
  ComplexMatrix rt = matrix_sqrt_psd(rho);
  ComplexMatrix inner = (rt * sigma * rt).hermitized();
  Spectrum s = hermitian_eig(inner);
  // Same relative cutoff as matrix_sqrt_psd: sqrt amplifies roundoff-level
  // eigenvalues (1e-16 -> 1e-8), so drop anything below lambda_max * 1e-13.
  const double top = s.values.empty() ? 0.0 : std::max(s.values.front(), 0.0);
  const double cut = top * 1e-13;
  double sum = 0.0;
  for (double v : s.values) {
    if (v < -1e-10)
      throw NotStateError("fidelity: inner matrix has a negative eigenvalue");
    if (v > cut) sum += std::sqrt(v);
  }
  double f = sum * sum;
  if (f > 1.0 + 1e-9)
    throw NotStateError("fidelity: value exceeds 1 beyond tolerance");
  return std::min(f, 1.0);
}

/// The two-sided relation between fidelity and trace distance:
///   1 - sqrt(F) <= T <= sqrt(1 - F),  T = (1/2)||rho - sigma||_1.
struct FidelityDistanceBounds {
  double fidelity_value;
  double trace_distance;
  double lower;  // 1 - sqrt(F)
  double upper;  // sqrt(1 - F)
  bool holds;    // lower - tol <= T <= upper + tol
  double slack_lower;  // T - lower  (>= 0 when the bound holds)
  double slack_upper;  // upper - T  (>= 0 when the bound holds)
};

inline FidelityDistanceBounds fidelity_distance_bounds(
    const ComplexMatrix& rho, const ComplexMatrix& sigma, double tol = 1e-9) {
  FidelityDistanceBounds b;
  b.fidelity_value = fidelity(rho, sigma);
  b.trace_distance = 0.5 * trace_norm((rho - sigma).hermitized());
  double sf = std::sqrt(b.fidelity_value);
  b.lower = 1.0 - sf;
  b.upper = std::sqrt(std::max(0.0, 1.0 - b.fidelity_value));
  b.slack_lower = b.trace_distance - b.lower;
  b.slack_upper = b.upper - b.trace_distance;
  b.holds = (b.slack_lower >= -tol) && (b.slack_upper >= -tol);
  return b;
}

}  // namespace qkdcrit
