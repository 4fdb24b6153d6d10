#pragma once

// Security criteria for classical-quantum key states:
//   * trace distance to the ideal key state, d = min_sigma (1/2)||rho_SE -
//     omega (x) sigma||_1, in exact-min and reduced-seed modes;
//   * Helstrom minimum-error discrimination value;
//   * whole-key guessing probability with certified lower/upper bounds;
//   * the bound P_suc <= 2^-n + d and the assessment record built on it;
//   * the Markov lift eps_F = eps_sec^(1/3) (exponent configurable);
//   * the eta_Z / eta_X / key-distance quantities of the Z-protocol bound.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "complex_matrix.hpp"
#include "cq_state.hpp"
#include "density_operator.hpp"
#include "errors.hpp"
#include "hermitian_eig.hpp"
#include "json.hpp"
#include "matrix_functions.hpp"

namespace qkdcrit {

// ---------------------------------------------------------------------------
// Common eigenbasis detection.
//
// The simulator's side-information states are diagonal in a product basis, so
// most real workloads are secretly classical.  When every operator in a set
// commutes, the analysis below switches to exact classical computations; this
// helper finds the shared basis or reports that there is none.
// ---------------------------------------------------------------------------

struct CommonBasis {
  bool found = false;
  ComplexMatrix basis;                      // unitary; columns are the basis
  std::vector<std::vector<double>> diags;   // per input, diag of V^dag A V
};

namespace detail {

inline bool nearly_diagonal(const ComplexMatrix& a, double tol) {
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j && std::abs(a(i, j)) > tol) return false;
  return true;
}

inline std::vector<double> real_diagonal(const ComplexMatrix& a) {
  std::vector<double> d(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) d[i] = a(i, i).real();
  return d;
}

}  // namespace detail

inline CommonBasis find_common_eigenbasis(const std::vector<ComplexMatrix>& mats,
                                          double tol = 1e-10) {
  CommonBasis out;
  if (mats.empty()) return out;
  const std::size_t dim = mats.front().rows();
  for (const auto& m : mats)
    if (m.rows() != dim || m.cols() != dim)
      throw DimensionMismatchError("find_common_eigenbasis: mixed dimensions");

  if (dim == 1) {
    out.found = true;
    out.basis = ComplexMatrix::identity(1);
    for (const auto& m : mats) out.diags.push_back({m(0, 0).real()});
    return out;
  }

  // Fast path: everything already diagonal in the computational basis.
  bool all_diag = true;
  for (const auto& m : mats)
    if (!detail::nearly_diagonal(m, tol)) {
      all_diag = false;
      break;
    }
  if (all_diag) {
    out.found = true;
    out.basis = ComplexMatrix::identity(dim);
    for (const auto& m : mats) out.diags.push_back(detail::real_diagonal(m));
    return out;
  }

  // Necessary condition: pairwise commutation.
  for (std::size_t i = 0; i < mats.size(); ++i)
    for (std::size_t j = i + 1; j < mats.size(); ++j)
      if (ComplexMatrix::commutator_max_abs(mats[i], mats[j]) > tol) return out;

  // Diagonalize a generic positive combination; with probability one its
  // eigenbasis diagonalizes every commuting member.  Two weight sets guard
  // against an unlucky eigenvalue collision; give up (caller falls back to
  // the dense path) if both fail.
  for (int attempt = 0; attempt < 2; ++attempt) {
    ComplexMatrix t(dim, dim);
    std::uint64_t lcg = attempt == 0 ? 0x9E3779B97F4A7C15ULL : 0xD1B54A32D192ED03ULL;
    for (const auto& m : mats) {
      lcg = lcg * 6364136223846793005ULL + 1442695040888963407ULL;
      double w = 1.0 + static_cast<double>(lcg >> 11) * 0x1.0p-53;
      ComplexMatrix term = m;
      term *= cplx(w, 0.0);
      t += term;
    }
    Spectrum s = hermitian_eig(t.hermitized());
    bool ok = true;
    std::vector<std::vector<double>> diags;
    diags.reserve(mats.size());
    for (const auto& m : mats) {
      ComplexMatrix rotated = s.vectors.adjoint() * m * s.vectors;
      if (!detail::nearly_diagonal(rotated, 50.0 * tol)) {
        ok = false;
        break;
      }
      diags.push_back(detail::real_diagonal(rotated));
    }
    if (ok) {
      out.found = true;
      out.basis = s.vectors;
      out.diags = std::move(diags);
      return out;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Helstrom minimum-error discrimination.
// ---------------------------------------------------------------------------

/// Optimal success probability for discriminating rho1 (prior p1) from rho2:
///   P = (1/2)(1 + || p1 rho1 - (1-p1) rho2 ||_1),
/// the equal-prior case reducing to 1/2 + (1/4)||rho1 - rho2||_1.
inline double helstrom(double p1, const DensityOperator& rho1,
                       const DensityOperator& rho2) {
  if (p1 < 0.0 || p1 > 1.0)
    throw OutOfRangeError("helstrom: prior outside [0,1]");
  if (rho1.dim() != rho2.dim())
    throw DimensionMismatchError("helstrom: state dimensions differ");
  ComplexMatrix d = rho1.matrix();
  d *= cplx(p1, 0.0);
  ComplexMatrix d2 = rho2.matrix();
  d2 *= cplx(1.0 - p1, 0.0);
  d -= d2;
  return 0.5 * (1.0 + trace_norm(d.hermitized()));
}

// ---------------------------------------------------------------------------
// Whole-key guessing probability with certified two-sided bounds.
// ---------------------------------------------------------------------------

inline constexpr std::size_t kGuessingMaxLabels = 64;
inline constexpr std::size_t kGuessingMaxDim = 64;
inline constexpr double kCertificateGapFlagThreshold = 1e-5;

struct GuessingBounds {
  double lower = 0.0;   // value of an explicitly constructed measurement
  double upper = 1.0;   // trace of a verified dual-feasible certificate
  bool exact = false;   // both sides coincide by construction
  double certificate_gap = 0.0;
  bool gap_flag = false;
  /// Trace of the trivial certificate (the side-information marginal scaled
  /// to dual feasibility); the returned upper bound never exceeds it.
  double trivial_certificate_trace = 1.0;
  std::string method;
  std::size_t iterations = 0;
};

namespace detail {

struct WeightedStates {
  std::vector<ComplexMatrix> a;   // A_x = p_x rho_x, active labels only
  std::vector<double> p;          // matching probabilities
  std::size_t dim = 0;
};

inline WeightedStates active_weighted_states(const CqState& s) {
  WeightedStates w;
  w.dim = s.dim_e();
  for (std::size_t x = 0; x < s.label_count(); ++x) {
    if (s.prob(x) <= 0.0) continue;
    ComplexMatrix m = s.state(x).matrix();
    m *= cplx(s.prob(x), 0.0);
    w.a.push_back(std::move(m));
    w.p.push_back(s.prob(x));
  }
  return w;
}

/// Pseudo inverse square root and support/kernel projectors of a PSD matrix.
struct SupportSplit {
  ComplexMatrix inv_sqrt;   // S^{-1/2} on the support, 0 on the kernel
  ComplexMatrix kernel;     // projector onto the kernel
  std::size_t rank = 0;
};

inline SupportSplit support_split(const ComplexMatrix& s, double rel_cut = 1e-13) {
  Spectrum spec = hermitian_eig(s);
  double top = spec.values.empty() ? 0.0 : std::max(spec.values.front(), 0.0);
  double cut = top * rel_cut;
  std::size_t n = spec.values.size();
  std::vector<double> inv(n, 0.0), ker(n, 0.0);
  SupportSplit out;
  for (std::size_t i = 0; i < n; ++i) {
    if (spec.values[i] > cut) {
      inv[i] = 1.0 / std::sqrt(spec.values[i]);
      ++out.rank;
    } else {
      ker[i] = 1.0;
    }
  }
  out.inv_sqrt = spec.assemble(inv);
  out.kernel = spec.assemble(ker);
  return out;
}

/// Trace of the marginal scaled to dual feasibility: c = max_x lambda_max of
/// S^{-1/2} A_x S^{-1/2} (so c*S - A_x >= 0 for all x), certificate trace c.
inline double scaled_marginal_trace(const std::vector<ComplexMatrix>& a,
                                    const SupportSplit& split) {
  double c = 0.0;
  for (const auto& ax : a) {
    ComplexMatrix t = (split.inv_sqrt * ax * split.inv_sqrt).hermitized();
    c = std::max(c, max_eigenvalue(t));
  }
  return c;
}

/// Verify sigma - A_x >= -tol for all x, repairing small violations by
/// shifting sigma along the identity.  Returns the certified trace, or a
/// negative value if the candidate cannot be repaired.
inline double certify_dual(ComplexMatrix sigma,
                           const std::vector<ComplexMatrix>& a,
                           double tol = 1e-12) {
  const std::size_t dim = sigma.rows();
  for (int round = 0; round < 4; ++round) {
    double worst = 0.0;
    for (const auto& ax : a)
      worst = std::min(worst, min_eigenvalue((sigma - ax).hermitized()));
    if (worst >= -tol) return sigma.trace().real();
    ComplexMatrix shift = ComplexMatrix::identity(dim);
    shift *= cplx(-worst + 1e-13, 0.0);
    sigma += shift;
  }
  return -1.0;
}

}  // namespace detail

/// Certified bounds on P_suc = max over measurements of the probability of
/// guessing the whole key from the side information.  Exact values are
/// produced for one- and two-label ensembles and whenever all weighted
/// states commute (which covers every simulator-produced state); otherwise a
/// pretty-good-measurement start refined by the standard fixed-point
/// iteration supplies the lower bound and repaired dual certificates supply
/// the upper bound, with the gap flagged above 1e-5.
inline GuessingBounds guessing_probability(const CqState& s) {
  if (s.label_count() > kGuessingMaxLabels)
    throw DimensionCapError("guessing_probability: more than 64 labels");
  if (s.dim_e() > kGuessingMaxDim)
    throw DimensionCapError("guessing_probability: side information above 64 dims");

  detail::WeightedStates ws = detail::active_weighted_states(s);
  const std::size_t nact = ws.a.size();
  const std::size_t dim = ws.dim;
  GuessingBounds out;

  // Marginal and its scaled-to-feasibility certificate (reported always).
  ComplexMatrix marginal(dim, dim);
  for (const auto& ax : ws.a) marginal += ax;
  marginal = marginal.hermitized();
  detail::SupportSplit split = detail::support_split(marginal);
  out.trivial_certificate_trace = detail::scaled_marginal_trace(ws.a, split);

  if (nact == 0) throw NotStateError("guessing_probability: no active labels");

  if (nact == 1) {
    // Single possible key value: always guess it.
    out.lower = out.upper = ws.p[0];
    out.exact = true;
    out.method = "trivial";
    out.certificate_gap = 0.0;
    return out;
  }

  if (nact == 2) {
    // Binary ensembles are exactly solvable: the optimal measurement is the
    // positive-part projector of A_0 - A_1 and the matching dual certificate
    // is (A_0 + A_1 + |A_0 - A_1|)/2.
    ComplexMatrix d = (ws.a[0] - ws.a[1]).hermitized();
    Spectrum spec = hermitian_eig(d);
    std::vector<double> pos(spec.values.size(), 0.0);
    for (std::size_t i = 0; i < spec.values.size(); ++i)
      if (spec.values[i] > 0.0) pos[i] = 1.0;
    ComplexMatrix m0 = spec.assemble(pos);
    ComplexMatrix m1 = ComplexMatrix::identity(dim) - m0;
    out.lower = ((m0 * ws.a[0]).trace() + (m1 * ws.a[1]).trace()).real();

    ComplexMatrix sigma = ws.a[0] + ws.a[1] + matrix_abs(d);
    sigma *= cplx(0.5, 0.0);
    double cert = detail::certify_dual(sigma.hermitized(), ws.a);
    out.upper = cert >= 0.0 ? cert : out.trivial_certificate_trace;
    out.upper = std::min(out.upper, out.trivial_certificate_trace);
    out.upper = std::max(out.upper, out.lower);
    out.certificate_gap = out.upper - out.lower;
    out.gap_flag = out.certificate_gap > kCertificateGapFlagThreshold;
    out.exact = !out.gap_flag;
    out.method = "binary-exact";
    return out;
  }

  // Commuting ensembles reduce to classical maximum-likelihood decoding.
  CommonBasis cb = find_common_eigenbasis(ws.a);
  if (cb.found) {
    double value = 0.0;
    for (std::size_t e = 0; e < dim; ++e) {
      double best = 0.0;
      for (std::size_t x = 0; x < nact; ++x)
        best = std::max(best, cb.diags[x][e]);
      value += best;
    }
    out.lower = out.upper = std::min(value, out.trivial_certificate_trace);
    // The classical optimum is also dual-optimal; numerically it can sit a
    // hair above the scaled-marginal trace, hence the min above.
    out.upper = std::max(out.upper, out.lower);
    out.exact = true;
    out.certificate_gap = 0.0;
    out.method = "commuting-exact";
    return out;
  }

  // General case: pretty-good measurement, refined by the fixed-point
  // iteration M_x <- W A_x M_x A_x W with W = (sum_y A_y M_y A_y + P_ker)^{-1/2}.
  std::vector<ComplexMatrix> m(nact);
  for (std::size_t x = 0; x < nact; ++x)
    m[x] = (split.inv_sqrt * ws.a[x] * split.inv_sqrt).hermitized();
  std::size_t star = 0;
  for (std::size_t x = 1; x < nact; ++x)
    if (ws.p[x] > ws.p[star]) star = x;

  auto complete = [&](std::vector<ComplexMatrix>& povm) {
    ComplexMatrix defect = ComplexMatrix::identity(dim);
    for (const auto& mx : povm) defect -= mx;
    povm[star] = (povm[star] + defect).hermitized();
  };
  auto value_of = [&](const std::vector<ComplexMatrix>& povm) {
    double v = 0.0;
    for (std::size_t x = 0; x < nact; ++x)
      v += (povm[x] * ws.a[x]).trace().real();
    return v;
  };

  complete(m);
  double best_lower = value_of(m);
  // Baseline: ignore the states and always emit the most likely label.
  best_lower = std::max(best_lower, ws.p[star]);

  const std::size_t max_iter = 600;
  double prev = best_lower;
  std::size_t flat = 0;
  std::size_t t = 0;
  for (; t < max_iter; ++t) {
    ComplexMatrix sm = split.kernel;
    for (std::size_t x = 0; x < nact; ++x) sm += ws.a[x] * m[x] * ws.a[x];
    detail::SupportSplit wsp = detail::support_split(sm.hermitized(), 1e-14);
    for (std::size_t x = 0; x < nact; ++x)
      m[x] = (wsp.inv_sqrt * ws.a[x] * m[x] * ws.a[x] * wsp.inv_sqrt).hermitized();
    complete(m);
    double v = value_of(m);
    best_lower = std::max(best_lower, v);
    if (std::abs(v - prev) < 1e-13) {
      if (++flat >= 20) break;
    } else {
      flat = 0;
    }
    prev = v;
  }
  out.iterations = t;
  out.lower = best_lower;

  // Dual certificates: Hermitian part of sum_x A_x M_x (stationary-point
  // candidate), the scaled marginal, and the eigenvalue envelope lambda*I.
  double upper = out.trivial_certificate_trace;
  {
    ComplexMatrix y(dim, dim);
    for (std::size_t x = 0; x < nact; ++x) y += ws.a[x] * m[x];
    double cert = detail::certify_dual(y.hermitized(), ws.a);
    if (cert >= 0.0) upper = std::min(upper, cert);
  }
  {
    double lam = 0.0;
    for (const auto& ax : ws.a) lam = std::max(lam, max_eigenvalue(ax));
    upper = std::min(upper, lam * static_cast<double>(dim));
  }
  out.upper = std::max(upper, out.lower);
  out.certificate_gap = out.upper - out.lower;
  out.gap_flag = out.certificate_gap > kCertificateGapFlagThreshold;
  out.exact = false;
  out.method = "pgm-fixed-point-dual";
  return out;
}

// ---------------------------------------------------------------------------
// Trace distance to the ideal key state.
// ---------------------------------------------------------------------------

enum class DistanceMode { kExactMin, kReducedSeed };

inline const char* to_string(DistanceMode m) {
  return m == DistanceMode::kExactMin ? "exact-min" : "reduced-seed";
}

struct TraceDistanceResult {
  double d = 0.0;
  DistanceMode mode = DistanceMode::kExactMin;
  bool converged = true;
  std::size_t iterations = 0;
  std::string method;   // "reduced-seed" | "commuting-exact" | "subgradient"
};

namespace detail {

/// (1/2) [ sum over active labels of ||A_x - w sigma||_1 + missing * w ]
/// where sigma is a density operator (so each absent or zero-probability
/// label contributes exactly w to the sum).
inline double distance_objective(const WeightedStates& ws,
                                 const ComplexMatrix& sigma, double w,
                                 double missing) {
  double sum = missing * w;
  for (const auto& ax : ws.a) {
    ComplexMatrix block = sigma;
    block *= cplx(-w, 0.0);
    block += ax;
    sum += trace_norm(block.hermitized());
  }
  return 0.5 * sum;
}

/// Same objective for diagonal sigma in the common eigenbasis.
inline double diagonal_objective(const std::vector<std::vector<double>>& a,
                                 const std::vector<double>& q, double w,
                                 double missing) {
  double sum = 0.0;
  for (std::size_t e = 0; e < q.size(); ++e) {
    for (const auto& ax : a) sum += std::abs(ax[e] - w * q[e]);
    sum += missing * w * q[e];
  }
  return 0.5 * sum;
}

/// Minimizer of phi_e(q) + nu q over q >= 0, where
///   phi_e(q) = sum_x |a_x[e] - w q| + missing * w * q.
/// phi_e is piecewise linear with breakpoints at a_x[e]/w; the slope after k
/// breakpoints is w (2k - L + missing) + nu, so the minimizer is the first
/// breakpoint where the slope turns nonnegative.
inline double lagrangian_coordinate(const std::vector<double>& breaks, double w,
                                    double missing, double nu) {
  const double l = static_cast<double>(breaks.size());
  double slope = w * (missing - l) + nu;   // slope on [0, first breakpoint)
  if (slope >= 0.0) return 0.0;
  for (std::size_t k = 0; k < breaks.size(); ++k) {
    slope = w * (2.0 * static_cast<double>(k + 1) - l + missing) + nu;
    if (slope >= 0.0) return breaks[k];
  }
  return 1e30;   // unbounded below; the bisection will raise nu
}

/// Euclidean projection of a real vector onto the probability simplex.
inline std::vector<double> project_simplex(std::vector<double> v) {
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0.0, tau = 0.0;
  std::size_t rho = 0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cum += u[k];
    double cand = (cum - 1.0) / static_cast<double>(k + 1);
    if (u[k] - cand > 0.0) {
      rho = k + 1;
      tau = cand;
    }
  }
  if (rho == 0) {
    // Degenerate input; fall back to uniform.
    std::fill(v.begin(), v.end(), 1.0 / static_cast<double>(v.size()));
    return v;
  }
  for (auto& x : v) x = std::max(0.0, x - tau);
  return v;
}

/// Project a Hermitian matrix onto the set of density operators (eigenvalue
/// simplex projection).
inline ComplexMatrix project_density(const ComplexMatrix& m) {
  Spectrum s = hermitian_eig(m.hermitized());
  std::vector<double> lam = project_simplex(s.values);
  return s.assemble(lam);
}

}  // namespace detail

/// Distance to the ideal key state, d = (1/2) || rho_SE - omega (x) sigma ||_1
/// with omega the uniform key over all 2^n labels.  kReducedSeed evaluates at
/// sigma = reduced side-information state; kExactMin minimizes over sigma.
/// The minimization is exact whenever all weighted states commute (a pinching
/// argument confines the optimum to the common eigenbasis, where the problem
/// separates per eigenvector and a Lagrangian bisection solves it); otherwise
/// projected subgradient descent runs from the reduced seed with a 1/sqrt(t)
/// schedule, a 5000-iteration cap, and a non-convergence flag.
inline TraceDistanceResult trace_distance_to_ideal(
    const CqState& s, DistanceMode mode = DistanceMode::kExactMin) {
  const std::size_t n = s.n_bits();
  const std::size_t de = s.dim_e();
  if (n >= 32 || (std::size_t{1} << n) > kMaxDim / de)
    throw DimensionCapError(
        "trace_distance_to_ideal: joint dimension exceeds cap");
  const double w = std::exp2(-static_cast<double>(n));

  detail::WeightedStates ws = detail::active_weighted_states(s);
  const double missing =
      std::exp2(static_cast<double>(n)) - static_cast<double>(ws.a.size());

  ComplexMatrix marginal(de, de);
  for (const auto& ax : ws.a) marginal += ax;
  marginal = marginal.hermitized();

  TraceDistanceResult out;
  out.mode = mode;

  if (mode == DistanceMode::kReducedSeed) {
    out.d = detail::distance_objective(ws, marginal, w, missing);
    out.method = "reduced-seed";
    return out;
  }

  // Exact classical solve when everything shares an eigenbasis.  Pinching in
  // that basis fixes A_x and can only shrink each trace norm, so the optimal
  // sigma may be taken diagonal there; the problem then separates across
  // eigenvectors and bisection on the simplex multiplier nails it.
  std::vector<ComplexMatrix> mats = ws.a;
  mats.push_back(marginal);
  CommonBasis cb = find_common_eigenbasis(mats);
  if (cb.found) {
    std::vector<std::vector<double>> a(ws.a.size());
    for (std::size_t x = 0; x < ws.a.size(); ++x) {
      a[x] = cb.diags[x];
      for (auto& v : a[x]) v = std::max(v, 0.0);
    }
    // Per-coordinate sorted breakpoints a_x[e]/w.
    std::vector<std::vector<double>> breaks(de);
    for (std::size_t e = 0; e < de; ++e) {
      breaks[e].reserve(a.size());
      for (const auto& ax : a) breaks[e].push_back(ax[e] / w);
      std::sort(breaks[e].begin(), breaks[e].end());
    }
    const double l = static_cast<double>(a.size());
    double nu_lo = -w * (l + missing) - 1.0;   // sum(q) >= 1 here
    double nu_hi = w * (l + missing) + 1.0;    // q == 0 here
    auto q_of = [&](double nu) {
      std::vector<double> q(de);
      for (std::size_t e = 0; e < de; ++e)
        q[e] = detail::lagrangian_coordinate(breaks[e], w, missing, nu);
      return q;
    };
    auto sum_of = [](const std::vector<double>& q) {
      double s2 = 0.0;
      for (double v : q) s2 += v;
      return s2;
    };
    for (int it = 0; it < 200; ++it) {
      double mid = 0.5 * (nu_lo + nu_hi);
      (sum_of(q_of(mid)) >= 1.0 ? nu_lo : nu_hi) = mid;
    }
    std::vector<double> qlo = q_of(nu_lo), qhi = q_of(nu_hi);
    double slo = sum_of(qlo), shi = sum_of(qhi);
    std::vector<double> q(de);
    if (slo > 1e20 || slo <= shi) {
      q = detail::project_simplex(qhi);
    } else {
      double theta = (1.0 - shi) / (slo - shi);
      theta = std::clamp(theta, 0.0, 1.0);
      for (std::size_t e = 0; e < de; ++e)
        q[e] = theta * qlo[e] + (1.0 - theta) * qhi[e];
    }
    double best = detail::diagonal_objective(a, q, w, missing);
    // The seed is always admissible; keep whichever is smaller.
    std::vector<double> seed = cb.diags.back();
    for (auto& v : seed) v = std::max(v, 0.0);
    best = std::min(best, detail::diagonal_objective(a, seed, w, missing));
    out.d = best;
    out.method = "commuting-exact";
    out.iterations = 200;
    return out;
  }

  // Dense path: projected subgradient on the density-operator simplex.
  ComplexMatrix sigma = detail::project_density(marginal);
  double best = detail::distance_objective(ws, sigma, w, missing);
  double best_at_window_start = best;
  std::size_t iters = 0;
  bool stalled = false;
  const std::size_t cap = 5000;
  for (std::size_t t = 1; t <= cap; ++t) {
    // Subgradient: d/dsigma ||A_x - w sigma||_1 = -w sign(A_x - w sigma).
    ComplexMatrix g(de, de);
    for (const auto& ax : ws.a) {
      ComplexMatrix block = sigma;
      block *= cplx(-w, 0.0);
      block += ax;
      g -= matrix_sign(block.hermitized());
    }
    g *= cplx(0.5 * w, 0.0);
    double gn = g.frobenius_norm();
    if (gn < 1e-15) {
      stalled = true;
      iters = t;
      break;
    }
    double step = 0.5 / (gn * std::sqrt(static_cast<double>(t)));
    ComplexMatrix moved = sigma;
    g *= cplx(step, 0.0);
    moved -= g;
    sigma = detail::project_density(moved);
    best = std::min(best, detail::distance_objective(ws, sigma, w, missing));
    iters = t;
    if (t % 50 == 0) {
      if (best_at_window_start - best < 1e-9) {
        stalled = true;
        break;
      }
      best_at_window_start = best;
    }
  }
  out.d = best;
  out.method = "subgradient";
  out.iterations = iters;
  out.converged = stalled;
  return out;
}

// ---------------------------------------------------------------------------
// Markov lift eps_F = eps_sec^exponent.
// ---------------------------------------------------------------------------

inline constexpr double kDefaultMarkovExponent = 1.0 / 3.0;

inline double markov_epsilon_f(double eps_sec,
                               double exponent = kDefaultMarkovExponent) {
  if (eps_sec < 0.0 || eps_sec > 1.0)
    throw OutOfRangeError("markov_epsilon_f: eps_sec outside [0,1]");
  if (!(exponent > 0.0) || exponent > 1.0)
    throw OutOfRangeError("markov_epsilon_f: exponent outside (0,1]");
  return std::pow(eps_sec, exponent);
}

inline Log10Value markov_epsilon_f(const Log10Value& eps_sec,
                                   double exponent = kDefaultMarkovExponent) {
  if (eps_sec > Log10Value::one())
    throw OutOfRangeError("markov_epsilon_f: eps_sec above 1");
  if (!(exponent > 0.0) || exponent > 1.0)
    throw OutOfRangeError("markov_epsilon_f: exponent outside (0,1]");
  return eps_sec.is_zero() ? Log10Value::zero() : eps_sec.pow(exponent);
}

// ---------------------------------------------------------------------------
// Assessment record: distance, guessing bounds, and the P_suc <= 2^-n + d
// check in one structure.
// ---------------------------------------------------------------------------

struct SecurityAssessment {
  std::size_t key_bits = 0;
  double d = 0.0;
  std::string d_mode;
  bool d_converged = true;
  std::string d_method;
  /// Measured secrecy level of the state itself: (1 - p_abort) * d with
  /// p_abort = 0 in this abort-free, single-state context.
  double epsilon_sec = 0.0;
  double p_guess_lower = 0.0;
  double p_guess_upper = 1.0;
  bool p_guess_exact = false;
  double certificate_gap = 0.0;
  bool gap_flag = false;
  double y1_bound = 1.0;        // 2^-n + d
  double y1_slack = 0.0;        // y1_bound - p_guess_upper
  bool y1_holds = true;         // slack >= -1e-9
  double epsilon_f = 0.0;       // markov lift of epsilon_sec
  double markov_exponent = kDefaultMarkovExponent;

  nlohmann::json to_json() const {
    return nlohmann::json{
        {"key_bits", key_bits},
        {"d", d},
        {"d_mode", d_mode},
        {"d_converged", d_converged},
        {"d_method", d_method},
        {"epsilon_sec", epsilon_sec},
        {"p_guess_lower", p_guess_lower},
        {"p_guess_upper", p_guess_upper},
        {"p_guess_exact", p_guess_exact},
        {"certificate_gap", certificate_gap},
        {"certificate_gap_flag", gap_flag},
        {"y1_bound", y1_bound},
        {"y1_slack", y1_slack},
        {"y1_holds", y1_holds},
        {"epsilon_f", epsilon_f},
        {"markov_exponent", markov_exponent},
    };
  }
};

/// Evaluate the whole-key bound P_suc <= 2^-n + d on one cq state, returning
/// the full assessment.  The reported slack compares the bound against the
/// certified upper end of the guessing interval, so y1_holds is a certified
/// statement, not a point estimate.
inline SecurityAssessment theorem_y1_check(
    const CqState& s, DistanceMode mode = DistanceMode::kExactMin,
    double markov_exponent = kDefaultMarkovExponent) {
  SecurityAssessment a;
  a.key_bits = s.n_bits();
  TraceDistanceResult td = trace_distance_to_ideal(s, mode);
  GuessingBounds gb = guessing_probability(s);
  a.d = td.d;
  a.d_mode = to_string(td.mode);
  a.d_converged = td.converged;
  a.d_method = td.method;
  a.epsilon_sec = td.d;
  a.p_guess_lower = gb.lower;
  a.p_guess_upper = gb.upper;
  a.p_guess_exact = gb.exact;
  a.certificate_gap = gb.certificate_gap;
  a.gap_flag = gb.gap_flag;
  a.y1_bound = std::exp2(-static_cast<double>(s.n_bits())) + td.d;
  a.y1_slack = a.y1_bound - gb.upper;
  a.y1_holds = a.y1_slack >= -1e-9;
  a.markov_exponent = markov_exponent;
  a.epsilon_f = markov_epsilon_f(std::min(td.d, 1.0), markov_exponent);
  return a;
}

// ---------------------------------------------------------------------------
// Z-protocol failure quantities.
// ---------------------------------------------------------------------------

/// The eta_Z formula is transcribed with a doubled index and a 1/M factor
/// whose intent is ambiguous; both readings are computed and labeled rather
/// than silently choosing one.
struct EtaZReadings {
  double literal;        // 1 - (1/M) sum_i p_{i,i}
  double conventional;   // 1 - sum_i p_{i,i}
};

inline EtaZReadings koashi_eta_z(const std::vector<double>& joint,
                                 std::size_t m) {
  if (m == 0 || joint.size() != m * m)
    throw DimensionMismatchError("koashi_eta_z: joint must be M x M");
  double diag = 0.0;
  for (std::size_t k = 0; k < joint.size(); ++k) {
    if (joint[k] < 0.0)
      throw NegativeProbabilityError("koashi_eta_z: negative entry");
    if (k % m == k / m) diag += joint[k];
  }
  EtaZReadings out;
  out.literal = std::clamp(1.0 - diag / static_cast<double>(m), 0.0, 1.0);
  out.conventional = std::clamp(1.0 - diag, 0.0, 1.0);
  return out;
}

/// eta_X = 1 - <ideal| sigma_A |ideal>; the ket is normalized internally.
inline double koashi_eta_x(const DensityOperator& sigma_a,
                           const std::vector<cplx>& ideal) {
  if (ideal.size() != sigma_a.dim())
    throw DimensionMismatchError("koashi_eta_x: ket dimension mismatch");
  double n2 = 0.0;
  for (const auto& c : ideal) n2 += std::norm(c);
  if (n2 <= 0.0) throw NotStateError("koashi_eta_x: zero ket");
  cplx overlap = 0.0;
  for (std::size_t i = 0; i < ideal.size(); ++i)
    for (std::size_t j = 0; j < ideal.size(); ++j)
      overlap += std::conj(ideal[i]) * sigma_a.matrix()(i, j) * ideal[j];
  return std::clamp(1.0 - overlap.real() / n2, 0.0, 1.0);
}

/// Key failure bound 2 eta_Z + 2 sqrt(eta_X).
inline double koashi_k1_bound(double eta_z, double eta_x) {
  if (eta_z < 0.0 || eta_z > 1.0 || eta_x < 0.0 || eta_x > 1.0)
    throw OutOfRangeError("koashi_k1_bound: eta outside [0,1]");
  return 2.0 * eta_z + 2.0 * std::sqrt(eta_x);
}

/// Measured key distance || rho_SE - omega (x) rho_E ||, reported under both
/// norm normalizations (the source formula omits the customary 1/2; we do
/// not guess, we report both).
struct EtaKeyReadings {
  double full;     // || rho - omega (x) rho_E ||_1
  double halved;   // half of it
};

inline EtaKeyReadings koashi_eta_key(const CqState& s) {
  TraceDistanceResult td =
      trace_distance_to_ideal(s, DistanceMode::kReducedSeed);
  return EtaKeyReadings{2.0 * td.d, td.d};
}

}  // namespace qkdcrit
