#pragma once

// Key-length and rate formulas: the leftover-hash distance Delta, the
// finite-key length bound, the uniformity rate lambda defined through
// eps_F = 2^(-lambda n), the n - K_Z - K_X length, and the final rate after
// subtractions.  Everything probability-like is carried in the log domain
// because the quantities of interest reach 2^-10000.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "json.hpp"
#include "log_value.hpp"

namespace qkdcrit {

/// Binary entropy h2(p) in bits.
inline double binary_entropy(double p) {
  if (p < 0.0 || p > 1.0)
    throw OutOfRangeError("binary_entropy: argument outside [0,1]");
  if (p == 0.0 || p == 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

// ---------------------------------------------------------------------------
// Parameters.
// ---------------------------------------------------------------------------

struct KeyRateParams {
  double n = 0.0;             // sifted key length (bits)
  double q = 1.0;             // protocol efficiency parameter
  double q_tol = 0.0;         // tolerated QBER
  double epsilon = 1e-9;      // security parameter
  double epsilon_cor = 1e-15; // correctness parameter
  double epsilon_prime = 1e-9;// smoothing parameter
  double leak_ec = 0.0;       // error-correction leakage (bits)
  double auth_bits = 0.0;     // authentication cost (bits)
  double h_min_smooth = 0.0;  // smooth min-entropy input (bits, supplied)
  /// Statistical-fluctuation term mu(eps).  The default is the standard
  /// Chernoff-style sqrt(ln(2/eps) / (2n)) — a documented convention, not a
  /// quantity this library derives.
  std::function<double(double)> mu;
  bool mu_is_default = true;

  void finalize() {
    validate();
    if (!mu) {
      double nn = n;
      mu = [nn](double eps) { return std::sqrt(std::log(2.0 / eps) / (2.0 * nn)); };
      mu_is_default = true;
    }
  }

  void validate() const {
    if (!(n >= 1.0)) throw OutOfRangeError("KeyRateParams: n must be >= 1");
    if (!(q > 0.0) || q > 1.0)
      throw OutOfRangeError("KeyRateParams: q outside (0,1]");
    if (q_tol < 0.0 || q_tol >= 0.5)
      throw OutOfRangeError("KeyRateParams: Q_tol outside [0, 1/2)");
    for (double e : {epsilon, epsilon_cor})
      if (!(e > 0.0) || !(e < 1.0))
        throw OutOfRangeError("KeyRateParams: epsilon parameters must be in (0,1)");
    if (epsilon_prime < 0.0 || epsilon_prime >= 1.0)
      throw OutOfRangeError("KeyRateParams: epsilon_prime outside [0,1)");
    if (leak_ec < 0.0 || auth_bits < 0.0 || h_min_smooth < 0.0)
      throw OutOfRangeError("KeyRateParams: bit counts must be >= 0");
  }
};

// ---------------------------------------------------------------------------
// Leftover-hash distance Delta = (1/2) sqrt(2^(l - H)) + eps'.
// ---------------------------------------------------------------------------

struct LhlDelta {
  double delta = 0.0;        // evaluated bound (may exceed 1)
  Log10Value sqrt_term;      // (1/2) 2^((l-H)/2), exact in the log domain
  double epsilon_prime = 0.0;
  bool vacuous = false;      // delta > 1: bound says nothing
};

inline LhlDelta leftover_hash_delta(double l, double h_min_smooth,
                                    double epsilon_prime) {
  if (l < 0.0) throw OutOfRangeError("leftover_hash_delta: l must be >= 0");
  if (epsilon_prime < 0.0 || epsilon_prime >= 1.0)
    throw OutOfRangeError("leftover_hash_delta: epsilon_prime outside [0,1)");
  LhlDelta out;
  out.sqrt_term = Log10Value::from_log2(0.5 * (l - h_min_smooth) - 1.0);
  out.epsilon_prime = epsilon_prime;
  out.delta = out.sqrt_term.value() + epsilon_prime;
  out.vacuous = out.delta > 1.0;
  return out;
}

/// Grid minimization over the smoothing parameter: the source formula leads
/// with a "min" whose variable is unstated, so the choice of eps' is exposed
/// — pass candidate values and the smallest Delta wins.
inline LhlDelta leftover_hash_delta(double l, double h_min_smooth,
                                    const std::vector<double>& eps_prime_grid) {
  if (eps_prime_grid.empty())
    throw OutOfRangeError("leftover_hash_delta: empty epsilon_prime grid");
  bool have = false;
  LhlDelta best;
  for (double ep : eps_prime_grid) {
    LhlDelta cand = leftover_hash_delta(l, h_min_smooth, ep);
    if (!have || cand.delta < best.delta) {
      best = cand;
      have = true;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Finite-key length bound.
// ---------------------------------------------------------------------------

struct TomamichelLength {
  double l = 0.0;            // floor of the clamped real value
  double l_real = 0.0;       // before flooring/clamping
  bool clamped = false;      // l_real < 0
  bool entropy_saturated = false;  // Q_tol + mu >= 1/2: bound vacuous, l = 0
  double mu_value = 0.0;
  double entropy_argument = 0.0;
};

/// l = max(0, floor( n q - n h2(Q_tol + mu(eps)) - 2 log2(1/(2 eps))
///                   - leak_EC - log2(2/eps_cor) )).
/// This is the reading in which h2 applies to (Q_tol + mu(eps)) and the
/// length clamps at zero — the only dimensionally coherent parenthesization
/// of the transcribed formula (see report footers).
inline TomamichelLength tomamichel_length(KeyRateParams params) {
  params.finalize();
  TomamichelLength out;
  out.mu_value = params.mu(params.epsilon);
  if (out.mu_value < 0.0)
    throw OutOfRangeError("tomamichel_length: mu(eps) negative");
  out.entropy_argument = params.q_tol + out.mu_value;
  if (out.entropy_argument >= 1.0)
    throw OutOfRangeError("tomamichel_length: entropy argument >= 1");
  if (out.entropy_argument >= 0.5) {
    out.entropy_saturated = true;
    out.clamped = true;
    out.l_real = -std::numeric_limits<double>::infinity();
    out.l = 0.0;
    return out;
  }
  out.l_real = params.n * params.q -
               params.n * binary_entropy(out.entropy_argument) -
               2.0 * std::log2(1.0 / (2.0 * params.epsilon)) -
               params.leak_ec - std::log2(2.0 / params.epsilon_cor);
  if (out.l_real < 0.0) {
    out.clamped = true;
    out.l = 0.0;
  } else {
    out.l = std::floor(out.l_real);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Uniformity rate lambda with eps_F = 2^(-lambda n).
// ---------------------------------------------------------------------------

struct UniformityRate {
  double lambda = 0.0;     // -log2(eps_F) / n
  double rate = 0.0;       // the rate reading of the same number
  double l_uniform = 0.0;  // floor(lambda * n) = floor(-log2 eps_F)
  Log10Value epsilon_f;
};

inline UniformityRate uniformity_rate(const Log10Value& epsilon_f, double n) {
  if (!(n >= 1.0)) throw OutOfRangeError("uniformity_rate: n must be >= 1");
  if (epsilon_f.is_zero() || epsilon_f > Log10Value::one())
    throw OutOfRangeError("uniformity_rate: epsilon_F outside (0,1]");
  UniformityRate out;
  out.epsilon_f = epsilon_f;
  double neg_log2 = -epsilon_f.log2();
  out.lambda = neg_log2 / n;
  out.rate = out.lambda;
  out.l_uniform = std::floor(neg_log2);
  return out;
}

inline UniformityRate uniformity_rate(double epsilon_f, double n) {
  if (!(epsilon_f > 0.0) || epsilon_f > 1.0)
    throw OutOfRangeError("uniformity_rate: epsilon_F outside (0,1]");
  return uniformity_rate(Log10Value::from_double(epsilon_f), n);
}

// ---------------------------------------------------------------------------
// Length after subtracting both correction costs, and the final rate.
// ---------------------------------------------------------------------------

/// l = max(0, n - K_Z - K_X).
inline double koashi_length(double n, double k_z, double k_x) {
  if (n < 0.0 || k_z < 0.0 || k_x < 0.0)
    throw OutOfRangeError("koashi_length: negative input");
  return std::max(0.0, n - k_z - k_x);
}

/// R_F = max(0, l_uniform - leak_EC - auth_bits) / n.
inline double final_rate(double l_uniform, double leak_ec, double auth_bits,
                         double n) {
  if (!(n >= 1.0)) throw OutOfRangeError("final_rate: n must be >= 1");
  if (l_uniform < 0.0 || leak_ec < 0.0 || auth_bits < 0.0)
    throw OutOfRangeError("final_rate: negative input");
  return std::max(0.0, l_uniform - leak_ec - auth_bits) / n;
}

// ---------------------------------------------------------------------------
// Per-run rate report (filled by the protocol pipeline).
// ---------------------------------------------------------------------------

struct RateReport {
  double l_tomamichel = 0.0;
  double l_koashi = 0.0;
  double lambda = 0.0;
  double l_uniform = 0.0;
  double r_f = 0.0;
  double delta_lhl = 0.0;
  // Accounting echoes so a report is interpretable on its own.
  double n = 0.0;
  double leak_ec = 0.0;
  double auth_bits = 0.0;
  double k_x = 0.0;
  double epsilon_sec = 0.0;
  double epsilon_f = 0.0;
  double markov_exponent = 0.0;

  nlohmann::json to_json() const {
    return nlohmann::json{
        {"l_tomamichel", l_tomamichel}, {"l_koashi", l_koashi},
        {"lambda", lambda},             {"l_uniform", l_uniform},
        {"R_F", r_f},                   {"delta_lhl", delta_lhl},
        {"n", n},                       {"leak_EC", leak_ec},
        {"auth_bits", auth_bits},       {"K_X", k_x},
        {"epsilon_sec", epsilon_sec},   {"epsilon_F", epsilon_f},
        {"markov_exponent", markov_exponent},
    };
  }
};

// ---------------------------------------------------------------------------
// Claim re-evaluation table.
// ---------------------------------------------------------------------------

struct RateClaim {
  std::string label;
  double n = 0.0;
  Log10Value epsilon_sec;
  double leak_ec = 0.0;
  double auth_bits = 0.0;

  void validate() const {
    if (!(n >= 1.0)) throw OutOfRangeError("claim: n must be >= 1");
    if (epsilon_sec.is_zero() || epsilon_sec > Log10Value::one())
      throw OutOfRangeError("claim: epsilon_sec outside (0,1]");
    if (leak_ec < 0.0 || auth_bits < 0.0)
      throw OutOfRangeError("claim: negative bit count");
  }
};

struct ReevaluationRow {
  std::string label;
  double n = 0.0;
  Log10Value eps_sec;
  Log10Value eps_f;
  Log10Value p_suc_bound;  // 2^-n + eps_F, log-domain sum
  Log10Value ideal;        // 2^-n
  double lambda = 0.0;
  double l_uniform = 0.0;
  double r_f = 0.0;
  double markov_exponent = 0.0;

  static std::string csv_header() {
    return "n,eps_sec_log10,eps_F_log10,p_suc_bound_log10,ideal_log10,lambda,"
           "l_uniform,R_F";
  }

  std::string csv_line() const {
    // %.17g round-trips doubles exactly, so the CSV carries the same values
    // as the JSON report field-for-field.
    char buf[320];
    std::snprintf(buf, sizeof(buf),
                  "%.0f,%.17g,%.17g,%.17g,%.17g,%.17g,%.0f,%.17g", n,
                  eps_sec.log10(), eps_f.log10(), p_suc_bound.log10(),
                  ideal.log10(), lambda, l_uniform, r_f);
    return buf;
  }

  nlohmann::json to_json() const {
    return nlohmann::json{
        {"label", label},
        {"n", n},
        {"eps_sec_log10", eps_sec.log10()},
        {"eps_sec", eps_sec.to_sci_string()},
        {"eps_F_log10", eps_f.log10()},
        {"eps_F", eps_f.to_sci_string()},
        {"p_suc_bound_log10", p_suc_bound.log10()},
        {"p_suc_bound", p_suc_bound.to_sci_string()},
        {"ideal_log10", ideal.log10()},
        {"ideal", ideal.to_sci_string()},
        {"lambda", lambda},
        {"l_uniform", l_uniform},
        {"R_F", r_f},
        {"markov_exponent", markov_exponent},
    };
  }
};

/// One row per claim: the Markov-lifted eps_F, the whole-key success bound
/// 2^-n + eps_F, the ideal level 2^-n, and the uniformity-rate quantities,
/// all in the log domain.
inline ReevaluationRow reevaluate_claim(const RateClaim& claim,
                                        double markov_exponent = 1.0 / 3.0) {
  claim.validate();
  if (!(markov_exponent > 0.0) || markov_exponent > 1.0)
    throw OutOfRangeError("reevaluate_claim: exponent outside (0,1]");
  ReevaluationRow row;
  row.label = claim.label;
  row.n = claim.n;
  row.eps_sec = claim.epsilon_sec;
  row.eps_f = claim.epsilon_sec.pow(markov_exponent);
  row.ideal = Log10Value::from_log2(-claim.n);
  row.p_suc_bound = row.ideal + row.eps_f;
  UniformityRate ur = uniformity_rate(row.eps_f, claim.n);
  row.lambda = ur.lambda;
  row.l_uniform = ur.l_uniform;
  row.r_f = final_rate(ur.l_uniform, claim.leak_ec, claim.auth_bits, claim.n);
  row.markov_exponent = markov_exponent;
  return row;
}

inline std::vector<ReevaluationRow> reevaluation_table(
    const std::vector<RateClaim>& claims, double markov_exponent = 1.0 / 3.0) {
  std::vector<ReevaluationRow> rows;
  rows.reserve(claims.size());
  for (const auto& c : claims) rows.push_back(reevaluate_claim(c, markov_exponent));
  return rows;
}

/// Footer notes attached to every evaluation report.
inline std::vector<std::string> report_footer_notes(double markov_exponent) {
  char expnote[128];
  std::snprintf(expnote, sizeof(expnote),
                "eps_F = eps_sec^(%.6g) via the Markov argument; the exponent "
                "is configurable (--exponent).",
                markov_exponent);
  return {
      "All probability-like values are computed in the log domain; *_log10 "
      "columns are exact even where the linear value underflows doubles.",
      expnote,
      "p_suc_bound = 2^-n + eps_F; at cryptographic key lengths the 2^-n "
      "term is negligible next to eps_F.",
      "ideal_log10 is the exact uniformity level 2^-n: n = 10000 gives "
      "10^-3010.3, which round-figure quotations often truncate to 10^-3000 "
      "— the exact exponent is kept here.",
      "l_uniform = floor(-log2 eps_F) exactly; regimes quoted as 'about 30 "
      "bits' (n = 10^4, eps_sec = 1e-20) evaluate to 22 bits exactly.",
      "Finite-key lengths use the reading l = max(0, floor(n q - n h2(Q_tol "
      "+ mu(eps)) - 2 log2(1/(2 eps)) - leak_EC - log2(2/eps_cor))); h2 "
      "applies to (Q_tol + mu(eps)) and the length clamps at zero.",
  };
}

}  // namespace qkdcrit
