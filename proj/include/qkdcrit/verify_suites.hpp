#pragma once

// Randomized property suites behind `verify`: each one sweeps an inequality
// that must hold everywhere and reports the worst observed slack.  Sample i
// always draws from the derived stream (seed, i), so results are identical
// for any --jobs value.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "cq_state.hpp"
#include "density_operator.hpp"
#include "errors.hpp"
#include "json.hpp"
#include "matrix_functions.hpp"
#include "parallel.hpp"
#include "protocol_sim.hpp"
#include "rng.hpp"
#include "security_criteria.hpp"
#include "toeplitz.hpp"

namespace qkdcrit {

struct SuiteResult {
  std::string name;
  std::size_t samples = 0;
  std::size_t violations = 0;
  double worst_slack = std::numeric_limits<double>::infinity();
  double runtime_s = 0.0;
  std::vector<std::string> notes;

  bool passed() const { return violations == 0; }

  nlohmann::json to_json() const {
    return nlohmann::json{
        {"suite", name},           {"samples", samples},
        {"violations", violations}, {"worst_slack", worst_slack},
        {"runtime_s", runtime_s},  {"notes", notes},
        {"passed", passed()},
    };
  }
};

namespace detail {

class SuiteTimer {
 public:
  SuiteTimer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline std::string format_slack(double s) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3e", s);
  return buf;
}

/// A cq state with random simplex weights and random conditional states;
/// every few draws a label probability is zeroed or a state made pure so the
/// degenerate paths get exercised too.
inline CqState random_cq_state(std::size_t n_bits, std::size_t dim_e, Rng& rng,
                               bool zero_one_label, bool pure_states) {
  const std::size_t labels = std::size_t{1} << n_bits;
  std::vector<double> probs(labels);
  double sum = 0.0;
  for (auto& p : probs) {
    p = -std::log(1.0 - rng.uniform());   // Exp(1) -> uniform simplex
    sum += p;
  }
  if (zero_one_label && labels > 1) {
    sum -= probs[labels / 2];
    probs[labels / 2] = 0.0;
  }
  for (auto& p : probs) p /= sum;
  std::vector<DensityOperator> states;
  states.reserve(labels);
  for (std::size_t x = 0; x < labels; ++x)
    states.push_back(random_density(dim_e, rng, pure_states ? 1 : 0));
  return CqState(n_bits, std::move(probs), std::move(states));
}

/// Deterministically collect BB84 Eve memories: for each template config,
/// advance the seed until the run keeps 1..6 bits (so the exact memory is
/// present).
inline std::vector<CqState> collect_bb84_memories(std::uint64_t seed,
                                                  std::size_t per_template) {
  std::vector<SimConfig> templates;
  auto add = [&templates](EveStrategy s, double zp, double fp,
                          std::uint32_t corr, double ch) {
    SimConfig c;
    c.n_raw = 12;
    c.eve_strategy = s;
    c.eve_basis_z_prob = zp;
    c.eve_flip_prob = fp;
    c.eve_correlation_length = corr;
    c.channel_flip_prob = ch;
    c.sample_fraction = 0.25;
    c.q_tol = 0.5;   // keep aborted runs out of the way; states still built
    templates.push_back(c);
  };
  add(EveStrategy::kNone, 0.5, 0.0, 1, 0.0);
  add(EveStrategy::kNone, 0.5, 0.0, 1, 0.10);
  add(EveStrategy::kInterceptResend, 0.5, 0.0, 1, 0.0);
  add(EveStrategy::kInterceptResend, 1.0, 0.0, 1, 0.0);
  add(EveStrategy::kInterceptResend, 0.25, 0.0, 1, 0.05);
  add(EveStrategy::kCorrelatedFlip, 0.5, 0.20, 3, 0.0);

  std::vector<CqState> out;
  std::uint64_t s = seed;
  for (const SimConfig& t : templates) {
    std::size_t got = 0;
    for (int attempt = 0; attempt < 400 && got < per_template; ++attempt) {
      SimConfig c = t;
      c.rng_seed = s++;
      ProtocolRun run;
      try {
        run = run_bb84(c);
      } catch (const EmptyKeyError&) {
        continue;
      }
      if (run.eve_memory) {
        out.push_back(*run.eve_memory);
        ++got;
      }
    }
  }
  return out;
}

/// Intercept-resend memories whose kept key has exactly `key_bits` bits.
inline std::vector<CqState> collect_ir_memories_exact(std::uint64_t seed,
                                                      std::size_t key_bits,
                                                      std::size_t count) {
  SimConfig t;
  t.n_raw = 12;
  t.eve_strategy = EveStrategy::kInterceptResend;
  t.eve_basis_z_prob = 0.5;
  t.sample_fraction = 0.25;
  t.q_tol = 0.5;
  std::vector<CqState> out;
  std::uint64_t s = seed;
  for (int attempt = 0; attempt < 2000 && out.size() < count; ++attempt) {
    SimConfig c = t;
    c.rng_seed = s++;
    ProtocolRun run;
    try {
      run = run_bb84(c);
    } catch (const EmptyKeyError&) {
      continue;
    }
    if (run.eve_memory && run.eve_memory->n_bits() == key_bits)
      out.push_back(*run.eve_memory);
  }
  if (out.size() < count)
    throw Error("could not collect enough fixed-length simulated memories");
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// fvdg: 1 - sqrt(F) <= T <= sqrt(1 - F) on random density pairs.
// ---------------------------------------------------------------------------

inline SuiteResult run_fvdg_suite(std::size_t samples = 1000,
                                  std::uint64_t seed = 1, unsigned jobs = 1) {
  detail::SuiteTimer timer;
  SuiteResult res;
  res.name = "fvdg";
  res.samples = samples;
  std::vector<double> slack(samples, 0.0);
  std::vector<std::uint8_t> bad(samples, 0);
  detail::parallel_for(samples, jobs, [&](std::size_t i) {
    Rng rng = Rng::stream(seed, i);
    const std::size_t dim = 2 + (i % 7);   // 2..8
    const std::size_t rank_rho = (i % 3 == 0) ? 1 : 0;
    const std::size_t rank_sigma = (i % 4 == 0) ? (dim + 1) / 2 : 0;
    DensityOperator rho = random_density(dim, rng, rank_rho);
    DensityOperator sig = random_density(dim, rng, rank_sigma);
    FidelityDistanceBounds b =
        fidelity_distance_bounds(rho.matrix(), sig.matrix());
    slack[i] = std::min(b.slack_lower, b.slack_upper);
    bad[i] = b.holds ? 0 : 1;
  });
  for (std::size_t i = 0; i < samples; ++i) {
    res.violations += bad[i];
    res.worst_slack = std::min(res.worst_slack, slack[i]);
  }
  res.notes.push_back("random pairs, dims 2-8, mixed ranks; tolerance 1e-9");
  res.runtime_s = timer.seconds();
  return res;
}

// ---------------------------------------------------------------------------
// y1: certified P_guess upper bound <= 2^-n + d(exact-min).
// ---------------------------------------------------------------------------

inline SuiteResult run_y1_suite(std::size_t samples = 50,
                                std::uint64_t seed = 1, unsigned jobs = 1) {
  detail::SuiteTimer timer;
  SuiteResult res;
  res.name = "y1";

  std::vector<CqState> states;
  states.reserve(samples + 12);
  for (std::size_t i = 0; i < samples; ++i) {
    Rng rng = Rng::stream(seed, i);
    const std::size_t n_bits = 1 + (i % 3);
    const std::size_t dim_e = 2 + rng.below(7);   // 2..8
    states.push_back(detail::random_cq_state(n_bits, dim_e, rng,
                                             /*zero_one_label=*/i % 4 == 3,
                                             /*pure_states=*/i % 3 == 2));
  }
  const std::size_t random_count = states.size();
  for (CqState& m : detail::collect_bb84_memories(seed + 1000003, 2))
    states.push_back(std::move(m));
  res.samples = states.size();

  std::vector<double> slack(states.size(), 0.0);
  std::vector<std::uint8_t> bad(states.size(), 0);
  std::vector<std::uint8_t> unconverged(states.size(), 0);
  detail::parallel_for(states.size(), jobs, [&](std::size_t i) {
    SecurityAssessment a = theorem_y1_check(states[i], DistanceMode::kExactMin);
    slack[i] = a.y1_slack;
    bad[i] = a.y1_holds ? 0 : 1;
    unconverged[i] = a.d_converged ? 0 : 1;
  });
  std::size_t nconv = 0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    res.violations += bad[i];
    res.worst_slack = std::min(res.worst_slack, slack[i]);
    nconv += unconverged[i];
  }
  res.notes.push_back(std::to_string(random_count) + " random cq states + " +
                      std::to_string(states.size() - random_count) +
                      " simulated memories; slack tolerance 1e-9");
  if (nconv > 0)
    res.notes.push_back(std::to_string(nconv) +
                        " distance solves hit the iteration cap");
  res.runtime_s = timer.seconds();
  return res;
}

// ---------------------------------------------------------------------------
// helstrom: closed form vs projective-measurement sweep and vs the guessing
// machinery's coinciding bounds.
// ---------------------------------------------------------------------------

namespace detail {

/// 10^4-direction golden-angle Bloch grid, plus the two trivial POVMs.
/// Returns the best success probability over {P_u, I-P_u} with both outcome
/// assignments, computed by honest trace arithmetic.
inline double qubit_projective_sweep(double p1, const ComplexMatrix& rho1,
                                     const ComplexMatrix& rho2,
                                     std::size_t points = 10000) {
  const double p2 = 1.0 - p1;
  double best = std::max(p1, p2);   // trivial POVMs {I,0} and {0,I}
  const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
  for (std::size_t k = 0; k < points; ++k) {
    const double z = 1.0 - 2.0 * (static_cast<double>(k) + 0.5) /
                               static_cast<double>(points);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = 2.0 * 3.14159265358979323846 *
                       static_cast<double>(k) / golden;
    const double ux = r * std::cos(phi), uy = r * std::sin(phi);
    ComplexMatrix proj(2, 2);
    proj(0, 0) = 0.5 * (1.0 + z);
    proj(1, 1) = 0.5 * (1.0 - z);
    proj(0, 1) = 0.5 * cplx(ux, -uy);
    proj(1, 0) = 0.5 * cplx(ux, uy);
    double t1 = 0.0, t2 = 0.0;   // Tr(rho1 P), Tr(rho2 P)
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t b = 0; b < 2; ++b) {
        t1 += (rho1(a, b) * proj(b, a)).real();
        t2 += (rho2(a, b) * proj(b, a)).real();
      }
    const double assign1 = p1 * t1 + p2 * (1.0 - t2);
    const double assign2 = p1 * (1.0 - t1) + p2 * t2;
    best = std::max(best, std::max(assign1, assign2));
  }
  return best;
}

}  // namespace detail

inline SuiteResult run_helstrom_suite(std::size_t samples = 200,
                                      std::uint64_t seed = 1,
                                      unsigned jobs = 1) {
  constexpr double kGridTol = 1e-4;
  constexpr double kGuessTol = 1e-7;
  detail::SuiteTimer timer;
  SuiteResult res;
  res.name = "helstrom";
  res.samples = samples;
  std::vector<double> slack(samples, 0.0);
  std::vector<std::uint8_t> bad(samples, 0);
  std::vector<double> grid_dev(samples, 0.0), guess_dev(samples, 0.0);
  detail::parallel_for(samples, jobs, [&](std::size_t i) {
    Rng rng = Rng::stream(seed, i);
    const std::size_t dim = (i % 2 == 0) ? 2 : 3;
    const double p1 = 0.05 + 0.90 * rng.uniform();
    const std::size_t rank1 = (i % 5 == 0) ? 1 : 0;
    DensityOperator rho1 = random_density(dim, rng, rank1);
    DensityOperator rho2 = random_density(dim, rng, 0);
    const double hel = helstrom(p1, rho1, rho2);

    double s = std::numeric_limits<double>::infinity();
    if (dim == 2) {
      const double sweep =
          detail::qubit_projective_sweep(p1, rho1.matrix(), rho2.matrix());
      grid_dev[i] = std::abs(hel - sweep);
      s = std::min(s, kGridTol - grid_dev[i]);
    }
    CqState two(1, {p1, 1.0 - p1}, {rho1, rho2});
    GuessingBounds g = guessing_probability(two);
    const double dev =
        std::max(std::abs(hel - g.upper), std::abs(hel - g.lower));
    guess_dev[i] = std::max(dev, g.certificate_gap);
    s = std::min(s, kGuessTol - guess_dev[i]);
    slack[i] = s;
    bad[i] = (s < 0.0) ? 1 : 0;
  });
  double worst_grid = 0.0, worst_guess = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    res.violations += bad[i];
    res.worst_slack = std::min(res.worst_slack, slack[i]);
    worst_grid = std::max(worst_grid, grid_dev[i]);
    worst_guess = std::max(worst_guess, guess_dev[i]);
  }
  res.notes.push_back(
      "qubit/qutrit ensembles; worst grid deviation " +
      detail::format_slack(worst_grid) + " (tol 1e-4), worst guessing-bound "
      "deviation " + detail::format_slack(worst_guess) + " (tol 1e-7)");
  res.runtime_s = timer.seconds();
  return res;
}

// ---------------------------------------------------------------------------
// pa-monotone: hashing the key never lowers the whole-key guessing
// probability.
// ---------------------------------------------------------------------------

inline SuiteResult run_pa_monotone_suite(std::size_t samples = 600,
                                         std::uint64_t seed = 1,
                                         unsigned jobs = 1) {
  constexpr double kExactTol = 1e-12;
  detail::SuiteTimer timer;
  SuiteResult res;
  res.name = "pa-monotone";
  res.samples = samples;

  // Simulated intercept-resend memories on a 4-bit kept key; their guessing
  // values resolve through the exact commuting path on both sides of the
  // hash.
  const std::vector<CqState> mems =
      detail::collect_ir_memories_exact(seed + 2000003, 4, 5);
  std::vector<double> raw_guess(mems.size());
  std::vector<std::uint8_t> raw_exact(mems.size());
  for (std::size_t m = 0; m < mems.size(); ++m) {
    GuessingBounds g = guessing_probability(mems[m]);
    raw_guess[m] = g.exact ? g.upper : 0.5 * (g.lower + g.upper);
    raw_exact[m] = g.exact ? 1 : 0;
  }

  std::vector<double> slack(samples, 0.0);
  std::vector<std::uint8_t> bad(samples, 0), inexact(samples, 0);
  detail::parallel_for(samples, jobs, [&](std::size_t i) {
    Rng rng = Rng::stream(seed, i);
    const std::size_t l = 1 + (i % 3);
    const std::size_t m = (i / 3) % mems.size();
    ToeplitzHash hash = ToeplitzHash::random(l, 4, rng);
    CqState hashed = hash_cq_state(mems[m], hash);
    GuessingBounds g = guessing_probability(hashed);
    const double hashed_guess =
        g.exact ? g.upper : 0.5 * (g.lower + g.upper);
    slack[i] = hashed_guess - raw_guess[m];
    bad[i] = (slack[i] < -kExactTol) ? 1 : 0;
    inexact[i] = (g.exact && raw_exact[m]) ? 0 : 1;
  });
  std::size_t n_inexact = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    res.violations += bad[i];
    res.worst_slack = std::min(res.worst_slack, slack[i]);
    n_inexact += inexact[i];
  }
  res.notes.push_back(
      "4-bit simulated memories, output lengths 1-3, random Toeplitz seeds; "
      "P_guess(hashed) - P_guess(raw) must be >= 0 (tolerance 1e-12)");
  if (n_inexact > 0)
    res.notes.push_back(std::to_string(n_inexact) +
                        " comparisons fell back to non-exact bounds");
  res.runtime_s = timer.seconds();
  return res;
}

// ---------------------------------------------------------------------------
// Dispatch.
// ---------------------------------------------------------------------------

/// Run the named suite ("all" for every one).  samples = 0 means each
/// suite's default count.
inline std::vector<SuiteResult> run_suites(const std::string& name,
                                           std::size_t samples = 0,
                                           std::uint64_t seed = 1,
                                           unsigned jobs = 1) {
  auto pick = [samples](std::size_t dflt) { return samples ? samples : dflt; };
  std::vector<SuiteResult> out;
  if (name == "fvdg" || name == "all")
    out.push_back(run_fvdg_suite(pick(1000), seed, jobs));
  if (name == "y1" || name == "all")
    out.push_back(run_y1_suite(pick(50), seed, jobs));
  if (name == "helstrom" || name == "all")
    out.push_back(run_helstrom_suite(pick(200), seed, jobs));
  if (name == "pa-monotone" || name == "all")
    out.push_back(run_pa_monotone_suite(pick(600), seed, jobs));
  if (out.empty())
    throw UnknownSuiteError("unknown suite '" + name +
                            "' (expected fvdg | y1 | helstrom | pa-monotone "
                            "| all)");
  return out;
}

}  // namespace qkdcrit
