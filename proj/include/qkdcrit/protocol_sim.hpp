#pragma once

// Toy BB84 executions at small n: sifting, deterministic-interleaved error
// estimation with threshold abort, leakage accounting, exact side-information
// bookkeeping for an intercept-resend eavesdropper, and Toeplitz privacy
// amplification.  Everything is deterministic given the config (seed
// included), which the golden-file tests rely on.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cq_state.hpp"
#include "density_operator.hpp"
#include "errors.hpp"
#include "json.hpp"
#include "key_rate.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "security_criteria.hpp"
#include "toeplitz.hpp"

namespace qkdcrit {

// ---------------------------------------------------------------------------
// Configuration.
// ---------------------------------------------------------------------------

enum class EveStrategy { kNone, kInterceptResend, kCorrelatedFlip };

inline const char* to_string(EveStrategy s) {
  switch (s) {
    case EveStrategy::kNone: return "none";
    case EveStrategy::kInterceptResend: return "intercept-resend";
    case EveStrategy::kCorrelatedFlip: return "correlated-flip";
  }
  return "none";
}

inline EveStrategy parse_eve_strategy(const std::string& s) {
  if (s == "none") return EveStrategy::kNone;
  if (s == "intercept-resend") return EveStrategy::kInterceptResend;
  if (s == "correlated-flip") return EveStrategy::kCorrelatedFlip;
  throw ConfigInvalidError("unknown eve_strategy '" + s + "'");
}

struct SimConfig {
  std::uint32_t n_raw = 16;
  EveStrategy eve_strategy = EveStrategy::kNone;
  double eve_basis_z_prob = 0.5;   // intercept-resend: P(Eve measures in Z)
  double eve_flip_prob = 0.0;      // correlated-flip: marginal flip probability
  std::uint32_t eve_correlation_length = 1;
  double channel_flip_prob = 0.0;
  double q_tol = 0.11;
  double sample_fraction = 0.25;
  std::uint64_t rng_seed = 0;
  std::uint32_t pa_output_bits = 2;
  double leak_ec_inefficiency = 1.2;

  /// Full quantum bookkeeping keeps the sifted key within the cq-state caps.
  static constexpr std::uint32_t kMaxRawQuantum = 24;
  /// Classical statistics (abort/QBER estimation) need no quantum memory and
  /// allow larger blocks.
  static constexpr std::uint32_t kMaxRawClassical = 4096;

  void validate(bool classical_only = false) const {
    const std::uint32_t cap = classical_only ? kMaxRawClassical : kMaxRawQuantum;
    if (n_raw < 1)
      throw ConfigInvalidError("n_raw must be at least 1");
    if (n_raw > cap)
      throw ConfigInvalidError(
          "n_raw " + std::to_string(n_raw) + " exceeds the " +
          (classical_only ? "classical-statistics" : "exact-analysis") +
          " dimension cap of " + std::to_string(cap));
    if (eve_basis_z_prob < 0.0 || eve_basis_z_prob > 1.0)
      throw ConfigInvalidError("eve_basis_z_prob outside [0,1]");
    if (eve_flip_prob < 0.0 || eve_flip_prob >= 0.5)
      throw ConfigInvalidError("eve_flip_prob outside [0, 1/2)");
    if (eve_correlation_length < 1)
      throw ConfigInvalidError("eve_correlation_length must be >= 1");
    if (channel_flip_prob < 0.0 || channel_flip_prob >= 0.5)
      throw ConfigInvalidError("channel_flip_prob outside [0, 1/2)");
    if (q_tol < 0.0 || q_tol > 1.0)
      throw ConfigInvalidError("Q_tol outside [0,1]");
    if (sample_fraction < 0.0 || sample_fraction > 1.0)
      throw ConfigInvalidError("sample_fraction outside [0,1]");
    if (pa_output_bits > n_raw)
      throw ConfigInvalidError("pa_output_bits exceeds n_raw");
    if (leak_ec_inefficiency < 1.0)
      throw ConfigInvalidError("leak_ec_inefficiency below 1");
  }

  nlohmann::json to_json() const {
    return nlohmann::json{
        {"n_raw", n_raw},
        {"eve_strategy", to_string(eve_strategy)},
        {"eve_basis_z_prob", eve_basis_z_prob},
        {"eve_flip_prob", eve_flip_prob},
        {"eve_correlation_length", eve_correlation_length},
        {"channel_flip_prob", channel_flip_prob},
        {"q_tol", q_tol},
        {"sample_fraction", sample_fraction},
        {"rng_seed", rng_seed},
        {"pa_output_bits", pa_output_bits},
        {"leak_ec_inefficiency", leak_ec_inefficiency},
    };
  }

  static SimConfig from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("sim config: expected a JSON object");
    SimConfig c;
    for (const auto& [key, value] : j.items()) {
      if (key == "n_raw") c.n_raw = value.get<std::uint32_t>();
      else if (key == "eve_strategy")
        c.eve_strategy = parse_eve_strategy(value.get<std::string>());
      else if (key == "eve_basis_z_prob") c.eve_basis_z_prob = value.get<double>();
      else if (key == "eve_flip_prob") c.eve_flip_prob = value.get<double>();
      else if (key == "eve_correlation_length")
        c.eve_correlation_length = value.get<std::uint32_t>();
      else if (key == "channel_flip_prob") c.channel_flip_prob = value.get<double>();
      else if (key == "q_tol") c.q_tol = value.get<double>();
      else if (key == "sample_fraction") c.sample_fraction = value.get<double>();
      else if (key == "rng_seed") c.rng_seed = value.get<std::uint64_t>();
      else if (key == "pa_output_bits") c.pa_output_bits = value.get<std::uint32_t>();
      else if (key == "leak_ec_inefficiency")
        c.leak_ec_inefficiency = value.get<double>();
      else throw ParseError("sim config: unknown key '" + key + "'");
    }
    return c;
  }

  /// Flat TOML subset: `key = value` lines, # comments, quoted or bare
  /// strings, optional [section] headers (ignored).  Enough for reproducible
  /// batch configs without a full TOML dependency.
  static SimConfig from_toml_text(const std::string& text) {
    nlohmann::json j = nlohmann::json::object();
    std::istringstream in(text);
    std::string line;
    long lineno = 0;
    auto trim = [](std::string s) {
      const char* ws = " \t\r\n";
      auto b = s.find_first_not_of(ws);
      auto e = s.find_last_not_of(ws);
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') continue;   // section header, ignored
      auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ParseError("sim config: expected key = value", lineno);
      std::string key = trim(line.substr(0, eq));
      std::string val = trim(line.substr(eq + 1));
      if (key.empty() || val.empty())
        throw ParseError("sim config: empty key or value", lineno);
      if (val.front() == '"') {
        if (val.size() < 2 || val.back() != '"')
          throw ParseError("sim config: unterminated string", lineno);
        j[key] = val.substr(1, val.size() - 2);
      } else if (val == "true" || val == "false") {
        j[key] = (val == "true");
      } else {
        try {
          std::size_t used = 0;
          if (val.find_first_of(".eE") == std::string::npos) {
            unsigned long long u = std::stoull(val, &used);
            if (used != val.size()) throw std::invalid_argument(val);
            j[key] = u;
          } else {
            double d = std::stod(val, &used);
            if (used != val.size()) throw std::invalid_argument(val);
            j[key] = d;
          }
        } catch (const std::exception&) {
          // Bare string (e.g. eve_strategy = intercept-resend).
          j[key] = val;
        }
      }
    }
    try {
      return from_json(j);
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(std::string("sim config: ") + e.what());
    }
  }
};

// ---------------------------------------------------------------------------
// Classical execution record (shared by the full run and the Monte Carlo
// statistics paths).
// ---------------------------------------------------------------------------

struct ClassicalRun {
  std::vector<std::uint8_t> alice_bits, alice_bases;   // basis: 0 = Z, 1 = X
  std::vector<std::uint8_t> bob_bases, bob_bits;
  std::vector<std::uint8_t> eve_intercepted;   // per raw position
  std::vector<std::uint8_t> eve_bases, eve_outcomes;
  std::vector<std::uint32_t> sifted_positions;      // basis agreement
  std::vector<std::uint32_t> estimation_positions;  // subset of sifted
  std::vector<std::uint32_t> kept_positions;        // sifted minus estimation
  std::vector<std::uint8_t> sifted_key;             // Alice's bits, kept positions
  std::size_t estimation_errors = 0;
  double qber_estimate = 0.0;
  bool aborted = false;
  std::size_t leak_ec_bits = 0;
};

/// One BB84 execution, classical statistics only.  Draw order (per position:
/// bit, Alice basis, Bob basis; then the Eve pass; then channel flips; then
/// Bob's mismatched-basis outcomes) is part of the determinism contract.
inline ClassicalRun simulate_classical(const SimConfig& cfg, Rng& rng) {
  const std::size_t n = cfg.n_raw;
  ClassicalRun r;
  r.alice_bits.resize(n);
  r.alice_bases.resize(n);
  r.bob_bases.resize(n);
  r.bob_bits.resize(n);
  r.eve_intercepted.assign(n, 0);
  r.eve_bases.assign(n, 0);
  r.eve_outcomes.assign(n, 0);

  for (std::size_t i = 0; i < n; ++i) {
    r.alice_bits[i] = static_cast<std::uint8_t>(rng.bit());
    r.alice_bases[i] = static_cast<std::uint8_t>(rng.bit());
    r.bob_bases[i] = static_cast<std::uint8_t>(rng.bit());
  }

  // Eve pass.  Intercept-resend measures every position in Z with
  // probability eve_basis_z_prob (else X) and resends her outcome; the
  // correlated-flip adversary is a classical Markov flip chain with the
  // configured marginal and persistence length.
  std::vector<std::uint8_t> flip(n, 0);
  if (cfg.eve_strategy == EveStrategy::kInterceptResend) {
    for (std::size_t i = 0; i < n; ++i) {
      r.eve_intercepted[i] = 1;
      r.eve_bases[i] =
          rng.bernoulli(cfg.eve_basis_z_prob) ? 0 : 1;
      if (r.eve_bases[i] == r.alice_bases[i])
        r.eve_outcomes[i] = r.alice_bits[i];
      else
        r.eve_outcomes[i] = static_cast<std::uint8_t>(rng.bit());
    }
  } else if (cfg.eve_strategy == EveStrategy::kCorrelatedFlip) {
    const double stay =
        1.0 - 1.0 / static_cast<double>(cfg.eve_correlation_length);
    std::uint8_t prev = rng.bernoulli(cfg.eve_flip_prob) ? 1 : 0;
    flip[0] = prev;
    for (std::size_t i = 1; i < n; ++i) {
      if (!rng.bernoulli(stay))
        prev = rng.bernoulli(cfg.eve_flip_prob) ? 1 : 0;
      flip[i] = prev;
    }
  }

  // Channel flips (applied to whatever travels: Alice's qubit, or Eve's
  // resent one).
  std::vector<std::uint8_t> channel(n);
  for (std::size_t i = 0; i < n; ++i)
    channel[i] = rng.bernoulli(cfg.channel_flip_prob) ? 1 : 0;

  // Bob measures.
  for (std::size_t i = 0; i < n; ++i) {
    std::uint8_t arriving_basis, arriving_bit;
    if (r.eve_intercepted[i]) {
      arriving_basis = r.eve_bases[i];
      arriving_bit = r.eve_outcomes[i] ^ channel[i];
    } else {
      arriving_basis = r.alice_bases[i];
      arriving_bit = static_cast<std::uint8_t>(r.alice_bits[i] ^ flip[i] ^ channel[i]);
    }
    if (r.bob_bases[i] == arriving_basis)
      r.bob_bits[i] = arriving_bit;
    else
      r.bob_bits[i] = static_cast<std::uint8_t>(rng.bit());
  }

  // Sifting on basis agreement.
  for (std::size_t i = 0; i < n; ++i)
    if (r.alice_bases[i] == r.bob_bases[i])
      r.sifted_positions.push_back(static_cast<std::uint32_t>(i));

  // Deterministic interleaved estimation sample: every k-th sifted bit,
  // k chosen from the sample fraction.  (A deviation from randomized
  // sampling practice, chosen so posterior bookkeeping stays exact.)
  if (cfg.sample_fraction > 0.0 && !r.sifted_positions.empty()) {
    const std::size_t k = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(1.0 / cfg.sample_fraction)));
    for (std::size_t j = 0; j < r.sifted_positions.size(); ++j) {
      if (j % k == 0)
        r.estimation_positions.push_back(r.sifted_positions[j]);
      else
        r.kept_positions.push_back(r.sifted_positions[j]);
    }
  } else {
    r.kept_positions = r.sifted_positions;
  }

  for (std::uint32_t p : r.estimation_positions)
    if (r.alice_bits[p] != r.bob_bits[p]) ++r.estimation_errors;
  r.qber_estimate =
      r.estimation_positions.empty()
          ? 0.0
          : static_cast<double>(r.estimation_errors) /
                static_cast<double>(r.estimation_positions.size());
  r.aborted = r.qber_estimate > cfg.q_tol;

  for (std::uint32_t p : r.kept_positions) r.sifted_key.push_back(r.alice_bits[p]);

  // Leakage accounting only; no code is actually run.
  r.leak_ec_bits = static_cast<std::size_t>(
      std::ceil(cfg.leak_ec_inefficiency *
                static_cast<double>(r.kept_positions.size()) *
                binary_entropy(std::min(r.qber_estimate, 1.0))));
  return r;
}

// ---------------------------------------------------------------------------
// Eve's exact side information.
// ---------------------------------------------------------------------------

/// Longest sifted key for which exact cq bookkeeping stays within the caps
/// (2^k labels and a 2^k-dimensional memory for intercept-resend).
inline constexpr std::size_t kMaxExactKeyBits = 6;

namespace detail {

inline ComplexMatrix qubit_pure(std::uint8_t basis, std::uint8_t bit) {
  // Z: |0>, |1>; X: |+>, |->.
  std::vector<cplx> v(2);
  if (basis == 0) {
    v[bit ? 1 : 0] = 1.0;
  } else {
    const double r = 0.70710678118654752440;
    v[0] = r;
    v[1] = bit ? -r : r;
  }
  return ComplexMatrix::outer(v);
}

}  // namespace detail

/// Eve's memory as a cq state over the kept key.  For intercept-resend each
/// kept position contributes her resent-state record: measured in the sifted
/// basis, the record is |x> of the key bit (perfectly informative); measured
/// in the other basis it is maximally mixed (uninformative).  For the other
/// strategies Eve holds nothing and every conditional state is the trivial
/// one-dimensional system.
inline std::optional<CqState> build_eve_memory(const SimConfig& cfg,
                                               const ClassicalRun& r,
                                               std::string* note = nullptr) {
  const std::size_t k = r.kept_positions.size();
  if (k == 0) {
    if (note) *note = "no kept bits; no memory to model";
    return std::nullopt;
  }
  if (k > kMaxExactKeyBits) {
    if (note)
      *note = "kept key of " + std::to_string(k) +
              " bits exceeds the exact-analysis cap of " +
              std::to_string(kMaxExactKeyBits);
    return std::nullopt;
  }
  const std::size_t labels = std::size_t{1} << k;

  if (cfg.eve_strategy != EveStrategy::kInterceptResend) {
    ComplexMatrix one(1, 1);
    one(0, 0) = 1.0;
    std::vector<DensityOperator> states(labels,
                                        DensityOperator::from_trusted(one));
    if (note) *note = "strategy leaves no quantum side information";
    return CqState::uniform_key(k, std::move(states));
  }

  // Per-position conditional pair (rho for key bit 0, for key bit 1).
  std::vector<std::array<ComplexMatrix, 2>> pos(k);
  for (std::size_t idx = 0; idx < k; ++idx) {
    std::uint32_t p = r.kept_positions[idx];
    const bool matched = r.eve_bases[p] == r.alice_bases[p];
    for (std::uint8_t b = 0; b < 2; ++b) {
      if (matched)
        pos[idx][b] = detail::qubit_pure(r.eve_bases[p], b);
      else {
        ComplexMatrix m = ComplexMatrix::identity(2);
        m *= cplx(0.5, 0.0);
        pos[idx][b] = m;
      }
    }
  }

  std::vector<DensityOperator> states;
  states.reserve(labels);
  for (std::size_t x = 0; x < labels; ++x) {
    ComplexMatrix acc(1, 1);
    acc(0, 0) = 1.0;
    for (std::size_t idx = 0; idx < k; ++idx)
      acc = tensor(acc, pos[idx][(x >> idx) & 1]);
    states.push_back(DensityOperator::from_trusted(std::move(acc)));
  }
  if (note) *note = "intercept-resend record, one qubit per kept position";
  return CqState::uniform_key(k, std::move(states));
}

// ---------------------------------------------------------------------------
// Full protocol run.
// ---------------------------------------------------------------------------

struct ProtocolRun {
  SimConfig config;
  ClassicalRun classical;
  std::optional<CqState> eve_memory;
  std::string memory_note;
  std::optional<ToeplitzHash> hash;
  std::vector<std::uint8_t> final_key;
  std::vector<std::string> transcript;

  nlohmann::json to_json() const {
    nlohmann::json j{
        {"config", config.to_json()},
        {"alice_bits", classical.alice_bits},
        {"alice_bases", classical.alice_bases},
        {"bob_bases", classical.bob_bases},
        {"bob_bits", classical.bob_bits},
        {"eve_intercepted", classical.eve_intercepted},
        {"eve_bases", classical.eve_bases},
        {"eve_outcomes", classical.eve_outcomes},
        {"sifted_positions", classical.sifted_positions},
        {"estimation_positions", classical.estimation_positions},
        {"kept_positions", classical.kept_positions},
        {"sifted_key", classical.sifted_key},
        {"estimation_errors", classical.estimation_errors},
        {"qber_estimate", classical.qber_estimate},
        {"aborted", classical.aborted},
        {"leak_EC_bits", classical.leak_ec_bits},
        {"memory_note", memory_note},
        {"final_key", final_key},
        {"transcript", transcript},
    };
    j["eve_memory"] = eve_memory ? eve_memory->to_json() : nlohmann::json();
    j["hash"] = hash ? hash->to_json() : nlohmann::json();
    return j;
  }
};

/// Execute BB84 under the config: classical run, exact Eve memory when the
/// kept key is short enough, then Toeplitz hashing to
/// min(pa_output_bits, kept) bits using seed bits drawn from the same RNG
/// stream.  Deterministic given the config.
inline ProtocolRun run_bb84(const SimConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.rng_seed);
  ProtocolRun run;
  run.config = cfg;
  run.classical = simulate_classical(cfg, rng);
  const ClassicalRun& c = run.classical;

  if (c.sifted_positions.empty())
    throw EmptyKeyError("sifting left zero bits");

  auto line = [&run](std::string s) { run.transcript.push_back(std::move(s)); };
  line("phase=prepare n_raw=" + std::to_string(cfg.n_raw) +
       " seed=" + std::to_string(cfg.rng_seed));
  line(std::string("phase=eve strategy=") + to_string(cfg.eve_strategy));
  line("phase=sift sifted=" + std::to_string(c.sifted_positions.size()));
  {
    std::ostringstream os;
    os << "phase=estimate sample=" << c.estimation_positions.size()
       << " errors=" << c.estimation_errors << " qber=" << c.qber_estimate
       << " abort=" << (c.aborted ? "true" : "false");
    line(os.str());
  }
  line("phase=key kept=" + std::to_string(c.kept_positions.size()));
  line("phase=leak bits=" + std::to_string(c.leak_ec_bits));

  run.eve_memory = build_eve_memory(cfg, c, &run.memory_note);
  if (run.eve_memory)
    line("phase=memory labels=" + std::to_string(run.eve_memory->label_count()) +
         " dim=" + std::to_string(run.eve_memory->dim_e()));
  else
    line("phase=memory omitted reason=\"" + run.memory_note + "\"");

  const std::size_t kept = c.kept_positions.size();
  if (kept > 0) {
    const std::size_t l =
        std::min<std::size_t>(cfg.pa_output_bits, kept);
    run.hash = ToeplitzHash::random(l, kept, rng);
    run.final_key = run.hash->apply(c.sifted_key);
    line("phase=hash rows=" + std::to_string(l) + " cols=" + std::to_string(kept));
    line("phase=pa final_bits=" + std::to_string(run.final_key.size()));
  } else {
    line("phase=pa skipped reason=\"no kept bits\"");
  }
  return run;
}

// ---------------------------------------------------------------------------
// Privacy amplification on the exact side information.
// ---------------------------------------------------------------------------

/// Push a cq state through a GF(2) hash on its classical register: the
/// hashed-key ensemble sums probabilities and (probability-weighted) states
/// over each preimage class.
inline CqState hash_cq_state(const CqState& mem, const ToeplitzHash& hash) {
  if (hash.cols() != mem.n_bits())
    throw DimensionMismatchError(
        "hash_cq_state: hash input width != key register width");
  const std::size_t l = hash.rows();
  const std::size_t zlabels = std::size_t{1} << l;
  const std::size_t de = mem.dim_e();
  std::vector<double> probs(zlabels, 0.0);
  std::vector<ComplexMatrix> sums(zlabels, ComplexMatrix(de, de));
  for (std::size_t x = 0; x < mem.label_count(); ++x) {
    const double p = mem.prob(x);
    if (p == 0.0) continue;
    const std::size_t z = hash.apply_index(x);
    probs[z] += p;
    ComplexMatrix term = mem.state(x).matrix();
    term *= cplx(p, 0.0);
    sums[z] += term;
  }
  std::vector<DensityOperator> states;
  states.reserve(zlabels);
  for (std::size_t z = 0; z < zlabels; ++z) {
    if (probs[z] > 0.0) {
      sums[z] *= cplx(1.0 / probs[z], 0.0);
      states.push_back(DensityOperator::from_trusted(sums[z].hermitized()));
    } else {
      states.push_back(DensityOperator::maximally_mixed(de));
    }
  }
  return CqState(l, std::move(probs), std::move(states));
}

struct PaResult {
  std::vector<std::uint8_t> final_key;
  std::optional<CqState> hashed_memory;
};

/// Hash the kept key and push Eve's memory through the same hash.
inline PaResult apply_privacy_amplification(const ProtocolRun& run,
                                            const ToeplitzHash& hash) {
  const std::vector<std::uint8_t>& key = run.classical.sifted_key;
  if (hash.cols() != key.size())
    throw DimensionMismatchError(
        "privacy amplification: hash input width != kept key length");
  PaResult out;
  out.final_key = hash.apply(key);
  if (run.eve_memory) out.hashed_memory = hash_cq_state(*run.eve_memory, hash);
  return out;
}

// ---------------------------------------------------------------------------
// Abort-probability estimation (classical statistics; larger blocks allowed).
// ---------------------------------------------------------------------------

struct PAbortEstimate {
  double p_abort = 0.0;
  double ci_halfwidth = 0.0;   // Wilson 95%
  std::size_t trials = 0;
  std::size_t aborts = 0;
  double mean_qber = 0.0;          // over trials with a nonempty sample
  double mean_estimation_bits = 0.0;

  nlohmann::json to_json() const {
    return nlohmann::json{
        {"p_abort", p_abort},
        {"ci_halfwidth", ci_halfwidth},
        {"trials", trials},
        {"aborts", aborts},
        {"mean_qber", mean_qber},
        {"mean_estimation_bits", mean_estimation_bits},
    };
  }
};

/// Monte Carlo abort frequency over independent trials (trial t runs on the
/// derived stream (seed, t)), with a Wilson 95% interval.  Only classical
/// statistics are produced, so n_raw may exceed the exact-analysis cap.
/// Per-trial results land in index-addressed slots and are merged in trial
/// order, so the estimate is identical for any jobs value.
inline PAbortEstimate estimate_p_abort(const SimConfig& cfg, std::size_t trials,
                                       unsigned jobs = 1) {
  cfg.validate(/*classical_only=*/true);
  if (trials < 100)
    throw ConfigInvalidError("estimate_p_abort: need at least 100 trials");
  PAbortEstimate out;
  out.trials = trials;
  std::vector<std::uint8_t> aborted(trials, 0);
  std::vector<double> qber(trials, 0.0);
  std::vector<std::uint32_t> est_bits(trials, 0);
  detail::parallel_for(trials, jobs, [&](std::size_t t) {
    Rng rng = Rng::stream(cfg.rng_seed, t);
    ClassicalRun r = simulate_classical(cfg, rng);
    aborted[t] = r.aborted ? 1 : 0;
    qber[t] = r.qber_estimate;
    est_bits[t] = static_cast<std::uint32_t>(r.estimation_positions.size());
  });
  double qber_sum = 0.0;
  std::size_t qber_runs = 0;
  double est_bits_sum = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    if (aborted[t]) ++out.aborts;
    est_bits_sum += static_cast<double>(est_bits[t]);
    if (est_bits[t] > 0) {
      qber_sum += qber[t];
      ++qber_runs;
    }
  }
  const double nn = static_cast<double>(trials);
  const double phat = static_cast<double>(out.aborts) / nn;
  const double z = 1.959963984540054;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  out.p_abort = phat;
  out.ci_halfwidth =
      z * std::sqrt(phat * (1.0 - phat) / nn + z2 / (4.0 * nn * nn)) / denom;
  out.mean_qber = qber_runs ? qber_sum / static_cast<double>(qber_runs) : 0.0;
  out.mean_estimation_bits = est_bits_sum / nn;
  return out;
}

// ---------------------------------------------------------------------------
// End-to-end assessment of a single run.
// ---------------------------------------------------------------------------

struct PipelineResult {
  ProtocolRun run;
  SecurityAssessment pre_pa;
  SecurityAssessment post_pa;
  RateReport rates;

  nlohmann::json to_json() const {
    return nlohmann::json{
        {"run", run.to_json()},
        {"assessment_pre_pa", pre_pa.to_json()},
        {"assessment_post_pa", post_pa.to_json()},
        {"rates", rates.to_json()},
    };
  }
};

/// Assess an existing run's exact side information before and after privacy
/// amplification, plus the rate accounting.  Requires a kept key within the
/// exact-analysis cap.
inline PipelineResult assess_run(ProtocolRun run,
                                 double markov_exponent = kDefaultMarkovExponent) {
  PipelineResult out;
  out.run = std::move(run);
  const SimConfig& cfg = out.run.config;
  const ClassicalRun& c = out.run.classical;
  const std::size_t kept = c.kept_positions.size();
  if (kept == 0)
    throw EmptyKeyError("estimation consumed every sifted bit");
  if (kept > kMaxExactKeyBits)
    throw DimensionCapError("kept key of " + std::to_string(kept) +
                            " bits exceeds the exact-analysis cap of " +
                            std::to_string(kMaxExactKeyBits));

  out.pre_pa = theorem_y1_check(*out.run.eve_memory, DistanceMode::kExactMin,
                                markov_exponent);
  PaResult pa = apply_privacy_amplification(out.run, *out.run.hash);
  out.post_pa = theorem_y1_check(*pa.hashed_memory, DistanceMode::kExactMin,
                                 markov_exponent);

  // Rate accounting on this run.  The measured secrecy level is the exact
  // trace distance of the pre-PA state; its Markov lift is floored at 2^-n
  // (no key can be more uniform than ideal) before the uniformity-rate read.
  RateReport& rr = out.rates;
  const double n = static_cast<double>(kept);
  rr.n = n;
  rr.leak_ec = static_cast<double>(c.leak_ec_bits);
  rr.auth_bits = 0.0;
  rr.epsilon_sec = out.pre_pa.epsilon_sec;
  rr.markov_exponent = markov_exponent;
  rr.epsilon_f = out.pre_pa.epsilon_f;
  const double eps_f_floor =
      std::max(rr.epsilon_f, std::exp2(-n));
  UniformityRate ur = uniformity_rate(eps_f_floor, n);
  rr.lambda = ur.lambda;
  rr.l_uniform = ur.l_uniform;
  rr.r_f = final_rate(ur.l_uniform, rr.leak_ec, rr.auth_bits, n);

  KeyRateParams kp;
  kp.n = n;
  kp.q = 1.0;   // ideal-qubit efficiency constant for this toy setting
  kp.q_tol = std::min(cfg.q_tol, 0.4999);
  kp.epsilon = 1e-9;
  kp.epsilon_cor = 1e-9;
  kp.leak_ec = rr.leak_ec;
  try {
    rr.l_tomamichel = tomamichel_length(kp).l;
  } catch (const OutOfRangeError&) {
    // At toy block lengths mu(eps) can push the entropy argument past 1;
    // the finite-key bound is vacuous there and contributes no length.
    rr.l_tomamichel = 0.0;
  }

  // Phase-error cost modeled at the measured error rate (toy symmetry).
  rr.k_x = std::ceil(n * binary_entropy(std::min(c.qber_estimate, 1.0)));
  rr.l_koashi = koashi_length(n, rr.leak_ec, rr.k_x);

  const double h_min =
      -std::log2(std::max(out.pre_pa.p_guess_upper, 1e-300));
  rr.delta_lhl =
      leftover_hash_delta(static_cast<double>(out.run.final_key.size()),
                          h_min, 0.0)
          .delta;
  return out;
}

/// Run BB84 under the config and assess it end to end.
inline PipelineResult full_pipeline_assessment(
    const SimConfig& cfg, double markov_exponent = kDefaultMarkovExponent) {
  return assess_run(run_bb84(cfg), markov_exponent);
}

}  // namespace qkdcrit
