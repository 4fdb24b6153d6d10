// Acceptance gate: eleven end-to-end checks covering the audit CLI, the
// guessing/distance machinery, the inequality suites, the complementarity
// bound, hashing, and the simulator's abort statistics.  Each check prints
// one PASS/FAIL line; the process exits nonzero if any check fails.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <qkdcrit/qkdcrit.hpp>

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;
int g_index = 0;

void report(bool ok, const std::string& detail) {
  ++g_index;
  std::printf("C%02d %s  %s\n", g_index, ok ? "PASS" : "FAIL", detail.c_str());
  if (!ok) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

unsigned worker_count() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? (hw > 8 ? 8 : hw) : 1;
}

fs::path work_dir() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() /
                 ("qkdcrit-acceptance-" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

struct CliRun {
  int code = -1;
  double seconds = 0.0;
};

CliRun run_cli(const std::string& args) {
  static int counter = 0;
  fs::path sink = work_dir() / ("cli-" + std::to_string(counter++) + ".log");
  std::string cmd = std::string("'") + QKDCRIT_CLI_PATH + "' " + args + " >'" +
                    sink.string() + "' 2>&1";
  Clock::time_point t0 = Clock::now();
  int rc = std::system(cmd.c_str());
  CliRun r;
  r.seconds = seconds_since(t0);
  r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return r;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  cells.push_back(cur);
  return cells;
}

std::string fmt(const char* pattern, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, pattern);
  std::vsnprintf(buf, sizeof(buf), pattern, ap);
  va_end(ap);
  return buf;
}

const char* kHeadlineClaims =
    "[{\"label\": \"headline\", \"n\": 1e4, \"epsilon_sec\": \"1e-20\"}]\n";

const char* kSimToml =
    "n_raw = 14\n"
    "eve_strategy = \"intercept-resend\"\n"
    "rng_seed = 42\n"
    "sample_fraction = 0.25\n"
    "pa_output_bits = 2\n";

// --- C1/C2: CLI re-evaluation of the headline claim ------------------------

void criterion_evaluate_success_bound() {
  const std::string in = (work_dir() / "claims.json").string();
  qkdcrit::write_text_file(in, kHeadlineClaims);
  const std::string out = (work_dir() / "report.json").string();
  CliRun r = run_cli("evaluate -i '" + in + "' -f json -o '" + out + "'");
  if (r.code != 0) {
    report(false, fmt("evaluate exited %d", r.code));
    return;
  }
  nlohmann::json rep = nlohmann::json::parse(qkdcrit::read_text_file(out));
  const double got = rep.at("rows").at(0).at("p_suc_bound_log10").get<double>();
  const double want = -20.0 / 3.0;
  const bool value_ok = std::fabs(got - want) <= 0.01;
  const bool time_ok = r.seconds < 1.0;
  report(value_ok && time_ok,
         fmt("whole-key success bound log10 = %.6f (target %.6f +- 0.01) "
             "in %.3fs (< 1s)",
             got, want, r.seconds));
}

void criterion_evaluate_ideal_level() {
  const std::string in = (work_dir() / "claims.json").string();
  const std::string out = (work_dir() / "report.csv").string();
  CliRun r = run_cli("evaluate -i '" + in + "' -f csv -o '" + out + "'");
  if (r.code != 0) {
    report(false, fmt("evaluate exited %d", r.code));
    return;
  }
  const std::string csv = qkdcrit::read_text_file(out);
  std::istringstream is(csv);
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  std::vector<std::string> cells = split_csv(row);
  const double ideal = cells.size() == 8 ? std::stod(cells[4]) : 0.0;
  const bool value_ok = std::fabs(ideal - (-3010.3)) <= 0.1;
  const bool footnote_ok = csv.find("10^-3000") != std::string::npos;
  const bool time_ok = r.seconds < 1.0;
  report(value_ok && footnote_ok && time_ok,
         fmt("ideal level log10 = %.4f (target -3010.3 +- 0.1), footer cites "
             "the truncated 10^-3000 figure, in %.3fs (< 1s)",
             ideal));
}

// --- C3: uniform length vs. the classical bit costs ------------------------

void criterion_uniform_length_vs_costs() {
  qkdcrit::RateClaim claim;
  claim.label = "headline";
  claim.n = 1e4;
  claim.epsilon_sec = qkdcrit::Log10Value::from_double(1e-20);
  claim.leak_ec = 2000.0;
  claim.auth_bits = 100.0;
  qkdcrit::ReevaluationRow row = qkdcrit::reevaluate_claim(claim);
  const bool ok =
      row.l_uniform >= 20.0 && row.l_uniform <= 30.0 && row.r_f == 0.0;
  report(ok, fmt("l_uniform = %.0f (in [20,30]) with R_F = %g after "
                 "leak_EC = 2000, auth = 100",
                 row.l_uniform, row.r_f));
}

// --- C4-C6, C8: inequality suites -------------------------------------------

void criterion_suite(const char* what, qkdcrit::SuiteResult res,
                     double elapsed, double limit_s, double slack_floor,
                     std::size_t min_samples, bool require_exact) {
  bool exact_ok = true;
  if (require_exact)
    for (const std::string& n : res.notes)
      if (n.find("non-exact") != std::string::npos) exact_ok = false;
  const bool ok = res.violations == 0 && res.worst_slack >= slack_floor &&
                  res.samples >= min_samples && elapsed < limit_s && exact_ok;
  report(ok, fmt("%s: %zu samples, %zu violations, worst slack %.3e%s "
                 "in %.1fs (< %.0fs)",
                 what, res.samples, res.violations, res.worst_slack,
                 require_exact && exact_ok ? ", all comparisons exact" : "",
                 elapsed, limit_s));
}

// --- C7: complementarity bound on a one-parameter family --------------------

void criterion_complementarity_bound() {
  const double kInvSqrt2 = 1.0 / std::sqrt(2.0);
  std::size_t violations = 0;
  double worst = 1.0;
  for (int i = 1; i <= 100; ++i) {
    const double t = 0.5 * static_cast<double>(i) / 100.0;
    qkdcrit::CqState ensemble = qkdcrit::CqState::uniform_key(
        1, {qkdcrit::DensityOperator::pure(
                {std::sqrt(1.0 - t), std::sqrt(t)}),
            qkdcrit::DensityOperator::pure(
                {std::sqrt(1.0 - t), -std::sqrt(t)})});
    qkdcrit::ComplexMatrix m(2, 2);
    m(0, 0) = 0.5;
    m(1, 1) = 0.5;
    m(0, 1) = 0.5 * (1.0 - 2.0 * t);
    m(1, 0) = m(0, 1);
    qkdcrit::DensityOperator sigma_a(m);

    // Perfectly correlated sifted table; phase-error rate from the
    // purification marginal (analytically eta_Z = 0, eta_X = t).
    qkdcrit::EtaZReadings ez = qkdcrit::koashi_eta_z({0.5, 0.0, 0.0, 0.5}, 2);
    const double ex = qkdcrit::koashi_eta_x(sigma_a, {kInvSqrt2, kInvSqrt2});
    qkdcrit::EtaKeyReadings key = qkdcrit::koashi_eta_key(ensemble);
    const double bound = qkdcrit::koashi_k1_bound(ez.conventional, ex);
    const double slack =
        bound - std::max(key.full, key.halved);   // either normalization
    worst = std::min(worst, slack);
    if (key.full > bound + 1e-9 || key.halved > bound + 1e-9) ++violations;
  }
  report(violations == 0,
         fmt("complementarity bound holds at 100 family points under both "
             "norm readings (%zu violations, worst margin %.3e)",
             violations, worst));
}

// --- C9: exhaustive two-universality at n=3, l=2 ----------------------------

void criterion_toeplitz_two_universal() {
  const std::size_t rows = 2, cols = 3, seed_bits = rows + cols - 1;
  const std::size_t n_seeds = 1u << seed_bits;
  std::size_t worst_collisions = 0;
  bool ok = true;
  for (std::size_t x = 0; x < 8; ++x) {
    for (std::size_t y = x + 1; y < 8; ++y) {
      std::size_t collisions = 0;
      for (std::size_t s = 0; s < n_seeds; ++s) {
        std::vector<std::uint8_t> bits(seed_bits);
        for (std::size_t b = 0; b < seed_bits; ++b)
          bits[b] = static_cast<std::uint8_t>((s >> b) & 1u);
        qkdcrit::ToeplitzHash h(rows, cols, bits);
        if (h.apply_index(x) == h.apply_index(y)) ++collisions;
      }
      worst_collisions = std::max(worst_collisions, collisions);
      // 2-universality: collision probability at most 2^-l = 1/4.
      if (collisions * 4 > n_seeds) ok = false;
    }
  }
  report(ok, fmt("exhaustive Toeplitz check (28 input pairs x 16 seeds): "
                 "worst collision rate %zu/16 <= 1/4",
                 worst_collisions));
}

// --- C10: abort statistics under intercept-resend ---------------------------

void criterion_abort_statistics() {
  qkdcrit::SimConfig cfg;
  cfg.n_raw = 256;
  cfg.eve_strategy = qkdcrit::EveStrategy::kInterceptResend;
  cfg.rng_seed = 7;
  cfg.sample_fraction = 0.5;
  cfg.q_tol = 0.15;
  Clock::time_point t0 = Clock::now();
  qkdcrit::PAbortEstimate est =
      qkdcrit::estimate_p_abort(cfg, 2000, worker_count());
  const double elapsed = seconds_since(t0);
  const bool qber_ok = std::fabs(est.mean_qber - 0.25) <= 0.02;
  const bool abort_ok = est.p_abort >= 0.95;
  const bool bits_ok = est.mean_estimation_bits >= 32.0;
  report(qber_ok && abort_ok && bits_ok,
         fmt("2000-trial intercept-resend sweep: mean QBER %.4f "
             "(target 0.25 +- 0.02), p_abort %.4f (>= 0.95) with %.1f "
             "estimation bits per trial, in %.1fs",
             est.mean_qber, est.p_abort, est.mean_estimation_bits, elapsed));
}

// --- C11: byte-identical artifacts across invocations -----------------------

void criterion_artifact_determinism() {
  const std::string cfg_path = (work_dir() / "sim.toml").string();
  qkdcrit::write_text_file(cfg_path, kSimToml);
  const fs::path a = work_dir() / "sim-a";
  const fs::path b = work_dir() / "sim-b";
  CliRun ra = run_cli("simulate -i '" + cfg_path + "' -o '" + a.string() +
                      "' --trials 200");
  CliRun rb = run_cli("simulate -i '" + cfg_path + "' -o '" + b.string() +
                      "' --trials 200");
  if (ra.code != 0 || rb.code != 0) {
    report(false, fmt("simulate exited %d / %d", ra.code, rb.code));
    return;
  }
  bool ok = true;
  std::string differing;
  for (const char* name :
       {"run.json", "assessment.json", "p_abort.json", "transcript.txt"}) {
    if (qkdcrit::read_text_file((a / name).string()) !=
        qkdcrit::read_text_file((b / name).string())) {
      ok = false;
      differing += std::string(" ") + name;
    }
  }
  report(ok, ok ? "identical config -> byte-identical run.json, "
                  "assessment.json, p_abort.json, transcript.txt"
                : "artifacts differ between identical invocations:" +
                      differing);
}

}  // namespace

int main() {
  const unsigned jobs = worker_count();

  criterion_evaluate_success_bound();   // C1
  criterion_evaluate_ideal_level();     // C2
  criterion_uniform_length_vs_costs();  // C3

  {
    Clock::time_point t0 = Clock::now();
    qkdcrit::SuiteResult res = qkdcrit::run_y1_suite(50, 1, jobs);
    criterion_suite("guessing vs. distance (y1)", res, seconds_since(t0),
                    180.0, -1e-9, 51, /*require_exact=*/false);  // C4
  }
  {
    Clock::time_point t0 = Clock::now();
    qkdcrit::SuiteResult res = qkdcrit::run_helstrom_suite(200, 1, jobs);
    criterion_suite("Helstrom vs. projective sweep", res, seconds_since(t0),
                    60.0, 0.0, 200, /*require_exact=*/false);  // C5
  }
  {
    Clock::time_point t0 = Clock::now();
    qkdcrit::SuiteResult res = qkdcrit::run_fvdg_suite(1000, 1, jobs);
    criterion_suite("fidelity/trace-distance", res, seconds_since(t0),
                    60.0, -1e-9, 1000, /*require_exact=*/false);  // C6
  }

  criterion_complementarity_bound();  // C7

  {
    Clock::time_point t0 = Clock::now();
    qkdcrit::SuiteResult res = qkdcrit::run_pa_monotone_suite(600, 1, jobs);
    criterion_suite("hashing monotonicity", res, seconds_since(t0),
                    120.0, -1e-12, 600, /*require_exact=*/true);  // C8
  }

  criterion_toeplitz_two_universal();  // C9
  criterion_abort_statistics();        // C10
  criterion_artifact_determinism();    // C11

  std::printf("acceptance: %d/11 passed\n", 11 - g_failures);
  return g_failures == 0 ? 0 : 1;
}
