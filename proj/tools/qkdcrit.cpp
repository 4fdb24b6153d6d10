// Command-line front end: evaluate claimed security parameters, run toy BB84
// simulations, and sweep the inequality suites.
//
// Exit codes: 0 success, 1 I/O failure, 2 validation/parse failure or suite
// violation, 64 usage error (bad flags, unknown suite).

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "qkdcrit/qkdcrit.hpp"

namespace {

int log_level() {
  const char* v = std::getenv("QKDCRIT_LOG");
  if (!v) return 0;
  std::string s(v);
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s == "debug" || s == "2") return 2;
  if (s.empty() || s == "quiet" || s == "off" || s == "0") return 0;
  return 1;   // info and anything else non-quiet
}

void log_at(int lvl, const std::string& msg) {
  if (log_level() >= lvl) std::cerr << "[qkdcrit] " << msg << "\n";
}

unsigned effective_jobs(unsigned jobs) {
  if (jobs > 0) return jobs;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

struct EvaluateArgs {
  std::string input, output;
  std::string format = "json";
  double exponent = qkdcrit::kDefaultMarkovExponent;
  unsigned jobs = 1;
};

int cmd_evaluate(const EvaluateArgs& a) {
  qkdcrit::ClaimsFile claims = qkdcrit::load_claims_file(a.input);
  log_at(1, "parsed " + std::to_string(claims.claims.size()) + " claims, " +
                std::to_string(claims.rejects.size()) + " rejected");
  qkdcrit::EvaluationReport rep =
      qkdcrit::evaluate_claims(claims, a.exponent, effective_jobs(a.jobs));
  const std::string text = rep.render(a.format);
  if (a.output.empty()) {
    std::cout << text;
  } else {
    qkdcrit::write_text_file(a.output, text);
    log_at(1, "wrote " + a.output);
  }
  if (!rep.rejects.empty()) {
    for (const auto& r : rep.rejects)
      std::cerr << "reject line " << r.line << ": " << r.reason << "\n";
    return 2;
  }
  return 0;
}

struct SimulateArgs {
  std::string input, output = "sim-out";
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::size_t trials = 0;
  double exponent = qkdcrit::kDefaultMarkovExponent;
  unsigned jobs = 1;
};

int cmd_simulate(const SimulateArgs& a) {
  qkdcrit::SimConfig cfg = qkdcrit::load_sim_config(a.input);
  if (a.seed_given) cfg.rng_seed = a.seed;
  log_at(2, "config: " + cfg.to_json().dump());
  qkdcrit::SimulateArtifacts art = qkdcrit::make_simulate_artifacts(
      cfg, a.trials, a.exponent, effective_jobs(a.jobs));
  const std::vector<std::string> written =
      qkdcrit::write_simulate_artifacts(art, a.output);
  for (const std::string& p : written) std::cout << "wrote " << p << "\n";
  return 0;
}

struct VerifyArgs {
  std::string suite;
  std::string output;
  std::string format = "json";
  std::size_t samples = 0;
  std::uint64_t seed = 1;
  unsigned jobs = 1;
};

int cmd_verify(const VerifyArgs& a) {
  const std::vector<qkdcrit::SuiteResult> results =
      qkdcrit::run_suites(a.suite, a.samples, a.seed, effective_jobs(a.jobs));
  std::size_t violations = 0;
  for (const auto& r : results) {
    char line[256];
    std::snprintf(line, sizeof(line),
                  "suite=%s samples=%zu violations=%zu worst_slack=%.6e %s",
                  r.name.c_str(), r.samples, r.violations, r.worst_slack,
                  r.passed() ? "pass" : "FAIL");
    std::cout << line << "\n";
    char rt[128];
    std::snprintf(rt, sizeof(rt), "%s finished in %.2fs", r.name.c_str(),
                  r.runtime_s);
    log_at(1, rt);
    for (const std::string& n : r.notes) log_at(2, r.name + ": " + n);
    violations += r.violations;
  }
  if (!a.output.empty()) {
    // Reports carry only run-deterministic fields (no wall-clock time).
    std::string text;
    if (a.format == "csv") {
      std::string csv = "suite,samples,violations,worst_slack\n";
      for (const auto& r : results) {
        char row[192];
        std::snprintf(row, sizeof(row), "%s,%zu,%zu,%.17g\n", r.name.c_str(),
                      r.samples, r.violations, r.worst_slack);
        csv += row;
      }
      text = csv;
    } else {
      nlohmann::json doc;
      doc["suites"] = nlohmann::json::array();
      for (const auto& r : results)
        doc["suites"].push_back(nlohmann::json{{"suite", r.name},
                                               {"samples", r.samples},
                                               {"violations", r.violations},
                                               {"worst_slack", r.worst_slack},
                                               {"notes", r.notes},
                                               {"passed", r.passed()}});
      text = doc.dump(2) + "\n";
    }
    qkdcrit::write_text_file(a.output, text);
    log_at(1, "wrote " + a.output);
  }
  return violations == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Security-criteria audit toolkit: evaluate claimed QKD parameters, "
      "run toy BB84 simulations with exact side-information bookkeeping, "
      "and sweep inequality suites."};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "Read flag defaults from a TOML file ([subcommand] sections; "
                 "command-line flags win)");

  EvaluateArgs ev;
  CLI::App* evaluate =
      app.add_subcommand("evaluate", "Re-evaluate claimed (n, eps_sec) rows");
  evaluate->add_option("--input,-i", ev.input, "Claims file (JSON or CSV)")
      ->required();
  evaluate->add_option("--output,-o", ev.output,
                       "Report path (default: stdout)");
  evaluate->add_option("--format,-f", ev.format, "Report format")
      ->check(CLI::IsMember({"csv", "json"}));
  evaluate->add_option("--exponent", ev.exponent,
                       "Markov exponent x in eps_F = eps_sec^x (default 1/3)");
  evaluate->add_option("--jobs,-j", ev.jobs, "Worker threads (0 = all cores)");

  SimulateArgs sim;
  CLI::App* simulate =
      app.add_subcommand("simulate", "Run one toy BB84 execution");
  simulate->add_option("--input,-i", sim.input, "SimConfig file (TOML or JSON)")
      ->required();
  simulate->add_option("--output,-o", sim.output,
                       "Artifact directory (default: sim-out)");
  CLI::Option* seed_opt = simulate->add_option(
      "--seed", sim.seed, "Override the config's rng_seed");
  simulate->add_option("--trials", sim.trials,
                       "Monte Carlo trials for the abort estimate (0 = skip)");
  simulate->add_option("--exponent", sim.exponent,
                       "Markov exponent x in eps_F = eps_sec^x (default 1/3)");
  simulate->add_option("--jobs,-j", sim.jobs, "Worker threads (0 = all cores)");

  VerifyArgs vf;
  CLI::App* verify =
      app.add_subcommand("verify", "Sweep an inequality suite");
  verify
      ->add_option("suite", vf.suite,
                   "fvdg | y1 | helstrom | pa-monotone | all")
      ->required();
  verify->add_option("--trials", vf.samples,
                     "Samples for the suite (0 = suite default)");
  verify->add_option("--seed", vf.seed, "Base seed (default 1)");
  verify->add_option("--output,-o", vf.output, "Optional report path");
  verify->add_option("--format,-f", vf.format, "Report format")
      ->check(CLI::IsMember({"csv", "json"}));
  verify->add_option("--jobs,-j", vf.jobs, "Worker threads (0 = all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 64;
  }
  sim.seed_given = seed_opt->count() > 0;

  try {
    if (app.got_subcommand(evaluate)) return cmd_evaluate(ev);
    if (app.got_subcommand(simulate)) return cmd_simulate(sim);
    if (app.got_subcommand(verify)) return cmd_verify(vf);
  } catch (const qkdcrit::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const qkdcrit::UnknownSuiteError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 64;
  } catch (const qkdcrit::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
