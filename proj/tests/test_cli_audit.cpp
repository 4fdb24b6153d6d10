// Audit layer and command-line front end: claims parsing in both formats,
// report rendering, artifact assembly, and end-to-end binary behavior
// (flags, config files, logging, exit codes, determinism).  The CLI binary
// path and the source tree root arrive as compile definitions.

#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <qkdcrit/audit.hpp>
#include <qkdcrit/errors.hpp>

using namespace qkdcrit;

namespace {

namespace fs = std::filesystem;

fs::path fresh_dir() {
  static int counter = 0;
  fs::path d = fs::temp_directory_path() /
               ("qkdcrit-cli-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter++));
  fs::create_directories(d);
  return d;
}

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::string& args, const std::string& env = "") {
  fs::path dir = fresh_dir();
  fs::path out = dir / "stdout.txt";
  fs::path err = dir / "stderr.txt";
  std::string cmd = env + (env.empty() ? "" : " ") + "'" + QKDCRIT_CLI_PATH +
                    "' " + args + " >'" + out.string() + "' 2>'" +
                    err.string() + "'";
  int rc = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.out = read_text_file(out.string());
  r.err = read_text_file(err.string());
  return r;
}

std::string write_temp(const std::string& name, const std::string& content) {
  fs::path p = fresh_dir() / name;
  write_text_file(p.string(), content);
  return p.string();
}

const std::string kHeadlineClaimsJson =
    "[{\"label\": \"headline\", \"n\": 1e4, \"epsilon_sec\": \"1e-20\"}]\n";

const std::string kSimToml =
    "n_raw = 14\n"
    "eve_strategy = \"intercept-resend\"\n"
    "rng_seed = 42\n"
    "sample_fraction = 0.25\n"
    "pa_output_bits = 2\n";

}  // namespace

TEST_CASE("claims parsing: JSON shapes", "[cli-audit]") {
  SECTION("bare array and wrapped object are equivalent") {
    ClaimsFile a = parse_claims_text(
        "[{\"n\": 100, \"eps_sec\": 1e-9}]");
    ClaimsFile b = parse_claims_text(
        "{\"claims\": [{\"n\": 100, \"eps_sec\": 1e-9}]}");
    REQUIRE(a.claims.size() == 1);
    REQUIRE(b.claims.size() == 1);
    CHECK(a.claims[0].n == 100.0);
    CHECK(a.claims[0].epsilon_sec.log10() ==
          Catch::Approx(b.claims[0].epsilon_sec.log10()).margin(1e-12));
  }

  SECTION("epsilon strings survive exponents below double range") {
    ClaimsFile f = parse_claims_text(
        "[{\"n\": 10, \"epsilon_sec\": \"1e-3010\"}]");
    REQUIRE(f.claims.size() == 1);
    CHECK(f.claims[0].epsilon_sec.log10() ==
          Catch::Approx(-3010.0).margin(1e-9));
  }

  SECTION("log10 fields and mixed-case keys") {
    ClaimsFile f = parse_claims_text(
        "[{\"N\": 50, \"Eps_Sec_Log10\": -12.5, \"LEAK_EC\": 3}]");
    REQUIRE(f.claims.size() == 1);
    CHECK(f.claims[0].epsilon_sec.log10() == -12.5);
    CHECK(f.claims[0].leak_ec == 3.0);
  }

  SECTION("bad rows become rejects with their array position") {
    ClaimsFile f = parse_claims_text(
        "[{\"n\": 10, \"eps_sec\": 1e-9},"
        " {\"label\": \"broken\", \"n\": 10},"
        " {\"n\": 10, \"eps_sec\": 1e-9, \"wat\": 1}]");
    REQUIRE(f.claims.size() == 1);
    REQUIRE(f.rejects.size() == 2);
    CHECK(f.rejects[0].line == 2);
    CHECK(f.rejects[0].label == "broken");
    CHECK(f.rejects[1].line == 3);
    CHECK(f.rejects[1].reason.find("wat") != std::string::npos);
  }

  SECTION("malformed JSON raises with a line number") {
    REQUIRE_THROWS_AS(parse_claims_text("[{\"n\": 10,]"), ParseError);
    REQUIRE_THROWS_AS(parse_claims_text("{\"rows\": []}"), ParseError);
  }
}

TEST_CASE("claims parsing: CSV", "[cli-audit]") {
  SECTION("header roles, comments, and blank lines") {
    ClaimsFile f = parse_claims_text(
        "# audit input\n"
        "label, n, eps_sec, leak_EC\n"
        "\n"
        "first, 1e4, 1e-20, 0\n"
        "second, 500, 1e-9, 25\n");
    REQUIRE(f.claims.size() == 2);
    CHECK(f.claims[0].label == "first");
    CHECK(f.claims[0].n == 1e4);
    CHECK(f.claims[1].leak_ec == 25.0);
    CHECK(f.rejects.empty());
  }

  SECTION("unknown column is a hard parse error") {
    REQUIRE_THROWS_AS(parse_claims_text("n,eps_sec,frobs\n10,1e-9,1\n"),
                      ParseError);
  }

  SECTION("bad rows are rejected with 1-based line numbers") {
    ClaimsFile f = parse_claims_text(
        "n,eps_sec\n"
        "10,1e-9\n"
        "10\n"
        "0,1e-9\n");
    REQUIRE(f.claims.size() == 1);
    REQUIRE(f.rejects.size() == 2);
    CHECK(f.rejects[0].line == 3);
    CHECK(f.rejects[1].line == 4);
  }

  SECTION("log10 column") {
    ClaimsFile f = parse_claims_text("n,eps_sec_log10\n100,-3010.3\n");
    REQUIRE(f.claims.size() == 1);
    CHECK(f.claims[0].epsilon_sec.log10() == -3010.3);
  }

  SECTION("whitespace-only text is an empty file") {
    ClaimsFile f = parse_claims_text("  \n\t\n");
    CHECK(f.claims.empty());
    CHECK(f.rejects.empty());
  }
}

TEST_CASE("evaluation report rendering", "[cli-audit]") {
  ClaimsFile f = parse_claims_text(
      "n,eps_sec\n"
      "10000,1e-20\n"
      "0,1e-9\n");
  EvaluationReport rep = evaluate_claims(f);

  SECTION("JSON document structure") {
    nlohmann::json j = rep.to_json();
    REQUIRE(j.at("rows").size() == 1);
    REQUIRE(j.at("rejects").size() == 1);
    CHECK(j.at("rows")[0].at("p_suc_bound_log10").get<double>() ==
          Catch::Approx(-20.0 / 3.0).margin(0.01));
    CHECK_FALSE(j.at("footer").empty());
    CHECK(j.at("markov_exponent").get<double>() ==
          Catch::Approx(1.0 / 3.0).margin(1e-12));
  }

  SECTION("CSV carries rows, reject comments, and footer notes") {
    std::string csv = rep.to_csv();
    CHECK(csv.find(ReevaluationRow::csv_header()) == 0);
    CHECK(csv.find("# rejected line 3:") != std::string::npos);
    CHECK(csv.find("# ") != std::string::npos);
  }

  SECTION("render dispatch") {
    CHECK(rep.render("csv") == rep.to_csv());
    CHECK(rep.render("json") == rep.to_json().dump(2) + "\n");
    REQUIRE_THROWS_AS(rep.render("yaml"), ConfigInvalidError);
  }

  SECTION("exponent domain") {
    REQUIRE_THROWS_AS(evaluate_claims(f, 0.0), OutOfRangeError);
    REQUIRE_THROWS_AS(evaluate_claims(f, 1.2), OutOfRangeError);
  }

  SECTION("worker count does not change the report") {
    EvaluationReport four = evaluate_claims(f, kDefaultMarkovExponent, 4);
    CHECK(four.to_json().dump() == rep.to_json().dump());
  }
}

TEST_CASE("sim config loading dispatches on content", "[cli-audit]") {
  SECTION("TOML text") {
    std::string p = write_temp("cfg.toml", kSimToml);
    SimConfig cfg = load_sim_config(p);
    CHECK(cfg.n_raw == 14);
    CHECK(cfg.rng_seed == 42);
    CHECK(cfg.eve_strategy == EveStrategy::kInterceptResend);
  }

  SECTION("JSON text") {
    SimConfig want = SimConfig::from_toml_text(kSimToml);
    std::string p = write_temp("cfg.json", want.to_json().dump());
    SimConfig cfg = load_sim_config(p);
    CHECK(cfg.to_json() == want.to_json());
  }

  SECTION("missing file is an IO error") {
    REQUIRE_THROWS_AS(load_sim_config("/nonexistent/cfg.toml"), IoError);
  }
}

TEST_CASE("simulation artifact assembly", "[cli-audit]") {
  SimConfig cfg = SimConfig::from_toml_text(kSimToml);

  SECTION("assessment present within the exact cap; p_abort only on request") {
    SimulateArtifacts a = make_simulate_artifacts(cfg, /*trials=*/0);
    CHECK(a.run_json.contains("sifted_key"));
    CHECK(a.assessment_json.contains("pre_pa"));
    CHECK_FALSE(a.p_abort_json.has_value());
    CHECK(a.transcript_text.find("phase=sift") != std::string::npos);

    SimulateArtifacts b = make_simulate_artifacts(cfg, /*trials=*/100);
    REQUIRE(b.p_abort_json.has_value());
    CHECK(b.p_abort_json->contains("p_abort"));
  }

  SECTION("oversized kept keys omit the assessment with a reason") {
    SimConfig big = cfg;
    big.n_raw = 24;
    big.sample_fraction = 0.0;
    big.rng_seed = 8;
    SimulateArtifacts a = make_simulate_artifacts(big, 0);
    REQUIRE(a.assessment_json.contains("omitted"));
    CHECK(a.assessment_json.at("omitted").get<bool>());
    CHECK_FALSE(a.assessment_json.at("reason").get<std::string>().empty());
  }

  SECTION("written files land under the output directory") {
    fs::path dir = fresh_dir() / "artifacts";
    SimulateArtifacts a = make_simulate_artifacts(cfg, 0);
    std::vector<std::string> written =
        write_simulate_artifacts(a, dir.string());
    REQUIRE(written.size() == 3);
    CHECK(fs::exists(dir / "run.json"));
    CHECK(fs::exists(dir / "assessment.json"));
    CHECK(fs::exists(dir / "transcript.txt"));
    CHECK_FALSE(fs::exists(dir / "p_abort.json"));
  }
}

TEST_CASE("cli: evaluate", "[cli-audit]") {
  SECTION("headline numbers on stdout") {
    std::string in = write_temp("claims.json", kHeadlineClaimsJson);
    CliResult r = run_cli("evaluate --input '" + in + "'");
    REQUIRE(r.code == 0);
    nlohmann::json j = nlohmann::json::parse(r.out);
    REQUIRE(j.at("rows").size() == 1);
    CHECK(j.at("rows")[0].at("p_suc_bound_log10").get<double>() ==
          Catch::Approx(-20.0 / 3.0).margin(0.01));
    CHECK(j.at("rows")[0].at("ideal_log10").get<double>() ==
          Catch::Approx(-3010.3).margin(0.1));
  }

  SECTION("CSV and JSON reports carry the same numbers") {
    std::string in = write_temp("claims.json", kHeadlineClaimsJson);
    fs::path dir = fresh_dir();
    std::string csv_path = (dir / "rep.csv").string();
    std::string json_path = (dir / "rep.json").string();
    REQUIRE(run_cli("evaluate -i '" + in + "' -f csv -o '" + csv_path + "'")
                .code == 0);
    REQUIRE(run_cli("evaluate -i '" + in + "' -f json -o '" + json_path + "'")
                .code == 0);

    nlohmann::json j = nlohmann::json::parse(read_text_file(json_path));
    std::string csv = read_text_file(csv_path);
    std::string second_line = csv.substr(csv.find('\n') + 1);
    second_line = second_line.substr(0, second_line.find('\n'));
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : second_line) {
      if (ch == ',') {
        cells.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    cells.push_back(cur);
    REQUIRE(cells.size() == 8);
    const auto& row = j.at("rows")[0];
    CHECK(std::stod(cells[1]) == row.at("eps_sec_log10").get<double>());
    CHECK(std::stod(cells[3]) == row.at("p_suc_bound_log10").get<double>());
    CHECK(std::stod(cells[7]) == row.at("R_F").get<double>());
  }

  SECTION("rejected rows: report written, stderr lists them, exit 2") {
    std::string in = write_temp(
        "claims.csv", "n,eps_sec\n10000,1e-20\n10,2.0\n");
    fs::path out = fresh_dir() / "rep.json";
    CliResult r =
        run_cli("evaluate -i '" + in + "' -o '" + out.string() + "'");
    CHECK(r.code == 2);
    CHECK(r.err.find("reject line 3") != std::string::npos);
    nlohmann::json j = nlohmann::json::parse(read_text_file(out.string()));
    CHECK(j.at("rows").size() == 1);
    CHECK(j.at("rejects").size() == 1);
  }

  SECTION("empty input evaluates to an empty report") {
    std::string in = write_temp("empty.csv", "");
    CliResult r = run_cli("evaluate -i '" + in + "'");
    CHECK(r.code == 0);
    nlohmann::json j = nlohmann::json::parse(r.out);
    CHECK(j.at("rows").empty());
  }

  SECTION("missing input file exits 1") {
    CliResult r = run_cli("evaluate -i /nonexistent/claims.json");
    CHECK(r.code == 1);
    CHECK(r.err.find("error:") != std::string::npos);
  }

  SECTION("custom exponent reshapes eps_F") {
    std::string in = write_temp("claims.json", kHeadlineClaimsJson);
    CliResult r = run_cli("evaluate -i '" + in + "' --exponent 0.5");
    REQUIRE(r.code == 0);
    nlohmann::json j = nlohmann::json::parse(r.out);
    CHECK(j.at("rows")[0].at("eps_F_log10").get<double>() ==
          Catch::Approx(-10.0).margin(1e-9));
  }
}

TEST_CASE("cli: simulate", "[cli-audit]") {
  std::string cfg_path = write_temp("sim.toml", kSimToml);

  SECTION("artifacts, p_abort gating, and 'wrote' lines") {
    fs::path dir = fresh_dir() / "out";
    CliResult r = run_cli("simulate -i '" + cfg_path + "' -o '" +
                          dir.string() + "'");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("wrote ") != std::string::npos);
    CHECK(fs::exists(dir / "run.json"));
    CHECK(fs::exists(dir / "assessment.json"));
    CHECK(fs::exists(dir / "transcript.txt"));
    CHECK_FALSE(fs::exists(dir / "p_abort.json"));

    fs::path dir2 = fresh_dir() / "out2";
    REQUIRE(run_cli("simulate -i '" + cfg_path + "' -o '" + dir2.string() +
                    "' --trials 150")
                .code == 0);
    CHECK(fs::exists(dir2 / "p_abort.json"));
  }

  SECTION("two invocations produce byte-identical artifacts") {
    fs::path a = fresh_dir() / "a";
    fs::path b = fresh_dir() / "b";
    REQUIRE(run_cli("simulate -i '" + cfg_path + "' -o '" + a.string() +
                    "' --trials 100").code == 0);
    REQUIRE(run_cli("simulate -i '" + cfg_path + "' -o '" + b.string() +
                    "' --trials 100").code == 0);
    for (const char* name :
         {"run.json", "assessment.json", "p_abort.json", "transcript.txt"}) {
      INFO(name);
      CHECK(read_text_file((a / name).string()) ==
            read_text_file((b / name).string()));
    }
  }

  SECTION("--seed overrides the config seed") {
    fs::path base = fresh_dir() / "base";
    fs::path same = fresh_dir() / "same";
    fs::path other = fresh_dir() / "other";
    REQUIRE(run_cli("simulate -i '" + cfg_path + "' -o '" + base.string() +
                    "'").code == 0);
    REQUIRE(run_cli("simulate -i '" + cfg_path + "' -o '" + same.string() +
                    "' --seed 42").code == 0);
    REQUIRE(run_cli("simulate -i '" + cfg_path + "' -o '" + other.string() +
                    "' --seed 43").code == 0);
    CHECK(read_text_file((base / "run.json").string()) ==
          read_text_file((same / "run.json").string()));
    CHECK(read_text_file((base / "run.json").string()) !=
          read_text_file((other / "run.json").string()));
  }

  SECTION("configs beyond the exact cap exit 2 before running") {
    std::string big = write_temp("big.toml", "n_raw = 100\n");
    fs::path dir = fresh_dir() / "never";
    CliResult r =
        run_cli("simulate -i '" + big + "' -o '" + dir.string() + "'");
    CHECK(r.code == 2);
    CHECK_FALSE(fs::exists(dir / "run.json"));
  }
}

TEST_CASE("cli: verify", "[cli-audit]") {
  SECTION("fvdg sweep passes and reports one line") {
    CliResult r = run_cli("verify fvdg --trials 100");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("suite=fvdg samples=100 violations=0") !=
          std::string::npos);
    CHECK(r.out.find(" pass") != std::string::npos);
  }

  SECTION("unknown suite exits 64") {
    CliResult r = run_cli("verify frobnicate");
    CHECK(r.code == 64);
  }

  SECTION("csv report and parallel determinism") {
    fs::path one = fresh_dir() / "one.csv";
    fs::path four = fresh_dir() / "four.csv";
    REQUIRE(run_cli("verify helstrom --trials 60 -f csv -o '" + one.string() +
                    "' --jobs 1").code == 0);
    REQUIRE(run_cli("verify helstrom --trials 60 -f csv -o '" + four.string() +
                    "' --jobs 4").code == 0);
    std::string text = read_text_file(one.string());
    CHECK(text.find("suite,samples,violations,worst_slack") == 0);
    CHECK(text == read_text_file(four.string()));
  }
}

TEST_CASE("cli: top-level behavior", "[cli-audit]") {
  SECTION("no subcommand is a usage error") {
    CHECK(run_cli("").code == 64);
  }

  SECTION("unknown flag is a usage error") {
    CHECK(run_cli("evaluate --frobs 1").code == 64);
  }

  SECTION("config file supplies defaults, flags win") {
    std::string in = write_temp("claims.json", kHeadlineClaimsJson);
    std::string conf = write_temp("conf.toml",
                                  "[evaluate]\n"
                                  "input = \"" + in + "\"\n"
                                  "format = \"csv\"\n");
    CliResult from_conf = run_cli("--config '" + conf + "' evaluate");
    REQUIRE(from_conf.code == 0);
    CHECK(from_conf.out.find(ReevaluationRow::csv_header()) == 0);

    CliResult overridden =
        run_cli("--config '" + conf + "' evaluate --format json");
    REQUIRE(overridden.code == 0);
    CHECK(overridden.out.front() == '{');
  }

  SECTION("logging is stderr-only and level-gated") {
    std::string in = write_temp("claims.json", kHeadlineClaimsJson);
    CliResult quiet =
        run_cli("evaluate -i '" + in + "'", "QKDCRIT_LOG=quiet");
    CHECK(quiet.err.empty());

    CliResult info = run_cli("evaluate -i '" + in + "'", "QKDCRIT_LOG=info");
    CHECK(info.err.find("[qkdcrit] parsed 1 claims") != std::string::npos);

    CliResult debug =
        run_cli("verify pa-monotone --trials 30", "QKDCRIT_LOG=debug");
    CHECK(debug.err.find("[qkdcrit]") != std::string::npos);
    // stdout stays machine-readable either way.
    CHECK(debug.out.find("suite=pa-monotone") == 0);
  }
}

TEST_CASE("cli: golden artifacts", "[cli-audit]") {
  const fs::path golden = fs::path(QKDCRIT_SOURCE_DIR) / "tests" / "golden";

  SECTION("claims report") {
    fs::path out = fresh_dir() / "rep.csv";
    REQUIRE(run_cli("evaluate -i '" + (golden / "claims.json").string() +
                    "' -f csv -o '" + out.string() + "'").code == 0);
    CHECK(read_text_file(out.string()) ==
          read_text_file((golden / "claims_report.csv").string()));
  }

  SECTION("simulation run record") {
    fs::path dir = fresh_dir() / "sim";
    REQUIRE(run_cli("simulate -i '" +
                    (golden / "sim_config.toml").string() + "' -o '" +
                    dir.string() + "'").code == 0);
    CHECK(read_text_file((dir / "run.json").string()) ==
          read_text_file((golden / "run.json").string()));
    CHECK(read_text_file((dir / "assessment.json").string()) ==
          read_text_file((golden / "assessment.json").string()));
  }
}
