#pragma once

// Batch plumbing for the command-line front end: claims files (JSON or CSV,
// epsilon in scientific notation or as log10), evaluation reports in both
// formats with a rejects section and footer notes, simulation artifact
// assembly, and config-file loading.

#include <cctype>
#include <filesystem>
#include <fstream>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "json.hpp"
#include "key_rate.hpp"
#include "log_value.hpp"
#include "parallel.hpp"
#include "protocol_sim.hpp"

namespace qkdcrit {

using AuditClaim = RateClaim;

// ---------------------------------------------------------------------------
// Text-file IO.
// ---------------------------------------------------------------------------

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed on '" + path + "'");
  return ss.str();
}

inline void write_text_file(const std::string& path,
                            const std::string& content) {
  const std::filesystem::path p(path);
  std::error_code ec;
  if (p.has_parent_path())
    std::filesystem::create_directories(p.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("write failed on '" + path + "'");
}

// ---------------------------------------------------------------------------
// Claims parsing.
// ---------------------------------------------------------------------------

struct ClaimReject {
  long line = -1;   // 1-based source line (JSON inputs: array position)
  std::string label;
  std::string reason;

  nlohmann::json to_json() const {
    return nlohmann::json{{"line", line}, {"label", label}, {"reason", reason}};
  }
};

struct ClaimsFile {
  std::vector<AuditClaim> claims;
  std::vector<ClaimReject> rejects;
};

namespace detail {

inline std::string trim_copy(const std::string& s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  auto e = s.find_last_not_of(ws);
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline std::string lower_copy(std::string s) {
  for (char& c : s)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

/// Scientific-notation epsilon, exponent taken exactly so "1e-3010" survives
/// even though the linear value underflows a double.
inline Log10Value parse_epsilon_string(const std::string& raw) {
  static const std::regex re(
      R"(^\s*([+-]?(?:[0-9]+\.?[0-9]*|\.[0-9]+))(?:[eE]([+-]?[0-9]+))?\s*$)");
  std::smatch m;
  if (!std::regex_match(raw, m, re))
    throw OutOfRangeError("epsilon_sec '" + raw +
                          "' is not a scientific-notation number");
  const double mantissa = std::stod(m[1].str());
  const double exponent = m[2].matched ? std::stod(m[2].str()) : 0.0;
  return Log10Value::from_mantissa_exponent(mantissa, exponent);
}

inline double parse_full_double(const std::string& raw,
                                const std::string& field) {
  const std::string s = trim_copy(raw);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw OutOfRangeError(field + " '" + raw + "' is not a number");
  }
}

/// Line number (1-based) of a byte offset, for JSON parse diagnostics.
inline long line_of_offset(const std::string& text, std::size_t byte) {
  long line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

inline AuditClaim claim_from_json(const nlohmann::json& j) {
  if (!j.is_object())
    throw OutOfRangeError("claim row must be a JSON object");
  AuditClaim c;
  bool have_n = false, have_eps = false;
  for (const auto& [key, value] : j.items()) {
    const std::string k = lower_copy(key);
    if (k == "label") {
      if (!value.is_string()) throw OutOfRangeError("label must be a string");
      c.label = value.get<std::string>();
    } else if (k == "n") {
      c.n = value.is_number() ? value.get<double>()
                              : parse_full_double(value.get<std::string>(), "n");
      have_n = true;
    } else if (k == "epsilon_sec" || k == "eps_sec") {
      if (value.is_number())
        c.epsilon_sec = Log10Value::from_double(value.get<double>());
      else if (value.is_string())
        c.epsilon_sec = parse_epsilon_string(value.get<std::string>());
      else
        throw OutOfRangeError("epsilon_sec must be a number or string");
      have_eps = true;
    } else if (k == "eps_sec_log10" || k == "epsilon_sec_log10") {
      if (!value.is_number())
        throw OutOfRangeError("eps_sec_log10 must be a number");
      c.epsilon_sec = Log10Value::from_log10(value.get<double>());
      have_eps = true;
    } else if (k == "leak_ec") {
      c.leak_ec = value.is_number()
                      ? value.get<double>()
                      : parse_full_double(value.get<std::string>(), "leak_EC");
    } else if (k == "auth_bits") {
      c.auth_bits = value.is_number()
                        ? value.get<double>()
                        : parse_full_double(value.get<std::string>(), "auth_bits");
    } else {
      throw OutOfRangeError("unknown claim field '" + key + "'");
    }
  }
  if (!have_n) throw OutOfRangeError("claim is missing n");
  if (!have_eps)
    throw OutOfRangeError("claim is missing epsilon_sec (or eps_sec_log10)");
  c.validate();
  return c;
}

}  // namespace detail

inline ClaimsFile parse_claims_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("claims: ") + e.what(),
                     detail::line_of_offset(text, e.byte));
  }
  const nlohmann::json* rows = &doc;
  if (doc.is_object()) {
    if (!doc.contains("claims"))
      throw ParseError("claims: top-level object has no 'claims' array");
    rows = &doc.at("claims");
  }
  if (!rows->is_array())
    throw ParseError("claims: expected an array of claim objects");
  ClaimsFile out;
  long idx = 0;
  for (const auto& row : *rows) {
    ++idx;
    try {
      out.claims.push_back(detail::claim_from_json(row));
    } catch (const Error& e) {
      ClaimReject rej;
      rej.line = idx;
      if (row.is_object() && row.contains("label") &&
          row.at("label").is_string())
        rej.label = row.at("label").get<std::string>();
      rej.reason = e.what();
      out.rejects.push_back(std::move(rej));
    }
  }
  return out;
}

inline ClaimsFile parse_claims_csv(const std::string& text) {
  ClaimsFile out;
  std::istringstream in(text);
  std::string line;
  long lineno = 0;
  bool have_header = false;
  // Column roles: 0 n, 1 epsilon_sec (sci), 2 eps_sec_log10, 3 leak_EC,
  // 4 auth_bits, 5 label.
  std::vector<int> roles;
  auto split = [](const std::string& s) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : s) {
      if (ch == ',') {
        parts.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    parts.push_back(cur);
    return parts;
  };
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim_copy(line);
    if (t.empty() || t.front() == '#') continue;
    std::vector<std::string> parts = split(t);
    if (!have_header) {
      bool have_n = false, have_eps = false;
      for (const std::string& raw : parts) {
        const std::string name = detail::lower_copy(detail::trim_copy(raw));
        if (name == "n") {
          roles.push_back(0);
          have_n = true;
        } else if (name == "epsilon_sec" || name == "eps_sec") {
          roles.push_back(1);
          have_eps = true;
        } else if (name == "eps_sec_log10" || name == "epsilon_sec_log10") {
          roles.push_back(2);
          have_eps = true;
        } else if (name == "leak_ec") {
          roles.push_back(3);
        } else if (name == "auth_bits") {
          roles.push_back(4);
        } else if (name == "label") {
          roles.push_back(5);
        } else {
          throw ParseError("claims: unknown column '" + raw + "'", lineno);
        }
      }
      if (!have_n || !have_eps)
        throw ParseError(
            "claims: header must include n and epsilon_sec (or eps_sec_log10)",
            lineno);
      have_header = true;
      continue;
    }
    try {
      if (parts.size() != roles.size())
        throw OutOfRangeError(
            "expected " + std::to_string(roles.size()) + " fields, got " +
            std::to_string(parts.size()));
      AuditClaim c;
      for (std::size_t i = 0; i < parts.size(); ++i) {
        const std::string field = detail::trim_copy(parts[i]);
        switch (roles[i]) {
          case 0: c.n = detail::parse_full_double(field, "n"); break;
          case 1: c.epsilon_sec = detail::parse_epsilon_string(field); break;
          case 2:
            c.epsilon_sec = Log10Value::from_log10(
                detail::parse_full_double(field, "eps_sec_log10"));
            break;
          case 3: c.leak_ec = detail::parse_full_double(field, "leak_EC"); break;
          case 4:
            c.auth_bits = detail::parse_full_double(field, "auth_bits");
            break;
          case 5: c.label = field; break;
        }
      }
      c.validate();
      out.claims.push_back(std::move(c));
    } catch (const Error& e) {
      out.rejects.push_back(ClaimReject{lineno, "", e.what()});
    }
  }
  return out;
}

/// Dispatch on the leading character: '{' or '[' means JSON, anything else
/// CSV.  Whitespace-only input is an empty claims file in either format.
inline ClaimsFile parse_claims_text(const std::string& text) {
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) continue;
    if (ch == '{' || ch == '[') return parse_claims_json(text);
    return parse_claims_csv(text);
  }
  return ClaimsFile{};
}

inline ClaimsFile load_claims_file(const std::string& path) {
  return parse_claims_text(read_text_file(path));
}

// ---------------------------------------------------------------------------
// Evaluation report.
// ---------------------------------------------------------------------------

struct EvaluationReport {
  std::vector<ReevaluationRow> rows;
  std::vector<ClaimReject> rejects;
  std::vector<std::string> footer;
  double markov_exponent = kDefaultMarkovExponent;

  nlohmann::json to_json() const {
    nlohmann::json jrows = nlohmann::json::array();
    for (const auto& r : rows) jrows.push_back(r.to_json());
    nlohmann::json jrej = nlohmann::json::array();
    for (const auto& r : rejects) jrej.push_back(r.to_json());
    return nlohmann::json{{"markov_exponent", markov_exponent},
                          {"rows", jrows},
                          {"rejects", jrej},
                          {"footer", footer}};
  }

  std::string to_csv() const {
    std::ostringstream os;
    os << ReevaluationRow::csv_header() << "\n";
    for (const auto& r : rows) os << r.csv_line() << "\n";
    for (const auto& r : rejects)
      os << "# rejected line " << r.line << ": " << r.reason << "\n";
    for (const auto& note : footer) os << "# " << note << "\n";
    return os.str();
  }

  std::string render(const std::string& format) const {
    if (format == "csv") return to_csv();
    if (format == "json") return to_json().dump(2) + "\n";
    throw ConfigInvalidError("unknown format '" + format +
                             "' (expected csv or json)");
  }
};

inline EvaluationReport evaluate_claims(const ClaimsFile& file,
                                        double markov_exponent =
                                            kDefaultMarkovExponent,
                                        unsigned jobs = 1) {
  if (!(markov_exponent > 0.0) || markov_exponent > 1.0)
    throw OutOfRangeError("markov exponent outside (0,1]");
  EvaluationReport rep;
  rep.markov_exponent = markov_exponent;
  rep.rejects = file.rejects;
  rep.rows.resize(file.claims.size());
  detail::parallel_for(file.claims.size(), jobs, [&](std::size_t i) {
    rep.rows[i] = reevaluate_claim(file.claims[i], markov_exponent);
  });
  rep.footer = report_footer_notes(markov_exponent);
  return rep;
}

// ---------------------------------------------------------------------------
// Simulation config loading and artifact assembly.
// ---------------------------------------------------------------------------

inline SimConfig load_sim_config(const std::string& path) {
  const std::string text = read_text_file(path);
  bool looks_json = false;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) continue;
    looks_json = (ch == '{');
    break;
  }
  const bool json_ext =
      path.size() > 5 && path.substr(path.size() - 5) == ".json";
  if (looks_json || json_ext) {
    try {
      return SimConfig::from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("sim config: ") + e.what(),
                       detail::line_of_offset(text, e.byte));
    }
  }
  return SimConfig::from_toml_text(text);
}

struct SimulateArtifacts {
  nlohmann::json run_json;
  nlohmann::json assessment_json;
  std::optional<nlohmann::json> p_abort_json;
  std::string transcript_text;
};

/// One run plus (when the kept key fits the exact caps) its pre/post-PA
/// assessments, and an optional Monte Carlo abort estimate.  Everything is
/// deterministic given the config, so artifact files are byte-identical
/// across invocations.
inline SimulateArtifacts make_simulate_artifacts(
    const SimConfig& cfg, std::size_t trials,
    double markov_exponent = kDefaultMarkovExponent, unsigned jobs = 1) {
  cfg.validate();   // cap violations surface before any run starts
  SimulateArtifacts a;
  ProtocolRun run = run_bb84(cfg);
  std::ostringstream tr;
  for (const std::string& l : run.transcript) tr << l << "\n";
  a.transcript_text = tr.str();
  a.run_json = run.to_json();
  try {
    PipelineResult p = assess_run(std::move(run), markov_exponent);
    a.assessment_json =
        nlohmann::json{{"pre_pa", p.pre_pa.to_json()},
                       {"post_pa", p.post_pa.to_json()},
                       {"rates", p.rates.to_json()}};
  } catch (const DimensionCapError& e) {
    a.assessment_json = nlohmann::json{{"omitted", true}, {"reason", e.what()}};
  } catch (const EmptyKeyError& e) {
    a.assessment_json = nlohmann::json{{"omitted", true}, {"reason", e.what()}};
  }
  if (trials > 0)
    a.p_abort_json = estimate_p_abort(cfg, trials, jobs).to_json();
  return a;
}

/// Write the artifact files under out_dir; returns the paths written.
inline std::vector<std::string> write_simulate_artifacts(
    const SimulateArtifacts& a, const std::string& out_dir) {
  const std::filesystem::path dir(out_dir.empty() ? "." : out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  std::vector<std::string> written;
  auto emit = [&](const char* name, const std::string& content) {
    const std::string path = (dir / name).string();
    write_text_file(path, content);
    written.push_back(path);
  };
  emit("run.json", a.run_json.dump(2) + "\n");
  emit("assessment.json", a.assessment_json.dump(2) + "\n");
  if (a.p_abort_json) emit("p_abort.json", a.p_abort_json->dump(2) + "\n");
  emit("transcript.txt", a.transcript_text);
  return written;
}

}  // namespace qkdcrit
