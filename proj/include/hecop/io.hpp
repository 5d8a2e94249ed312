#pragma once

// CSV (RFC 4180, 17 significant digits) and JSON (sorted keys, versioned
// schema) serialization, plus the flat key=value config format.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "hecop/density.hpp"
#include "hecop/errors.hpp"
#include "hecop/freeprob.hpp"
#include "hecop/sde.hpp"
#include "hecop/stats.hpp"

#ifndef HECOP_VERSION
#define HECOP_VERSION "0.0.0"
#endif
#ifndef HECOP_GIT_HASH
#define HECOP_GIT_HASH "unknown"
#endif

namespace hecop::io {

using json = nlohmann::json;  // std::map-backed objects, so keys dump sorted
using Config = std::map<std::string, std::string>;

inline constexpr int kSchemaVersion = 1;

inline std::string version_hash() { return std::string(HECOP_VERSION) + "+" + HECOP_GIT_HASH; }

/// %.17g; non-finite values as inf, -inf, nan.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : width_(header.size()) { add(header); }

  void row(const std::vector<std::string>& fields) {
    if (fields.size() != width_) throw InvalidArgument("CSV row width does not match header");
    add(fields);
  }
  const std::string& str() const { return out_; }

 private:
  void add(const std::vector<std::string>& f) {
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (i) out_ += ',';
      out_ += csv_field(f[i]);
    }
    out_ += "\r\n";
  }
  std::size_t width_;
  std::string out_;
};

/// Numbers as JSON numbers when finite, otherwise as the strings of format_double.
inline json json_number(double v) { return std::isfinite(v) ? json(v) : json(format_double(v)); }

inline json json_array(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(json_number(x));
  return a;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Flat config: one key=value per line, '#' starts a comment, blank lines ignored.
inline Config parse_config_text(std::string_view text) {
  Config cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidArgument("config line " + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw InvalidArgument("config line " + std::to_string(lineno) + ": empty key");
    if (!cfg.emplace(key, value).second) throw InvalidArgument("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }
  return cfg;
}

inline Config parse_config_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw InvalidArgument("cannot read config file " + p.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

/// Header shared by every JSON output and sidecar. generated_at is the only
/// field that changes between identical runs.
inline json metadata(std::string_view kind, const Config& resolved, const std::string& generated_at = utc_timestamp()) {
  json m;
  m["schema_version"] = kSchemaVersion;
  m["kind"] = std::string(kind);
  m["version"] = version_hash();
  m["config"] = json(resolved);
  m["generated_at"] = generated_at;
  return m;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline void write_text(const std::filesystem::path& p, const std::string& content) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw InvalidArgument("cannot write " + p.string());
  f << content;
  if (!f) throw NumericFailure("write failed for " + p.string());
}

inline json to_json(const MomentVector& m) {
  json j;
  j["source"] = to_string(m.source);
  j["moments"] = json_array(m.m);
  if (!m.stderr_.empty()) j["stderr"] = json_array(m.stderr_);
  return j;
}

inline json to_json(const KsResult& r) {
  return json{{"statistic", json_number(r.statistic)},
              {"crit05", json_number(r.crit05)},
              {"crit01", json_number(r.crit01)},
              {"reject05", r.reject05()},
              {"reject01", r.reject01()}};
}

inline json to_json(const McEstimate& e) {
  return json{{"estimate", json_number(e.estimate)},
              {"stderr", json_number(e.stderr_)},
              {"ess", json_number(e.ess)},
              {"draws", e.draws}};
}

inline json to_json(const EmpiricalReport& r) {
  json j;
  j["case"] = std::string(to_string(r.family));
  j["k"] = json_number(r.k);
  j["N"] = r.N;
  j["tau"] = json_number(r.tau);
  j["clock"] = to_string(r.clock);
  j["horizon"] = json_number(r.horizon);
  j["transform"] = to_string(r.transform);
  j["estimate"] = to_json(r.estimate);
  j["target"] = to_json(r.target);
  j["replicas"] = r.replicas;
  j["seed"] = r.seed;
  json ks = json::array();
  for (const auto& k : r.ks) ks.push_back(to_json(k));
  j["ks"] = ks;
  json ok = json::array();
  for (int l = 1; l <= r.estimate.L(); ++l) ok.push_back(r.moment_ok(l));
  j["within_tolerance"] = ok;
  return j;
}

/// Sidecar for a DensityGrid CSV.
inline json to_json(const DensityGrid& g) {
  json j;
  j["t"] = json_number(g.t);
  j["grid"] = json{{"x_min", json_number(g.grid.x_min)}, {"x_max", json_number(g.grid.x_max)}, {"points", g.grid.points}};
  j["mass"] = json_number(g.mass);
  j["raw_mass"] = json_number(g.raw_mass);
  j["support"] = json_array({g.support_lo, g.support_hi});
  j["convergence"] = json{{"etas", json_array(g.etas)},
                          {"max_iterations", g.max_iterations},
                          {"newton_fallbacks", g.newton_fallbacks},
                          {"max_residual", json_number(g.max_residual)}};
  return j;
}

inline std::string density_grid_csv(const DensityGrid& g) {
  CsvWriter w({"x", "rho"});
  for (std::size_t i = 0; i < g.rho.size(); ++i) w.row({format_double(g.grid.x(static_cast<int>(i))), format_double(g.rho[i])});
  return w.str();
}

inline std::string terminal_states_csv(const PathEnsemble& e) {
  CsvWriter w({"replica", "i", "x"});
  for (std::size_t r = 0; r < e.terminal_states.size(); ++r) {
    const auto& x = e.terminal_states[r].x;
    for (std::size_t i = 0; i < x.size(); ++i) w.row({std::to_string(r), std::to_string(i), format_double(x[i])});
  }
  return w.str();
}

/// One row per (k, N, l).
inline std::string reports_csv(const std::vector<EmpiricalReport>& reports) {
  CsvWriter w({"case", "k", "N", "tau", "clock", "horizon", "transform", "l", "estimate", "stderr", "target",
               "abs_error", "within_tolerance", "replicas", "seed"});
  for (const auto& r : reports) {
    for (int l = 1; l <= r.estimate.L(); ++l) {
      w.row({std::string(to_string(r.family)), format_double(r.k), std::to_string(r.N), format_double(r.tau),
             to_string(r.clock), format_double(r.horizon), to_string(r.transform), std::to_string(l),
             format_double(r.estimate[l]), format_double(r.estimate.stderr_.at(l)), format_double(r.target[l]),
             format_double(r.abs_error(l)), r.moment_ok(l) ? "true" : "false", std::to_string(r.replicas),
             std::to_string(r.seed)});
    }
  }
  return w.str();
}

}  // namespace hecop::io
