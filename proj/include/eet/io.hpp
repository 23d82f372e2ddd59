#pragma once

#include <openssl/evp.h>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "eet/config.hpp"
#include "eet/dynamics.hpp"
#include "eet/errors.hpp"
#include "eet/scenarios.hpp"
#include "eet/units.hpp"

#ifndef EET_VERSION
#define EET_VERSION "0.0.0"
#endif

namespace eet::io {

namespace fs = std::filesystem;

/// A CSV table; the first column is time in ps unless the caller says
/// otherwise.
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

/// 12 significant digits; negative zero is written as 0.
inline std::string format_value(double v) {
  if (v == 0.0) v = 0.0;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline void write_csv(const fs::path& path, const Table& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  for (std::size_t c = 0; c < t.columns.size(); ++c) out << (c ? "," : "") << t.columns[c];
  out << "\n";
  for (const auto& r : t.rows) {
    if (r.size() != t.columns.size())
      throw Error(ErrorKind::Shape, "row width does not match the header in " + path.string());
    for (std::size_t c = 0; c < r.size(); ++c) out << (c ? "," : "") << format_value(r[c]);
    out << "\n";
  }
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

inline Table read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  Table t;
  t.name = path.stem().string();
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Io, path.string() + " is empty");
  t.columns = config::split_tokens(line, ",");
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& tok : config::split_tokens(line, ","))
      row.push_back(config::parse_number(tok, {path.string(), n}));
    if (row.size() != t.columns.size())
      throw Error(ErrorKind::Shape, path.string() + ":" + std::to_string(n) + ": expected " +
                                        std::to_string(t.columns.size()) + " fields");
    t.rows.push_back(std::move(row));
  }
  return t;
}

/// One table per observable group, each led by the time column.
inline std::vector<Table> timeseries_tables(const Trajectory& traj) {
  std::vector<Table> out;
  for (const auto& g : traj.groups) {
    Table t{g.name, {"t_ps"}, {}};
    t.columns.insert(t.columns.end(), g.columns.begin(), g.columns.end());
    for (std::size_t k = 0; k < traj.times.size() && k < g.rows.size(); ++k) {
      std::vector<double> row{traj.times[k]};
      row.insert(row.end(), g.rows[k].begin(), g.rows[k].end());
      t.rows.push_back(std::move(row));
    }
    out.push_back(std::move(t));
  }
  return out;
}

/// File-name-safe form of a group or split name.
inline std::string file_stem(const std::string& name) {
  std::string out;
  for (char c : name) {
    if (c == '|') out += "_vs_";
    else if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' || c == '+') out += c;
    else out += '_';
  }
  return out;
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorKind::Io, "cannot create directory " + dir.string());
}

/// Writes <group>.csv for every recorded group into out_dir.
inline std::vector<fs::path> write_timeseries(const Trajectory& traj, const fs::path& out_dir) {
  ensure_dir(out_dir);
  std::vector<fs::path> files;
  for (const auto& t : timeseries_tables(traj)) {
    files.push_back(out_dir / (file_stem(t.name) + ".csv"));
    write_csv(files.back(), t);
  }
  return files;
}

/// Long format: t_ps, <axis>, value.
inline Table contour_table(const ContourGrid& g, const std::string& axis) {
  Table t{g.name, {"t_ps", axis, "value"}, {}};
  for (std::size_t j = 0; j < g.axis.size(); ++j)
    for (std::size_t i = 0; i < g.times.size(); ++i)
      t.rows.push_back({g.times[i], g.axis[j], g.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))});
  return t;
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorKind::Resource, "SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

/// Digest of the canonical (sorted, whitespace-normalized) configuration.
inline std::string config_digest(const config::Document& doc) { return "sha256:" + sha256_hex(doc.canonical()); }

/// Flat key=value manifest, kept in insertion order.
class Manifest {
 public:
  void set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries_)
      if (k == key) {
        v = value;
        return;
      }
    entries_.emplace_back(key, value);
  }
  void set(const std::string& key, double value) { set(key, format_value(value)); }

  const std::string& get(const std::string& key) const {
    for (const auto& [k, v] : entries_)
      if (k == key) return v;
    throw Error(ErrorKind::Argument, "manifest has no key '" + key + "'");
  }
  bool has(const std::string& key) const {
    for (const auto& [k, v] : entries_)
      if (k == key) return true;
    return false;
  }
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  void write(const fs::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    for (const auto& [k, v] : entries_) {
      std::string flat = v;
      for (auto& c : flat)
        if (c == '\n') c = ' ';
      out << k << "=" << flat << "\n";
    }
    if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
  }

  static Manifest read(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    Manifest m;
    std::string line;
    while (std::getline(in, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      m.entries_.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    }
    return m;
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

inline ValiditySummary combined_validity(const RunResult& r) {
  ValiditySummary v;
  bool first = true;
  for (const auto& p : r.points) {
    const auto& s = p.trajectory.validity;
    v.max_trace_deviation = std::max(v.max_trace_deviation, s.max_trace_deviation);
    v.max_hermiticity_deviation = std::max(v.max_hermiticity_deviation, s.max_hermiticity_deviation);
    v.min_eigenvalue = first ? s.min_eigenvalue : std::min(v.min_eigenvalue, s.min_eigenvalue);
    v.positivity_checks += s.positivity_checks;
    first = false;
  }
  return v;
}

inline Manifest make_manifest(const RunResult& r) {
  const auto& s = r.scenario;
  const auto& cfg = s.integrator;
  Manifest m;
  m.set("scenario", s.name);
  m.set("description", s.description);
  m.set("config_digest", config_digest(s.source));
  m.set("tool_version", EET_VERSION);
  m.set("units_time", "ps");
  m.set("units_energy", "rad/ps (cm-1 inputs scaled by " + format_value(units::kRadPerPsPerWavenumber) + ")");
  m.set("units_rate", "1/ps");
  m.set("units_negativity", "ebit (log2)");
  m.set("initial_state", s.initial_state);
  std::string splits;
  for (const auto& t : s.splits) splits += (splits.empty() ? "" : " ") + t;
  m.set("splits", splits.empty() ? "none" : splits);
  m.set("integrator_method", std::string(to_string(cfg.method)));
  m.set("integrator_step_dt_ps", cfg.step_dt);
  if (cfg.method == Method::DOPRI5) m.set("integrator_adaptive_tol", cfg.adaptive_tol);
  m.set("integrator_t_end_ps", cfg.t_end);
  m.set("integrator_record_every", static_cast<double>(cfg.record_every));
  m.set("integrator_stability_guard", cfg.stability_guard ? "true" : "false");
  std::string eff, dims;
  for (const auto& p : r.points) {
    eff += (eff.empty() ? "" : ",") + format_value(p.trajectory.effective_dt);
    dims += (dims.empty() ? "" : ",") + std::to_string(p.trajectory.layout.total_dim());
  }
  m.set("integrator_effective_dt_ps", eff);
  m.set("hilbert_dimension", dims);
  if (r.swept()) {
    m.set("sweep_parameter", r.axis);
    std::string vals;
    for (const auto& p : r.points) vals += (vals.empty() ? "" : ",") + format_value(*p.axis_value);
    m.set("sweep_values", vals);
  }
  const auto v = combined_validity(r);
  m.set("validity_max_trace_deviation", v.max_trace_deviation);
  m.set("validity_max_hermiticity_deviation", v.max_hermiticity_deviation);
  m.set("validity_min_eigenvalue", v.min_eigenvalue);
  m.set("validity_positivity_checks", static_cast<double>(v.positivity_checks));
  m.set("validity_passed", v.within(cfg.tolerances) ? "true" : "false");
  m.set("wall_clock_seconds", r.seconds);
  return m;
}

inline std::string point_dir_name(const std::string& axis, double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return file_stem(axis + "_" + buf);
}

/// Writes everything a run produced under out_dir:
///   manifest.txt, config.ini (resolved input),
///   <group>.csv per observable group (single point) or one subdirectory per
///   sweep point plus contour_<name>.csv in long format,
///   snapshot_populations.csv when snapshots were requested.
inline std::vector<fs::path> write_run(const RunResult& r, const fs::path& out_dir) {
  ensure_dir(out_dir);
  std::vector<fs::path> files;
  auto write_point = [&](const PointResult& p, const fs::path& dir) {
    auto f = write_timeseries(p.trajectory, dir);
    files.insert(files.end(), f.begin(), f.end());
    if (!p.snapshot_populations.empty()) {
      Table t{"snapshot_populations", {"t_ps"}, {}};
      const auto& cols = p.trajectory.group("populations").columns;
      t.columns.insert(t.columns.end(), cols.begin(), cols.end());
      for (const auto& [time, vals] : p.snapshot_populations) {
        std::vector<double> row{time};
        row.insert(row.end(), vals.begin(), vals.end());
        t.rows.push_back(std::move(row));
      }
      files.push_back(dir / "snapshot_populations.csv");
      write_csv(files.back(), t);
    }
  };
  if (!r.swept()) {
    write_point(r.points.at(0), out_dir);
  } else {
    std::set<std::string> used;
    for (std::size_t i = 0; i < r.points.size(); ++i) {
      auto name = point_dir_name(r.axis, *r.points[i].axis_value);
      if (!used.insert(name).second) name = file_stem(r.axis) + "_point" + std::to_string(i);
      write_point(r.points[i], out_dir / name);
    }
    for (const auto& g : r.grids) {
      files.push_back(out_dir / ("contour_" + file_stem(g.name) + ".csv"));
      write_csv(files.back(), contour_table(g, r.axis));
    }
  }
  {
    const auto path = out_dir / "config.ini";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    out << r.scenario.source.to_ini();
    files.push_back(path);
  }
  files.push_back(out_dir / "manifest.txt");
  make_manifest(r).write(files.back());
  return files;
}

/// Parse and validate a scenario configuration file.
inline Scenario parse_config(const fs::path& path, bool strict = true, std::vector<std::string>* warnings = nullptr) {
  if (!fs::exists(path)) throw Error(ErrorKind::Io, "config file " + path.string() + " does not exist");
  ParseOptions opt;
  opt.strict = strict;
  return load_scenario(path, opt, warnings);
}

}  // namespace eet::io
