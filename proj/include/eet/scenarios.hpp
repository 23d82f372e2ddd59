#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "eet/config.hpp"
#include "eet/dynamics.hpp"
#include "eet/entanglement.hpp"
#include "eet/errors.hpp"
#include "eet/model.hpp"

#ifndef EET_DATA_DIR
#define EET_DATA_DIR "data"
#endif

namespace eet {

struct Sweep {
  std::string parameter;
  std::vector<double> values;
};

/// A runnable experiment: model, initial state, recorded splits, time grid and
/// an optional one-parameter sweep. `source` is the resolved configuration the
/// scenario was built from; sweep points override one key of it.
struct Scenario {
  std::string name;
  std::string description;
  ModelSpec model;
  std::string initial_state = "site-1";  // site-K | ground | max-entangled-ancilla
  std::vector<std::string> splits;       // sites | excitons | ancilla | explicit "1,2|3-7"
  std::optional<Sweep> sweep;
  IntegratorConfig integrator;
  bool mode_populations = false;
  config::Document source;
};

// ---------------------------------------------------------------------------
// Sweep parameters map onto config keys.

struct SweepKey {
  const char* parameter;
  const char* section;
  const char* key;
};

inline constexpr SweepKey kSweepKeys[] = {
    {"f", "bath", "f"},
    {"dephasing_correlation", "noise", "dephasing_correlation"},
    {"n_th", "injection", "n_th"},
    {"injection_rate", "injection", "rate"},
    {"sink_rate", "noise", "sink_rate"},
    {"field_strength", "laser", "field_strength"},
};

inline const SweepKey& sweep_key(const std::string& parameter) {
  for (const auto& k : kSweepKeys)
    if (parameter == k.parameter) return k;
  std::string list;
  for (const auto& k : kSweepKeys) list += (list.empty() ? "" : ", ") + std::string(k.parameter);
  throw Error(ErrorKind::Configuration, "unknown sweep parameter '" + parameter + "' (known: " + list + ")");
}

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// `n` values from lo to hi, evenly spaced in log10.
inline std::vector<double> log_spaced(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0) || !(hi > lo) || n < 2) throw Error(ErrorKind::Argument, "log_spaced needs 0 < lo < hi and n >= 2");
  std::vector<double> out(n);
  const double a = std::log10(lo), b = std::log10(hi);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

// ---------------------------------------------------------------------------
// Config -> Scenario

namespace detail {

inline std::size_t site_index(const std::string& token, std::size_t n, const config::Location& at) {
  std::string t = config::lower(token);
  if (t.rfind("site", 0) == 0) t = t.substr(4);
  const double v = config::parse_number(t, at);
  if (v < 1 || v > static_cast<double>(n) || v != std::floor(v))
    config::fail(at, "site '" + token + "' out of range 1.." + std::to_string(n));
  return static_cast<std::size_t>(v);
}

/// "1,3-5" -> {1, 3, 4, 5}
inline std::set<std::size_t> site_set(const std::string& spec, std::size_t n, const config::Location& at) {
  std::set<std::size_t> out;
  for (const auto& part : config::split_tokens(spec, ",")) {
    const auto dash = part.find('-');
    if (dash == std::string::npos) {
      out.insert(site_index(part, n, at));
      continue;
    }
    const auto a = site_index(part.substr(0, dash), n, at), b = site_index(part.substr(dash + 1), n, at);
    if (b < a) config::fail(at, "empty site range '" + part + "'");
    for (auto j = a; j <= b; ++j) out.insert(j);
  }
  return out;
}

template <class F>
void at_location(const config::Location& where, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Configuration && e.detail().find(':') != std::string::npos &&
        e.detail().rfind(where.file, 0) == 0)
      throw;
    config::fail(where, e.detail());
  }
}

}  // namespace detail

/// Bipartition for an explicit split token such as "1,2|3-7".
inline Bipartition parse_site_split(const std::string& token, std::size_t n_sites, const config::Location& at = {}) {
  const auto bar = token.find('|');
  if (bar == std::string::npos) config::fail(at, "split '" + token + "' needs a '|'");
  const auto a = detail::site_set(token.substr(0, bar), n_sites, at);
  const auto b = detail::site_set(token.substr(bar + 1), n_sites, at);
  std::set<std::string> la, lb;
  for (auto j : a) la.insert(site_label(j));
  for (auto j : b) lb.insert(site_label(j));
  Bipartition part;
  detail::at_location(at, [&] { part = Bipartition(la, lb); });
  return part;
}

struct ParseOptions {
  bool strict = true;
  std::string default_name = "custom";
};

inline Scenario scenario_from_document(const config::Document& doc, const ParseOptions& opt = {},
                                       std::vector<std::string>* warnings = nullptr) {
  using config::fail;
  using config::SectionReader;
  static const std::set<std::string> known{"", "network", "noise", "bath", "laser", "injection", "run"};
  for (const auto& [name, sec] : doc.sections()) {
    if (known.count(name)) continue;
    const auto at = sec.empty() ? config::Location{"<config>", 0} : sec.begin()->second.where;
    if (opt.strict) fail(at, "unknown section [" + name + "]");
    if (warnings) warnings->push_back(at.str() + ": ignoring unknown section [" + name + "]");
  }

  Scenario s;
  s.source = doc;
  SectionReader net_r(doc, "network"), noise_r(doc, "noise"), bath_r(doc, "bath"), laser_r(doc, "laser"),
      inj_r(doc, "injection"), run_r(doc, "run"), top_r(doc, "");

  // [network]
  auto& net = s.model.network;
  {
    const RealMatrix h = net_r.matrix("hamiltonian") * net_r.scale_of("hamiltonian");
    const auto n = static_cast<std::size_t>(h.rows());
    net.site_energies.resize(n);
    net.couplings = h;
    for (std::size_t j = 0; j < n; ++j) {
      net.site_energies[j] = h(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
      net.couplings(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = 0.0;
    }
    net.energy_offset = net_r.scaled("energy_offset", 0.0);
    if (net_r.has("dipoles")) {
      const RealMatrix d = net_r.matrix("dipoles", 3);
      if (static_cast<std::size_t>(d.rows()) != n)
        fail(net_r.where("dipoles"), "need " + std::to_string(n) + " dipole rows, got " + std::to_string(d.rows()));
      const double strength = net_r.number("dipole_strength", 0.0);
      for (Eigen::Index i = 0; i < d.rows(); ++i) {
        Eigen::Vector3d v = d.row(i).transpose();
        if (strength > 0.0) {
          if (v.norm() == 0.0) fail(net_r.where("dipoles"), "dipole " + std::to_string(i + 1) + " has zero length");
          v = strength * v.normalized();
        }
        net.dipoles.push_back(v);
      }
    } else if (net_r.has("dipole_strength")) {
      fail(net_r.where("dipole_strength"), "dipole_strength given without dipoles");
    }
    net.truncation = net_r.choice("truncation", {"single", "full"}, "single") == "full" ? Truncation::Full
                                                                                        : Truncation::Single;
    net.include_ground = net_r.flag("ground", true);
    net.include_sink = net_r.flag("sink", true);
    detail::at_location(net_r.where("hamiltonian"), [&] { net.validate(); });
  }
  const auto n = net.n_sites();

  // [noise]
  auto& noise = s.model.noise;
  if (noise_r.has("dissipation")) noise.dissipation = noise_r.scaled_list("dissipation", n);
  if (noise_r.has("dephasing")) noise.dephasing = noise_r.scaled_list("dephasing", n);
  noise.sink_rate = noise_r.scaled("sink_rate", 0.0);
  if (noise_r.has("sink_site")) noise.sink_source = detail::site_index(noise_r.text("sink_site"), n, noise_r.where("sink_site"));
  else noise.sink_source = std::min<std::size_t>(3, n);
  if (noise_r.has("dephasing_matrix") && noise_r.has("dephasing_correlation"))
    fail(noise_r.where("dephasing_correlation"), "give either dephasing_matrix or dephasing_correlation, not both");
  if (noise_r.has("dephasing_matrix")) {
    const RealMatrix g = noise_r.matrix("dephasing_matrix") * noise_r.scale_of("dephasing_matrix");
    detail::at_location(noise_r.where("dephasing_matrix"), [&] {
      if (static_cast<std::size_t>(g.rows()) != n)
        throw Error(ErrorKind::Validation, "dephasing_matrix must be " + std::to_string(n) + "x" + std::to_string(n));
      noise.correlated_dephasing = g;
      noise.validate(n);
    });
  } else if (noise_r.has("dephasing_correlation")) {
    const double c = noise_r.number("dephasing_correlation");
    detail::at_location(noise_r.where("dephasing_correlation"), [&] {
      if (noise.dephasing.empty()) throw Error(ErrorKind::Validation, "dephasing_correlation needs dephasing rates");
      const auto g = correlated_dephasing_matrix(noise.dephasing, c);
      if (c > 0.0) noise.correlated_dephasing = g;
    });
  }

  // [injection]
  if (inj_r.present() && inj_r.flag("enabled", true)) {
    InjectionSpec inj;
    if (inj_r.has("site")) inj.site = detail::site_index(inj_r.text("site"), n, inj_r.where("site"));
    inj.rate = inj_r.scaled("rate", inj.rate);
    inj.n_th = inj_r.number("n_th", inj.n_th);
    noise.injection = inj;
  } else {
    for (const auto* k : {"site", "rate", "n_th"})
      if (inj_r.has(k)) inj_r.entry(k);
  }
  const auto noise_at = noise_r.present() ? noise_r.where(noise_r.has("sink_rate") ? "sink_rate" : "dephasing")
                                          : config::Location{"<config>", 0};
  detail::at_location(noise_at, [&] { noise.validate(n); });

  // [bath]
  auto& bath = s.model.bath;
  {
    const auto kind = bath_r.choice("model", {"none", "local", "nonlocal"}, "none");
    bath.kind = kind == "local" ? BathKind::LocalModes : kind == "nonlocal" ? BathKind::NonLocalMode : BathKind::None;
    const double f = bath_r.number("f", 1.0);
    if (bath_r.has("g0")) bath.base_couplings = bath_r.scaled_list("g0", n);
    if (bath_r.has("kappa0")) bath.base_dampings = bath_r.scaled_list("kappa0", n);
    if (bath_r.has("mode_frequencies")) {
      if (config::lower(bath_r.text("mode_frequencies")) != "resonant")
        bath.mode_frequencies = bath_r.scaled_list("mode_frequencies", n);
    }
    bath.levels_per_mode = bath_r.count("levels_per_mode", bath.levels_per_mode);
    bath.max_total_excitations = bath_r.count("max_mode_excitations", bath.max_total_excitations);
    if (bath_r.has("mode_levels") && config::lower(bath_r.text("mode_levels")) != "auto")
      bath.mode_levels = bath_r.count("mode_levels", 0);
    bath.max_dim = bath_r.count("max_dim", bath.max_dim);
    if (bath.kind != BathKind::None) {
      const auto at = bath_r.where("model");
      if (bath.base_couplings.empty() || bath.base_dampings.empty()) fail(at, "bath needs g0 and kappa0");
      detail::at_location(bath_r.where("f"), [&] { bath = scale_bath(bath, f); });
      detail::at_location(at, [&] { bath.validate(n); });
    } else {
      bath.f = f;
    }
  }

  // [laser]
  if (laser_r.present() && laser_r.flag("enabled", true)) {
    LaserPulse p;
    p.field_strength = laser_r.number("field_strength");
    p.width = laser_r.number("width", p.width);
    p.center = laser_r.number("center", p.center);
    const auto pol = laser_r.text("polarization", "site1");
    const auto pol_at = laser_r.where("polarization");
    if (config::lower(pol).rfind("site", 0) == 0) {
      const auto k = detail::site_index(pol, n, pol_at);
      if (net.dipoles.empty()) fail(pol_at, "polarization '" + pol + "' needs dipoles in [network]");
      p.polarization = net.dipoles[k - 1].normalized();
    } else {
      const auto v = laser_r.numbers("polarization");
      if (v.size() != 3) fail(pol_at, "polarization needs three components or 'siteK'");
      Eigen::Vector3d e(v[0], v[1], v[2]);
      if (e.norm() == 0.0) fail(pol_at, "polarization has zero length");
      p.polarization = e.normalized();
    }
    const auto carrier = laser_r.text("carrier", "site1");
    if (config::lower(carrier).rfind("site", 0) == 0)
      p.carrier = net.site_energies[detail::site_index(carrier, n, laser_r.where("carrier")) - 1];
    else
      p.carrier = laser_r.scaled("carrier");
    p.frame = laser_r.choice("frame", {"rotating", "lab"}, "rotating") == "lab" ? Frame::Lab : Frame::Rotating;
    detail::at_location(laser_r.where("field_strength"), [&] { p.validate(); });
    s.model.laser = p;
  } else {
    for (const auto* k : {"field_strength", "width", "center", "polarization", "carrier", "frame"})
      if (laser_r.has(k)) laser_r.entry(k);
  }
  if (s.model.laser && net.truncation != Truncation::Full)
    fail(laser_r.where("field_strength"), "laser excitation needs truncation = full in [network]");

  // [run]
  s.name = run_r.text("name", opt.default_name);
  s.description = run_r.text("description", "");
  s.initial_state = config::lower(run_r.text("initial_state", "site-1"));
  {
    const auto at = run_r.where("initial_state");
    if (s.initial_state.rfind("site-", 0) == 0) detail::site_index(s.initial_state.substr(5), n, at);
    else if (s.initial_state != "ground" && s.initial_state != "max-entangled-ancilla")
      fail(at, "initial_state must be site-K, ground or max-entangled-ancilla");
    if (s.initial_state == "ground" && net.truncation == Truncation::Single && !net.include_ground)
      fail(at, "initial_state = ground needs a ground level");
    if (s.initial_state == "max-entangled-ancilla" && net.truncation != Truncation::Single)
      fail(at, "the ancilla protocol needs the single-excitation truncation");
  }
  {
    const auto at = run_r.where("splits");
    for (const auto& tok : config::split_tokens(run_r.text("splits", "sites"), " \t\n;")) {
      const auto t = config::lower(tok);
      if (t == "none") continue;
      if (t == "sites") {
        s.splits.push_back(t);
      } else if (t == "excitons") {
        if (net.truncation != Truncation::Single) fail(at, "exciton splits need the single-excitation truncation");
        s.splits.push_back(t);
      } else if (t == "ancilla") {
        if (s.initial_state != "max-entangled-ancilla") fail(at, "the ancilla split needs initial_state = max-entangled-ancilla");
        s.splits.push_back(t);
      } else {
        parse_site_split(t, n, at);
        s.splits.push_back(t);
      }
    }
  }
  auto& cfg = s.integrator;
  cfg.t_end = run_r.number("t_end", 5.0);
  cfg.step_dt = run_r.number("dt", 0.001);
  cfg.record_every = run_r.count("record_every", 10);
  cfg.method = run_r.choice("method", {"rk4", "dopri5"}, "rk4") == "dopri5" ? Method::DOPRI5 : Method::RK4;
  cfg.adaptive_tol = run_r.number("adaptive_tol", cfg.adaptive_tol);
  cfg.positivity_every = run_r.count("positivity_every", 1);
  cfg.stability_guard = run_r.flag("stability_guard", true);
  cfg.tolerances.trace = run_r.number("trace_tol", 1e-9);
  cfg.tolerances.hermiticity = run_r.number("hermiticity_tol", 1e-9);
  cfg.tolerances.positivity = run_r.number("positivity_tol", 1e-7);
  if (run_r.has("snapshot_times")) cfg.snapshot_times = run_r.numbers("snapshot_times");
  detail::at_location(run_r.where("t_end"), [&] { cfg.validate(); });
  s.mode_populations = run_r.flag("mode_populations", false);

  if (run_r.has("sweep_parameter")) {
    Sweep sw;
    sw.parameter = config::lower(run_r.text("sweep_parameter"));
    detail::at_location(run_r.where("sweep_parameter"), [&] { sweep_key(sw.parameter); });
    if (run_r.has("sweep_values") == run_r.has("sweep_logspace"))
      fail(run_r.where("sweep_parameter"), "give exactly one of sweep_values or sweep_logspace");
    if (run_r.has("sweep_values")) {
      sw.values = run_r.numbers("sweep_values");
    } else {
      const auto v = run_r.numbers("sweep_logspace");
      const auto at = run_r.where("sweep_logspace");
      if (v.size() != 3 || v[2] != std::floor(v[2])) fail(at, "sweep_logspace needs 'lo hi count'");
      detail::at_location(at, [&] { sw.values = log_spaced(v[0], v[1], static_cast<std::size_t>(v[2])); });
    }
    if (sw.values.empty()) fail(run_r.where("sweep_parameter"), "sweep has no values");
    if (sw.parameter == "f" && bath.kind == BathKind::None)
      fail(run_r.where("sweep_parameter"), "sweeping f needs a bath model");
    s.sweep = sw;
  } else {
    for (const auto* k : {"sweep_values", "sweep_logspace"})
      if (run_r.has(k)) fail(run_r.where(k), "'" + std::string(k) + "' needs sweep_parameter");
  }

  top_r.text("extends", "");
  std::vector<std::pair<std::string, config::Location>> leftovers;
  for (const auto* r : {&net_r, &noise_r, &bath_r, &laser_r, &inj_r, &run_r, &top_r}) {
    for (auto& [k, at] : r->unused()) {
      if (r->name() == "laser" || r->name() == "injection") {
        if (k == "enabled") continue;
      }
      leftovers.emplace_back((r->name().empty() ? "" : "[" + r->name() + "] ") + k, at);
    }
  }
  for (const auto& [k, at] : leftovers) {
    if (opt.strict) fail(at, "unknown key " + k);
    if (warnings) warnings->push_back(at.str() + ": ignoring unknown key " + k);
  }
  return s;
}

inline std::filesystem::path data_dir() {
  if (const char* env = std::getenv("EET_DATA_DIR"); env && *env) return env;
  return EET_DATA_DIR;
}

inline std::filesystem::path default_data_file() { return data_dir() / "fmo_default.ini"; }

inline Scenario load_scenario(const std::filesystem::path& path, const ParseOptions& opt = {},
                              std::vector<std::string>* warnings = nullptr) {
  auto doc = config::Document::load(path, data_dir());
  auto o = opt;
  if (o.default_name == "custom") o.default_name = path.stem().string();
  return scenario_from_document(doc, o, warnings);
}

/// Rebuild a scenario after changing one configuration key.
inline Scenario with_override(const Scenario& s, const std::string& section, const std::string& key,
                              const std::string& value) {
  auto doc = s.source;
  doc.set(section, key, value);
  auto out = scenario_from_document(doc, {true, s.name});
  out.name = s.name;
  out.description = s.description;
  return out;
}

// ---------------------------------------------------------------------------
// Catalog

struct CatalogEntry {
  const char* name;
  const char* description;
  std::vector<std::tuple<const char*, const char*, const char*>> overrides;
};

inline const std::vector<CatalogEntry>& catalog_entries() {
  static const std::vector<CatalogEntry> entries{
      {"markovian-baseline",
       "Markovian dephasing at the optimal rates, site-1 start, negativity across the six chain splits",
       {}},
      {"local-bath-sweep",
       "Damped resonant mode on every site, f in {0.1, 1, 10, 100}",
       {{"bath", "model", "local"},
        {"noise", "dephasing", "0"},
        {"run", "sweep_parameter", "f"},
        {"run", "sweep_values", "0.1, 1, 10, 100"},
        {"run", "mode_populations", "true"}}},
      {"nonlocal-bath-sweep",
       "One damped mode shared by all sites with site-dependent coupling, f in {0.1, 1, 10, 100}",
       {{"bath", "model", "nonlocal"},
        {"noise", "dephasing", "0"},
        {"run", "sweep_parameter", "f"},
        {"run", "sweep_values", "0.1, 1, 10, 100"}}},
      {"transfer-contour",
       "Sink population over time and f for the shared-mode bath",
       {{"bath", "model", "nonlocal"},
        {"noise", "dephasing", "0"},
        {"run", "splits", "none"},
        {"run", "positivity_every", "10"},
        {"run", "sweep_parameter", "f"},
        {"run", "sweep_logspace", "0.1 100 12"}}},
      {"entangling-power-contour",
       "Entangling power across {site 1, ancilla 1} | rest over time and f for the shared-mode bath",
       {{"bath", "model", "nonlocal"},
        {"noise", "dephasing", "0"},
        {"run", "initial_state", "max-entangled-ancilla"},
        {"run", "splits", "ancilla"},
        {"run", "record_every", "20"},
        {"run", "positivity_every", "10"},
        {"run", "sweep_parameter", "f"},
        {"run", "sweep_logspace", "0.1 100 12"}}},
      {"thermal-injection",
       "Ground-state start, thermal pumping of site 1, local and spatially correlated dephasing",
       {{"network", "truncation", "full"},
        {"injection", "enabled", "true"},
        {"run", "initial_state", "ground"},
        {"run", "sweep_parameter", "dephasing_correlation"},
        {"run", "sweep_values", "0, 0.5"}}},
      {"laser-excitation",
       "Gaussian pi-pulse on site 1 from the ground state, local and spatially correlated dephasing",
       {{"network", "truncation", "full"},
        {"laser", "enabled", "true"},
        {"run", "initial_state", "ground"},
        {"run", "snapshot_times", "0.075"},
        {"run", "sweep_parameter", "dephasing_correlation"},
        {"run", "sweep_values", "0, 0.5"}}},
      {"mode-entanglement",
       "Exciton populations and entanglement across energy-ordered exciton splits",
       {{"run", "splits", "excitons"}}},
  };
  return entries;
}

inline Scenario catalog_scenario(const CatalogEntry& e) {
  auto doc = config::Document::load(default_data_file());
  doc.set("run", "name", e.name, {"<catalog>", 0});
  doc.set("run", "description", e.description, {"<catalog>", 0});
  for (const auto& [sec, key, value] : e.overrides) doc.set(sec, key, value, {"<catalog>", 0});
  try {
    return scenario_from_document(doc, {true, e.name});
  } catch (const Error& err) {
    err.rethrow_with_context(std::string("catalog scenario '") + e.name + "'");
  }
}

inline std::vector<Scenario> catalog() {
  std::vector<Scenario> out;
  for (const auto& e : catalog_entries()) out.push_back(catalog_scenario(e));
  return out;
}

inline std::optional<Scenario> find_scenario(const std::string& name) {
  for (const auto& e : catalog_entries())
    if (name == e.name) return catalog_scenario(e);
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Running

/// Basis index with the given modes occupied once and every other mode empty.
inline std::size_t occupation_index(const BasisLayout& layout, const std::set<std::string>& occupied) {
  std::vector<int> want(layout.mode_labels().size(), 0);
  for (const auto& m : occupied) want[layout.mode_index(m)] = 1;
  for (std::size_t x = 0; x < layout.total_dim(); ++x) {
    const auto occ = layout.occupation(x);
    if (std::equal(occ.begin(), occ.end(), want.begin())) return x;
  }
  std::string names;
  for (const auto& m : occupied) names += (names.empty() ? "" : ",") + m;
  throw Error(ErrorKind::Layout, "layout has no basis state with exactly {" + names + "} occupied");
}

/// Generator, initial state and observers for one sweep point.
struct PreparedRun {
  Generator generator;
  QuantumState initial;
  std::vector<Observable> observers;
};

inline PreparedRun prepare_run(const Scenario& s) {
  auto gen = build_model(s.model);
  const auto n = s.model.network.n_sites();
  std::optional<QuantumState> rho0;
  if (s.initial_state == "max-entangled-ancilla") {
    auto setup = entangling_power_setup(gen);
    gen = std::move(setup.generator);
    rho0 = std::move(setup.initial);
  } else if (s.initial_state == "ground") {
    rho0 = QuantumState::basis_state(gen.layout(), occupation_index(gen.layout(), {}));
  } else {
    const auto k = std::stoul(s.initial_state.substr(5));
    rho0 = QuantumState::basis_state(gen.layout(), occupation_index(gen.layout(), {site_label(k)}));
  }
  const auto& layout = gen.layout();
  std::vector<Observable> obs{population_observable(layout)};
  if (s.mode_populations && s.model.bath.kind != BathKind::None) {
    std::vector<std::string> modes;
    if (s.model.bath.kind == BathKind::LocalModes)
      for (std::size_t j = 1; j <= n; ++j) modes.push_back(mode_label(j));
    else
      modes.push_back(kNonLocalModeLabel);
    obs.push_back(mode_population_observable(layout, modes));
  }
  std::vector<Bipartition> site_splits;
  std::vector<std::string> site_names;
  for (const auto& tok : s.splits) {
    if (tok == "sites") {
      for (std::size_t k = 1; k < n; ++k) {
        site_splits.push_back(site_split(n, k));
        site_names.push_back(chain_split_name(n, k));
      }
    } else if (tok == "excitons") {
      for (auto& o : exciton_observables(layout, site_block(s.model.network))) obs.push_back(std::move(o));
    } else if (tok == "ancilla") {
      obs.push_back(negativity_observable(layout, {ancilla_split(n)}, {"site1+anc1|rest"}, "entangling_power"));
    } else {
      site_splits.push_back(parse_site_split(tok, n));
      site_names.push_back(tok);
    }
  }
  if (!site_splits.empty()) obs.push_back(negativity_observable(layout, site_splits, site_names, "negativity"));
  return {std::move(gen), std::move(*rho0), std::move(obs)};
}

/// Outcome of one scenario point.
struct PointResult {
  std::optional<double> axis_value;
  Trajectory trajectory;
  std::vector<std::pair<double, std::vector<double>>> snapshot_populations;  // columns of "populations"
  double seconds = 0.0;
};

/// (time x axis) table of one recorded column across a sweep.
struct ContourGrid {
  std::string name;
  std::vector<double> times;
  std::vector<double> axis;
  RealMatrix values;  // rows: times, columns: axis
};

/// Result of run_scenario: a single point, or one point per sweep value in
/// axis order plus the derived contour grids.
struct RunResult {
  Scenario scenario;
  std::string axis;
  std::vector<PointResult> points;
  std::vector<ContourGrid> grids;
  double seconds = 0.0;

  bool swept() const { return !axis.empty(); }
  const Trajectory& trajectory(std::size_t i = 0) const { return points.at(i).trajectory; }
};

inline PointResult run_point(const Scenario& s) {
  const auto t0 = std::chrono::steady_clock::now();
  auto prep = prepare_run(s);
  PointResult out;
  out.trajectory = evolve(prep.generator, prep.initial, s.integrator, prep.observers);
  auto& traj = out.trajectory;
  const auto& layout = traj.layout;
  if (layout.has_mode(kSinkLabel)) {
    SeriesGroup g{"p_sink", {"recorded", "integral"}, {}};
    const auto rec = traj.column("populations", kSinkLabel);
    const auto integral = compute_p_sink(traj, s.model.noise.sink_rate, s.model.noise.sink_source);
    for (std::size_t k = 0; k < rec.size(); ++k) g.rows.push_back({rec[k], integral[k]});
    traj.groups.push_back(std::move(g));
  }
  if (!traj.snapshots.empty()) {
    const auto pop = population_observable(layout);
    for (const auto& snap : traj.snapshots) {
      std::vector<double> row;
      pop.eval(snap.time, snap.rho, row);
      out.snapshot_populations.emplace_back(snap.time, std::move(row));
    }
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

/// Worker threads for sweeps: EET_THREADS if set, else the hardware count.
inline std::size_t sweep_threads() {
  if (const char* env = std::getenv("EET_THREADS"); env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    throw Error(ErrorKind::Configuration, std::string("EET_THREADS must be a positive integer, got '") + env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Scenario for one sweep value.
inline Scenario sweep_point(const Scenario& s, double value) {
  const auto& key = sweep_key(s.sweep->parameter);
  auto doc = s.source;
  doc.set(key.section, key.key, format_number(value));
  doc.erase("run", "sweep_parameter");
  doc.erase("run", "sweep_values");
  doc.erase("run", "sweep_logspace");
  auto out = scenario_from_document(doc, {true, s.name});
  return out;
}

inline std::vector<ContourGrid> contour_grids(const std::vector<PointResult>& points, const std::vector<double>& axis) {
  std::vector<ContourGrid> grids;
  if (points.empty()) return grids;
  const auto& first = points.front().trajectory;
  std::vector<std::pair<std::string, std::string>> wanted;
  if (first.has_group("p_sink")) wanted.emplace_back("p_sink", "recorded");
  for (const char* g : {"entangling_power", "negativity"})
    if (first.has_group(g))
      for (const auto& c : first.group(g).columns) wanted.emplace_back(g, c);
  for (const auto& [g, c] : wanted) {
    ContourGrid grid{g == "p_sink" ? "p_sink" : g + "_" + c, first.times, axis, {}};
    grid.values.resize(static_cast<Eigen::Index>(first.times.size()), static_cast<Eigen::Index>(axis.size()));
    for (std::size_t j = 0; j < points.size(); ++j) {
      const auto& tr = points[j].trajectory;
      if (tr.times.size() != first.times.size())
        throw Error(ErrorKind::Shape, "sweep points recorded different time grids");
      const auto col = tr.column(g, c);
      for (std::size_t i = 0; i < col.size(); ++i)
        grid.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
    }
    grids.push_back(std::move(grid));
  }
  return grids;
}

/// Run a scenario. Sweep points run on up to sweep_threads() workers; results
/// are stored by axis position, so the output does not depend on scheduling.
inline RunResult run_scenario(const Scenario& s, std::optional<std::size_t> threads = std::nullopt) {
  const auto t0 = std::chrono::steady_clock::now();
  RunResult result;
  result.scenario = s;
  auto context = [&](const std::optional<double>& v) {
    std::string c = "scenario '" + s.name + "'";
    if (v) c += " (" + s.sweep->parameter + " = " + format_number(*v) + ")";
    return c;
  };
  if (!s.sweep) {
    try {
      result.points.push_back(run_point(s));
    } catch (const Error& e) {
      e.rethrow_with_context(context(std::nullopt));
    }
  } else {
    const auto& values = s.sweep->values;
    result.axis = s.sweep->parameter;
    std::vector<Scenario> pts;
    for (double v : values) {
      try {
        pts.push_back(sweep_point(s, v));
      } catch (const Error& e) {
        e.rethrow_with_context(context(v));
      }
    }
    result.points.resize(values.size());
    std::vector<std::exception_ptr> errors(values.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i; (i = next.fetch_add(1)) < values.size();) {
        try {
          result.points[i] = run_point(pts[i]);
          result.points[i].axis_value = values[i];
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    const auto n_threads = std::min(threads.value_or(sweep_threads()), values.size());
    if (n_threads <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (std::size_t k = 0; k < n_threads; ++k) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
    for (std::size_t i = 0; i < errors.size(); ++i) {
      if (!errors[i]) continue;
      try {
        std::rethrow_exception(errors[i]);
      } catch (const Error& e) {
        e.rethrow_with_context(context(values[i]));
      }
    }
    result.grids = contour_grids(result.points, values);
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

// ---------------------------------------------------------------------------
// Derived metrics

/// First recorded time at which `values` drops below `threshold` and stays
/// below for `hold` ps (or until the end of the record). nullopt if it never
/// does.
inline std::optional<double> entanglement_lifetime(const std::vector<double>& times, const std::vector<double>& values,
                                                   double threshold = 0.05, double hold = 0.1) {
  if (times.size() != values.size()) throw Error(ErrorKind::Shape, "times and values differ in length");
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (values[k] >= threshold) continue;
    bool stays = true;
    for (std::size_t m = k; m < times.size() && times[m] <= times[k] + hold + 1e-12; ++m)
      if (values[m] >= threshold) {
        stays = false;
        break;
      }
    if (stays) return times[k];
  }
  return std::nullopt;
}

}  // namespace eet
