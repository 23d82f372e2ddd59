// eetsim: run, list and validate energy-transfer scenarios.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "eet/eet.hpp"

namespace fs = std::filesystem;

namespace {

struct RunOptions {
  std::string target;
  std::string out;
  std::optional<double> dt;
  std::optional<double> t_end;
  std::optional<double> f;
  std::string f_sweep;
  bool strict = false;
};

eet::Scenario resolve(const std::string& target, bool strict, std::vector<std::string>& warnings) {
  if (auto s = eet::find_scenario(target)) return *s;
  if (fs::exists(target)) return eet::io::parse_config(target, strict, &warnings);
  std::string names;
  for (const auto& e : eet::catalog_entries()) names += std::string("\n  ") + e.name;
  throw eet::Error(eet::ErrorKind::Argument,
                   "'" + target + "' is neither a catalog scenario nor a config file; scenarios:" + names);
}

eet::Scenario apply_overrides(const eet::Scenario& s, const RunOptions& o) {
  auto doc = s.source;
  const eet::config::Location cli{"<command line>", 0};
  if (o.dt) doc.set("run", "dt", eet::format_number(*o.dt), cli);
  if (o.t_end) doc.set("run", "t_end", eet::format_number(*o.t_end), cli);
  if (o.f) {
    doc.set("bath", "f", eet::format_number(*o.f), cli);
    if (s.sweep && s.sweep->parameter == "f")
      for (const auto* k : {"sweep_parameter", "sweep_values", "sweep_logspace"}) doc.erase("run", k);
  }
  if (!o.f_sweep.empty()) {
    for (const auto* k : {"sweep_values", "sweep_logspace"}) doc.erase("run", k);
    doc.set("run", "sweep_parameter", "f", cli);
    doc.set("run", "sweep_values", o.f_sweep, cli);
  }
  if (!o.dt && !o.t_end && !o.f && o.f_sweep.empty()) return s;
  return eet::scenario_from_document(doc, {o.strict, s.name});
}

void print_validity(const eet::RunResult& r) {
  const auto v = eet::io::combined_validity(r);
  std::printf("validity: max trace deviation %.3e, max hermiticity deviation %.3e, min eigenvalue %.3e (%zu checks)\n",
              v.max_trace_deviation, v.max_hermiticity_deviation, v.min_eigenvalue, v.positivity_checks);
}

int cmd_run(const RunOptions& o) {
  std::vector<std::string> warnings;
  auto s = apply_overrides(resolve(o.target, o.strict, warnings), o);
  for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  const fs::path out = o.out.empty() ? fs::path("out") / s.name : fs::path(o.out);
  std::printf("scenario %s", s.name.c_str());
  if (s.sweep) {
    std::printf(" (%s sweep over %zu values, %zu threads)", s.sweep->parameter.c_str(), s.sweep->values.size(),
                std::min(eet::sweep_threads(), s.sweep->values.size()));
  }
  std::printf("\n");
  std::fflush(stdout);
  const auto result = eet::run_scenario(s);
  for (const auto& p : result.points) {
    const auto& tr = p.trajectory;
    if (p.axis_value) std::printf("  %s = %-10s", result.axis.c_str(), eet::io::format_value(*p.axis_value).c_str());
    else std::printf("  ");
    std::printf(" dim %zu, %zu steps, %.1f s", tr.layout.total_dim(), tr.steps_taken, p.seconds);
    if (tr.has_group("p_sink")) std::printf(", p_sink(t_end) = %.6f", tr.column("p_sink", "recorded").back());
    std::printf("\n");
  }
  print_validity(result);
  const auto files = eet::io::write_run(result, out);
  std::printf("wrote %zu files to %s\n", files.size(), out.string().c_str());
  const auto ok = eet::io::combined_validity(result).within(s.integrator.tolerances);
  if (!ok) std::fprintf(stderr, "warning: state validity outside run tolerances\n");
  return ok ? 0 : 3;
}

int cmd_list() {
  for (const auto& s : eet::catalog()) {
    std::printf("%-26s %s\n", s.name.c_str(), s.description.c_str());
    if (s.sweep) {
      std::printf("%-26s   sweep %s:", "", s.sweep->parameter.c_str());
      for (double v : s.sweep->values) std::printf(" %s", eet::io::format_value(v).c_str());
      std::printf("\n");
    }
  }
  return 0;
}

int cmd_validate(const std::string& path, bool strict) {
  std::vector<std::string> warnings;
  const auto s = eet::io::parse_config(path, strict, &warnings);
  for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  std::vector<eet::Scenario> points{s};
  if (s.sweep) {
    points.clear();
    for (double v : s.sweep->values) points.push_back(eet::sweep_point(s, v));
  }
  std::size_t max_dim = 0;
  for (const auto& p : points) {
    auto prep = eet::prepare_run(p);
    const auto report = eet::assert_valid_state(prep.initial, p.integrator.tolerances);
    if (!report.passed()) throw eet::Error(eet::ErrorKind::State, "initial state invalid: " + report.summary());
    max_dim = std::max(max_dim, prep.generator.dim());
  }
  std::printf("%s: ok\n", path.c_str());
  std::printf("  scenario    %s\n", s.name.c_str());
  std::printf("  sites       %zu\n", s.model.network.n_sites());
  std::printf("  dimension   %zu%s\n", max_dim, points.size() > 1 ? " (largest sweep point)" : "");
  std::printf("  initial     %s\n", s.initial_state.c_str());
  if (s.sweep) std::printf("  sweep       %s, %zu values\n", s.sweep->parameter.c_str(), s.sweep->values.size());
  std::printf("  digest      %s\n", eet::io::config_digest(s.source).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exciton energy transfer and entanglement simulator"};
  app.set_version_flag("--version", EET_VERSION);
  app.require_subcommand(1);

  RunOptions ro;
  auto* run = app.add_subcommand("run", "Run a catalog scenario or a config file");
  run->add_option("target", ro.target, "Scenario name or config path")->required();
  run->add_option("--out", ro.out, "Output directory (default out/<scenario>)");
  run->add_option("--dt", ro.dt, "Integrator step in ps")->check(CLI::PositiveNumber);
  run->add_option("--t-end", ro.t_end, "End time in ps")->check(CLI::PositiveNumber);
  auto* f_opt = run->add_option("--f", ro.f, "Single f value (replaces an f sweep)")->check(CLI::PositiveNumber);
  auto* sweep_opt = run->add_option("--f-sweep", ro.f_sweep, "Comma-separated f values");
  f_opt->excludes(sweep_opt);
  run->add_flag("--strict", ro.strict, "Reject unknown config keys");

  std::string validate_path;
  bool validate_strict = false;
  auto* validate = app.add_subcommand("validate", "Parse a config file and check the model");
  validate->add_option("config", validate_path, "Config path")->required();
  validate->add_flag("--strict", validate_strict, "Reject unknown config keys");

  app.add_subcommand("list", "List catalog scenarios");

  CLI11_PARSE(app, argc, argv);
  try {
    if (run->parsed()) return cmd_run(ro);
    if (validate->parsed()) return cmd_validate(validate_path, validate_strict);
    return cmd_list();
  } catch (const eet::Error& e) {
    std::fprintf(stderr, "eetsim: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "eetsim: %s\n", e.what());
    return 1;
  }
}
