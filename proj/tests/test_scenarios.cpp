#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "eet/io.hpp"
#include "eet/scenarios.hpp"

using namespace eet;

namespace {

const std::filesystem::path kData = std::filesystem::path(EET_TEST_DIR) / "data";

Scenario catalog_entry(const std::string& name) {
  auto s = find_scenario(name);
  if (!s) throw std::runtime_error("no scenario " + name);
  return *s;
}

Scenario dimer_sweep(const std::string& values) {
  auto doc = io::parse_config(kData / "dimer.ini").source;
  doc.set("run", "t_end", "0.3");
  doc.set("run", "sweep_parameter", "sink_rate");
  doc.set("run", "sweep_values", values);
  return scenario_from_document(doc, {true, "dimer"});
}

}  // namespace

TEST(Catalog, HasTheEightNamedScenarios) {
  std::vector<std::string> names;
  for (const auto& e : catalog_entries()) names.emplace_back(e.name);
  EXPECT_EQ(names, (std::vector<std::string>{"markovian-baseline", "local-bath-sweep", "nonlocal-bath-sweep",
                                             "transfer-contour", "entangling-power-contour", "thermal-injection",
                                             "laser-excitation", "mode-entanglement"}));
  for (const auto& n : names) EXPECT_TRUE(find_scenario(n)) << n;
  EXPECT_FALSE(find_scenario("nope"));
}

TEST(Catalog, ScenarioShapes) {
  const auto base = catalog_entry("markovian-baseline");
  EXPECT_EQ(base.model.network.n_sites(), 7u);
  EXPECT_EQ(base.integrator.t_end, 5.0);
  EXPECT_EQ(base.model.bath.kind, BathKind::None);

  const auto laser = catalog_entry("laser-excitation");
  EXPECT_EQ(laser.integrator.snapshot_times, std::vector<double>{0.075});
  EXPECT_EQ(laser.model.network.truncation, Truncation::Full);
  EXPECT_TRUE(laser.model.laser);

  const auto ep = catalog_entry("entangling-power-contour");
  EXPECT_EQ(ep.initial_state, "max-entangled-ancilla");
  EXPECT_EQ(ep.splits, std::vector<std::string>{"ancilla"});
  ASSERT_TRUE(ep.sweep);
  EXPECT_EQ(ep.sweep->parameter, "f");
  ASSERT_EQ(ep.sweep->values.size(), 12u);
  EXPECT_DOUBLE_EQ(ep.sweep->values.front(), 0.1);
  EXPECT_DOUBLE_EQ(ep.sweep->values.back(), 100.0);
  for (std::size_t i = 1; i < 12; ++i)
    EXPECT_NEAR(std::log10(ep.sweep->values[i] / ep.sweep->values[i - 1]), 3.0 / 11.0, 1e-12);

  const auto transfer = catalog_entry("transfer-contour");
  EXPECT_EQ(transfer.sweep->values, ep.sweep->values);

  for (const auto* name : {"local-bath-sweep", "nonlocal-bath-sweep"}) {
    const auto s = catalog_entry(name);
    EXPECT_EQ(s.sweep->values, (std::vector<double>{0.1, 1, 10, 100})) << name;
    for (double g : s.model.noise.dephasing) EXPECT_EQ(g, 0.0) << name;
  }

  const auto thermal = catalog_entry("thermal-injection");
  ASSERT_TRUE(thermal.model.noise.injection);
  EXPECT_EQ(thermal.model.noise.injection->n_th, 100.0);
  EXPECT_EQ(thermal.model.noise.injection->rate, 1.0);
  EXPECT_EQ(thermal.sweep->values, (std::vector<double>{0.0, 0.5}));
}

TEST(Catalog, PreparedRunsHaveExpectedDimensions) {
  EXPECT_EQ(prepare_run(catalog_entry("markovian-baseline")).initial.dim(), 9u);
  EXPECT_EQ(prepare_run(sweep_point(catalog_entry("local-bath-sweep"), 1.0)).initial.dim(), 261u);
  EXPECT_EQ(prepare_run(sweep_point(catalog_entry("nonlocal-bath-sweep"), 1.0)).initial.dim(), 9u * 8u);
  EXPECT_EQ(prepare_run(sweep_point(catalog_entry("entangling-power-contour"), 100.0)).initial.dim(), 63u * 3u);
  EXPECT_EQ(prepare_run(sweep_point(catalog_entry("thermal-injection"), 0.0)).initial.dim(), 256u);
}

TEST(Sweep, ResultsDoNotDependOnThreadCount) {
  const auto s = dimer_sweep("0.5, 1, 2, 4, 8");
  const auto one = run_scenario(s, 1), three = run_scenario(s, 3);
  ASSERT_EQ(one.points.size(), 5u);
  ASSERT_EQ(one.grids.size(), three.grids.size());
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(*one.points[i].axis_value, *three.points[i].axis_value);
  for (std::size_t g = 0; g < one.grids.size(); ++g) {
    EXPECT_EQ(one.grids[g].name, three.grids[g].name);
    EXPECT_EQ(one.grids[g].values, three.grids[g].values);
  }
  // larger sink rate drains faster
  const auto& p = one.grids.front();
  ASSERT_EQ(p.name, "p_sink");
  for (Eigen::Index j = 1; j < p.values.cols(); ++j) EXPECT_GT(p.values(p.values.rows() - 1, j), p.values(p.values.rows() - 1, j - 1));
}

TEST(Sweep, ErrorsNameTheScenarioAndPoint) {
  try {
    run_scenario(dimer_sweep("1, -1"), 1);
    FAIL() << "expected a failure";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("scenario 'dimer' (sink_rate = -1)"), std::string::npos) << e.what();
  }
}

TEST(Sweep, OverridesRebuildTheModel) {
  const auto s = with_override(catalog_entry("markovian-baseline"), "noise", "sink_rate", "2");
  EXPECT_EQ(s.name, "markovian-baseline");
  EXPECT_EQ(s.model.noise.sink_rate, 2.0);
  EXPECT_THROW(with_override(s, "noise", "bogus", "1"), Error);
}

TEST(Lifetime, ThresholdAndHold) {
  const std::vector<double> t{0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3};
  EXPECT_EQ(entanglement_lifetime(t, {1, 0.5, 0.01, 0.2, 0.01, 0.01, 0.01}), std::optional<double>(0.2));
  EXPECT_EQ(entanglement_lifetime(t, {1, 1, 1, 1, 1, 1, 0.01}), std::optional<double>(0.3));
  EXPECT_FALSE(entanglement_lifetime(t, {1, 1, 1, 1, 1, 1, 1}));
  EXPECT_EQ(entanglement_lifetime(t, {0, 0, 0, 0, 0, 0, 0}), std::optional<double>(0.0));
  EXPECT_THROW(entanglement_lifetime(t, {1}), Error);
}

TEST(Occupation, IndexOfNamedModes) {
  const auto gen = build_model(catalog_entry("markovian-baseline").model);
  const auto& layout = gen.layout();
  const auto k = occupation_index(layout, {"site3"});
  EXPECT_EQ(layout.occupation(k)[layout.mode_index("site3")], 1);
  EXPECT_THROW(occupation_index(layout, {"site3", "site4"}), Error);
}

TEST(ModeEntanglement, ExcitonStructureAndDecay) {
  const auto r = run_point(catalog_entry("mode-entanglement"));
  const auto& traj = r.trajectory;
  // excitons 3 and 6 carry the largest share of the site-1 start
  std::vector<std::pair<double, int>> pops;
  for (int k = 1; k <= 7; ++k) pops.emplace_back(traj.column("exciton_populations", "exciton" + std::to_string(k))[0], k);
  std::sort(pops.rbegin(), pops.rend());
  EXPECT_EQ(std::min(pops[0].second, pops[1].second), 3);
  EXPECT_EQ(std::max(pops[0].second, pops[1].second), 6);

  double total = 0.0;
  for (const auto& [p, k] : pops) total += p;
  EXPECT_NEAR(total, 1.0, 1e-12);

  const auto p_sink = traj.column("p_sink", "recorded");
  const auto past_half = std::find_if(p_sink.begin(), p_sink.end(), [](double v) { return v > 0.5; }) - p_sink.begin();
  ASSERT_LT(static_cast<std::size_t>(past_half), p_sink.size());
  for (const auto& col : traj.group("exciton_negativity").columns) {
    const auto v = traj.column("exciton_negativity", col);
    const auto peak = std::max_element(v.begin(), v.end()) - v.begin();
    for (auto k = std::max(peak, past_half); k + 1 < static_cast<std::ptrdiff_t>(v.size()); ++k)
      EXPECT_LE(v[k + 1], v[k] + 1e-12) << col << " at t = " << traj.times[k + 1];
  }
}

// Entangling power falls as the shared mode becomes more Markovian (larger f
// means a higher effective noise level). Shortened protocol: three f values
// and the first 0.6 ps.
TEST(EntanglingPower, DecreasesWithNoiseLevel) {
  auto doc = catalog_entry("entangling-power-contour").source;
  doc.set("run", "t_end", "0.6");
  doc.set("run", "positivity_every", "100");
  doc.set("run", "sweep_logspace", "1 100 3");
  const auto r = run_scenario(scenario_from_document(doc, {true, "ep"}));
  const auto it = std::find_if(r.grids.begin(), r.grids.end(),
                               [](const ContourGrid& c) { return c.name == "entangling_power_site1+anc1|rest"; });
  ASSERT_NE(it, r.grids.end());
  const auto& g = *it;
  EXPECT_NEAR(g.values(0, 0), std::log2(1.0 + 2.0 * std::sqrt(6.0) / 7.0), 1e-12);
  for (double t : {0.2, 0.4, 0.6}) {
    const auto i = static_cast<Eigen::Index>(std::lround(t / 0.02));
    ASSERT_NEAR(g.times[static_cast<std::size_t>(i)], t, 1e-9);
    for (Eigen::Index j = 1; j < g.values.cols(); ++j)
      EXPECT_LT(g.values(i, j), g.values(i, j - 1)) << "t = " << t << ", f = " << g.axis[static_cast<std::size_t>(j)];
  }
}
