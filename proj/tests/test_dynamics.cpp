#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "eet/dynamics.hpp"
#include "eet/scenarios.hpp"
#include "test_util.hpp"

using namespace eet;

namespace {

// Two sites at equal energy, coupling v, optional ground and sink.
ModelSpec dimer(double v, bool ground = false, bool sink = false) {
  ModelSpec spec;
  spec.network.site_energies = {0.0, 0.0};
  spec.network.couplings = RealMatrix::Zero(2, 2);
  spec.network.couplings(0, 1) = spec.network.couplings(1, 0) = v;
  spec.network.include_ground = ground;
  spec.network.include_sink = sink;
  spec.noise.sink_source = 1;
  return spec;
}

QuantumState site_state(const Generator& gen, std::size_t k) {
  return QuantumState::basis_state(gen.layout(), occupation_index(gen.layout(), {site_label(k)}));
}

IntegratorConfig run_config(double t_end, double dt = 0.001, std::size_t record_every = 10) {
  IntegratorConfig cfg;
  cfg.t_end = t_end;
  cfg.step_dt = dt;
  cfg.record_every = record_every;
  return cfg;
}

Scenario baseline(double t_end) {
  auto s = *find_scenario("markovian-baseline");
  return with_override(s, "run", "t_end", format_number(t_end));
}

}  // namespace

TEST(Dynamics, ZeroGeneratorIsTheIdentity) {
  std::mt19937_64 rng(31);
  const auto layout = product_layout({{"a", 3}, {"b", 2}});
  const Generator gen(layout, Matrix(Matrix::Zero(6, 6)));
  const QuantumState rho(layout, eet::testing::random_density(rng, 6));
  const auto traj = evolve(gen, rho, run_config(0.5), {});
  EXPECT_EQ(traj.times.size(), 51u);
  EXPECT_LT((propagate(gen, rho.matrix(), 0.0, 0.5, run_config(0.5)) - rho.matrix()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT(traj.validity.max_trace_deviation, 1e-14);
}

TEST(Dynamics, DimerRabiOscillation) {
  const double v = 2.0;
  const auto gen = build_model(dimer(v));
  const auto rho0 = site_state(gen, 1);
  const double t_half = M_PI / (2.0 * v);
  const Matrix rho = propagate(gen, rho0.matrix(), 0.0, t_half, run_config(t_half));
  const auto i1 = Eigen::Index(occupation_index(gen.layout(), {site_label(1)}));
  EXPECT_NEAR(rho(i1, i1).real(), 0.0, 1e-7);

  const auto traj = evolve(gen, rho0, run_config(2.0), {population_observable(gen.layout())});
  const auto p1 = traj.column("populations", "site1");
  for (std::size_t k = 0; k < traj.times.size(); ++k) EXPECT_NEAR(p1[k], std::pow(std::cos(v * traj.times[k]), 2), 1e-9);
}

TEST(Dynamics, DissipationDecaysAtTwiceTheRate) {
  auto spec = dimer(0.0, true);
  const double gamma = 0.7;
  spec.noise.dissipation = {gamma, 0.0};
  const auto gen = build_model(spec);
  const auto traj = evolve(gen, site_state(gen, 1), run_config(3.0), {population_observable(gen.layout())});
  const auto p1 = traj.column("populations", "site1");
  const auto g = traj.column("populations", "ground");
  for (std::size_t k = 0; k < p1.size(); ++k) {
    EXPECT_NEAR(p1[k], std::exp(-2.0 * gamma * traj.times[k]), 1e-10);
    EXPECT_NEAR(p1[k] + g[k], 1.0, 1e-12);
  }
}

TEST(Dynamics, DephasingDampsCoherenceOnly) {
  auto spec = dimer(0.0);
  const double g1 = 0.3, g2 = 1.1;
  spec.noise.dephasing = {g1, g2};
  const auto gen = build_model(spec);
  Vector psi = Vector::Zero(2);
  psi(0) = psi(1) = 1.0;
  const auto rho0 = QuantumState::pure(gen.layout(), psi);
  for (double t : {0.1, 0.5, 1.0, 2.0}) {
    const Matrix rho = propagate(gen, rho0.matrix(), 0.0, t, run_config(t));
    EXPECT_NEAR(std::abs(rho(0, 1)), 0.5 * std::exp(-(g1 + g2) * t), 1e-10);
    EXPECT_NEAR(rho(0, 0).real(), 0.5, 1e-13);
  }
}

TEST(Dynamics, SinkFillsExponentially) {
  auto spec = dimer(0.0, true, true);
  const double rate = 1.5;
  spec.noise.sink_rate = rate;
  spec.noise.sink_source = 1;
  const auto gen = build_model(spec);
  const auto traj = evolve(gen, site_state(gen, 1), run_config(2.0), {population_observable(gen.layout())});
  const auto sink = traj.column("populations", kSinkLabel);
  const auto integral = compute_p_sink(traj, rate, 1);
  for (std::size_t k = 0; k < sink.size(); ++k) {
    const double expect = 1.0 - std::exp(-2.0 * rate * traj.times[k]);
    EXPECT_NEAR(sink[k], expect, 1e-10);
    EXPECT_NEAR(integral[k], expect, 1e-3);  // trapezoid on the 10 fs record grid
  }
}

TEST(Dynamics, InjectionReachesThermalOccupation) {
  for (double n_th : {0.0, 3.0, 100.0}) {
    auto spec = dimer(0.0, true);
    spec.noise.injection = InjectionSpec{1, 1.0, n_th};
    const auto gen = build_model(spec);
    const auto g = QuantumState::basis_state(gen.layout(), occupation_index(gen.layout(), {}));
    const auto traj = evolve(gen, g, run_config(8.0), {population_observable(gen.layout())});
    EXPECT_NEAR(traj.column("populations", "site1").back(), n_th / (2.0 * n_th + 1.0), 1e-9) << "n_th " << n_th;
  }
}

TEST(Dynamics, TraceAndHermiticityHoldFromRandomStarts) {
  std::mt19937_64 rng(32);
  auto spec = load_scenario(default_data_file()).model;
  spec.noise.injection = InjectionSpec{};
  const auto gen = build_model(spec);
  for (int k = 0; k < 100; ++k) {
    const QuantumState rho(gen.layout(), eet::testing::random_density(rng, Eigen::Index(gen.dim())));
    const auto traj = evolve(gen, rho, run_config(0.05), {});
    EXPECT_LT(traj.validity.max_trace_deviation, 1e-12);
    EXPECT_LT(traj.validity.max_hermiticity_deviation, 1e-12);
    EXPECT_GT(traj.validity.min_eigenvalue, -1e-9);
  }
}

// Strong pumping plus collective dephasing once amplified the rounding
// residue of the Hermitian fast path until the state blew up.
TEST(Dynamics, PumpedCorrelatedNetworkStaysHermitian) {
  ModelSpec spec;
  spec.network.site_energies = {0.0, 0.5, 1.0, 0.2};
  spec.network.couplings = RealMatrix::Zero(4, 4);
  for (int j = 0; j < 3; ++j) spec.network.couplings(j, j + 1) = spec.network.couplings(j + 1, j) = 1.0;
  spec.network.truncation = Truncation::Full;
  spec.noise.sink_rate = 6.0;
  spec.noise.sink_source = 3;
  spec.noise.injection = InjectionSpec{1, 1.0, 100.0};
  spec.noise.correlated_dephasing = correlated_dephasing_matrix({0.2, 9.0, 8.0, 9.0}, 0.5);
  const auto gen = build_model(spec);
  const auto g = QuantumState::basis_state(gen.layout(), occupation_index(gen.layout(), {}));
  for (auto method : {Method::RK4, Method::DOPRI5}) {
    auto cfg = run_config(2.0);
    cfg.method = method;
    const auto traj = evolve(gen, g, cfg, {});
    EXPECT_LT(traj.validity.max_hermiticity_deviation, 1e-14);
    EXPECT_LT(traj.validity.max_trace_deviation, 1e-12);
  }
}

TEST(Dynamics, StepHalvingConverges) {
  auto s = baseline(1.0);
  const auto a = run_point(s);
  s.integrator.step_dt = 0.0005;
  s.integrator.record_every = 20;
  const auto b = run_point(s);
  const auto pa = a.trajectory.column("p_sink", "recorded"), pb = b.trajectory.column("p_sink", "recorded");
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t k = 1; k < pa.size(); ++k) EXPECT_LT(std::abs(pa[k] - pb[k]), 1e-6 * pb.back());
  const auto na = a.trajectory.column("negativity", "1|2-7"), nb = b.trajectory.column("negativity", "1|2-7");
  for (std::size_t k = 0; k < na.size(); ++k) EXPECT_NEAR(na[k], nb[k], 1e-7);
}

TEST(Dynamics, AdaptiveAgreesWithFixedStep) {
  auto s = baseline(1.0);
  const auto a = run_point(s);
  s.integrator.method = Method::DOPRI5;
  s.integrator.adaptive_tol = 1e-10;
  const auto b = run_point(s);
  const auto pa = a.trajectory.column("populations", "site3"), pb = b.trajectory.column("populations", "site3");
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t k = 0; k < pa.size(); ++k) EXPECT_NEAR(pa[k], pb[k], 1e-7);
}

TEST(Dynamics, SinkIntegralMatchesRecordedSink) {
  const auto p = run_point(baseline(5.0));
  const auto rec = p.trajectory.column("p_sink", "recorded");
  const auto integ = p.trajectory.column("p_sink", "integral");
  for (std::size_t k = 0; k < rec.size(); ++k) EXPECT_LT(std::abs(rec[k] - integ[k]), 1e-4);
  for (std::size_t k = 1; k < rec.size(); ++k) EXPECT_GE(rec[k], rec[k - 1]);
}

TEST(Dynamics, StabilityGuardKeepsStiffDecayBounded) {
  auto spec = dimer(0.0, true);
  spec.noise.dissipation = {3000.0, 0.0};
  const auto gen = build_model(spec);
  auto cfg = run_config(0.1);
  const auto traj = evolve(gen, site_state(gen, 1), cfg, {population_observable(gen.layout())});
  for (double p : traj.column("populations", "site1")) EXPECT_LE(std::abs(p), 1.0 + 1e-12);
  EXPECT_NEAR(traj.column("populations", "site1").back(), 0.0, 1e-12);

  cfg.stability_guard = false;
  try {
    evolve(gen, site_state(gen, 1), cfg, {});
    FAIL() << "expected the unguarded run to leave the physical set";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::State);
  }
}

TEST(Dynamics, PiPulseInvertsAnIsolatedSite) {
  auto spec = load_scenario(default_data_file()).model;
  spec.network.couplings.setZero();
  spec.network.truncation = Truncation::Full;
  spec.noise = NoiseSpec{};
  LaserPulse p;
  p.field_strength = 4.97968;
  p.polarization = spec.network.dipoles[0].normalized();
  spec.laser = p;
  const auto gen = build_model(spec);
  const auto g = QuantumState::basis_state(gen.layout(), occupation_index(gen.layout(), {}));
  auto cfg = run_config(0.3);
  cfg.snapshot_times = {0.075};
  cfg.keep_snapshots = false;
  cfg.tolerances.positivity = 1e-7;  // a pure state under a strong drive; RK4 leaves ~1e-8
  const auto traj = evolve(gen, g, cfg, {population_observable(gen.layout())});
  EXPECT_GE(traj.column("populations", "site1").back(), 0.98);
  ASSERT_EQ(traj.snapshots.size(), 1u);
  EXPECT_NEAR(traj.snapshots[0].time, 0.075, 1e-12);
}

TEST(Dynamics, RejectsMismatchedOrInvalidStarts) {
  const auto gen = build_model(dimer(1.0));
  const QuantumState other(product_layout({{"a", 2}}), 0.5 * Matrix::Identity(2, 2));
  try {
    evolve(gen, other, run_config(0.1), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Layout);
  }
  Matrix bad = Matrix::Zero(2, 2);
  bad(0, 0) = 1.2;
  bad(1, 1) = -0.2;
  try {
    evolve(gen, QuantumState(gen.layout(), bad), run_config(0.1), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::State);
  }
  auto cfg = run_config(0.1);
  cfg.step_dt = 0.0;
  EXPECT_THROW(evolve(gen, site_state(gen, 1), cfg, {}), Error);
}
