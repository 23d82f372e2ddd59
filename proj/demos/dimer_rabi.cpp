// Coherent exchange in a symmetric dimer: p1(t) = cos^2(v t).

#include <cmath>
#include <cstdio>

#include "eet/eet.hpp"

int main() {
  using namespace eet;
  const double v = 2.0;  // rad/ps
  NetworkSpec net;
  net.site_energies = {0.0, 0.0};
  net.couplings = RealMatrix{{0.0, v}, {v, 0.0}};
  ModelSpec spec{net, {}, {}, {}};
  spec.noise.sink_source = 2;  // the default names FMO site 3; the rate stays zero
  const auto gen = build_model(spec);
  const auto rho0 = QuantumState::basis_state(gen.layout(), occupation_index(gen.layout(), {site_label(1)}));

  IntegratorConfig cfg;
  cfg.t_end = 2.0;
  cfg.record_every = 100;
  const auto traj = evolve(gen, rho0, cfg, {population_observable(gen.layout())});
  const auto p1 = traj.column("populations", "site1");
  std::printf("%8s %14s %14s\n", "t_ps", "p1", "cos^2(vt)");
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    const double c = std::cos(v * traj.times[k]);
    std::printf("%8.3f %14.10f %14.10f\n", traj.times[k], p1[k], c * c);
  }
}
