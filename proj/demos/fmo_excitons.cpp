// Exciton energies of the shipped FMO Hamiltonian and the exciton content of
// an excitation on site 1.

#include <cstdio>

#include "eet/eet.hpp"

int main() {
  using namespace eet;
  const auto s = find_scenario("markovian-baseline");
  const auto& net = s->model.network;
  const auto basis = exciton_basis(site_block(net));
  const auto w = basis.site_weights(1);
  std::printf("%8s %16s %16s\n", "exciton", "energy_cm-1", "site1_weight");
  for (Eigen::Index k = 0; k < basis.energies.size(); ++k)
    std::printf("%8ld %16.3f %16.6f\n", static_cast<long>(k + 1),
                units::rad_per_ps_to_wavenumber(basis.energies(k) + net.energy_offset), w(k));
}
