// Log-negativity of a two-qubit Werner state as the mixing grows, and the
// entangling power of CNOT and SWAP.

#include <cmath>
#include <cstdio>

#include "eet/eet.hpp"

int main() {
  using namespace eet;
  const auto layout = product_layout({{"a", 2}, {"b", 2}});
  Vector bell = Vector::Zero(4);
  bell(0) = bell(3) = 1.0 / std::sqrt(2.0);
  const Matrix pure = bell * bell.adjoint();
  const Bipartition split({"a"}, {"b"});
  std::printf("%6s %12s\n", "p", "E_N");
  for (int i = 0; i <= 10; ++i) {
    const double p = 0.1 * i;
    const Matrix rho = (1.0 - p) * pure + p * Matrix::Identity(4, 4) / 4.0;
    std::printf("%6.2f %12.8f\n", p, log_negativity(QuantumState(layout, rho), split).value);
  }

  Matrix cnot = Matrix::Zero(4, 4), swap = Matrix::Zero(4, 4);
  cnot(0, 0) = cnot(1, 1) = cnot(2, 3) = cnot(3, 2) = 1.0;
  swap(0, 0) = swap(1, 2) = swap(2, 1) = swap(3, 3) = 1.0;
  const Bipartition cut({"a", "anc_a"}, {"b", "anc_b"});
  std::printf("entangling power: CNOT %.12f, SWAP %.12f\n", unitary_entangling_power(cnot, layout, cut),
              unitary_entangling_power(swap, layout, cut));
}
