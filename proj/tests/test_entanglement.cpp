#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "eet/entanglement.hpp"
#include "eet/scenarios.hpp"
#include "one_excitation.hpp"
#include "test_util.hpp"

using namespace eet;
using eet::testing::naive_log_negativity;
using eet::testing::naive_partial_transpose;
using eet::testing::random_density;
using eet::testing::random_unitary;
using eet::testing::embed;
using eet::testing::random_one_excitation;

namespace {

const BasisLayout kTwoQubits = product_layout({{"a", 2}, {"b", 2}});

Matrix werner(double p) {
  Vector psi = Vector::Zero(4);
  psi(0) = psi(3) = 1.0 / std::sqrt(2.0);
  return p * psi * psi.adjoint() + (1.0 - p) / 4.0 * Matrix::Identity(4, 4);
}

// Same amplitudes written on seven explicit qubits, mode 1 slowest; the sink
// weight joins the vacuum.
Matrix on_qubits(double vacuum, const Matrix& block) {
  Matrix rho = Matrix::Zero(128, 128);
  rho(0, 0) = vacuum;
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 7; ++j) rho(1 << (6 - i), 1 << (6 - j)) = block(i, j);
  return rho;
}

double qubit_chain_negativity(const Matrix& rho128, std::size_t k) {
  std::vector<bool> mask(7, false);
  for (std::size_t j = 0; j < k; ++j) mask[j] = true;
  return naive_log_negativity(naive_partial_transpose(rho128, std::vector<std::size_t>(7, 2), mask));
}

ModelSpec fmo() { return load_scenario(default_data_file()).model; }

}  // namespace

TEST(Negativity, BellStateIsOneEbit) {
  const auto r = log_negativity(QuantumState(kTwoQubits, werner(1.0)), {{"a"}, {"b"}});
  EXPECT_NEAR(r.value, 1.0, 1e-12);
  EXPECT_EQ(r.method, NegativityMethod::GeneralPT);
}

TEST(Negativity, WernerFamily) {
  // E = log2((1 + 3p)/2) above the separability threshold p = 1/3
  for (double p : {0.4, 0.6, 0.9}) {
    EXPECT_NEAR(log_negativity(QuantumState(kTwoQubits, werner(p)), {{"a"}, {"b"}}).value, std::log2((1.0 + 3.0 * p) / 2.0),
                1e-12);
  }
  for (double p : {0.0, 0.2, 1.0 / 3.0}) EXPECT_EQ(log_negativity(QuantumState(kTwoQubits, werner(p)), {{"a"}, {"b"}}).value, 0.0);
}

TEST(Negativity, ProductStatesAreUnentangled) {
  std::mt19937_64 rng(41);
  const auto layout = product_layout({{"a", 3}, {"b", 2}});
  for (int k = 0; k < 20; ++k) {
    const QuantumState rho(layout, tensor_product(random_density(rng, 3), random_density(rng, 2)));
    EXPECT_EQ(log_negativity(rho, {{"a"}, {"b"}}).value, 0.0);
  }
}

TEST(Negativity, MaximallyEntangledQutrits) {
  const auto layout = product_layout({{"a", 3}, {"b", 3}});
  Vector psi = Vector::Zero(9);
  for (int i = 0; i < 3; ++i) psi(i * 3 + i) = 1.0;
  EXPECT_NEAR(log_negativity(QuantumState::pure(layout, psi), {{"a"}, {"b"}}).value, std::log2(3.0), 1e-12);
}

TEST(Negativity, InvariantUnderLocalUnitaries) {
  std::mt19937_64 rng(42);
  const auto layout = product_layout({{"a", 2}, {"b", 3}});
  for (int k = 0; k < 20; ++k) {
    const Matrix rho = random_density(rng, 6, 2);
    const Matrix u = tensor_product(random_unitary(rng, 2), random_unitary(rng, 3));
    const double before = log_negativity(QuantumState(layout, rho), {{"a"}, {"b"}}).value;
    const double after = log_negativity(QuantumState(layout, Matrix(u * rho * u.adjoint())), {{"a"}, {"b"}}).value;
    EXPECT_NEAR(before, after, 1e-10);
  }
}

TEST(Negativity, NonIncreasingUnderLocalDamping) {
  Generator gen(kTwoQubits, Matrix(Matrix::Zero(4, 4)));
  OperatorBuilder ops(kTwoQubits);
  gen.add_term({"damping", {{"a", 0.5, ops.lower("a")}}});
  gen.add_term({"dephasing", {{"b", 0.3, ops.number("b")}}});
  IntegratorConfig cfg;
  cfg.t_end = 3.0;
  const auto traj = evolve(gen, QuantumState(kTwoQubits, werner(1.0)), cfg,
                           {negativity_observable(kTwoQubits, {{{"a"}, {"b"}}}, {"a|b"})});
  const auto e = traj.column("negativity", "a|b");
  EXPECT_NEAR(e.front(), 1.0, 1e-12);
  for (std::size_t k = 1; k < e.size(); ++k) EXPECT_LE(e[k], e[k - 1] + 1e-12);
  EXPECT_LT(e.back(), 0.5);
}

TEST(Negativity, RefusesInvalidStates) {
  Matrix bad = werner(1.0);
  bad(0, 0) += 0.1;
  try {
    log_negativity(QuantumState(kTwoQubits, bad), {{"a"}, {"b"}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::State);
  }
}

// Closed form, the general engine on the embedded layout, and a plain qubit
// partial transpose must agree.
TEST(ClosedForm, AgreesWithGeneralPartialTranspose) {
  std::mt19937_64 rng(43);
  const auto layout = build_network_hamiltonian(fmo().network).layout;
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = random_one_excitation(rng);
    const QuantumState rho(layout, embed(s, layout));
    const auto amp = SingleExcitationAmplitudes::from_state(rho, 7);
    EXPECT_NEAR(amp.a00, s.a00 + s.sink, 1e-15);
    const Matrix q = on_qubits(s.a00 + s.sink, s.block);
    for (std::size_t k = 1; k < 7; ++k) {
      const double closed = log_negativity_1ex_value(amp, k);
      const double general = log_negativity(rho, site_split(7, k)).value;
      EXPECT_NEAR(closed, general, 1e-10) << "trial " << trial << " k " << k;
      EXPECT_NEAR(closed, std::max(0.0, qubit_chain_negativity(q, k)), 1e-10) << "trial " << trial << " k " << k;
    }
  }
}

TEST(ClosedForm, SingleSiteExcitationIsUnentangled) {
  SingleExcitationAmplitudes amp;
  amp.a00 = 0.0;
  amp.a = Matrix::Zero(7, 7);
  amp.a(2, 2) = 1.0;
  for (std::size_t k = 1; k < 7; ++k) EXPECT_EQ(log_negativity_1ex_value(amp, k), 0.0);
}

TEST(ClosedForm, DelocalizedPairIsOneEbit) {
  SingleExcitationAmplitudes amp;
  amp.a00 = 0.0;
  amp.a = Matrix::Zero(2, 2);
  amp.a.setConstant(0.5);
  EXPECT_NEAR(log_negativity_1ex_value(amp, 1), 1.0, 1e-15);
}

TEST(ClosedForm, RejectsBadSplitsAndMultipleExcitations) {
  SingleExcitationAmplitudes amp;
  amp.a = Matrix::Identity(3, 3) / 3.0;
  amp.a00 = 0.0;
  EXPECT_THROW(log_negativity_1ex_value(amp, 0), Error);
  EXPECT_THROW(log_negativity_1ex_value(amp, 3), Error);

  auto net = fmo().network;
  net.truncation = Truncation::Full;
  const auto layout = build_network_hamiltonian(net).layout;
  const auto x = occupation_index(layout, {site_label(1), site_label(2)});
  EXPECT_THROW(SingleExcitationAmplitudes::from_state(QuantumState::basis_state(layout, x), 7), Error);
}

TEST(Excitons, EigenstateCarriesNoModeEntanglement) {
  const auto spec = fmo();
  const RealMatrix h = site_block(spec.network);
  const auto basis = exciton_basis(h);
  const auto layout = build_network_hamiltonian(spec.network).layout;
  for (Eigen::Index e = 0; e < 7; ++e) {
    Vector psi = Vector::Zero(Eigen::Index(layout.total_dim()));
    for (std::size_t i = 1; i <= 7; ++i) psi(Eigen::Index(occupation_index(layout, {site_label(i)}))) = basis.vectors(Eigen::Index(i - 1), e);
    const auto rho = QuantumState::pure(layout, psi);
    for (std::size_t k = 1; k < 7; ++k) EXPECT_NEAR(mode_log_negativity(rho, h, k).value, 0.0, 1e-12);
    const RealVector pops = exciton_populations(rho, basis);
    EXPECT_NEAR(pops(e), 1.0, 1e-12);
  }
}

TEST(Excitons, ModeNegativityMatchesQubitOracle) {
  std::mt19937_64 rng(44);
  const auto spec = fmo();
  const RealMatrix h = site_block(spec.network);
  const auto basis = exciton_basis(h);
  const auto layout = build_network_hamiltonian(spec.network).layout;
  for (int trial = 0; trial < 10; ++trial) {
    const auto s = random_one_excitation(rng);
    const QuantumState rho(layout, embed(s, layout));
    const Matrix v = basis.vectors.cast<Complex>();
    const Matrix q = on_qubits(s.a00 + s.sink, v.adjoint() * s.block * v);
    for (std::size_t k = 1; k < 7; ++k)
      EXPECT_NEAR(mode_log_negativity(rho, h, k).value, std::max(0.0, qubit_chain_negativity(q, k)), 1e-10);
  }
}

TEST(Excitons, DegenerateSpectrumIsRejected) {
  try {
    exciton_basis(RealMatrix::Identity(3, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Degeneracy);
  }
}

TEST(EntanglingPower, StandardGates) {
  Matrix cnot = Matrix::Zero(4, 4);
  cnot(0, 0) = cnot(1, 1) = cnot(2, 3) = cnot(3, 2) = 1.0;
  Matrix swap = Matrix::Zero(4, 4);
  swap(0, 0) = swap(1, 2) = swap(2, 1) = swap(3, 3) = 1.0;
  const Bipartition split({"a", "anc_a"}, {"b", "anc_b"});
  EXPECT_NEAR(unitary_entangling_power(cnot, kTwoQubits, split), 1.0, 1e-9);
  EXPECT_NEAR(unitary_entangling_power(swap, kTwoQubits, split), 2.0, 1e-9);
  EXPECT_NEAR(unitary_entangling_power(Matrix::Identity(4, 4), kTwoQubits, split), 0.0, 1e-12);
  std::mt19937_64 rng(45);
  const Matrix local = tensor_product(random_unitary(rng, 2), random_unitary(rng, 2));
  EXPECT_NEAR(unitary_entangling_power(local, kTwoQubits, split), 0.0, 1e-9);
}

TEST(EntanglingPower, DepolarizingChannelIsZero) {
  const Bipartition split({"a", "anc_a"}, {"b", "anc_b"});
  auto depolarize = [](const Matrix& x) -> Matrix { return x.trace() * Matrix::Identity(4, 4) / 4.0; };
  EXPECT_NEAR(channel_entangling_power(depolarize, kTwoQubits, split), 0.0, 1e-12);
}

// With no hopping the protocol state keeps Schmidt weights 1/7 and 6/7
// across {site 1, its ancilla} | rest, so E = log2(1 + 2 sqrt(6) / 7).
TEST(EntanglingPower, IdleNetworkKeepsTheProtocolValue) {
  auto spec = fmo();
  spec.network.couplings.setZero();
  spec.noise = NoiseSpec{};
  const auto gen = build_model(spec);
  IntegratorConfig cfg;
  cfg.step_dt = 1e-4;  // at 1 fs the RK4 amplitude error alone is a few 1e-6 here
  const double expect = std::log2(1.0 + 2.0 * std::sqrt(6.0) / 7.0);
  EXPECT_NEAR(entangling_power(gen, 0.0, cfg), expect, 1e-12);
  EXPECT_NEAR(entangling_power(gen, 0.5, cfg), expect, 1e-9);
}

TEST(EntanglingPower, SetupRequiresTwoSitesAndKnownLabels) {
  const auto gen = build_model(fmo());
  EXPECT_THROW(entangling_power_setup(gen, Bipartition({"site1"}, {"nowhere"})), Error);
  const auto setup = entangling_power_setup(gen);
  EXPECT_EQ(setup.generator.dim(), 9u * 7u);
  EXPECT_TRUE(assert_valid_state(setup.initial, 1e-12).passed());
}
