#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "eet/dynamics.hpp"
#include "eet/errors.hpp"
#include "eet/generator.hpp"
#include "eet/linalg.hpp"
#include "eet/model.hpp"
#include "eet/quantum_core.hpp"

namespace eet {

enum class NegativityMethod { GeneralPT, ClosedForm1Ex };

inline std::string_view to_string(NegativityMethod m) {
  return m == NegativityMethod::GeneralPT ? "general-PT" : "closed-form-1ex";
}

struct NegativityReport {
  Bipartition bipartition;
  double value = 0.0;
  NegativityMethod method = NegativityMethod::GeneralPT;
};

/// Eigenvalues of a partial transpose in (-kNegativityClamp, 0) count as zero.
inline constexpr double kNegativityClamp = 1e-12;

/// log2 of the trace norm of an already transposed Hermitian matrix.
inline double log_negativity_of_transposed(const Matrix& pt) {
  const double dev = hermiticity_deviation(pt);
  if (dev > 1e-8) throw Error(ErrorKind::Shape, "partial transpose is not Hermitian (deviation " + std::to_string(dev) + ")");
  const RealVector ev = hermitian_eigenvalues(0.5 * (pt + pt.adjoint()));
  double negative = 0.0, total = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    double v = ev(i);
    if (v < 0.0 && v > -kNegativityClamp) v = 0.0;
    if (v < 0.0) negative -= v;
    total += std::abs(v);
  }
  if (negative == 0.0) return 0.0;
  return std::max(0.0, std::log2(total));
}

/// Keeps the reduction/transposition bookkeeping for one split on one layout.
/// Modes outside the split are traced out first.
class NegativityEvaluator {
 public:
  NegativityEvaluator(const BasisLayout& layout, Bipartition part)
      : part_(std::move(part)), plan_(make_plan(layout, part_)) {}

  const Bipartition& bipartition() const { return part_; }
  double operator()(const Matrix& rho) const { return log_negativity_of_transposed(plan_.apply(rho)); }

 private:
  static TransposePlan make_plan(const BasisLayout& layout, const Bipartition& part) {
    check_bipartition(layout, part);
    std::set<std::string> keep = part.side_a;
    keep.insert(part.side_b.begin(), part.side_b.end());
    return make_transpose_plan(layout, keep, part.side_a);
  }

  Bipartition part_;
  TransposePlan plan_;
};

/// E(A|B) = log2 ||rho^{Gamma_A}||_1. Refuses states that are not physical to
/// within 1e-6, where the number has no meaning.
inline NegativityReport log_negativity(const QuantumState& rho, const Bipartition& part,
                                       double validity_tol = 1e-6) {
  const auto report = assert_valid_state(rho, validity_tol);
  if (!report.passed()) throw Error(ErrorKind::State, "negativity of an invalid state: " + report.summary());
  return {part, NegativityEvaluator(rho.layout(), part)(rho.matrix()), NegativityMethod::GeneralPT};
}

/// Populations and coherences of a state confined to at most one excitation.
struct SingleExcitationAmplitudes {
  double a00 = 1.0;
  Matrix a;

  std::size_t n() const { return static_cast<std::size_t>(a.rows()); }

  void validate(double tol = 1e-9) const {
    if (a.rows() != a.cols()) throw Error(ErrorKind::Shape, "amplitude matrix must be square");
    const double tr = a00 + a.trace().real();
    if (std::abs(tr - 1.0) > tol)
      throw Error(ErrorKind::State, "a00 + sum a_ii = " + std::to_string(tr) + ", expected 1");
    if (hermiticity_deviation(a) > tol) throw Error(ErrorKind::State, "amplitude matrix is not Hermitian");
    if (a00 < -tol || (a.rows() && hermitian_eigenvalues(a).minCoeff() < -tol))
      throw Error(ErrorKind::State, "amplitudes are not positive semidefinite");
  }

  static SingleExcitationAmplitudes from_state(const QuantumState& rho, std::size_t n_sites,
                                               double coherence_tol = 1e-9);
};

/// Reads the site block of single-excitation states on one layout. Sink,
/// bath and other modes are traced out first, so the sink population joins
/// a00.
class SingleExcitationReader {
 public:
  SingleExcitationReader(const BasisLayout& layout, std::size_t n_sites, double coherence_tol = 1e-9)
      : n_(n_sites), tol_(coherence_tol), plan_(make_plan(layout, n_sites)) {
    const auto red = plan_.reduced_operator(Matrix::Zero(static_cast<Eigen::Index>(layout.total_dim()),
                                                         static_cast<Eigen::Index>(layout.total_dim())));
    std::vector<std::size_t> site_of_label(red.labels.size());
    for (std::size_t j = 1; j <= n_sites; ++j) site_of_label[red.label_index(site_label(j))] = j - 1;
    for (std::size_t x = 0; x < red.dim(); ++x) {
      int total = 0;
      std::size_t which = 0;
      for (std::size_t m = 0; m < red.labels.size(); ++m)
        if (red.basis[x][m]) {
          total += red.basis[x][m];
          which = m;
        }
      if (total == 0) vacuum_ = x;
      else if (total == 1) sites_.emplace_back(x, site_of_label[which]);
      else outside_.push_back(x);
    }
  }

  SingleExcitationAmplitudes operator()(const Matrix& rho) const {
    const Matrix red = plan_.reduce(rho);
    auto at = [&](std::size_t x, std::size_t y) { return red(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)); };
    for (auto x : outside_)
      if (std::abs(at(x, x)) > tol_) throw Error(ErrorKind::Shape, "state has weight outside the single-excitation sector");
    SingleExcitationAmplitudes amp;
    amp.a00 = vacuum_ ? at(*vacuum_, *vacuum_).real() : 0.0;
    amp.a = Matrix::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    for (const auto& [x, i] : sites_) {
      if (vacuum_ && std::abs(at(x, *vacuum_)) > tol_)
        throw Error(ErrorKind::Shape, "state has coherence between the ground and single-excitation sectors");
      for (const auto& [y, j] : sites_) amp.a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = at(x, y);
    }
    return amp;
  }

 private:
  static TransposePlan make_plan(const BasisLayout& layout, std::size_t n_sites) {
    std::set<std::string> keep;
    for (std::size_t j = 1; j <= n_sites; ++j) keep.insert(site_label(j));
    return make_transpose_plan(layout, keep, {});
  }

  std::size_t n_;
  double tol_;
  TransposePlan plan_;
  std::optional<std::size_t> vacuum_;
  std::vector<std::pair<std::size_t, std::size_t>> sites_;
  std::vector<std::size_t> outside_;
};

inline SingleExcitationAmplitudes SingleExcitationAmplitudes::from_state(const QuantumState& rho, std::size_t n_sites,
                                                                         double coherence_tol) {
  return SingleExcitationReader(rho.layout(), n_sites, coherence_tol)(rho.matrix());
}

/// Closed form for the split (1..k)|(k+1..N):
/// E = log2(1 - a00 + sqrt(a00^2 + 4X)), X = sum_{i<=k<j} |a_ij|^2.
inline double log_negativity_1ex_value(const SingleExcitationAmplitudes& amp, std::size_t k) {
  const auto n = amp.n();
  if (k < 1 || k >= n)
    throw Error(ErrorKind::Argument, "split index " + std::to_string(k) + " outside 1.." + std::to_string(n - 1));
  double x = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = k; j < n; ++j) x += std::norm(amp.a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
  return std::max(0.0, std::log2(1.0 - amp.a00 + std::sqrt(amp.a00 * amp.a00 + 4.0 * x)));
}

inline Bipartition site_split(std::size_t n_sites, std::size_t k) {
  std::set<std::string> a, b;
  for (std::size_t j = 1; j <= n_sites; ++j) (j <= k ? a : b).insert(site_label(j));
  return {a, b};
}

inline NegativityReport log_negativity_1ex(const SingleExcitationAmplitudes& amp, std::size_t k) {
  const double v = log_negativity_1ex_value(amp, k);
  return {site_split(amp.n(), k), v, NegativityMethod::ClosedForm1Ex};
}

/// Eigenvectors of the single-excitation block, columns ordered by increasing
/// energy.
struct ExcitonBasis {
  RealVector energies;
  RealMatrix vectors;

  /// Weight of site state |site> on each exciton.
  RealVector site_weights(std::size_t site) const {
    return vectors.row(static_cast<Eigen::Index>(site - 1)).array().square().transpose();
  }
};

inline ExcitonBasis exciton_basis(const RealMatrix& site_block, double degeneracy_tol = 1e-9) {
  if (site_block.rows() != site_block.cols()) throw Error(ErrorKind::Shape, "site block must be square");
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(site_block);
  const auto& e = es.eigenvalues();
  for (Eigen::Index i = 1; i < e.size(); ++i)
    if (e(i) - e(i - 1) < degeneracy_tol)
      throw Error(ErrorKind::Degeneracy, "exciton energies " + std::to_string(i) + " and " + std::to_string(i + 1) +
                                             " are degenerate; energy ordering is undefined");
  return {e, es.eigenvectors()};
}

inline SingleExcitationAmplitudes to_exciton_basis(const SingleExcitationAmplitudes& amp, const ExcitonBasis& basis) {
  if (static_cast<std::size_t>(basis.vectors.rows()) != amp.n())
    throw Error(ErrorKind::Dimension, "exciton basis does not match the amplitude matrix");
  const Matrix v = basis.vectors.cast<Complex>();
  return {amp.a00, v.adjoint() * amp.a * v};
}

/// Mode entanglement: the closed form applied to the exciton-basis amplitudes
/// across the split (excitons 1..k)|(k+1..N).
inline NegativityReport mode_log_negativity(const QuantumState& rho, const RealMatrix& site_block, std::size_t k) {
  const auto basis = exciton_basis(site_block);
  const auto n = static_cast<std::size_t>(site_block.rows());
  const auto amp = to_exciton_basis(SingleExcitationAmplitudes::from_state(rho, n), basis);
  std::set<std::string> a, b;
  for (std::size_t j = 1; j <= n; ++j) (j <= k ? a : b).insert("exciton" + std::to_string(j));
  return {{a, b}, log_negativity_1ex_value(amp, k), NegativityMethod::ClosedForm1Ex};
}

inline RealVector exciton_populations(const QuantumState& rho, const ExcitonBasis& basis) {
  const auto amp = to_exciton_basis(SingleExcitationAmplitudes::from_state(rho, static_cast<std::size_t>(basis.vectors.rows())), basis);
  return amp.a.diagonal().real();
}

// ---------------------------------------------------------------------------
// Entangling power

inline std::string ancilla_of(const std::string& mode) { return "anc_" + mode; }

/// One-hot ancilla over N levels, paired with the N single-excitation sites.
inline Factor site_ancilla_factor(std::size_t n_sites) {
  std::vector<std::string> modes;
  std::vector<std::vector<int>> occ;
  for (std::size_t j = 1; j <= n_sites; ++j) modes.push_back(ancilla_of(site_label(j)));
  for (std::size_t j = 0; j < n_sites; ++j) {
    std::vector<int> o(n_sites, 0);
    o[j] = 1;
    occ.push_back(std::move(o));
  }
  return Factor::embedded("ancilla", modes, std::vector<std::size_t>(n_sites, 2), std::move(occ));
}

/// {site_k, anc_site_k} | {all other sites and their ancillas}.
inline Bipartition ancilla_split(std::size_t n_sites, std::size_t k = 1) {
  std::set<std::string> a{site_label(k), ancilla_of(site_label(k))}, b;
  for (std::size_t j = 1; j <= n_sites; ++j)
    if (j != k) {
      b.insert(site_label(j));
      b.insert(ancilla_of(site_label(j)));
    }
  return {a, b};
}

/// (1/sqrt N) sum_i |i>_S |vac>_rest |i>_A on a layout that ends with the
/// ancilla factor.
inline QuantumState ancilla_entangled_state(const BasisLayout& joint, std::size_t n_sites) {
  const auto anc = joint.factor_index("ancilla");
  Vector psi = Vector::Zero(static_cast<Eigen::Index>(joint.total_dim()));
  std::vector<std::size_t> site_modes;
  for (std::size_t j = 1; j <= n_sites; ++j) site_modes.push_back(joint.mode_index(site_label(j)));
  for (std::size_t x = 0; x < joint.total_dim(); ++x) {
    const auto occ = joint.occupation(x);
    const auto lv = joint.digits(x);
    int total = 0;
    for (auto o : occ) total += o;
    if (total != 2) continue;  // one system excitation plus the ancilla marker
    const auto i = lv[anc];
    if (occ[site_modes[i]] == 1) psi(static_cast<Eigen::Index>(x)) = 1.0;
  }
  if (psi.squaredNorm() != static_cast<double>(n_sites))
    throw Error(ErrorKind::Layout, "layout cannot hold the site-ancilla entangled state");
  return QuantumState::pure(joint, psi);
}

/// Protocol state for a generator acting on a single-excitation layout.
struct EntanglingPowerSetup {
  Generator generator;
  QuantumState initial;
  Bipartition split;
};

inline EntanglingPowerSetup entangling_power_setup(const Generator& gen, std::optional<Bipartition> split = std::nullopt) {
  std::size_t n = 0;
  while (gen.layout().has_mode(site_label(n + 1))) ++n;
  if (n < 2) throw Error(ErrorKind::Layout, "entangling power needs at least two sites");
  auto joint = gen.with_idle_factor(site_ancilla_factor(n));
  auto rho0 = ancilla_entangled_state(joint.layout(), n);
  auto part = split.value_or(ancilla_split(n));
  check_bipartition(joint.layout(), part);
  return {std::move(joint), std::move(rho0), std::move(part)};
}

/// Negativity across the split after evolving half of the site-ancilla
/// entangled state for time t.
inline double entangling_power(const Generator& gen, double t, const IntegratorConfig& cfg,
                               std::optional<Bipartition> split = std::nullopt) {
  auto setup = entangling_power_setup(gen, std::move(split));
  const Matrix rho = propagate(setup.generator, setup.initial.matrix(), 0.0, t, cfg);
  return NegativityEvaluator(setup.generator.layout(), setup.split)(rho);
}

/// Copy of `system` with every factor and mode renamed anc_<label>.
inline BasisLayout ancilla_copy(const BasisLayout& system) {
  std::vector<Factor> fs;
  for (auto f : system.factors()) {
    f.label = ancilla_of(f.label);
    for (auto& m : f.modes) m = ancilla_of(m);
    fs.push_back(std::move(f));
  }
  return BasisLayout(std::move(fs));
}

/// Entangling power of a linear map on the system: the negativity of
/// (Phi x id)(|Omega><Omega|) with |Omega> = D^{-1/2} sum_i |i>_S |i>_A.
/// The joint layout is system factors followed by their ancilla copies.
inline double channel_entangling_power(const std::function<Matrix(const Matrix&)>& channel,
                                       const BasisLayout& system, const Bipartition& split) {
  const auto d = static_cast<Eigen::Index>(system.total_dim());
  auto fs = system.factors();
  const auto anc = ancilla_copy(system).factors();
  fs.insert(fs.end(), anc.begin(), anc.end());
  BasisLayout joint(std::move(fs));
  check_bipartition(joint, split);
  Matrix rho = Matrix::Zero(d * d, d * d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      Matrix e = Matrix::Zero(d, d);
      e(i, j) = 1.0;
      const Matrix out = channel(e);
      if (out.rows() != d || out.cols() != d) throw Error(ErrorKind::Dimension, "channel output has wrong dimension");
      // joint index = s * d + a
      for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < d; ++c) rho(r * d + i, c * d + j) += out(r, c) / static_cast<double>(d);
    }
  return NegativityEvaluator(joint, split)(rho);
}

inline double unitary_entangling_power(const Matrix& u, const BasisLayout& system, const Bipartition& split) {
  if (u.rows() != static_cast<Eigen::Index>(system.total_dim()) || u.cols() != u.rows())
    throw Error(ErrorKind::Dimension, "unitary does not match the system layout");
  return channel_entangling_power([&](const Matrix& x) -> Matrix { return u * x * u.adjoint(); }, system, split);
}

// ---------------------------------------------------------------------------
// Observers

inline Observable negativity_observable(const BasisLayout& layout, const std::vector<Bipartition>& splits,
                                        std::vector<std::string> columns, std::string group = "negativity") {
  if (columns.size() != splits.size()) throw Error(ErrorKind::Argument, "one column name per split");
  auto evals = std::make_shared<std::vector<NegativityEvaluator>>();
  for (const auto& s : splits) evals->emplace_back(layout, s);
  return {std::move(group), std::move(columns), [evals](double, const Matrix& rho, std::vector<double>& out) {
            for (const auto& e : *evals) out.push_back(e(rho));
          }};
}

/// Splits (1..k)|(k+1..N) for k = 1..N-1, columns "1|2-7" style.
inline std::vector<Bipartition> chain_splits(std::size_t n_sites) {
  std::vector<Bipartition> out;
  for (std::size_t k = 1; k < n_sites; ++k) out.push_back(site_split(n_sites, k));
  return out;
}

inline std::string chain_split_name(std::size_t n_sites, std::size_t k) {
  auto range = [](std::size_t a, std::size_t b) {
    return a == b ? std::to_string(a) : std::to_string(a) + "-" + std::to_string(b);
  };
  return range(1, k) + "|" + range(k + 1, n_sites);
}

inline Observable chain_negativity_observable(const BasisLayout& layout, std::size_t n_sites,
                                              std::string group = "negativity") {
  std::vector<std::string> cols;
  for (std::size_t k = 1; k < n_sites; ++k) cols.push_back(chain_split_name(n_sites, k));
  return negativity_observable(layout, chain_splits(n_sites), std::move(cols), std::move(group));
}

/// Exciton populations and exciton-split negativities in one pass.
inline std::vector<Observable> exciton_observables(const BasisLayout& layout, const RealMatrix& site_block) {
  const auto basis = std::make_shared<ExcitonBasis>(exciton_basis(site_block));
  const auto n = static_cast<std::size_t>(site_block.rows());
  std::vector<std::string> pop_cols, neg_cols;
  for (std::size_t j = 1; j <= n; ++j) pop_cols.push_back("exciton" + std::to_string(j));
  for (std::size_t k = 1; k < n; ++k) neg_cols.push_back(chain_split_name(n, k));
  auto reader = std::make_shared<SingleExcitationReader>(layout, n);
  auto amps = [reader, basis](const Matrix& rho) { return to_exciton_basis((*reader)(rho), *basis); };
  Observable pops{"exciton_populations", pop_cols, [amps](double, const Matrix& rho, std::vector<double>& out) {
                    const auto a = amps(rho);
                    for (Eigen::Index i = 0; i < a.a.rows(); ++i) out.push_back(a.a(i, i).real());
                  }};
  Observable negs{"exciton_negativity", neg_cols, [amps, n](double, const Matrix& rho, std::vector<double>& out) {
                    const auto a = amps(rho);
                    for (std::size_t k = 1; k < n; ++k) out.push_back(log_negativity_1ex_value(a, k));
                  }};
  return {pops, negs};
}

}  // namespace eet
