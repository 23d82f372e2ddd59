#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "eet/errors.hpp"
#include "eet/generator.hpp"
#include "eet/linalg.hpp"
#include "eet/quantum_core.hpp"
#include "eet/units.hpp"

namespace eet {

enum class Truncation { Single, Full };
enum class Frame { Rotating, Lab };

inline std::string site_label(std::size_t j) { return "site" + std::to_string(j); }
inline std::string mode_label(std::size_t j) { return "mode" + std::to_string(j); }
inline std::string ancilla_label(std::size_t j) { return "anc" + std::to_string(j); }
inline const std::string kSinkLabel = "sink";
inline const std::string kNonLocalModeLabel = "mode";

/// Site network. Energies and couplings in rad/ps; site indices in the public
/// API are 1-based, matching the usual FMO numbering.
struct NetworkSpec {
  std::vector<double> site_energies;  // relative to energy_offset
  RealMatrix couplings;               // symmetric, zero diagonal
  std::vector<Eigen::Vector3d> dipoles;  // Debye; may be empty
  double energy_offset = 0.0;
  Truncation truncation = Truncation::Single;
  bool include_ground = true;
  bool include_sink = true;

  std::size_t n_sites() const { return site_energies.size(); }

  void validate() const {
    const auto n = site_energies.size();
    if (n < 2) throw Error(ErrorKind::Validation, "network needs at least 2 sites");
    if (couplings.rows() != static_cast<Eigen::Index>(n) || couplings.cols() != static_cast<Eigen::Index>(n))
      throw Error(ErrorKind::Validation, "coupling matrix must be " + std::to_string(n) + "x" + std::to_string(n));
    for (Eigen::Index i = 0; i < couplings.rows(); ++i) {
      if (couplings(i, i) != 0.0)
        throw Error(ErrorKind::Validation, "coupling matrix diagonal must be zero (site " + std::to_string(i + 1) + ")");
      for (Eigen::Index j = 0; j < i; ++j)
        if (std::abs(couplings(i, j) - couplings(j, i)) > 1e-12 * (1.0 + std::abs(couplings(i, j))))
          throw Error(ErrorKind::Validation, "coupling matrix is not symmetric at (" + std::to_string(j + 1) + "," +
                                                 std::to_string(i + 1) + ")");
    }
    if (!dipoles.empty() && dipoles.size() != n)
      throw Error(ErrorKind::Validation, "expected " + std::to_string(n) + " dipole vectors, got " +
                                             std::to_string(dipoles.size()));
  }
};

struct InjectionSpec {
  std::size_t site = 1;
  double rate = 1.0;
  double n_th = 100.0;
};

struct NoiseSpec {
  std::vector<double> dissipation;  // Gamma_j
  std::vector<double> dephasing;    // gamma_j
  double sink_rate = 0.0;
  std::size_t sink_source = 3;
  std::optional<RealMatrix> correlated_dephasing;  // replaces `dephasing` when present
  std::optional<InjectionSpec> injection;

  void validate(std::size_t n_sites) const {
    auto check_rates = [&](const std::vector<double>& r, const char* what) {
      if (!r.empty() && r.size() != n_sites)
        throw Error(ErrorKind::Validation, std::string(what) + " needs " + std::to_string(n_sites) + " rates");
      for (std::size_t j = 0; j < r.size(); ++j)
        if (!(r[j] >= 0.0))
          throw Error(ErrorKind::Validation, std::string(what) + " rate for site " + std::to_string(j + 1) +
                                                 " is negative (" + std::to_string(r[j]) + ")");
    };
    check_rates(dissipation, "dissipation");
    check_rates(dephasing, "dephasing");
    if (!(sink_rate >= 0.0)) throw Error(ErrorKind::Validation, "sink rate is negative");
    if (sink_source < 1 || sink_source > n_sites)
      throw Error(ErrorKind::Validation, "sink source site " + std::to_string(sink_source) + " out of range");
    if (correlated_dephasing) {
      const auto& g = *correlated_dephasing;
      if (g.rows() != static_cast<Eigen::Index>(n_sites) || g.cols() != g.rows())
        throw Error(ErrorKind::Validation, "correlated dephasing matrix has wrong shape");
      if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw Error(ErrorKind::Validation, "correlated dephasing matrix is not symmetric");
      const double lo = Eigen::SelfAdjointEigenSolver<RealMatrix>(g, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
      if (lo < -1e-12)
        throw Error(ErrorKind::Validation,
                    "correlated dephasing matrix is not positive semidefinite (eigenvalue " + std::to_string(lo) + ")");
    }
    if (injection) {
      if (injection->site < 1 || injection->site > n_sites)
        throw Error(ErrorKind::Validation, "injection site out of range");
      if (!(injection->rate >= 0.0) || !(injection->n_th >= 0.0))
        throw Error(ErrorKind::Validation, "injection rate and n_th must be non-negative");
    }
  }
};

/// gamma_mn = (1 - c) diag(gamma) + c sqrt(gamma_m gamma_n). PSD for c in [0, 1].
inline RealMatrix correlated_dephasing_matrix(const std::vector<double>& gamma, double c) {
  if (c < 0.0 || c > 1.0) throw Error(ErrorKind::Validation, "correlation strength must lie in [0, 1]");
  const auto n = static_cast<Eigen::Index>(gamma.size());
  RealMatrix g(n, n);
  for (Eigen::Index m = 0; m < n; ++m)
    for (Eigen::Index k = 0; k < n; ++k)
      g(m, k) = c * std::sqrt(gamma[static_cast<std::size_t>(m)] * gamma[static_cast<std::size_t>(k)]) +
                (m == k ? (1.0 - c) * gamma[static_cast<std::size_t>(m)] : 0.0);
  return g;
}

enum class BathKind { None, LocalModes, NonLocalMode };

struct BathSpec {
  BathKind kind = BathKind::None;
  double f = 1.0;
  std::vector<double> base_couplings;  // g0_j
  std::vector<double> base_dampings;   // kappa0_j
  std::vector<double> couplings;       // g_j = sqrt(f) g0_j
  std::vector<double> dampings;        // kappa_j = f kappa0_j
  std::vector<double> mode_frequencies;  // local modes; empty = resonant with the site energies
  std::size_t levels_per_mode = 2;
  std::size_t max_total_excitations = 2;
  std::size_t mode_levels = 0;  // non-local mode, d + 1; 0 picks a size from g/kappa
  std::size_t max_dim = 4096;

  void validate(std::size_t n_sites) const {
    if (kind == BathKind::None) return;
    if (!(f > 0.0)) throw Error(ErrorKind::Validation, "f must be positive");
    if (couplings.size() != n_sites || dampings.size() != n_sites)
      throw Error(ErrorKind::Validation, "bath needs one coupling and one damping per site");
    for (std::size_t j = 0; j < n_sites; ++j)
      if (!(dampings[j] >= 0.0)) throw Error(ErrorKind::Validation, "bath damping must be non-negative");
    if (kind == BathKind::LocalModes) {
      if (levels_per_mode < 2) throw Error(ErrorKind::Validation, "levels_per_mode must be at least 2");
      if (max_total_excitations < 1) throw Error(ErrorKind::Validation, "max_total_excitations must be at least 1");
      if (!mode_frequencies.empty() && mode_frequencies.size() != n_sites)
        throw Error(ErrorKind::Validation, "need one mode frequency per site");
    }
    if (kind == BathKind::NonLocalMode && mode_levels == 1)
      throw Error(ErrorKind::Validation, "non-local mode needs d >= 1 (at least 2 levels)");
  }
};

inline BathSpec scale_bath(BathSpec bath, double f) {
  if (!(f > 0.0)) throw Error(ErrorKind::Validation, "f must be positive, got " + std::to_string(f));
  if (bath.base_couplings.size() != bath.base_dampings.size())
    throw Error(ErrorKind::Validation, "base couplings and dampings differ in length");
  bath.f = f;
  bath.couplings.resize(bath.base_couplings.size());
  bath.dampings.resize(bath.base_dampings.size());
  const double root = std::sqrt(f);
  for (std::size_t j = 0; j < bath.base_couplings.size(); ++j) {
    bath.couplings[j] = root * bath.base_couplings[j];
    bath.dampings[j] = f * bath.base_dampings[j];
  }
  return bath;
}

/// Levels kept for the non-local mode. A site-j excitation displaces the
/// damped mode to a coherent state with mean occupation (g_j/kappa_j)^2; the
/// cut keeps that mean plus four standard deviations.
inline std::size_t nonlocal_mode_levels(const BathSpec& bath) {
  if (bath.mode_levels > 0) return bath.mode_levels;
  double nbar = 0.0;
  for (std::size_t j = 0; j < bath.couplings.size(); ++j)
    if (bath.dampings[j] > 0.0) nbar = std::max(nbar, std::pow(bath.couplings[j] / bath.dampings[j], 2));
  const auto d = static_cast<std::size_t>(std::ceil(nbar + 4.0 * std::sqrt(nbar) + 1.5));
  return std::max<std::size_t>(2, d) + 1;
}

struct LaserPulse {
  double field_strength = 0.0;  // E0 in 1/(Debye cm)
  double width = 0.06;          // ps, standard deviation of the Gaussian
  double center = 0.12;         // ps
  Eigen::Vector3d polarization = Eigen::Vector3d::UnitX();
  std::optional<double> carrier;  // rad/ps on the relative scale; default resonant with site 1
  Frame frame = Frame::Rotating;

  double envelope(double t) const {
    const double x = (t - center) / width;
    return field_strength * std::exp(-0.5 * x * x);
  }

  void validate() const {
    if (!(width > 0.0)) throw Error(ErrorKind::Validation, "pulse width must be positive");
    if (std::abs(polarization.norm() - 1.0) > 1e-12)
      throw Error(ErrorKind::Validation, "polarization must be a unit vector");
  }
};

struct ModelSpec {
  NetworkSpec network;
  NoiseSpec noise;
  BathSpec bath;
  std::optional<LaserPulse> laser;
};

/// Builds operators on any layout from mode occupations. Transitions that
/// leave the enumerated basis are dropped, which projects onto the truncated
/// space.
class OperatorBuilder {
 public:
  explicit OperatorBuilder(const BasisLayout& layout) : layout_(layout) {
    for (std::size_t x = 0; x < layout_.total_dim(); ++x) {
      auto occ = layout_.occupation(x);
      index_.emplace(std::vector<int>(occ.begin(), occ.end()), x);
    }
  }

  const BasisLayout& layout() const { return layout_; }

  SparseMatrix number(const std::string& mode) const {
    const auto m = layout_.mode_index(mode);
    std::vector<Triplet> t;
    for (std::size_t x = 0; x < layout_.total_dim(); ++x) {
      const int n = layout_.occupation(x)[m];
      if (n) t.emplace_back(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(x), static_cast<double>(n));
    }
    return build(t);
  }

  /// Product of bosonic ladder operators: shift +1 raises, -1 lowers. Qubit
  /// modes are the two-level case.
  SparseMatrix ladder(const std::vector<std::pair<std::string, int>>& shifts) const {
    std::vector<std::pair<std::size_t, int>> idx;
    for (const auto& [mode, s] : shifts) idx.emplace_back(layout_.mode_index(mode), s);
    const auto& dims = layout_.mode_dims();
    std::vector<Triplet> t;
    for (std::size_t x = 0; x < layout_.total_dim(); ++x) {
      auto occ_span = layout_.occupation(x);
      std::vector<int> occ(occ_span.begin(), occ_span.end());
      double amp = 1.0;
      bool ok = true;
      // rightmost factor acts first
      for (auto it = idx.rbegin(); it != idx.rend() && ok; ++it) {
        const auto [m, s] = *it;
        const int before = occ[m];
        const int after = before + s;
        if (after < 0 || after >= static_cast<int>(dims[m])) {
          ok = false;
          break;
        }
        for (int k = 0; k < std::abs(s); ++k)
          amp *= std::sqrt(static_cast<double>(s > 0 ? before + k + 1 : before - k));
        occ[m] = after;
      }
      if (!ok) continue;
      auto found = index_.find(occ);
      if (found == index_.end()) continue;
      t.emplace_back(static_cast<Eigen::Index>(found->second), static_cast<Eigen::Index>(x), amp);
    }
    return build(t);
  }

  SparseMatrix lower(const std::string& mode) const { return ladder({{mode, -1}}); }
  SparseMatrix raise(const std::string& mode) const { return ladder({{mode, +1}}); }

 private:
  SparseMatrix build(const std::vector<Triplet>& t) const {
    const auto n = static_cast<Eigen::Index>(layout_.total_dim());
    SparseMatrix m(n, n);
    m.setFromTriplets(t.begin(), t.end());
    return m;
  }

  BasisLayout layout_;
  std::map<std::vector<int>, std::size_t> index_;
};

/// Single-excitation factor: levels [ground, site1..siteN, sink] over modes
/// site1..siteN (+ sink). Ground and sink levels are optional.
inline Factor single_excitation_factor(std::size_t n_sites, bool with_ground, bool with_sink,
                                       const std::string& label = "system") {
  std::vector<std::string> modes;
  for (std::size_t j = 1; j <= n_sites; ++j) modes.push_back(site_label(j));
  if (with_sink) modes.push_back(kSinkLabel);
  std::vector<std::vector<int>> occ;
  if (with_ground) occ.emplace_back(modes.size(), 0);
  for (std::size_t j = 0; j < modes.size(); ++j) {
    std::vector<int> o(modes.size(), 0);
    o[j] = 1;
    occ.push_back(std::move(o));
  }
  return Factor::embedded(label, modes, std::vector<std::size_t>(modes.size(), 2), std::move(occ));
}

inline BasisLayout network_layout(const NetworkSpec& net) {
  if (net.truncation == Truncation::Single)
    return BasisLayout({single_excitation_factor(net.n_sites(), net.include_ground, net.include_sink)});
  std::vector<Factor> fs;
  for (std::size_t j = 1; j <= net.n_sites(); ++j) fs.push_back(Factor::elementary(site_label(j), 2));
  if (net.include_sink) fs.push_back(Factor::elementary(kSinkLabel, 2));
  return BasisLayout(std::move(fs));
}

/// Local modes as one embedded factor whose levels are all occupation patterns
/// with at most max_total_excitations quanta in total.
inline Factor local_bath_factor(std::size_t n_modes, std::size_t levels, std::size_t max_total) {
  std::vector<std::string> modes;
  for (std::size_t j = 1; j <= n_modes; ++j) modes.push_back(mode_label(j));
  std::vector<std::vector<int>> occ;
  std::vector<int> cur(n_modes, 0);
  auto rec = [&](auto&& self, std::size_t pos, std::size_t used) -> void {
    if (pos == n_modes) {
      occ.push_back(cur);
      return;
    }
    for (std::size_t k = 0; k < levels && used + k <= max_total; ++k) {
      cur[pos] = static_cast<int>(k);
      self(self, pos + 1, used + k);
    }
    cur[pos] = 0;
  };
  rec(rec, 0, 0);
  return Factor::embedded("bath", modes, std::vector<std::size_t>(n_modes, levels), std::move(occ));
}

/// The Hamiltonian is written in a frame rotating at `reference` per
/// excitation; by default that is the energy offset, leaving the relative site
/// energies on the diagonal.
inline SparseMatrix network_hamiltonian(const NetworkSpec& net, const OperatorBuilder& ops,
                                        std::optional<double> reference = std::nullopt) {
  const auto n = net.n_sites();
  const double shift = net.energy_offset - reference.value_or(net.energy_offset);
  const auto dim = static_cast<Eigen::Index>(ops.layout().total_dim());
  SparseMatrix h(dim, dim);
  for (std::size_t j = 1; j <= n; ++j) {
    const double e = net.site_energies[j - 1] + shift;
    if (e != 0.0) h += e * ops.number(site_label(j));
  }
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t l = i + 1; l <= n; ++l) {
      const double v = net.couplings(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(l - 1));
      if (v == 0.0) continue;
      h += v * ops.ladder({{site_label(i), +1}, {site_label(l), -1}});
      h += v * ops.ladder({{site_label(l), +1}, {site_label(i), -1}});
    }
  h.prune(Complex{0.0, 0.0});
  return h;
}

struct NetworkModel {
  BasisLayout layout;
  Matrix hamiltonian;
};

inline NetworkModel build_network_hamiltonian(const NetworkSpec& net) {
  net.validate();
  auto layout = network_layout(net);
  OperatorBuilder ops(layout);
  return {layout, Matrix(network_hamiltonian(net, ops))};
}

/// The N x N single-excitation block of the site Hamiltonian.
inline RealMatrix site_block(const NetworkSpec& net) {
  net.validate();
  RealMatrix h = net.couplings;
  for (std::size_t j = 0; j < net.n_sites(); ++j)
    h(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = net.site_energies[j];
  return h;
}

inline LindbladTerm dissipation_term(const OperatorBuilder& ops, const std::vector<double>& rates) {
  LindbladTerm t{"dissipation", {}};
  for (std::size_t j = 1; j <= rates.size(); ++j) {
    if (!(rates[j - 1] >= 0.0)) throw Error(ErrorKind::Validation, "negative dissipation rate");
    if (rates[j - 1] > 0.0) t.jumps.push_back({"sigma-_" + std::to_string(j), rates[j - 1], ops.lower(site_label(j))});
  }
  return t;
}

inline LindbladTerm dephasing_term(const OperatorBuilder& ops, const std::vector<double>& rates) {
  LindbladTerm t{"dephasing", {}};
  for (std::size_t j = 1; j <= rates.size(); ++j) {
    if (!(rates[j - 1] >= 0.0)) throw Error(ErrorKind::Validation, "negative dephasing rate");
    if (rates[j - 1] > 0.0) t.jumps.push_back({"n_" + std::to_string(j), rates[j - 1], ops.number(site_label(j))});
  }
  return t;
}

/// -sum_mn gamma_mn [A_m, [A_n, rho]] in Lindblad form: with gamma = V diag(lambda) V^T
/// the jump operators are L_k = sum_m V_mk A_m at rate lambda_k. Since A_m^2 = A_m,
/// a diagonal gamma reproduces dephasing_term with the same rates.
inline LindbladTerm correlated_dephasing_term(const OperatorBuilder& ops, const RealMatrix& gamma) {
  const auto n = gamma.rows();
  if (gamma.cols() != n) throw Error(ErrorKind::Validation, "correlated dephasing matrix must be square");
  if (n && (gamma - gamma.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw Error(ErrorKind::Validation, "correlated dephasing matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(gamma);
  LindbladTerm t{"correlated-dephasing", {}};
  std::vector<SparseMatrix> a;
  for (Eigen::Index m = 0; m < n; ++m) a.push_back(ops.number(site_label(static_cast<std::size_t>(m + 1))));
  for (Eigen::Index k = 0; k < n; ++k) {
    const double lambda = es.eigenvalues()(k);
    if (lambda < -1e-12)
      throw Error(ErrorKind::Validation,
                  "correlated dephasing matrix is not positive semidefinite (eigenvalue " + std::to_string(lambda) + ")");
    if (lambda <= 0.0) continue;
    const auto dim = static_cast<Eigen::Index>(ops.layout().total_dim());
    SparseMatrix l(dim, dim);
    for (Eigen::Index m = 0; m < n; ++m) {
      const double v = es.eigenvectors()(m, k);
      if (v != 0.0) l += v * a[static_cast<std::size_t>(m)];
    }
    t.jumps.push_back({"collective_" + std::to_string(k + 1), lambda, l});
  }
  return t;
}

inline LindbladTerm sink_term(const OperatorBuilder& ops, double rate, std::size_t source) {
  if (!(rate >= 0.0)) throw Error(ErrorKind::Validation, "negative sink rate");
  if (!ops.layout().has_mode(kSinkLabel)) throw Error(ErrorKind::Layout, "layout has no sink level");
  return {"sink", {{"sink", rate, ops.ladder({{kSinkLabel, +1}, {site_label(source), -1}})}}};
}

inline LindbladTerm injection_term(const OperatorBuilder& ops, const InjectionSpec& inj) {
  if (!(inj.rate >= 0.0) || !(inj.n_th >= 0.0))
    throw Error(ErrorKind::Validation, "injection rate and n_th must be non-negative");
  const auto site = site_label(inj.site);
  const auto up = ops.raise(site);
  if (up.nonZeros() == 0)
    throw Error(ErrorKind::Configuration,
                "injection needs a ground level or the full excitation truncation to create excitations on " + site);
  LindbladTerm t{"injection", {}};
  if (inj.n_th > 0.0) t.jumps.push_back({"up_" + site, inj.n_th * inj.rate / 2.0, up});
  t.jumps.push_back({"down_" + site, (inj.n_th + 1.0) * inj.rate / 2.0, ops.lower(site)});
  return t;
}

/// Layout, Hamiltonian pieces and Lindblad terms of a structured bath. The
/// pieces live on the enlarged layout.
struct BathExtension {
  BasisLayout layout;
  SparseMatrix hamiltonian;
  std::vector<LindbladTerm> terms;
};

inline BathExtension build_local_bath(const NetworkSpec& net, const BathSpec& bath) {
  const auto n = net.n_sites();
  bath.validate(n);
  auto layout = network_layout(net).with_factor(local_bath_factor(n, bath.levels_per_mode, bath.max_total_excitations));
  if (layout.total_dim() > bath.max_dim)
    throw Error(ErrorKind::Resource, "local-bath layout has dimension " + std::to_string(layout.total_dim()) +
                                         " above the cap " + std::to_string(bath.max_dim) +
                                         "; lower max_total_mode_excitations");
  OperatorBuilder ops(layout);
  const auto dim = static_cast<Eigen::Index>(layout.total_dim());
  SparseMatrix h(dim, dim);
  LindbladTerm damping{"mode-damping", {}};
  for (std::size_t j = 1; j <= n; ++j) {
    const double w = bath.mode_frequencies.empty() ? net.site_energies[j - 1] : bath.mode_frequencies[j - 1];
    const auto a = ops.lower(mode_label(j));
    const auto ad = ops.raise(mode_label(j));
    if (w != 0.0) h += w * ops.number(mode_label(j));
    const double g = bath.couplings[j - 1];
    if (g != 0.0) h += g * SparseMatrix(ops.number(site_label(j)) * SparseMatrix(a + ad));
    if (bath.dampings[j - 1] > 0.0) damping.jumps.push_back({"a_" + std::to_string(j), bath.dampings[j - 1], a});
  }
  h.prune(Complex{0.0, 0.0});
  return {layout, h, {damping}};
}

inline BathExtension build_nonlocal_bath(const NetworkSpec& net, const BathSpec& bath) {
  const auto n = net.n_sites();
  bath.validate(n);
  if (net.truncation != Truncation::Single)
    throw Error(ErrorKind::Configuration, "the non-local bath is defined on the single-excitation sector only");
  const auto levels = nonlocal_mode_levels(bath);
  auto layout = network_layout(net).with_factor(Factor::elementary(kNonLocalModeLabel, levels));
  if (layout.total_dim() > bath.max_dim)
    throw Error(ErrorKind::Resource, "non-local bath layout has dimension " + std::to_string(layout.total_dim()) +
                                         " above the cap " + std::to_string(bath.max_dim));
  OperatorBuilder ops(layout);
  const auto a = ops.lower(kNonLocalModeLabel);
  const SparseMatrix x = a + SparseMatrix(ops.raise(kNonLocalModeLabel));
  const auto dim = static_cast<Eigen::Index>(layout.total_dim());
  SparseMatrix h(dim, dim);
  LindbladTerm damping{"mode-damping", {}};
  for (std::size_t j = 1; j <= n; ++j) {
    const auto p = ops.number(site_label(j));
    if (bath.couplings[j - 1] != 0.0) h += bath.couplings[j - 1] * SparseMatrix(p * x);
    if (bath.dampings[j - 1] > 0.0)
      damping.jumps.push_back({"P_" + std::to_string(j) + "a", bath.dampings[j - 1], SparseMatrix(p * a)});
  }
  h.prune(Complex{0.0, 0.0});
  return {layout, h, {damping}};
}

/// Carrier on the relative energy scale; defaults to resonance with site 1.
inline double laser_carrier(const NetworkSpec& net, const LaserPulse& pulse) {
  return pulse.carrier.value_or(net.site_energies.front());
}

/// c(t) D + h.c. with D = -sum_i (mu_i . e) sigma_i^+ in rad/ps per unit field.
inline DriveTerm build_laser_drive(const NetworkSpec& net, const LaserPulse& pulse, const OperatorBuilder& ops) {
  pulse.validate();
  if (net.dipoles.size() != net.n_sites())
    throw Error(ErrorKind::Configuration, "laser drive needs a dipole vector for every site");
  const auto dim = static_cast<Eigen::Index>(ops.layout().total_dim());
  SparseMatrix d(dim, dim);
  for (std::size_t i = 1; i <= net.n_sites(); ++i) {
    const double proj = net.dipoles[i - 1].dot(pulse.polarization) * units::kRadPerPsPerWavenumber;
    if (proj != 0.0) d -= proj * ops.raise(site_label(i));
  }
  DriveTerm drive;
  drive.tag = "laser";
  drive.op = d;
  drive.peak = std::abs(pulse.field_strength);
  if (pulse.frame == Frame::Rotating) {
    drive.coefficient = [pulse](double t) { return Complex{pulse.envelope(t), 0.0}; };
  } else {
    const double w = net.energy_offset + laser_carrier(net, pulse);
    drive.coefficient = [pulse, w](double t) { return pulse.envelope(t) * std::exp(Complex{0.0, -w * t}); };
  }
  return drive;
}

/// Assemble the generator for a full model.
inline Generator build_model(const ModelSpec& spec) {
  const auto& net = spec.network;
  net.validate();
  const auto n = net.n_sites();
  spec.noise.validate(n);
  spec.bath.validate(n);
  if (spec.laser && net.truncation != Truncation::Full)
    throw Error(ErrorKind::Configuration, "laser excitation needs the full excitation truncation");

  BathExtension ext;
  switch (spec.bath.kind) {
    case BathKind::None: {
      auto layout = network_layout(net);
      ext = {layout, SparseMatrix(static_cast<Eigen::Index>(layout.total_dim()),
                                  static_cast<Eigen::Index>(layout.total_dim())), {}};
      break;
    }
    case BathKind::LocalModes: ext = build_local_bath(net, spec.bath); break;
    case BathKind::NonLocalMode: ext = build_nonlocal_bath(net, spec.bath); break;
  }
  OperatorBuilder ops(ext.layout);

  std::optional<double> reference;
  if (spec.laser)
    reference = spec.laser->frame == Frame::Rotating ? net.energy_offset + laser_carrier(net, *spec.laser) : 0.0;
  SparseMatrix h = network_hamiltonian(net, ops, reference);
  h += ext.hamiltonian;
  Generator gen(ext.layout, h);

  const auto& noise = spec.noise;
  if (!noise.dissipation.empty()) {
    auto t = dissipation_term(ops, noise.dissipation);
    if (!t.jumps.empty()) gen.add_term(std::move(t));
  }
  if (noise.correlated_dephasing) {
    auto t = correlated_dephasing_term(ops, *noise.correlated_dephasing);
    if (!t.jumps.empty()) gen.add_term(std::move(t));
  } else if (!noise.dephasing.empty()) {
    auto t = dephasing_term(ops, noise.dephasing);
    if (!t.jumps.empty()) gen.add_term(std::move(t));
  }
  if (noise.sink_rate > 0.0) {
    if (!net.include_sink) throw Error(ErrorKind::Layout, "sink rate set but the layout has no sink level");
    gen.add_term(sink_term(ops, noise.sink_rate, noise.sink_source));
  }
  if (noise.injection) gen.add_term(injection_term(ops, *noise.injection));
  for (auto& t : ext.terms)
    if (!t.jumps.empty()) gen.add_term(std::move(t));
  if (spec.laser) gen.add_drive(build_laser_drive(net, *spec.laser, ops));
  return gen;
}

}  // namespace eet
