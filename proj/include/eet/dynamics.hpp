#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "eet/errors.hpp"
#include "eet/generator.hpp"
#include "eet/linalg.hpp"
#include "eet/model.hpp"
#include "eet/quantum_core.hpp"

namespace eet {

enum class Method { RK4, DOPRI5 };

inline std::string_view to_string(Method m) { return m == Method::RK4 ? "rk4" : "dopri5"; }

struct IntegratorConfig {
  Method method = Method::RK4;
  double step_dt = 0.001;  // ps
  double adaptive_tol = 1e-8;
  double t_end = 5.0;  // ps
  std::size_t record_every = 10;  // in units of step_dt
  ValidityTolerances tolerances{};
  std::size_t positivity_every = 1;  // recorded points between eigenvalue checks
  double abort_factor = 10.0;
  bool stability_guard = true;  // RK4: split steps that would leave the stability region
  bool keep_snapshots = false;  // keep the state at every recorded time
  std::vector<double> snapshot_times;

  double record_interval() const { return step_dt * static_cast<double>(record_every); }

  void validate() const {
    if (!(step_dt > 0.0)) throw Error(ErrorKind::Validation, "step_dt must be positive");
    if (!(t_end > 0.0)) throw Error(ErrorKind::Validation, "t_end must be positive");
    if (record_every == 0) throw Error(ErrorKind::Validation, "record_every must be at least 1");
    if (!(adaptive_tol > 0.0)) throw Error(ErrorKind::Validation, "adaptive_tol must be positive");
    if (positivity_every == 0) throw Error(ErrorKind::Validation, "positivity_every must be at least 1");
  }
};

/// A named block of columns recorded at every trajectory time.
struct SeriesGroup {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column_index(std::string_view col) const {
    auto it = std::find(columns.begin(), columns.end(), col);
    if (it == columns.end())
      throw Error(ErrorKind::Configuration, "group '" + name + "' has no column '" + std::string(col) + "'");
    return static_cast<std::size_t>(it - columns.begin());
  }
};

struct ValiditySummary {
  double max_trace_deviation = 0.0;
  double max_hermiticity_deviation = 0.0;
  double min_eigenvalue = 0.0;
  std::size_t positivity_checks = 0;

  bool within(const ValidityTolerances& tol) const {
    return max_trace_deviation <= tol.trace && max_hermiticity_deviation <= tol.hermiticity &&
           min_eigenvalue >= -tol.positivity;
  }

  void merge(const ValidityReport& r, bool eigen_checked) {
    max_trace_deviation = std::max(max_trace_deviation, r.trace_deviation);
    max_hermiticity_deviation = std::max(max_hermiticity_deviation, r.hermiticity_deviation);
    if (eigen_checked) {
      min_eigenvalue = positivity_checks ? std::min(min_eigenvalue, r.min_eigenvalue) : r.min_eigenvalue;
      ++positivity_checks;
    }
  }
};

struct Snapshot {
  double time;
  Matrix rho;
};

struct Trajectory {
  BasisLayout layout;
  std::vector<double> times;
  std::vector<SeriesGroup> groups;
  std::vector<Snapshot> snapshots;
  ValiditySummary validity;
  std::size_t steps_taken = 0;
  double effective_dt = 0.0;

  bool has_group(std::string_view name) const {
    return std::any_of(groups.begin(), groups.end(), [&](const SeriesGroup& g) { return g.name == name; });
  }

  const SeriesGroup& group(std::string_view name) const {
    for (const auto& g : groups)
      if (g.name == name) return g;
    throw Error(ErrorKind::Configuration, "trajectory has no group '" + std::string(name) + "'");
  }

  std::vector<double> column(std::string_view group_name, std::string_view col) const {
    const auto& g = group(group_name);
    const auto c = g.column_index(col);
    std::vector<double> out;
    out.reserve(g.rows.size());
    for (const auto& r : g.rows) out.push_back(r[c]);
    return out;
  }

  const Snapshot& snapshot_near(double t) const {
    if (snapshots.empty()) throw Error(ErrorKind::Configuration, "trajectory holds no snapshots");
    return *std::min_element(snapshots.begin(), snapshots.end(), [&](const Snapshot& a, const Snapshot& b) {
      return std::abs(a.time - t) < std::abs(b.time - t);
    });
  }
};

/// Computes one group of columns from the state at a recorded time.
struct Observable {
  std::string group;
  std::vector<std::string> columns;
  std::function<void(double, const Matrix&, std::vector<double>&)> eval;
};

/// Site populations <n_j>, plus ground and sink populations when present.
inline Observable population_observable(const BasisLayout& layout) {
  std::vector<std::string> cols;
  std::vector<RealVector> weights;
  std::vector<std::string> sites;
  for (std::size_t j = 1; layout.has_mode(site_label(j)); ++j) {
    sites.push_back(site_label(j));
    cols.push_back(site_label(j));
    weights.push_back(layout.occupation_weights(site_label(j)));
  }
  auto vacuum = sites;
  if (layout.has_mode(kSinkLabel)) vacuum.push_back(kSinkLabel);
  cols.push_back("ground");
  weights.push_back(layout.vacuum_weights(vacuum));
  if (layout.has_mode(kSinkLabel)) {
    cols.push_back(kSinkLabel);
    weights.push_back(layout.occupation_weights(kSinkLabel));
  }
  return {"populations", cols, [weights](double, const Matrix& rho, std::vector<double>& out) {
            const RealVector diag = rho.diagonal().real();
            for (const auto& w : weights) out.push_back(w.dot(diag));
          }};
}

/// Mean occupation of each named mode.
inline Observable mode_population_observable(const BasisLayout& layout, const std::vector<std::string>& modes,
                                             std::string group = "mode_populations") {
  std::vector<RealVector> weights;
  for (const auto& m : modes) weights.push_back(layout.occupation_weights(m));
  return {std::move(group), modes, [weights](double, const Matrix& rho, std::vector<double>& out) {
            const RealVector diag = rho.diagonal().real();
            for (const auto& w : weights) out.push_back(w.dot(diag));
          }};
}

namespace detail {

// The Hermitian fast path of Generator::apply is only the true right-hand
// side on Hermitian input. On the anti-Hermitian rounding residue it keeps
// the jump gain but drops the matching loss, so the residue grows at roughly
// twice the total jump rate unless it is projected out after every step.
inline void make_hermitian(Matrix& rho) {
  const auto n = rho.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    rho(j, j) = Complex{rho(j, j).real(), 0.0};
    for (Eigen::Index i = 0; i < j; ++i) {
      const Complex v = 0.5 * (rho(i, j) + std::conj(rho(j, i)));
      rho(i, j) = v;
      rho(j, i) = std::conj(v);
    }
  }
}

struct Stepper {
  const Generator& gen;
  bool hermitian;
  Matrix k1, k2, k3, k4, tmp;

  Stepper(const Generator& g, Eigen::Index n, bool herm) : gen(g), hermitian(herm) {
    k1.resize(n, n);
    k2.resize(n, n);
    k3.resize(n, n);
    k4.resize(n, n);
    tmp.resize(n, n);
  }

  void rk4(double t, double h, Matrix& rho) {
    gen.apply(t, rho, k1, hermitian);
    tmp = rho + (0.5 * h) * k1;
    gen.apply(t + 0.5 * h, tmp, k2, hermitian);
    tmp = rho + (0.5 * h) * k2;
    gen.apply(t + 0.5 * h, tmp, k3, hermitian);
    tmp = rho + h * k3;
    gen.apply(t + h, tmp, k4, hermitian);
    rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (hermitian) make_hermitian(rho);
  }
};

/// Dormand-Prince 5(4) with first-same-as-last reuse.
class Dopri5 {
 public:
  Dopri5(const Generator& g, Eigen::Index n, bool herm, double tol) : gen_(g), hermitian_(herm), tol_(tol) {
    for (auto& k : k_) k.resize(n, n);
  }

  /// Advance rho from t to t_target with adaptive steps; h carries over.
  std::size_t advance(double& t, double t_target, Matrix& rho, double& h) {
    std::size_t steps = 0;
    if (!fsal_valid_) {
      gen_.apply(t, rho, k_[0], hermitian_);
      fsal_valid_ = true;
    }
    while (t < t_target - 1e-14 * std::max(1.0, std::abs(t_target))) {
      const double step = std::min(h, t_target - t);
      const double err = attempt(t, step, rho);
      if (err <= 1.0) {
        t += step;
        rho.swap(y_);
        std::swap(k_[0], k_[6]);
        ++steps;
      }
      const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
      if (step == h || err > 1.0) h = step * factor;
      if (h < 1e-12) throw Error(ErrorKind::State, "adaptive step size underflow at t = " + std::to_string(t));
    }
    return steps;
  }

  void invalidate() { fsal_valid_ = false; }

 private:
  double attempt(double t, double h, const Matrix& rho) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
    auto& k = k_;
    tmp_ = rho + h * a21 * k[0];
    gen_.apply(t + c2 * h, tmp_, k[1], hermitian_);
    tmp_ = rho + h * (a31 * k[0] + a32 * k[1]);
    gen_.apply(t + c3 * h, tmp_, k[2], hermitian_);
    tmp_ = rho + h * (a41 * k[0] + a42 * k[1] + a43 * k[2]);
    gen_.apply(t + c4 * h, tmp_, k[3], hermitian_);
    tmp_ = rho + h * (a51 * k[0] + a52 * k[1] + a53 * k[2] + a54 * k[3]);
    gen_.apply(t + c5 * h, tmp_, k[4], hermitian_);
    tmp_ = rho + h * (a61 * k[0] + a62 * k[1] + a63 * k[2] + a64 * k[3] + a65 * k[4]);
    gen_.apply(t + h, tmp_, k[5], hermitian_);
    y_ = rho + h * (b1 * k[0] + b3 * k[2] + b4 * k[3] + b5 * k[4] + b6 * k[5]);
    if (hermitian_) make_hermitian(y_);
    gen_.apply(t + h, y_, k[6], hermitian_);
    tmp_ = h * (e1 * k[0] + e3 * k[2] + e4 * k[3] + e5 * k[4] + e6 * k[5] + e7 * k[6]);
    const double scale = tol_ * std::max(1.0, std::max(rho.cwiseAbs().maxCoeff(), y_.cwiseAbs().maxCoeff()));
    return tmp_.cwiseAbs().maxCoeff() / scale;
  }

  const Generator& gen_;
  bool hermitian_;
  double tol_;
  std::array<Matrix, 7> k_;
  Matrix tmp_, y_;
  bool fsal_valid_ = false;
};

/// RK4 substeps per configured step, so that the step stays inside the
/// stability region of the generator's spectrum.
inline std::size_t stable_substeps(const Generator& gen, double dt) {
  const auto [osc, decay] = gen.spectral_bounds();
  const double radius = std::hypot(osc, decay);
  if (radius == 0.0) return 1;
  constexpr double kRk4Radius = 2.5;
  return static_cast<std::size_t>(std::max(1.0, std::ceil(dt * radius / kRk4Radius)));
}

}  // namespace detail

/// Propagate a matrix (not necessarily a state) from t0 to t1 without
/// recording. Non-Hermitian inputs need `hermitian = false`.
inline Matrix propagate(const Generator& gen, Matrix rho, double t0, double t1, const IntegratorConfig& cfg,
                        bool hermitian = true) {
  cfg.validate();
  if (t1 < t0) throw Error(ErrorKind::Argument, "propagate needs t1 >= t0");
  const auto n = rho.rows();
  if (static_cast<std::size_t>(n) != gen.dim()) throw Error(ErrorKind::Layout, "matrix does not match generator layout");
  if (cfg.method == Method::RK4) {
    const auto sub = cfg.stability_guard ? detail::stable_substeps(gen, cfg.step_dt) : 1;
    const double h_nominal = cfg.step_dt / static_cast<double>(sub);
    const auto steps = static_cast<std::size_t>(std::ceil((t1 - t0) / h_nominal - 1e-9));
    if (steps == 0) return rho;
    const double h = (t1 - t0) / static_cast<double>(steps);
    detail::Stepper st(gen, n, hermitian);
    for (std::size_t k = 0; k < steps; ++k) st.rk4(t0 + static_cast<double>(k) * h, h, rho);
    return rho;
  }
  detail::Dopri5 dp(gen, n, hermitian, cfg.adaptive_tol);
  double t = t0, h = cfg.step_dt;
  dp.advance(t, t1, rho, h);
  return rho;
}

/// Integrate the master equation from t = 0 to cfg.t_end, recording every
/// observable on the grid k * record_interval.
inline Trajectory evolve(const Generator& gen, const QuantumState& rho0, const IntegratorConfig& cfg,
                         const std::vector<Observable>& observers) {
  cfg.validate();
  if (!(rho0.layout() == gen.layout()))
    throw Error(ErrorKind::Layout, "initial state layout " + rho0.layout().describe() + " does not match generator " +
                                       gen.layout().describe());
  const auto initial = assert_valid_state(rho0, cfg.tolerances);
  if (!initial.passed()) throw Error(ErrorKind::State, "initial state is not valid: " + initial.summary());

  Trajectory traj;
  traj.layout = gen.layout();
  for (const auto& o : observers) traj.groups.push_back({o.group, o.columns, {}});

  Matrix rho = rho0.matrix();
  const auto n = rho.rows();
  const auto abort_tol = cfg.tolerances.scaled(cfg.abort_factor);
  std::size_t record_count = 0;

  auto record = [&](double t) {
    traj.times.push_back(t);
    std::vector<double> row;
    for (std::size_t i = 0; i < observers.size(); ++i) {
      row.clear();
      observers[i].eval(t, rho, row);
      if (row.size() != observers[i].columns.size())
        throw Error(ErrorKind::Shape, "observer '" + observers[i].group + "' returned the wrong number of values");
      traj.groups[i].rows.push_back(row);
    }
    ValidityReport r;
    r.hermiticity_deviation = hermiticity_deviation(rho);
    r.trace_deviation = std::abs(rho.trace() - Complex{1.0, 0.0});
    const bool eig = record_count % cfg.positivity_every == 0;
    if (eig) r.min_eigenvalue = hermitian_eigenvalues(0.5 * (rho + rho.adjoint())).minCoeff();
    traj.validity.merge(r, eig);
    ++record_count;
    if (r.trace_deviation > abort_tol.trace || r.hermiticity_deviation > abort_tol.hermiticity ||
        (eig && r.min_eigenvalue < -abort_tol.positivity)) {
      r.hermitian_ok = r.hermiticity_deviation <= abort_tol.hermiticity;
      r.trace_ok = r.trace_deviation <= abort_tol.trace;
      r.positive_ok = !eig || r.min_eigenvalue >= -abort_tol.positivity;
      throw Error(ErrorKind::State, "state left the physical set at t = " + std::to_string(t) + " ps: " + r.summary());
    }
    if (cfg.keep_snapshots) traj.snapshots.push_back({t, rho});
  };

  const double interval = cfg.record_interval();
  const auto n_records = static_cast<std::size_t>(std::floor(cfg.t_end / interval + 1e-9));
  std::vector<double> pending = cfg.snapshot_times;
  std::sort(pending.begin(), pending.end());

  record(0.0);
  if (cfg.method == Method::RK4) {
    const auto sub = cfg.stability_guard ? detail::stable_substeps(gen, cfg.step_dt) : 1;
    const double h = cfg.step_dt / static_cast<double>(sub);
    const std::size_t per_record = cfg.record_every * sub;
    traj.effective_dt = h;
    detail::Stepper st(gen, n, true);
    std::size_t k = 0;
    auto take_snapshots = [&](double t) {
      while (!pending.empty() && pending.front() <= t + 0.5 * h) {
        if (!cfg.keep_snapshots) traj.snapshots.push_back({t, rho});
        pending.erase(pending.begin());
      }
    };
    take_snapshots(0.0);
    for (std::size_t rec = 1; rec <= n_records; ++rec) {
      for (std::size_t s = 0; s < per_record; ++s, ++k) {
        st.rk4(static_cast<double>(k) * h, h, rho);
        take_snapshots(static_cast<double>(k + 1) * h);
      }
      record(static_cast<double>(rec) * interval);
    }
    traj.steps_taken = k;
  } else {
    detail::Dopri5 dp(gen, n, true, cfg.adaptive_tol);
    double t = 0.0, h = cfg.step_dt;
    for (std::size_t rec = 1; rec <= n_records; ++rec) {
      const double target = static_cast<double>(rec) * interval;
      while (!pending.empty() && pending.front() < target - 1e-12) {
        if (pending.front() > t) {
          traj.steps_taken += dp.advance(t, pending.front(), rho, h);
        }
        if (!cfg.keep_snapshots) traj.snapshots.push_back({t, rho});
        pending.erase(pending.begin());
      }
      traj.steps_taken += dp.advance(t, target, rho, h);
      t = target;
      record(target);
    }
    traj.effective_dt = traj.steps_taken ? cfg.t_end / static_cast<double>(traj.steps_taken) : 0.0;
  }
  return traj;
}

/// p_sink(t) = 2 Gamma_sink * integral_0^t p_source(t') dt', trapezoidal on
/// the recorded grid.
inline std::vector<double> compute_p_sink(const Trajectory& traj, double rate, std::size_t source = 3) {
  if (!traj.has_group("populations")) throw Error(ErrorKind::Configuration, "trajectory has no populations group");
  const auto& g = traj.group("populations");
  const auto col = site_label(source);
  if (std::find(g.columns.begin(), g.columns.end(), col) == g.columns.end())
    throw Error(ErrorKind::Configuration, "trajectory does not record the population of " + col);
  const auto p = traj.column("populations", col);
  std::vector<double> out(p.size(), 0.0);
  for (std::size_t k = 1; k < p.size(); ++k)
    out[k] = out[k - 1] + rate * (traj.times[k] - traj.times[k - 1]) * (p[k] + p[k - 1]);
  return out;
}

}  // namespace eet
