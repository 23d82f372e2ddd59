#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "eet/errors.hpp"
#include "eet/linalg.hpp"
#include "eet/quantum_core.hpp"

namespace eet {

/// Contributes rate * (2 L rho L^dagger - {L^dagger L, rho}).
struct JumpOperator {
  std::string label;
  double rate = 0.0;
  SparseMatrix op;
};

/// A tagged group of jump operators. The tag names the physical channel
/// ("dissipation", "dephasing", "sink", ...).
struct LindbladTerm {
  std::string tag;
  std::vector<JumpOperator> jumps;
};

/// Time-dependent Hamiltonian piece c(t) D + conj(c(t)) D^dagger.
struct DriveTerm {
  std::string tag;
  SparseMatrix op;
  std::function<Complex(double)> coefficient;
  double peak = 0.0;  // max |c(t)|, for step-size estimates
};

/// Right-hand side of the master equation
///   d rho/dt = -i[H(t), rho] + sum_k rate_k (2 L_k rho L_k^dagger - {L_k^dagger L_k, rho}).
///
/// Internally this is evaluated as -i(H_eff rho - rho H_eff^dagger) plus the
/// sandwich terms, with H_eff = H - i sum rate L^dagger L kept sparse. Jump
/// operators that are diagonal in the layout basis collapse into one
/// element-wise mask, so site dephasing costs O(dim^2) regardless of the
/// number of sites.
class Generator {
 public:
  Generator() = default;

  Generator(BasisLayout layout, const Matrix& h0) : layout_(std::move(layout)) {
    const auto d = static_cast<Eigen::Index>(layout_.total_dim());
    if (h0.rows() != d || h0.cols() != d)
      throw Error(ErrorKind::Dimension, "Hamiltonian does not match layout " + layout_.describe());
    check_hermitian(h0, "Hamiltonian");
    h0_ = to_sparse(h0);
    compile();
  }

  Generator(BasisLayout layout, SparseMatrix h0) : layout_(std::move(layout)), h0_(std::move(h0)) {
    const auto d = static_cast<Eigen::Index>(layout_.total_dim());
    if (h0_.rows() != d || h0_.cols() != d)
      throw Error(ErrorKind::Dimension, "Hamiltonian does not match layout " + layout_.describe());
    check_hermitian(Matrix(h0_), "Hamiltonian");
    compile();
  }

  const BasisLayout& layout() const { return layout_; }
  std::size_t dim() const { return layout_.total_dim(); }
  const SparseMatrix& static_hamiltonian() const { return h0_; }
  const std::vector<LindbladTerm>& terms() const { return terms_; }
  const std::vector<DriveTerm>& drives() const { return drives_; }
  bool time_dependent() const { return !drives_.empty(); }

  void add_hamiltonian(const SparseMatrix& h) {
    check_dim(h, "Hamiltonian piece");
    check_hermitian(Matrix(h), "Hamiltonian piece");
    h0_ += h;
    h0_.prune(Complex{0.0, 0.0});
    compile();
  }

  void add_term(LindbladTerm term) {
    for (const auto& j : term.jumps) {
      check_dim(j.op, "jump operator '" + j.label + "'");
      if (!(j.rate >= 0.0))
        throw Error(ErrorKind::Validation, "negative rate " + std::to_string(j.rate) + " for '" + j.label + "'");
    }
    terms_.push_back(std::move(term));
    compile();
  }

  void add_drive(DriveTerm drive) {
    check_dim(drive.op, "drive operator");
    if (!drive.coefficient) throw Error(ErrorKind::Argument, "drive '" + drive.tag + "' has no coefficient");
    drives_.push_back(std::move(drive));
    compile();
  }

  bool has_term(std::string_view tag) const {
    return std::any_of(terms_.begin(), terms_.end(), [&](const LindbladTerm& t) { return t.tag == tag; });
  }

  Matrix hamiltonian(double t) const {
    Matrix h = Matrix(h0_);
    for (const auto& d : drives_) {
      const Complex c = d.coefficient(t);
      const Matrix op = Matrix(d.op);
      h += c * op + std::conj(c) * op.adjoint();
    }
    return h;
  }

  /// out = d rho/dt at time t. With `hermitian` set, rho must be Hermitian and
  /// half of the products are skipped.
  void apply(double t, const Matrix& rho, Matrix& out, bool hermitian = true) const {
    const auto& c = *compiled_;
    // y = rho H_eff^dagger, so that d rho/dt = -i y^dagger + i y when rho is Hermitian
    thread_local Matrix y;  // scratch; large fresh allocations cost page faults on every call
    multiply(rho, c.h_eff_adj, y);
    for (std::size_t k = 0; k < drives_.size(); ++k) {
      const Complex coef = drives_[k].coefficient(t);
      if (coef == Complex{}) continue;
      // (c D + c* D^dagger)^dagger = c* D^dagger + c D
      add_product(rho, c.drive_adj[k], std::conj(coef), y);
      add_product(rho, c.drive_ops[k], coef, y);
    }
    out.resize(rho.rows(), rho.cols());
    if (hermitian) {
      i_times_difference(y, y, out);
    } else {
      const Matrix rho_adj = rho.adjoint();
      Matrix x;
      multiply(rho_adj, c.h_eff_adj, x);
      for (std::size_t k = 0; k < drives_.size(); ++k) {
        const Complex coef = drives_[k].coefficient(t);
        if (coef == Complex{}) continue;
        add_product(rho_adj, c.drive_adj[k], std::conj(coef), x);
        add_product(rho_adj, c.drive_ops[k], coef, x);
      }
      i_times_difference(y, x, out);
    }
    if (c.has_mask) out += c.mask.cwiseProduct(rho);
    for (const auto& s : c.scatter)
      for (const auto& [y2, x2, v2] : s.entries) {
        const Complex f = s.rate2 * std::conj(v2);
        const Complex* in = rho.data() + x2 * rho.rows();
        Complex* o = out.data() + y2 * out.rows();
        for (const auto& [y1, x1, v1] : s.entries) {
          const double ar = f.real() * v1.real() - f.imag() * v1.imag(), ai = f.real() * v1.imag() + f.imag() * v1.real();
          const Complex x = in[x1];
          o[y1] += Complex{ar * x.real() - ai * x.imag(), ar * x.imag() + ai * x.real()};
        }
      }
    for (const auto& [rate2, op_adj] : c.sandwich) {
      // L rho L^dagger = ((rho L^dagger)^dagger L^dagger)^dagger
      Matrix z, w;
      multiply(rho, op_adj, z);
      multiply(Matrix(z.adjoint()), op_adj, w);
      out += rate2 * w.adjoint();
    }
  }

  Matrix apply(double t, const Matrix& rho, bool hermitian = true) const {
    Matrix out(rho.rows(), rho.cols());
    apply(t, rho, out, hermitian);
    return out;
  }

  /// Output of one Lindblad term alone, evaluated term by term without the
  /// compiled shortcuts. Used to check each channel in isolation.
  Matrix apply_term(std::size_t index, const Matrix& rho) const {
    if (index >= terms_.size()) throw Error(ErrorKind::Argument, "term index out of range");
    Matrix out = Matrix::Zero(rho.rows(), rho.cols());
    for (const auto& j : terms_[index].jumps) {
      const Matrix l = Matrix(j.op);
      const Matrix ldl = l.adjoint() * l;
      out += j.rate * (2.0 * l * rho * l.adjoint() - ldl * rho - rho * ldl);
    }
    return out;
  }

  Matrix apply_term(std::string_view tag, const Matrix& rho) const {
    Matrix out = Matrix::Zero(rho.rows(), rho.cols());
    bool found = false;
    for (std::size_t k = 0; k < terms_.size(); ++k)
      if (terms_[k].tag == tag) {
        out += apply_term(k, rho);
        found = true;
      }
    if (!found) throw Error(ErrorKind::Argument, "no Lindblad term tagged '" + std::string(tag) + "'");
    return out;
  }

  /// Same dynamics on layout x extra, with the new factor idle.
  Generator with_idle_factor(const Factor& extra) const {
    const auto id = sparse_identity(static_cast<Eigen::Index>(extra.dim));
    Generator g;
    g.layout_ = layout_.with_factor(extra);
    g.h0_ = sparse_kron(h0_, id);
    for (const auto& t : terms_) {
      LindbladTerm lt{t.tag, {}};
      for (const auto& j : t.jumps) lt.jumps.push_back({j.label, j.rate, sparse_kron(j.op, id)});
      g.terms_.push_back(std::move(lt));
    }
    for (const auto& d : drives_) g.drives_.push_back({d.tag, sparse_kron(d.op, id), d.coefficient, d.peak});
    g.compile();
    return g;
  }

  /// Upper estimates of the Liouvillian spectrum: {oscillatory, decay} in
  /// 1/ps. Used to keep explicit steps inside the stability region.
  std::pair<double, double> spectral_bounds() const {
    const auto& c = *compiled_;
    const auto n = dim();
    std::vector<double> centre(n, 0.0), radius(n, 0.0);
    auto add_rows = [&](const SparseMatrix& m, double scale, bool split_diagonal) {
      for (Eigen::Index r = 0; r < m.outerSize(); ++r)
        for (SparseMatrix::InnerIterator it(m, r); it; ++it) {
          const auto i = static_cast<std::size_t>(r);
          if (split_diagonal && it.row() == it.col()) centre[i] += it.value().real();
          else radius[i] += scale * std::abs(it.value());
        }
    };
    add_rows(h0_, 1.0, true);
    for (const auto& d : drives_) {
      add_rows(d.op, d.peak, false);
      add_rows(SparseMatrix(d.op.adjoint()), d.peak, false);
    }
    // Liouvillian frequencies are differences of Hamiltonian eigenvalues,
    // bounded by the span of the Gershgorin discs.
    double hi = -std::numeric_limits<double>::infinity(), lo = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      hi = std::max(hi, centre[i] + radius[i]);
      lo = std::min(lo, centre[i] - radius[i]);
    }
    double decay = 0.0;
    for (Eigen::Index i = 0; i < c.decay_diag.size(); ++i) decay = std::max(decay, c.decay_diag(i));
    return {n ? hi - lo : 0.0, 2.0 * decay};
  }

 private:
  struct ScatterJump {
    double rate2;
    std::vector<std::tuple<Eigen::Index, Eigen::Index, Complex>> entries;  // (row, col, value)
  };

  /// A sparse operator split as re + i im, column-major, for right products
  /// with a dense state.
  struct SplitOperator {
    Eigen::SparseMatrix<double> re, im;
  };

  struct Compiled {
    SplitOperator h_eff_adj;
    std::vector<ScatterJump> scatter;
    std::vector<Eigen::SparseMatrix<Complex>> drive_ops, drive_adj;
    Matrix mask;
    bool has_mask = false;
    std::vector<std::pair<double, SplitOperator>> sandwich;
    RealVector decay_diag;
  };

  static SplitOperator split(const SparseMatrix& m) {
    SplitOperator s;
    s.re = m.real();
    s.im = m.imag();
    s.re.prune(0.0);
    s.im.prune(0.0);
    return s;
  }

  // y = rho * a. rho is read as a real (2n x n) matrix of interleaved real and
  // imaginary parts, so the products run as real column updates.
  static void multiply(const Matrix& rho, const SplitOperator& a, Matrix& y) {
    const auto n = rho.rows();
    y.setZero(n, a.re.cols());
    Eigen::Map<const RealMatrix> r(reinterpret_cast<const double*>(rho.data()), 2 * n, rho.cols());
    Eigen::Map<RealMatrix> yr(reinterpret_cast<double*>(y.data()), 2 * n, y.cols());
    for (Eigen::Index j = 0; j < a.re.outerSize(); ++j)
      for (Eigen::SparseMatrix<double>::InnerIterator it(a.re, j); it; ++it) yr.col(j) += it.value() * r.col(it.index());
    for (Eigen::Index j = 0; j < a.im.outerSize(); ++j)
      for (Eigen::SparseMatrix<double>::InnerIterator it(a.im, j); it; ++it)
        axpy({0.0, it.value()}, &rho(0, it.index()), &y(0, j), n);
  }

  // y += s * rho * a
  static void add_product(const Matrix& rho, const Eigen::SparseMatrix<Complex>& a, Complex s, Matrix& y) {
    for (Eigen::Index j = 0; j < a.outerSize(); ++j)
      for (Eigen::SparseMatrix<Complex>::InnerIterator it(a, j); it; ++it)
        axpy(s * it.value(), &rho(0, it.index()), &y(0, j), rho.rows());
  }

  // y += a x in real arithmetic; std::complex products carry NaN handling
  // that blocks vectorization.
  static void axpy(Complex a, const Complex* x, Complex* y, Eigen::Index n) {
    const double ar = a.real(), ai = a.imag();
    const auto* xd = reinterpret_cast<const double*>(x);
    auto* yd = reinterpret_cast<double*>(y);
    for (Eigen::Index i = 0; i < 2 * n; i += 2) {
      yd[i] += ar * xd[i] - ai * xd[i + 1];
      yd[i + 1] += ar * xd[i + 1] + ai * xd[i];
    }
  }

  // out = i (y - x^dagger), in tiles so the transposed reads stay in cache.
  static void i_times_difference(const Matrix& y, const Matrix& x, Matrix& out) {
    constexpr Eigen::Index kTile = 32;
    const auto n = y.rows();
    for (Eigen::Index jb = 0; jb < n; jb += kTile)
      for (Eigen::Index ib = 0; ib < n; ib += kTile) {
        const auto je = std::min(n, jb + kTile), ie = std::min(n, ib + kTile);
        for (Eigen::Index j = jb; j < je; ++j)
          for (Eigen::Index i = ib; i < ie; ++i) {
            const Complex d = y(i, j) - std::conj(x(j, i));
            out(i, j) = Complex{-d.imag(), d.real()};
          }
      }
  }

  void check_dim(const SparseMatrix& m, const std::string& what) const {
    const auto d = static_cast<Eigen::Index>(layout_.total_dim());
    if (m.rows() != d || m.cols() != d)
      throw Error(ErrorKind::Dimension, what + " does not match layout " + layout_.describe());
  }

  static void check_hermitian(const Matrix& h, const std::string& what) {
    const double dev = hermiticity_deviation(h);
    if (dev > 1e-10) throw Error(ErrorKind::Validation, what + " is not Hermitian (deviation " + std::to_string(dev) + ")");
  }

  void compile() {
    auto c = std::make_shared<Compiled>();
    const auto n = static_cast<Eigen::Index>(layout_.total_dim());
    SparseMatrix anti(n, n);
    Vector diag_accum = Vector::Zero(n);
    c->mask = Matrix();
    for (const auto& t : terms_)
      for (const auto& j : t.jumps) {
        if (j.rate == 0.0) continue;
        SparseMatrix ldl = SparseMatrix(j.op.adjoint()) * j.op;
        anti += j.rate * ldl;
        if (is_diagonal(j.op)) {
          Vector dvec = Matrix(j.op).diagonal();
          if (!c->has_mask) {
            c->mask = Matrix::Zero(n, n);
            c->has_mask = true;
          }
          c->mask += (2.0 * j.rate) * (dvec * dvec.adjoint());
        } else if (j.op.nonZeros() <= 4 * n) {
          ScatterJump sj{2.0 * j.rate, {}};
          for (Eigen::Index r = 0; r < j.op.outerSize(); ++r)
            for (SparseMatrix::InnerIterator it(j.op, r); it; ++it) sj.entries.emplace_back(it.row(), it.col(), it.value());
          c->scatter.push_back(std::move(sj));
        } else {
          c->sandwich.emplace_back(2.0 * j.rate, split(SparseMatrix(j.op.adjoint())));
        }
      }
    SparseMatrix h_eff = h0_ - kI * anti;
    h_eff.prune(Complex{0.0, 0.0});
    c->h_eff_adj = split(SparseMatrix(h_eff.adjoint()));
    c->decay_diag = RealVector::Zero(n);
    for (Eigen::Index r = 0; r < anti.outerSize(); ++r)
      for (SparseMatrix::InnerIterator it(anti, r); it; ++it)
        if (it.row() == it.col()) c->decay_diag(r) += std::abs(it.value());
    for (const auto& d : drives_) {
      c->drive_ops.emplace_back(d.op);
      c->drive_adj.emplace_back(d.op.adjoint());
    }
    compiled_ = std::move(c);
  }

  BasisLayout layout_;
  SparseMatrix h0_;
  std::vector<LindbladTerm> terms_;
  std::vector<DriveTerm> drives_;
  std::shared_ptr<const Compiled> compiled_ = std::make_shared<Compiled>();
};

}  // namespace eet
