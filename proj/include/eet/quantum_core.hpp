#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "eet/errors.hpp"
#include "eet/linalg.hpp"

namespace eet {

/// One tensor factor of a basis layout.
///
/// A factor is either elementary (a single qudit whose only mode carries the
/// factor's label) or embedded: its levels are an explicitly enumerated subset
/// of a product space over several named modes. The single-excitation sector
/// of a qubit network is the typical embedded factor: level 0 is the vacuum,
/// level j has only qubit j excited. Entanglement is always assessed over the
/// elementary mode labels, so splits inside an embedded factor work the same
/// way as splits between factors.
struct Factor {
  std::string label;
  std::size_t dim = 0;
  std::vector<std::string> modes;
  std::vector<std::size_t> mode_dims;
  std::vector<std::vector<int>> occupations;  // occupations[level][mode]

  static Factor elementary(std::string label, std::size_t dim) {
    Factor f;
    f.label = label;
    f.dim = dim;
    f.modes = {std::move(label)};
    f.mode_dims = {dim};
    f.occupations.resize(dim);
    for (std::size_t l = 0; l < dim; ++l) f.occupations[l] = {static_cast<int>(l)};
    return f;
  }

  static Factor embedded(std::string label, std::vector<std::string> modes, std::vector<std::size_t> mode_dims,
                         std::vector<std::vector<int>> occupations) {
    Factor f;
    f.label = std::move(label);
    f.dim = occupations.size();
    f.modes = std::move(modes);
    f.mode_dims = std::move(mode_dims);
    f.occupations = std::move(occupations);
    return f;
  }

  bool is_elementary() const { return modes.size() == 1 && modes.front() == label; }
};

/// Ordered tensor product of factors. Global index enumeration puts the first
/// factor slowest.
class BasisLayout {
 public:
  BasisLayout() = default;

  explicit BasisLayout(std::vector<Factor> factors) : factors_(std::move(factors)) {
    if (factors_.empty()) throw Error(ErrorKind::Layout, "layout needs at least one factor");
    std::set<std::string> factor_labels;
    std::set<std::string> mode_labels;
    total_dim_ = 1;
    for (const auto& f : factors_) {
      if (f.dim == 0) throw Error(ErrorKind::Layout, "factor '" + f.label + "' has zero dimension");
      if (!factor_labels.insert(f.label).second)
        throw Error(ErrorKind::Layout, "duplicate factor label '" + f.label + "'");
      if (f.modes.size() != f.mode_dims.size() || f.occupations.size() != f.dim)
        throw Error(ErrorKind::Layout, "factor '" + f.label + "' has inconsistent embedding tables");
      std::set<std::vector<int>> distinct;
      for (const auto& occ : f.occupations) {
        if (occ.size() != f.modes.size())
          throw Error(ErrorKind::Layout, "factor '" + f.label + "' occupation has wrong arity");
        for (std::size_t m = 0; m < occ.size(); ++m)
          if (occ[m] < 0 || static_cast<std::size_t>(occ[m]) >= f.mode_dims[m])
            throw Error(ErrorKind::Layout, "factor '" + f.label + "' occupation out of range");
        if (!distinct.insert(occ).second)
          throw Error(ErrorKind::Layout, "factor '" + f.label + "' repeats an occupation pattern");
      }
      for (const auto& m : f.modes)
        if (!mode_labels.insert(m).second) throw Error(ErrorKind::Layout, "duplicate mode label '" + m + "'");
      total_dim_ *= f.dim;
    }
    build_tables();
  }

  const std::vector<Factor>& factors() const { return factors_; }
  std::size_t total_dim() const { return total_dim_; }
  std::size_t factor_count() const { return factors_.size(); }

  bool has_factor(std::string_view label) const {
    return std::any_of(factors_.begin(), factors_.end(), [&](const Factor& f) { return f.label == label; });
  }

  std::size_t factor_index(std::string_view label) const {
    for (std::size_t i = 0; i < factors_.size(); ++i)
      if (factors_[i].label == label) return i;
    throw Error(ErrorKind::Layout, "unknown factor '" + std::string(label) + "'");
  }

  const Factor& factor(std::string_view label) const { return factors_[factor_index(label)]; }

  /// Elementary mode labels in layout order.
  const std::vector<std::string>& mode_labels() const { return tables_->mode_labels; }
  const std::vector<std::size_t>& mode_dims() const { return tables_->mode_dims; }

  bool has_mode(std::string_view label) const {
    const auto& ls = mode_labels();
    return std::find(ls.begin(), ls.end(), label) != ls.end();
  }

  std::size_t mode_index(std::string_view label) const {
    const auto& ls = mode_labels();
    auto it = std::find(ls.begin(), ls.end(), label);
    if (it == ls.end()) throw Error(ErrorKind::Layout, "unknown mode label '" + std::string(label) + "'");
    return static_cast<std::size_t>(it - ls.begin());
  }

  /// Occupation of every elementary mode for global basis index `index`.
  std::span<const int> occupation(std::size_t index) const {
    const auto width = tables_->mode_labels.size();
    return {tables_->occupations.data() + index * width, width};
  }

  std::vector<std::size_t> digits(std::size_t index) const {
    std::vector<std::size_t> out(factors_.size());
    for (std::size_t k = factors_.size(); k-- > 0;) {
      out[k] = index % factors_[k].dim;
      index /= factors_[k].dim;
    }
    return out;
  }

  std::size_t index_of(const std::vector<std::size_t>& levels) const {
    if (levels.size() != factors_.size()) throw Error(ErrorKind::Dimension, "index_of: wrong number of levels");
    std::size_t idx = 0;
    for (std::size_t k = 0; k < factors_.size(); ++k) {
      if (levels[k] >= factors_[k].dim) throw Error(ErrorKind::Dimension, "index_of: level out of range");
      idx = idx * factors_[k].dim + levels[k];
    }
    return idx;
  }

  BasisLayout with_factor(Factor extra) const {
    auto fs = factors_;
    fs.push_back(std::move(extra));
    return BasisLayout(std::move(fs));
  }

  /// Weight vector w with <n_label> = sum_x w_x rho_xx.
  RealVector occupation_weights(std::string_view label) const {
    const auto m = mode_index(label);
    RealVector w(static_cast<Eigen::Index>(total_dim_));
    for (std::size_t x = 0; x < total_dim_; ++x) w(static_cast<Eigen::Index>(x)) = occupation(x)[m];
    return w;
  }

  /// Indicator of basis states where every listed mode is unoccupied.
  RealVector vacuum_weights(const std::vector<std::string>& labels) const {
    std::vector<std::size_t> idx;
    for (const auto& l : labels) idx.push_back(mode_index(l));
    RealVector w(static_cast<Eigen::Index>(total_dim_));
    for (std::size_t x = 0; x < total_dim_; ++x) {
      const auto occ = occupation(x);
      w(static_cast<Eigen::Index>(x)) =
          std::all_of(idx.begin(), idx.end(), [&](std::size_t m) { return occ[m] == 0; }) ? 1.0 : 0.0;
    }
    return w;
  }

  std::string describe() const {
    std::ostringstream os;
    for (std::size_t k = 0; k < factors_.size(); ++k) {
      if (k) os << " x ";
      os << factors_[k].label << "(" << factors_[k].dim << ")";
    }
    return os.str();
  }

  friend bool operator==(const BasisLayout& a, const BasisLayout& b) {
    if (a.factors_.size() != b.factors_.size()) return false;
    for (std::size_t k = 0; k < a.factors_.size(); ++k) {
      const auto& fa = a.factors_[k];
      const auto& fb = b.factors_[k];
      if (fa.label != fb.label || fa.dim != fb.dim || fa.modes != fb.modes || fa.occupations != fb.occupations)
        return false;
    }
    return true;
  }

 private:
  struct Tables {
    std::vector<std::string> mode_labels;
    std::vector<std::size_t> mode_dims;
    std::vector<int> occupations;  // total_dim x modes, row major
  };

  void build_tables() {
    auto t = std::make_shared<Tables>();
    std::vector<std::size_t> offsets;
    for (const auto& f : factors_) {
      offsets.push_back(t->mode_labels.size());
      t->mode_labels.insert(t->mode_labels.end(), f.modes.begin(), f.modes.end());
      t->mode_dims.insert(t->mode_dims.end(), f.mode_dims.begin(), f.mode_dims.end());
    }
    const auto width = t->mode_labels.size();
    t->occupations.assign(total_dim_ * width, 0);
    for (std::size_t x = 0; x < total_dim_; ++x) {
      const auto lv = digits(x);
      for (std::size_t k = 0; k < factors_.size(); ++k) {
        const auto& occ = factors_[k].occupations[lv[k]];
        std::copy(occ.begin(), occ.end(), t->occupations.begin() + static_cast<std::ptrdiff_t>(x * width + offsets[k]));
      }
    }
    tables_ = std::move(t);
  }

  std::vector<Factor> factors_;
  std::size_t total_dim_ = 0;
  std::shared_ptr<const Tables> tables_;
};

/// Product layout of elementary factors.
inline BasisLayout product_layout(const std::vector<std::pair<std::string, std::size_t>>& factors) {
  std::vector<Factor> fs;
  for (const auto& [label, dim] : factors) fs.push_back(Factor::elementary(label, dim));
  return BasisLayout(std::move(fs));
}

/// Dense density matrix over a layout. Validity (Hermitian, unit trace, PSD) is
/// checked by assert_valid_state, not on construction: integrator substages
/// are not states.
class QuantumState {
 public:
  QuantumState(BasisLayout layout, Matrix rho) : layout_(std::move(layout)), rho_(std::move(rho)) {
    const auto d = static_cast<Eigen::Index>(layout_.total_dim());
    if (rho_.rows() != d || rho_.cols() != d)
      throw Error(ErrorKind::Dimension, "state matrix is " + std::to_string(rho_.rows()) + "x" +
                                            std::to_string(rho_.cols()) + " but layout " + layout_.describe() +
                                            " has dimension " + std::to_string(d));
  }

  static QuantumState pure(BasisLayout layout, const Vector& psi) {
    Vector v = psi / psi.norm();
    return QuantumState(std::move(layout), v * v.adjoint());
  }

  static QuantumState basis_state(BasisLayout layout, std::size_t index) {
    const auto d = static_cast<Eigen::Index>(layout.total_dim());
    if (static_cast<Eigen::Index>(index) >= d) throw Error(ErrorKind::Dimension, "basis index out of range");
    Matrix rho = Matrix::Zero(d, d);
    rho(static_cast<Eigen::Index>(index), static_cast<Eigen::Index>(index)) = 1.0;
    return QuantumState(std::move(layout), std::move(rho));
  }

  static QuantumState maximally_mixed(BasisLayout layout) {
    const auto d = static_cast<Eigen::Index>(layout.total_dim());
    return QuantumState(std::move(layout), Matrix::Identity(d, d) / static_cast<double>(d));
  }

  const BasisLayout& layout() const { return layout_; }
  const Matrix& matrix() const { return rho_; }
  Matrix& matrix() { return rho_; }
  std::size_t dim() const { return layout_.total_dim(); }

  double occupation(std::string_view mode) const {
    return layout_.occupation_weights(mode).dot(rho_.diagonal().real());
  }

 private:
  BasisLayout layout_;
  Matrix rho_;
};

/// Two disjoint groups of elementary mode labels. Modes named on neither side
/// are traced out before entanglement is assessed.
struct Bipartition {
  std::set<std::string> side_a;
  std::set<std::string> side_b;

  Bipartition() = default;
  Bipartition(std::set<std::string> a, std::set<std::string> b) : side_a(std::move(a)), side_b(std::move(b)) {
    for (const auto& l : side_a)
      if (side_b.count(l)) throw Error(ErrorKind::Argument, "bipartition sides share label '" + l + "'");
    if (side_a.empty() || side_b.empty()) throw Error(ErrorKind::Argument, "bipartition sides must be non-empty");
  }

  std::string name() const {
    auto join = [](const std::set<std::string>& s) {
      std::string out;
      for (const auto& l : s) out += (out.empty() ? "" : ",") + l;
      return out;
    };
    return join(side_a) + "|" + join(side_b);
  }
};

/// Operator on an explicitly enumerated subset of a product basis over named
/// modes. Rows and columns share `basis`. Outputs of reduce and
/// partial_transpose are sorted lexicographically with the first label
/// slowest, so for a full product basis they follow the canonical layout
/// ordering.
struct LabeledOperator {
  std::vector<std::string> labels;
  std::vector<std::size_t> dims;
  std::vector<std::vector<int>> basis;
  Matrix matrix;

  std::size_t dim() const { return basis.size(); }

  std::size_t label_index(std::string_view label) const {
    auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) throw Error(ErrorKind::Layout, "unknown mode label '" + std::string(label) + "'");
    return static_cast<std::size_t>(it - labels.begin());
  }
};

inline LabeledOperator expand(const QuantumState& state) {
  const auto& layout = state.layout();
  LabeledOperator op;
  op.labels = layout.mode_labels();
  op.dims = layout.mode_dims();
  op.basis.reserve(layout.total_dim());
  for (std::size_t x = 0; x < layout.total_dim(); ++x) {
    auto occ = layout.occupation(x);
    op.basis.emplace_back(occ.begin(), occ.end());
  }
  op.matrix = state.matrix();
  return op;
}

/// Index bookkeeping for "trace out everything outside `keep`, then transpose
/// the modes in `side_a`". Building it is the expensive part; applying it to
/// a matrix is a scatter over the support. Observers keep one per split.
class TransposePlan {
 public:
  TransposePlan(const std::vector<std::string>& labels, const std::vector<std::size_t>& dims,
                const std::vector<std::vector<int>>& basis, const std::set<std::string>& keep,
                const std::set<std::string>& side_a)
      : source_dim_(basis.size()) {
    if (keep.empty()) throw Error(ErrorKind::Argument, "empty keep set");
    auto find = [&](const std::string& l) {
      auto it = std::find(labels.begin(), labels.end(), l);
      if (it == labels.end()) throw Error(ErrorKind::Layout, "unknown mode label '" + l + "'");
      return static_cast<std::size_t>(it - labels.begin());
    };
    for (const auto& k : keep) (void)find(k);
    for (const auto& a : side_a)
      if (!keep.count(a)) throw Error(ErrorKind::Argument, "transposed label '" + a + "' is not kept");

    std::vector<std::size_t> kept_pos, traced_pos;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (keep.count(labels[i])) {
        kept_pos.push_back(i);
        labels_.push_back(labels[i]);
        dims_.push_back(dims[i]);
      } else {
        traced_pos.push_back(i);
      }
    }
    auto project = [](const std::vector<int>& occ, const std::vector<std::size_t>& pos) {
      std::vector<int> out;
      out.reserve(pos.size());
      for (auto p : pos) out.push_back(occ[p]);
      return out;
    };

    // reduction
    std::map<std::vector<int>, std::size_t> kept_index;
    std::vector<std::vector<int>> kept_of(basis.size());
    std::map<std::vector<int>, std::vector<std::size_t>> groups;
    for (std::size_t x = 0; x < basis.size(); ++x) {
      kept_of[x] = project(basis[x], kept_pos);
      kept_index.emplace(kept_of[x], 0);
      groups[project(basis[x], traced_pos)].push_back(x);
    }
    std::size_t n = 0;
    for (auto& [occ, idx] : kept_index) {
      idx = n++;
      reduced_basis_.push_back(occ);
    }
    reduced_row_.resize(basis.size());
    for (std::size_t x = 0; x < basis.size(); ++x) reduced_row_[x] = kept_index.at(kept_of[x]);
    for (auto& [traced, members] : groups) groups_.push_back(std::move(members));

    // transposition over the closure of the reduced support
    std::vector<bool> in_a(labels_.size(), false);
    for (std::size_t i = 0; i < labels_.size(); ++i) in_a[i] = side_a.count(labels_[i]) > 0;
    std::map<std::vector<int>, std::size_t> a_ids, b_ids;
    std::vector<std::vector<int>> a_of(n), b_of(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t m = 0; m < labels_.size(); ++m) (in_a[m] ? a_of[i] : b_of[i]).push_back(reduced_basis_[i][m]);
      a_ids.emplace(a_of[i], 0);
      b_ids.emplace(b_of[i], 0);
    }
    std::vector<std::vector<int>> a_list, b_list;
    for (auto& [occ, id] : a_ids) { id = a_list.size(); a_list.push_back(occ); }
    for (auto& [occ, id] : b_ids) { id = b_list.size(); b_list.push_back(occ); }
    a_id_.resize(n);
    b_id_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      a_id_[i] = a_ids.at(a_of[i]);
      b_id_[i] = b_ids.at(b_of[i]);
    }
    std::map<std::vector<int>, std::pair<std::size_t, std::size_t>> closure;
    for (std::size_t ia = 0; ia < a_list.size(); ++ia)
      for (std::size_t ib = 0; ib < b_list.size(); ++ib) {
        std::vector<int> occ(labels_.size());
        std::size_t pa = 0, pb = 0;
        for (std::size_t m = 0; m < occ.size(); ++m) occ[m] = in_a[m] ? a_list[ia][pa++] : b_list[ib][pb++];
        closure.emplace(std::move(occ), std::make_pair(ia, ib));
      }
    nb_ = b_list.size();
    closure_pos_.assign(a_list.size() * nb_, 0);
    std::size_t c = 0;
    for (auto& [occ, ab] : closure) {
      closure_pos_[ab.first * nb_ + ab.second] = c++;
      closure_basis_.push_back(occ);
    }
  }

  std::size_t source_dim() const { return source_dim_; }
  std::size_t reduced_dim() const { return reduced_basis_.size(); }
  std::size_t closure_dim() const { return closure_basis_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }

  Matrix reduce(const Matrix& m) const {
    check(m);
    const auto n = static_cast<Eigen::Index>(reduced_basis_.size());
    Matrix out = Matrix::Zero(n, n);
    for (const auto& g : groups_)
      for (auto y : g)
        for (auto x : g)
          out(static_cast<Eigen::Index>(reduced_row_[x]), static_cast<Eigen::Index>(reduced_row_[y])) +=
              m(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
    return out;
  }

  /// <a b| rho^{T_A} |a' b'> = <a' b| rho |a b'>, applied to a reduced matrix.
  Matrix transpose_reduced(const Matrix& red) const {
    const auto n = reduced_basis_.size();
    const auto c = static_cast<Eigen::Index>(closure_basis_.size());
    Matrix out = Matrix::Zero(c, c);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i) {
        const auto v = red(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (v == Complex{}) continue;
        const auto r = closure_pos_[a_id_[j] * nb_ + b_id_[i]];
        const auto col = closure_pos_[a_id_[i] * nb_ + b_id_[j]];
        out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col)) += v;
      }
    return out;
  }

  Matrix apply(const Matrix& m) const { return transpose_reduced(reduce(m)); }

  LabeledOperator reduced_operator(const Matrix& m) const { return {labels_, dims_, reduced_basis_, reduce(m)}; }
  LabeledOperator transposed_operator(const Matrix& m) const { return {labels_, dims_, closure_basis_, apply(m)}; }

 private:
  void check(const Matrix& m) const {
    if (static_cast<std::size_t>(m.rows()) != source_dim_ || static_cast<std::size_t>(m.cols()) != source_dim_)
      throw Error(ErrorKind::Dimension, "matrix does not match the planned basis");
  }

  std::size_t source_dim_;
  std::vector<std::string> labels_;
  std::vector<std::size_t> dims_;
  std::vector<std::vector<int>> reduced_basis_;
  std::vector<std::size_t> reduced_row_;
  std::vector<std::vector<std::size_t>> groups_;
  std::vector<std::size_t> a_id_, b_id_;
  std::size_t nb_ = 0;
  std::vector<std::size_t> closure_pos_;
  std::vector<std::vector<int>> closure_basis_;
};

/// Partial trace over every mode not in `keep`.
inline LabeledOperator reduce(const LabeledOperator& op, const std::set<std::string>& keep) {
  return TransposePlan(op.labels, op.dims, op.basis, keep, {}).reduced_operator(op.matrix);
}

/// Partial transpose over the modes in `side_a`. The result lives on the
/// product closure {A-parts} x {B-parts} of the input support, which holds
/// every nonzero entry of the transposed operator.
inline LabeledOperator partial_transpose(const LabeledOperator& op, const std::set<std::string>& side_a) {
  std::set<std::string> all(op.labels.begin(), op.labels.end());
  return TransposePlan(op.labels, op.dims, op.basis, all, side_a).transposed_operator(op.matrix);
}

inline TransposePlan make_transpose_plan(const BasisLayout& layout, const std::set<std::string>& keep,
                                         const std::set<std::string>& side_a) {
  std::vector<std::vector<int>> basis;
  basis.reserve(layout.total_dim());
  for (std::size_t x = 0; x < layout.total_dim(); ++x) {
    auto occ = layout.occupation(x);
    basis.emplace_back(occ.begin(), occ.end());
  }
  return TransposePlan(layout.mode_labels(), layout.mode_dims(), basis, keep, side_a);
}

inline void check_bipartition(const BasisLayout& layout, const Bipartition& part) {
  for (const auto* side : {&part.side_a, &part.side_b})
    for (const auto& l : *side)
      if (!layout.has_mode(l))
        throw Error(ErrorKind::Layout, "bipartition label '" + l + "' not in layout " + layout.describe());
}

/// rho^{Gamma_A} on the support closure of the modes named by `part`.
inline LabeledOperator partial_transpose(const QuantumState& rho, const Bipartition& part) {
  check_bipartition(rho.layout(), part);
  std::set<std::string> keep = part.side_a;
  keep.insert(part.side_b.begin(), part.side_b.end());
  return make_transpose_plan(rho.layout(), keep, part.side_a).transposed_operator(rho.matrix());
}

/// Partial trace onto the listed factors (factor labels, not mode labels).
inline QuantumState partial_trace(const QuantumState& rho, const std::set<std::string>& keep) {
  if (keep.empty()) throw Error(ErrorKind::Argument, "partial_trace: keep set is empty");
  const auto& layout = rho.layout();
  std::vector<bool> kept(layout.factor_count(), false);
  for (const auto& k : keep) kept[layout.factor_index(k)] = true;
  if (std::all_of(kept.begin(), kept.end(), [](bool b) { return b; })) return rho;

  std::vector<Factor> kept_factors;
  for (std::size_t k = 0; k < layout.factor_count(); ++k)
    if (kept[k]) kept_factors.push_back(layout.factors()[k]);
  BasisLayout reduced(std::move(kept_factors));

  const auto n = layout.total_dim();
  std::vector<std::size_t> kept_idx(n);
  std::vector<std::size_t> traced_idx(n);
  std::size_t traced_dim = 1;
  for (std::size_t k = 0; k < layout.factor_count(); ++k)
    if (!kept[k]) traced_dim *= layout.factors()[k].dim;
  for (std::size_t x = 0; x < n; ++x) {
    const auto lv = layout.digits(x);
    std::size_t ki = 0, ti = 0;
    for (std::size_t k = 0; k < lv.size(); ++k) {
      if (kept[k]) ki = ki * layout.factors()[k].dim + lv[k];
      else ti = ti * layout.factors()[k].dim + lv[k];
    }
    kept_idx[x] = ki;
    traced_idx[x] = ti;
  }
  std::vector<std::vector<std::size_t>> groups(traced_dim);
  for (std::size_t x = 0; x < n; ++x) groups[traced_idx[x]].push_back(x);
  const auto d = static_cast<Eigen::Index>(reduced.total_dim());
  Matrix out = Matrix::Zero(d, d);
  for (const auto& g : groups)
    for (auto x : g)
      for (auto y : g)
        out(static_cast<Eigen::Index>(kept_idx[x]), static_cast<Eigen::Index>(kept_idx[y])) +=
            rho.matrix()(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
  return QuantumState(std::move(reduced), std::move(out));
}

/// Kronecker product, left factor slowest.
inline Matrix tensor_product(const Matrix& a, const Matrix& b) {
  if (a.rows() != a.cols() || b.rows() != b.cols())
    throw Error(ErrorKind::Dimension, "tensor_product expects square operators");
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
inline double trace_norm(const Matrix& m, double hermiticity_tol = 1e-8) {
  if (m.rows() != m.cols()) throw Error(ErrorKind::Shape, "trace_norm expects a square matrix");
  const double dev = hermiticity_deviation(m);
  if (dev > hermiticity_tol)
    throw Error(ErrorKind::Shape, "trace_norm input is not Hermitian (deviation " + std::to_string(dev) + ")");
  return hermitian_eigenvalues(m).cwiseAbs().sum();
}

struct ValidityTolerances {
  double hermiticity = 1e-10;
  double trace = 1e-9;
  double positivity = 1e-9;

  static ValidityTolerances uniform(double tol) { return {tol, tol, tol}; }
  ValidityTolerances scaled(double factor) const {
    return {hermiticity * factor, trace * factor, positivity * factor};
  }
};

struct ValidityReport {
  double hermiticity_deviation = 0.0;
  double trace_deviation = 0.0;
  double min_eigenvalue = 0.0;
  bool hermitian_ok = true;
  bool trace_ok = true;
  bool positive_ok = true;

  bool passed() const { return hermitian_ok && trace_ok && positive_ok; }

  std::string summary() const {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << "hermiticity " << hermiticity_deviation << (hermitian_ok ? "" : " (FAIL)") << ", trace "
       << trace_deviation << (trace_ok ? "" : " (FAIL)") << ", min eigenvalue " << min_eigenvalue
       << (positive_ok ? "" : " (FAIL)");
    return os.str();
  }
};

inline ValidityReport assert_valid_state(const Matrix& rho, const ValidityTolerances& tol) {
  ValidityReport r;
  r.hermiticity_deviation = hermiticity_deviation(rho);
  r.trace_deviation = std::abs(rho.trace() - Complex{1.0, 0.0});
  const Matrix herm = 0.5 * (rho + rho.adjoint());
  r.min_eigenvalue = herm.rows() ? hermitian_eigenvalues(herm).minCoeff() : 0.0;
  r.hermitian_ok = r.hermiticity_deviation <= tol.hermiticity;
  r.trace_ok = r.trace_deviation <= tol.trace;
  r.positive_ok = r.min_eigenvalue >= -tol.positivity;
  return r;
}

inline ValidityReport assert_valid_state(const QuantumState& rho, const ValidityTolerances& tol = {}) {
  return assert_valid_state(rho.matrix(), tol);
}

inline ValidityReport assert_valid_state(const QuantumState& rho, double tol) {
  return assert_valid_state(rho.matrix(), ValidityTolerances::uniform(tol));
}

}  // namespace eet
