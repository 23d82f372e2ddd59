#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <complex>
#include <vector>

#include "eet/errors.hpp"

namespace eet {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<Complex>;

inline constexpr Complex kI{0.0, 1.0};

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
struct HermitianEigen {
  RealVector values;
  Matrix vectors;
};

inline HermitianEigen hermitian_eigen(const Matrix& m) {
  if (m.rows() != m.cols()) throw Error(ErrorKind::Dimension, "hermitian_eigen needs a square matrix");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
  if (solver.info() != Eigen::Success) throw Error(ErrorKind::Shape, "Hermitian eigensolver did not converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

/// Index groups of the connected components of the nonzero pattern of m,
/// i.e. the diagonal blocks of m up to a permutation.
inline std::vector<std::vector<Eigen::Index>> nonzero_blocks(const Matrix& m) {
  const auto n = static_cast<std::size_t>(m.rows());
  std::vector<std::size_t> parent(n);
  for (std::size_t i = 0; i < n; ++i) parent[i] = i;
  auto root = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < j; ++i) {
      const auto r = static_cast<Eigen::Index>(i), c = static_cast<Eigen::Index>(j);
      if (m(r, c) == Complex{} && m(c, r) == Complex{}) continue;
      const auto a = root(i), b = root(j);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  std::vector<std::vector<Eigen::Index>> blocks;
  std::vector<std::size_t> slot(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& s = slot[root(i)];
    if (s == n) {
      s = blocks.size();
      blocks.emplace_back();
    }
    blocks[s].push_back(static_cast<Eigen::Index>(i));
  }
  return blocks;
}

/// Eigenvalues of a Hermitian matrix, ascending. Block-diagonal structure
/// (after any permutation) is solved block by block.
inline RealVector hermitian_eigenvalues(const Matrix& m) {
  if (m.rows() != m.cols()) throw Error(ErrorKind::Dimension, "hermitian_eigenvalues needs a square matrix");
  auto solve = [](const Matrix& a) -> RealVector {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(a, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw Error(ErrorKind::Shape, "Hermitian eigensolver did not converge");
    return solver.eigenvalues();
  };
  if (m.rows() < 32) return solve(m);
  const auto blocks = nonzero_blocks(m);
  if (blocks.size() == 1) return solve(m);
  RealVector out(m.rows());
  Eigen::Index k = 0;
  for (const auto& b : blocks) {
    out.segment(k, static_cast<Eigen::Index>(b.size())) = solve(m(b, b));
    k += static_cast<Eigen::Index>(b.size());
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Largest element-wise |m - m^dagger|.
inline double hermiticity_deviation(const Matrix& m) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i <= j; ++i) worst = std::max(worst, std::abs(m(i, j) - std::conj(m(j, i))));
  return worst;
}

inline SparseMatrix sparse_identity(Eigen::Index dim) {
  SparseMatrix id(dim, dim);
  id.setIdentity();
  return id;
}

inline SparseMatrix to_sparse(const Matrix& dense, double drop = 0.0) {
  std::vector<Triplet> entries;
  for (Eigen::Index i = 0; i < dense.rows(); ++i)
    for (Eigen::Index j = 0; j < dense.cols(); ++j)
      if (std::abs(dense(i, j)) > drop) entries.emplace_back(i, j, dense(i, j));
  SparseMatrix out(dense.rows(), dense.cols());
  out.setFromTriplets(entries.begin(), entries.end());
  return out;
}

/// Kronecker product of sparse operators, left factor slowest.
inline SparseMatrix sparse_kron(const SparseMatrix& a, const SparseMatrix& b) {
  std::vector<Triplet> entries;
  entries.reserve(static_cast<std::size_t>(a.nonZeros() * b.nonZeros()));
  for (Eigen::Index ra = 0; ra < a.outerSize(); ++ra)
    for (SparseMatrix::InnerIterator ia(a, ra); ia; ++ia)
      for (Eigen::Index rb = 0; rb < b.outerSize(); ++rb)
        for (SparseMatrix::InnerIterator ib(b, rb); ib; ++ib)
          entries.emplace_back(ia.row() * b.rows() + ib.row(), ia.col() * b.cols() + ib.col(),
                               ia.value() * ib.value());
  SparseMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  out.setFromTriplets(entries.begin(), entries.end());
  return out;
}

inline bool is_diagonal(const SparseMatrix& m) {
  for (Eigen::Index r = 0; r < m.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(m, r); it; ++it)
      if (it.row() != it.col() && it.value() != Complex{0.0, 0.0}) return false;
  return true;
}

}  // namespace eet
