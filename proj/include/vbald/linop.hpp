#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <concepts>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "vbald/errors.hpp"

namespace vbald {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;
using Triplet = Eigen::Triplet<double>;

/// Anything that can apply a symmetric n x n matrix to a vector.
template <class Op>
concept SymmetricOperator = requires(const Op& op, const Vector& x, Vector& y) {
  { op.dim() } -> std::convertible_to<Index>;
  op.apply(x, y);
};

/// Immutable symmetric matrix behind a matrix-vector product.
///
/// Dense matrices are stored in full. Sparse matrices keep only the lower
/// triangle (the Matrix Market convention for symmetric files) and the upper
/// half is supplied implicitly by the product.
class LinearOperator {
 public:
  static LinearOperator from_dense(DenseMatrix k) {
    if (k.rows() != k.cols()) {
      throw DimensionError("dense operator must be square, got " + std::to_string(k.rows()) +
                           "x" + std::to_string(k.cols()));
    }
    if (k.rows() == 0) throw DimensionError("operator dimension must be positive");
    const bool symmetric = (k - k.transpose()).cwiseAbs().maxCoeff() == 0.0;
    return LinearOperator(std::move(k), symmetric);
  }

  /// Builds a sparse operator from lower-triangle entries (i >= j). Upper
  /// entries are mirrored into the lower triangle; duplicates are summed.
  static LinearOperator from_lower_triplets(Index n, std::vector<Triplet> entries) {
    if (n <= 0) throw DimensionError("operator dimension must be positive");
    for (auto& t : entries) {
      if (t.row() < 0 || t.col() < 0 || t.row() >= n || t.col() >= n) {
        throw DimensionError("triplet index out of range");
      }
      if (t.row() < t.col()) t = Triplet(t.col(), t.row(), t.value());
    }
    SparseMatrix lower(n, n);
    lower.setFromTriplets(entries.begin(), entries.end());
    lower.makeCompressed();
    return LinearOperator(std::move(lower), true);
  }

  static LinearOperator diagonal(const Vector& d) {
    std::vector<Triplet> entries;
    entries.reserve(static_cast<std::size_t>(d.size()));
    for (Index i = 0; i < d.size(); ++i) entries.emplace_back(i, i, d[i]);
    return from_lower_triplets(d.size(), std::move(entries));
  }

  static LinearOperator identity(Index n) { return diagonal(Vector::Ones(n)); }

  Index dim() const {
    return std::visit([](const auto& s) { return static_cast<Index>(s.rows()); }, storage_);
  }

  bool is_sparse() const { return std::holds_alternative<SparseMatrix>(storage_); }
  bool is_symmetric() const { return symmetric_; }

  /// Stored entries: n^2 for dense, lower-triangle nonzeros for sparse.
  Index stored_entries() const {
    if (const auto* s = sparse_lower()) return s->nonZeros();
    return dim() * dim();
  }

  const DenseMatrix* dense() const { return std::get_if<DenseMatrix>(&storage_); }
  const SparseMatrix* sparse_lower() const { return std::get_if<SparseMatrix>(&storage_); }

  /// y = K x. Sizes are the caller's responsibility; see matvec for the
  /// checked form.
  void apply(const Vector& x, Vector& y) const {
    if (const auto* d = dense()) {
      y.noalias() = (*d) * x;
    } else {
      y.noalias() = sparse_lower()->selfadjointView<Eigen::Lower>() * x;
    }
  }

  Vector matvec(const Vector& x) const {
    if (x.size() != dim()) {
      throw DimensionError("matvec: vector of length " + std::to_string(x.size()) +
                           " for operator of dimension " + std::to_string(dim()));
    }
    Vector y(dim());
    apply(x, y);
    return y;
  }

  DenseMatrix to_dense() const {
    if (const auto* d = dense()) return *d;
    const SparseMatrix& s = *sparse_lower();
    DenseMatrix full = DenseMatrix::Zero(s.rows(), s.cols());
    for (Index c = 0; c < s.outerSize(); ++c) {
      for (SparseMatrix::InnerIterator it(s, c); it; ++it) {
        full(it.row(), it.col()) = it.value();
        full(it.col(), it.row()) = it.value();
      }
    }
    return full;
  }

 private:
  LinearOperator(DenseMatrix k, bool symmetric) : storage_(std::move(k)), symmetric_(symmetric) {}
  LinearOperator(SparseMatrix s, bool symmetric) : storage_(std::move(s)), symmetric_(symmetric) {}

  std::variant<DenseMatrix, SparseMatrix> storage_;
  bool symmetric_;
};

/// Gershgorin upper bound on the spectrum: the largest absolute row sum.
inline double gershgorin_upper_bound(const LinearOperator& op) {
  if (!op.is_symmetric()) throw NumericalError("gershgorin_upper_bound: operator is not symmetric");
  Vector row_sums = Vector::Zero(op.dim());
  if (const auto* d = op.dense()) {
    if (!d->allFinite()) throw NumericalError("gershgorin_upper_bound: non-finite entry");
    row_sums = d->cwiseAbs().rowwise().sum();
  } else {
    const SparseMatrix& s = *op.sparse_lower();
    for (Index c = 0; c < s.outerSize(); ++c) {
      for (SparseMatrix::InnerIterator it(s, c); it; ++it) {
        const double v = it.value();
        if (!std::isfinite(v)) throw NumericalError("gershgorin_upper_bound: non-finite entry");
        row_sums[it.row()] += std::abs(v);
        if (it.row() != it.col()) row_sums[it.col()] += std::abs(v);
      }
    }
  }
  return row_sums.maxCoeff();
}

/// B = K / lambda_u with lambda_u >= lambda_max(K), so spec(B) lies in (0, 1]
/// for positive definite K. Holds a reference; the inner operator must
/// outlive it.
template <SymmetricOperator Op = LinearOperator>
class NormalizedOperator {
 public:
  NormalizedOperator(const Op& inner, double lambda_u) : inner_(&inner), lambda_u_(lambda_u) {
    if (!(lambda_u > 0.0) || !std::isfinite(lambda_u)) {
      throw NumericalError("spectral upper bound must be positive and finite");
    }
  }

  Index dim() const { return inner_->dim(); }
  double lambda_u() const { return lambda_u_; }
  const Op& inner() const { return *inner_; }

  void apply(const Vector& x, Vector& y) const {
    inner_->apply(x, y);
    y /= lambda_u_;
  }

 private:
  const Op* inner_;
  double lambda_u_;
};

inline NormalizedOperator<LinearOperator> normalize(const LinearOperator& op) {
  return NormalizedOperator<LinearOperator>(op, gershgorin_upper_bound(op));
}

}  // namespace vbald
