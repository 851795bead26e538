#pragma once

// Dense and sparse kernels shared by the rest of the solver. Everything here
// works at desk scale: factorizations densify their input.

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sqlp::linalg {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class LinalgError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public LinalgError {
 public:
  using LinalgError::LinalgError;
};

/// Raised by chol() when a pivot falls at or below the floor.
class NotPositiveDefinite : public LinalgError {
 public:
  explicit NotPositiveDefinite(Index pivot);
  /// Zero-based position of the failing pivot.
  Index pivot() const { return pivot_; }

 private:
  Index pivot_;
};

/// Raised by lu() when a column has no nonzero candidate pivot.
class SingularMatrix : public LinalgError {
 public:
  explicit SingularMatrix(Index column);
  Index column() const { return column_; }

 private:
  Index column_;
};

class NoConvergence : public LinalgError {
 public:
  using LinalgError::LinalgError;
};

/// Kernel constants. SolverOptions carries a copy so callers can override.
struct LinalgSettings {
  double lu_pivot_threshold = 0.1;
  Index power_iteration_min_order = 200;
  int power_iteration_cap = 500;
  double power_iteration_tol = 1e-10;
};

/// Symmetric matrix in full row-major-equivalent storage. Construction
/// averages the input with its transpose so symmetry holds exactly.
class SymMat {
 public:
  SymMat() = default;
  explicit SymMat(Index order);
  explicit SymMat(const Matrix& a);

  static SymMat identity(Index order);
  static SymMat diagonal(const Vector& d);

  Index order() const { return m_.rows(); }
  const Matrix& matrix() const { return m_; }
  double operator()(Index i, Index j) const { return m_(i, j); }

 private:
  Matrix m_;
};

/// Compressed sparse column matrix.
class SparseMat {
 public:
  struct Triplet {
    Index row;
    Index col;
    double value;
  };

  SparseMat() = default;
  SparseMat(Index rows, Index cols);
  SparseMat(Index rows, Index cols, std::vector<Index> col_start,
            std::vector<Index> row_index, std::vector<double> values);

  /// Entries with |a_ij| <= drop are omitted.
  static SparseMat from_dense(const Matrix& a, double drop = 0.0);
  /// Duplicate (row, col) pairs are summed.
  static SparseMat from_triplets(Index rows, Index cols,
                                 std::vector<Triplet> triplets);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index nnz() const { return static_cast<Index>(values_.size()); }
  const std::vector<Index>& col_start() const { return col_start_; }
  const std::vector<Index>& row_index() const { return row_index_; }
  const std::vector<double>& values() const { return values_; }

  Matrix to_dense() const;
  Vector multiply(const Vector& v) const;

 private:
  void check_invariants() const;

  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<Index> col_start_{0};
  std::vector<Index> row_index_;
  std::vector<double> values_;
};

/// A = P L Lᵀ Pᵀ. An empty permutation means identity; otherwise perm[i] is
/// the original index placed at position i.
struct CholFactor {
  Matrix lower;
  std::vector<Index> perm;

  Index order() const { return lower.rows(); }
  /// Ratio of the largest to smallest diagonal entry of L.
  double diag_ratio() const;
};

/// P A = L U with unit-lower L and U packed into one matrix.
struct LuFactor {
  std::vector<Index> row_perm;
  Matrix packed;
  double diag_ratio = 1.0;

  Index order() const { return packed.rows(); }
  Matrix lower() const;
  Matrix upper() const;
};

/// Fails with NotPositiveDefinite when a pivot is <= pivot_floor.
CholFactor chol(const SymMat& a, double pivot_floor = 0.0,
                std::span<const Index> perm = {});
CholFactor chol(const SparseMat& a, double pivot_floor = 0.0);

Vector chol_solve(const CholFactor& f, const Vector& b);
Matrix chol_solve(const CholFactor& f, const Matrix& b);

/// Gaussian elimination with threshold partial pivoting: the diagonal
/// candidate is kept when it is within `threshold` of the column maximum.
LuFactor lu(const Matrix& a, double threshold = 0.1);
LuFactor lu(const SparseMat& a, double threshold = 0.1);

Vector lu_solve(const LuFactor& f, const Vector& b);

struct EigenDecomposition {
  Vector values;   // ascending
  Matrix vectors;  // columns orthonormal
};

EigenDecomposition sym_eig(const SymMat& a);
double max_eigval(const SymMat& a, const LinalgSettings& settings = {});

/// Reverse Cuthill-McKee ordering of a symmetric pattern. Returns perm with
/// perm[i] = original index placed at position i. Vertices without
/// off-diagonal neighbours go last in index order; if the ordering would
/// widen the band the identity is returned instead.
std::vector<Index> rcm(const SparseMat& pattern);

/// Maximum |i - j| over stored nonzeros.
Index bandwidth(const SparseMat& pattern);

/// B(i, j) = A(perm[i], perm[j]).
Matrix permute_symmetric(const Matrix& a, std::span<const Index> perm);

}  // namespace sqlp::linalg
