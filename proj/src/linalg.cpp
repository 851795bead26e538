#include "sqlp/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

namespace sqlp::linalg {

NotPositiveDefinite::NotPositiveDefinite(Index pivot)
    : LinalgError("matrix is not positive definite (pivot " +
                  std::to_string(pivot + 1) + ")"),
      pivot_(pivot) {}

SingularMatrix::SingularMatrix(Index column)
    : LinalgError("matrix is singular (column " + std::to_string(column + 1) +
                  ")"),
      column_(column) {}

// ---------------------------------------------------------------------------
// SymMat

SymMat::SymMat(Index order) : m_(Matrix::Zero(order, order)) {}

SymMat::SymMat(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw DimensionError("SymMat requires a square matrix");
  }
  if (!a.allFinite()) {
    throw LinalgError("SymMat entries must be finite");
  }
  m_ = 0.5 * (a + a.transpose());
}

SymMat SymMat::identity(Index order) {
  return SymMat(Matrix::Identity(order, order));
}

SymMat SymMat::diagonal(const Vector& d) {
  return SymMat(Matrix(d.asDiagonal()));
}

// ---------------------------------------------------------------------------
// SparseMat

SparseMat::SparseMat(Index rows, Index cols)
    : rows_(rows), cols_(cols), col_start_(static_cast<std::size_t>(cols) + 1, 0) {}

SparseMat::SparseMat(Index rows, Index cols, std::vector<Index> col_start,
                     std::vector<Index> row_index, std::vector<double> values)
    : rows_(rows),
      cols_(cols),
      col_start_(std::move(col_start)),
      row_index_(std::move(row_index)),
      values_(std::move(values)) {
  check_invariants();
}

void SparseMat::check_invariants() const {
  if (col_start_.size() != static_cast<std::size_t>(cols_) + 1 ||
      col_start_.front() != 0 ||
      col_start_.back() != static_cast<Index>(row_index_.size()) ||
      row_index_.size() != values_.size()) {
    throw DimensionError("inconsistent compressed column layout");
  }
  for (Index j = 0; j < cols_; ++j) {
    if (col_start_[j + 1] < col_start_[j]) {
      throw DimensionError("column offsets must be nondecreasing");
    }
    for (Index k = col_start_[j]; k < col_start_[j + 1]; ++k) {
      const Index r = row_index_[k];
      if (r < 0 || r >= rows_) throw DimensionError("row index out of range");
      if (k > col_start_[j] && r <= row_index_[k - 1]) {
        throw DimensionError("row indices must increase within a column");
      }
    }
  }
}

SparseMat SparseMat::from_dense(const Matrix& a, double drop) {
  std::vector<Index> start{0};
  std::vector<Index> rows;
  std::vector<double> vals;
  for (Index j = 0; j < a.cols(); ++j) {
    for (Index i = 0; i < a.rows(); ++i) {
      if (std::abs(a(i, j)) > drop) {
        rows.push_back(i);
        vals.push_back(a(i, j));
      }
    }
    start.push_back(static_cast<Index>(rows.size()));
  }
  return SparseMat(a.rows(), a.cols(), std::move(start), std::move(rows),
                   std::move(vals));
}

SparseMat SparseMat::from_triplets(Index rows, Index cols,
                                   std::vector<Triplet> triplets) {
  std::sort(triplets.begin(), triplets.end(),
            [](const Triplet& a, const Triplet& b) {
              return a.col != b.col ? a.col < b.col : a.row < b.row;
            });
  std::vector<Index> start(static_cast<std::size_t>(cols) + 1, 0);
  std::vector<Index> ridx;
  std::vector<double> vals;
  const Triplet* prev = nullptr;
  for (const auto& t : triplets) {
    if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols) {
      throw DimensionError("triplet index out of range");
    }
    if (prev != nullptr && prev->row == t.row && prev->col == t.col) {
      vals.back() += t.value;
    } else {
      ridx.push_back(t.row);
      vals.push_back(t.value);
      ++start[t.col + 1];
    }
    prev = &t;
  }
  for (Index j = 1; j <= cols; ++j) start[j] += start[j - 1];
  return SparseMat(rows, cols, std::move(start), std::move(ridx),
                   std::move(vals));
}

Matrix SparseMat::to_dense() const {
  Matrix a = Matrix::Zero(rows_, cols_);
  for (Index j = 0; j < cols_; ++j) {
    for (Index k = col_start_[j]; k < col_start_[j + 1]; ++k) {
      a(row_index_[k], j) = values_[k];
    }
  }
  return a;
}

Vector SparseMat::multiply(const Vector& v) const {
  if (v.size() != cols_) throw DimensionError("sparse multiply: size mismatch");
  Vector out = Vector::Zero(rows_);
  for (Index j = 0; j < cols_; ++j) {
    for (Index k = col_start_[j]; k < col_start_[j + 1]; ++k) {
      out(row_index_[k]) += values_[k] * v(j);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cholesky

double CholFactor::diag_ratio() const {
  if (lower.rows() == 0) return 1.0;
  const Vector d = lower.diagonal().cwiseAbs();
  return d.maxCoeff() / d.minCoeff();
}

CholFactor chol(const SymMat& a, double pivot_floor, std::span<const Index> perm) {
  const Index n = a.order();
  Matrix work;
  CholFactor f;
  if (perm.empty()) {
    work = a.matrix();
  } else {
    if (static_cast<Index>(perm.size()) != n) {
      throw DimensionError("chol: permutation length mismatch");
    }
    work = permute_symmetric(a.matrix(), perm);
    f.perm.assign(perm.begin(), perm.end());
  }
  Matrix l = Matrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    double d = work(j, j);
    for (Index k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > pivot_floor)) throw NotPositiveDefinite(j);
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Index i = j + 1; i < n; ++i) {
      double s = work(i, j);
      for (Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  f.lower = std::move(l);
  return f;
}

CholFactor chol(const SparseMat& a, double pivot_floor) {
  if (a.rows() != a.cols()) throw DimensionError("chol: matrix not square");
  return chol(SymMat(a.to_dense()), pivot_floor);
}

namespace {

Matrix apply_perm_rows(const Matrix& b, const std::vector<Index>& perm) {
  Matrix out(b.rows(), b.cols());
  for (std::size_t i = 0; i < perm.size(); ++i) out.row(i) = b.row(perm[i]);
  return out;
}

Matrix undo_perm_rows(const Matrix& b, const std::vector<Index>& perm) {
  Matrix out(b.rows(), b.cols());
  for (std::size_t i = 0; i < perm.size(); ++i) out.row(perm[i]) = b.row(i);
  return out;
}

}  // namespace

Matrix chol_solve(const CholFactor& f, const Matrix& b) {
  if (b.rows() != f.order()) throw DimensionError("chol_solve: size mismatch");
  Matrix x = f.perm.empty() ? b : apply_perm_rows(b, f.perm);
  const auto l = f.lower.triangularView<Eigen::Lower>();
  l.solveInPlace(x);
  l.transpose().solveInPlace(x);
  return f.perm.empty() ? x : undo_perm_rows(x, f.perm);
}

Vector chol_solve(const CholFactor& f, const Vector& b) {
  return chol_solve(f, Matrix(b)).col(0);
}

// ---------------------------------------------------------------------------
// LU

Matrix LuFactor::lower() const {
  Matrix l = packed.triangularView<Eigen::StrictlyLower>();
  l.diagonal().setOnes();
  return l;
}

Matrix LuFactor::upper() const { return packed.triangularView<Eigen::Upper>(); }

LuFactor lu(const Matrix& a, double threshold) {
  if (a.rows() != a.cols()) throw DimensionError("lu: matrix not square");
  const Index n = a.rows();
  LuFactor f;
  f.packed = a;
  f.row_perm.resize(static_cast<std::size_t>(n));
  std::iota(f.row_perm.begin(), f.row_perm.end(), Index{0});
  Matrix& w = f.packed;
  for (Index k = 0; k < n; ++k) {
    Index arg = k;
    double amax = 0.0;
    for (Index i = k; i < n; ++i) {
      if (std::abs(w(i, k)) > amax) {
        amax = std::abs(w(i, k));
        arg = i;
      }
    }
    if (!(amax > 0.0) || !std::isfinite(amax)) throw SingularMatrix(k);
    const Index piv = std::abs(w(k, k)) >= threshold * amax ? k : arg;
    if (piv != k) {
      w.row(k).swap(w.row(piv));
      std::swap(f.row_perm[k], f.row_perm[piv]);
    }
    const double p = w(k, k);
    for (Index i = k + 1; i < n; ++i) {
      const double lik = w(i, k) / p;
      w(i, k) = lik;
      if (lik != 0.0) {
        w.row(i).tail(n - k - 1) -= lik * w.row(k).tail(n - k - 1);
      }
    }
  }
  if (n > 0) {
    const Vector d = w.diagonal().cwiseAbs();
    f.diag_ratio = d.maxCoeff() / d.minCoeff();
  }
  return f;
}

LuFactor lu(const SparseMat& a, double threshold) {
  return lu(a.to_dense(), threshold);
}

Vector lu_solve(const LuFactor& f, const Vector& b) {
  if (b.size() != f.order()) throw DimensionError("lu_solve: size mismatch");
  Vector x(b.size());
  for (std::size_t i = 0; i < f.row_perm.size(); ++i) x(i) = b(f.row_perm[i]);
  f.packed.triangularView<Eigen::UnitLower>().solveInPlace(x);
  f.packed.triangularView<Eigen::Upper>().solveInPlace(x);
  return x;
}

// ---------------------------------------------------------------------------
// Eigenvalues

EigenDecomposition sym_eig(const SymMat& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a.matrix());
  if (es.info() != Eigen::Success) {
    throw NoConvergence("symmetric eigensolver did not converge");
  }
  return {es.eigenvalues(), es.eigenvectors()};
}

namespace {

// Power iteration on A + sI with s bounding the spectrum from below, so the
// dominant eigenvalue is the algebraically largest one.
bool power_max_eig(const Matrix& a, const LinalgSettings& s, double& out) {
  const Index n = a.rows();
  const double shift = a.cwiseAbs().rowwise().sum().maxCoeff();
  Vector v = Vector::Ones(n) / std::sqrt(static_cast<double>(n));
  for (int it = 0; it < s.power_iteration_cap; ++it) {
    Vector w = a * v + shift * v;
    const double nw = w.norm();
    if (nw == 0.0) break;
    v = w / nw;
    const Vector av = a * v;
    const double theta = v.dot(av);
    if ((av - theta * v).norm() <= s.power_iteration_tol * std::max(1.0, std::abs(theta))) {
      out = theta;
      return true;
    }
  }
  return false;
}

}  // namespace

double max_eigval(const SymMat& a, const LinalgSettings& settings) {
  if (a.order() == 0) throw DimensionError("max_eigval: empty matrix");
  if (a.order() > settings.power_iteration_min_order) {
    double theta = 0.0;
    if (power_max_eig(a.matrix(), settings, theta)) return theta;
  }
  return sym_eig(a).values(a.order() - 1);
}

// ---------------------------------------------------------------------------
// Orderings

Index bandwidth(const SparseMat& pattern) {
  Index bw = 0;
  for (Index j = 0; j < pattern.cols(); ++j) {
    for (Index k = pattern.col_start()[j]; k < pattern.col_start()[j + 1]; ++k) {
      bw = std::max(bw, std::abs(pattern.row_index()[k] - j));
    }
  }
  return bw;
}

Matrix permute_symmetric(const Matrix& a, std::span<const Index> perm) {
  const Index n = static_cast<Index>(perm.size());
  Matrix b(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) b(i, j) = a(perm[i], perm[j]);
  }
  return b;
}

std::vector<Index> rcm(const SparseMat& pattern) {
  if (pattern.rows() != pattern.cols()) {
    throw DimensionError("rcm: pattern must be square");
  }
  const Index n = pattern.rows();
  std::vector<std::vector<Index>> adj(static_cast<std::size_t>(n));
  for (Index j = 0; j < n; ++j) {
    for (Index k = pattern.col_start()[j]; k < pattern.col_start()[j + 1]; ++k) {
      const Index i = pattern.row_index()[k];
      if (i != j) {
        adj[i].push_back(j);
        adj[j].push_back(i);
      }
    }
  }
  for (auto& nb : adj) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  auto degree = [&](Index v) { return static_cast<Index>(adj[v].size()); };

  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::vector<Index> order;
  order.reserve(static_cast<std::size_t>(n));
  for (;;) {
    Index start = -1;
    for (Index v = 0; v < n; ++v) {
      if (!seen[v] && degree(v) > 0 && (start < 0 || degree(v) < degree(start))) {
        start = v;
      }
    }
    if (start < 0) break;
    std::deque<Index> queue{start};
    seen[start] = 1;
    while (!queue.empty()) {
      const Index v = queue.front();
      queue.pop_front();
      order.push_back(v);
      std::vector<Index> next;
      for (Index u : adj[v]) {
        if (!seen[u]) {
          seen[u] = 1;
          next.push_back(u);
        }
      }
      std::stable_sort(next.begin(), next.end(),
                       [&](Index x, Index y) { return degree(x) < degree(y); });
      queue.insert(queue.end(), next.begin(), next.end());
    }
  }
  std::reverse(order.begin(), order.end());
  for (Index v = 0; v < n; ++v) {
    if (!seen[v]) order.push_back(v);
  }

  // Reject the ordering if it does not narrow the band.
  std::vector<Index> inverse(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) inverse[order[i]] = i;
  Index new_bw = 0;
  for (Index v = 0; v < n; ++v) {
    for (Index u : adj[v]) new_bw = std::max(new_bw, std::abs(inverse[u] - inverse[v]));
  }
  if (new_bw > bandwidth(pattern)) {
    std::iota(order.begin(), order.end(), Index{0});
  }
  return order;
}

}  // namespace sqlp::linalg
