#include "sqlp/schur.hpp"

#include <algorithm>
#include <cmath>

namespace sqlp::schur {

std::string_view to_string(Path p) {
  return p == Path::CholSchur ? "chol" : "lu";
}

Matrix AugmentedSystem::dense() const {
  const Index n = m();
  const Index nu = n_free();
  const Index na = n_aux();
  Matrix a = Matrix::Zero(size(), size());
  a.topLeftCorner(n, n) = m_sparse;
  a.block(0, n, n, nu) = au;
  a.block(n, 0, nu, n) = au.transpose();
  a.block(0, n + nu, n, na) = u;
  a.block(n + nu, 0, na, n) = u.transpose();
  a.bottomRightCorner(na, na) = neg_dinv;
  return a;
}

Vector AugmentedSystem::apply(const Vector& v) const {
  if (v.size() != size()) throw linalg::DimensionError("AugmentedSystem::apply: size");
  const Index n = m();
  const Index nu = n_free();
  const Index na = n_aux();
  const auto v1 = v.head(n);
  const auto v2 = v.segment(n, nu);
  const auto v3 = v.tail(na);
  Vector out(size());
  out.head(n) = m_sparse * v1 + au * v2 + u * v3;
  out.segment(n, nu) = au.transpose() * v1;
  out.tail(na) = u.transpose() * v1 + neg_dinv * v3;
  return out;
}

Vector AugmentedSystem::precondition(const Vector& r) const {
  if (!factorized) throw std::logic_error("AugmentedSystem: not factorized");
  if (path == Path::FullLu) return linalg::lu_solve(lu_full, r);
  const Index n = m();
  const Index k = n_free() + n_aux();
  Vector out(size());
  const Vector uhat = n > 0 ? linalg::chol_solve(chol_m, Vector(r.head(n))) : Vector();
  if (k == 0) return uhat;
  Matrix aprime(n, k);
  aprime << au, u;
  const Vector vhat = linalg::lu_solve(lu_s, aprime.transpose() * uhat - r.tail(k));
  out.head(n) = uhat - minv_aprime * vhat;
  out.tail(k) = vhat;
  return out;
}

AugmentedSystem assemble(std::span<const directions::SchurIngredients> ingredients,
                         const Matrix& au, const PerturbationState& state) {
  Index m = au.rows();
  for (const auto& ing : ingredients) {
    if (ing.m_sparse.rows() > 0 || ing.u.rows() > 0) {
      m = std::max(m, ing.m_sparse.rows());
    }
  }
  AugmentedSystem sys;
  sys.m_sparse = Matrix::Zero(m, m);
  Matrix gram = Matrix::Zero(m, m);
  Index naux = 0;
  for (const auto& ing : ingredients) {
    if (ing.m_sparse.rows() != m || ing.m_sparse.cols() != m) {
      throw linalg::DimensionError("assemble: block Schur matrix has the wrong order");
    }
    sys.m_sparse += ing.m_sparse;
    if (ing.a_sparse_gram.size() > 0) gram += ing.a_sparse_gram;
    naux += ing.u.cols();
  }
  sys.au = au.rows() == m ? au : Matrix::Zero(m, 0);
  sys.u = Matrix::Zero(m, naux);
  sys.neg_dinv = Matrix::Zero(naux, naux);
  Index off = 0;
  for (const auto& ing : ingredients) {
    const Index k = ing.u.cols();
    if (k == 0) continue;
    sys.u.middleCols(off, k) = ing.u;
    sys.neg_dinv.block(off, off, k, k) = ing.neg_dinv;
    off += k;
  }

  if (m > 0 && !state.disable) {
    const Vector d = sys.m_sparse.diagonal();
    const double dmax = d.maxCoeff();
    const bool ill = d.minCoeff() < 1e-8 * dmax;
    if (state.force || state.previous_failed || ill) {
      const double scale = std::ldexp(1.0, -std::max(0, state.iteration));
      sys.rho = std::max(1e-15, state.rho0 * scale);
      sys.lambda = std::max(1e-15, state.lambda0 * scale);
      sys.m_sparse.diagonal() += sys.rho * d;
      sys.m_sparse += sys.lambda * gram;
      sys.perturbed = true;
    }
  }
  return sys;
}

namespace {

// Block elimination through an ill-conditioned M_sparse can be unstable even
// when the augmented matrix is not; probe it with one solve.
constexpr double kProbeTolerance = 1e-3;

bool elimination_is_accurate(AugmentedSystem& sys) {
  sys.path = Path::CholSchur;
  sys.factorized = true;
  Vector probe(sys.size());
  for (Index i = 0; i < probe.size(); ++i) probe(i) = 1.0 + 0.5 * std::sin(static_cast<double>(i + 1));
  const Vector r = probe - sys.apply(sys.precondition(probe));
  sys.factorized = false;
  return r.norm() <= kProbeTolerance * probe.norm();
}

bool try_schur_path(AugmentedSystem& sys, double lu_fallback_ratio, double lu_threshold) {
  const Index n = sys.m();
  if (n > 0) {
    const Vector d = sys.m_sparse.diagonal();
    const double dmax = d.maxCoeff();
    if (!(dmax > 0.0)) return false;
    try {
      sys.chol_m = linalg::chol(linalg::SymMat(sys.m_sparse), 1e-15 * dmax);
    } catch (const linalg::NotPositiveDefinite&) {
      return false;
    }
    const double r = sys.chol_m.diag_ratio();
    sys.condition_proxy = r * r;
    if (sys.condition_proxy > 1e14) {
      std::vector<Index> small;
      for (Index i = 0; i < n; ++i) {
        if (d(i) < 1e-8 * dmax) small.push_back(i);
      }
      if (!small.empty() && small.size() < 3) {
        Matrix boosted = sys.m_sparse;
        for (Index i : small) boosted(i, i) = 1.0;
        try {
          sys.chol_m = linalg::chol(linalg::SymMat(boosted), 1e-15 * dmax);
          sys.boosted = std::move(small);
        } catch (const linalg::NotPositiveDefinite&) {
          return false;
        }
      }
    }
  }
  const Index k = sys.n_free() + sys.n_aux();
  if (k == 0) return true;
  if (n == 0) return false;
  Matrix aprime(n, k);
  aprime << sys.au, sys.u;
  sys.minv_aprime = linalg::chol_solve(sys.chol_m, aprime);
  Matrix s = aprime.transpose() * sys.minv_aprime;
  s.bottomRightCorner(sys.n_aux(), sys.n_aux()) -= sys.neg_dinv;
  try {
    sys.lu_s = linalg::lu(s, lu_threshold);
  } catch (const linalg::SingularMatrix&) {
    return false;
  }
  if (!(sys.lu_s.diag_ratio <= lu_fallback_ratio)) return false;
  return !sys.boosted.empty() || elimination_is_accurate(sys);
}

thread_local std::uint64_t factorization_calls = 0;

}  // namespace

std::uint64_t factorization_count() { return factorization_calls; }

void factorize(AugmentedSystem& sys, double lu_fallback_ratio, double lu_threshold) {
  ++factorization_calls;
  sys.factorized = false;
  sys.boosted.clear();
  sys.condition_proxy = 1.0;
  if (try_schur_path(sys, lu_fallback_ratio, lu_threshold)) {
    sys.path = Path::CholSchur;
  } else {
    sys.path = Path::FullLu;
    sys.boosted.clear();
    sys.minv_aprime.resize(0, 0);
    sys.lu_full = linalg::lu(sys.dense(), lu_threshold);
  }
  sys.factorized = true;
}

namespace {

// One restarted cycle of right-preconditioned GMRES on A e = r.
Vector gmres_cycle(const AugmentedSystem& sys, const Vector& r, int max_steps, int& used) {
  const Index n = r.size();
  const double beta = r.norm();
  used = 0;
  if (beta == 0.0 || max_steps <= 0) return Vector::Zero(n);
  Matrix v = Matrix::Zero(n, max_steps + 1);
  Matrix h = Matrix::Zero(max_steps + 1, max_steps);
  Vector cs = Vector::Zero(max_steps);
  Vector sn = Vector::Zero(max_steps);
  Vector g = Vector::Zero(max_steps + 1);
  g(0) = beta;
  v.col(0) = r / beta;
  int j = 0;
  for (; j < max_steps; ++j) {
    Vector w = sys.apply(sys.precondition(v.col(j)));
    for (int i = 0; i <= j; ++i) {
      h(i, j) = w.dot(v.col(i));
      w -= h(i, j) * v.col(i);
    }
    h(j + 1, j) = w.norm();
    for (int i = 0; i < j; ++i) {
      const double t = cs(i) * h(i, j) + sn(i) * h(i + 1, j);
      h(i + 1, j) = -sn(i) * h(i, j) + cs(i) * h(i + 1, j);
      h(i, j) = t;
    }
    const double denom = std::hypot(h(j, j), h(j + 1, j));
    if (denom == 0.0) break;
    cs(j) = h(j, j) / denom;
    sn(j) = h(j + 1, j) / denom;
    const double hnext = h(j + 1, j);
    h(j, j) = denom;
    h(j + 1, j) = 0.0;
    g(j + 1) = -sn(j) * g(j);
    g(j) = cs(j) * g(j);
    if (hnext == 0.0) {
      ++j;
      break;
    }
    v.col(j + 1) = w / hnext;
    if (std::abs(g(j + 1)) <= 1e-16 * beta) {
      ++j;
      break;
    }
  }
  used = j;
  if (j == 0) return Vector::Zero(n);
  const Vector y = h.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(g.head(j));
  return sys.precondition(v.leftCols(j) * y);
}

}  // namespace

Solution solve(const AugmentedSystem& sys, const Vector& h, const Vector& rdual_free,
               const KrylovSettings& settings) {
  if (h.size() != sys.m() || rdual_free.size() != sys.n_free()) {
    throw linalg::DimensionError("schur::solve: right-hand side size");
  }
  Vector b = Vector::Zero(sys.size());
  b.head(sys.m()) = h;
  b.segment(sys.m(), sys.n_free()) = rdual_free;
  Solution out;
  Vector sol = Vector::Zero(sys.size());
  const double bnorm = b.norm();
  if (bnorm > 0.0) {
    sol = sys.precondition(b);
    int iters = 0;
    double rel = 0.0;
    while (true) {
      const Vector r = b - sys.apply(sol);
      rel = r.norm() / bnorm;
      if (!std::isfinite(rel)) throw NonConvergence("Krylov solve produced non-finite values", rel);
      if (rel <= settings.tol || iters >= settings.max_iters) break;
      int used = 0;
      const int steps = std::min(settings.restart, settings.max_iters - iters);
      sol += gmres_cycle(sys, r, steps, used);
      iters += std::max(used, 1);
    }
    out.iterations = iters;
    out.residual = rel;
    if (rel > settings.fail_tol) {
      throw NonConvergence("Krylov solve did not converge", rel);
    }
  }
  out.dy = sol.head(sys.m());
  out.dx_free = sol.segment(sys.m(), sys.n_free());
  out.aux = sol.tail(sys.n_aux());
  return out;
}

CorrectorRhs corrector_rhs(const ProblemData& p, const Vector& h_pred,
                           const BlockVec& einv_rc_pred, const directions::Scaling& scaling,
                           const BlockVec& x, const BlockVec& z, const BlockVec& dx,
                           const BlockVec& dz, std::span<const double> target_pred,
                           std::span<const double> target_corr) {
  CorrectorRhs out;
  out.h = h_pred;
  out.einv_rc = einv_rc_pred;
  for (std::size_t k = 0; k < p.specs.size(); ++k) {
    const auto& spec = p.specs[k];
    if (spec.kind == ConeKind::Free) continue;
    const Matrix so =
        directions::einv_second_order(spec, scaling.blocks[k], x[k], z[k], dx[k], dz[k]);
    Matrix delta = -so;
    const double shift = target_corr[k] - target_pred[k];
    if (shift != 0.0) delta += shift * cones::jordan_inv(z[k], spec);
    out.einv_rc.blocks[k] += delta;
    out.h -= apply_op_block(p, k, delta);
  }
  return out;
}

}  // namespace sqlp::schur
