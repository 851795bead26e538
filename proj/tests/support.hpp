#pragma once

// Random instance generators and independent dense oracles shared by the
// unit tests and the acceptance binary. Nothing here calls into the solver's
// direction or Schur code; the oracles rebuild everything from the scaling
// formulas and the Jordan product.

#include "sqlp/problem.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <vector>

namespace sqlp::test {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline Matrix gaussian(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> nd;
  Matrix a(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) a(i, j) = nd(rng);
  return a;
}

inline Matrix random_sym(Index n, Rng& rng) {
  const Matrix a = gaussian(n, n, rng);
  return 0.5 * (a + a.transpose());
}

/// Symmetric with roughly `density` of the upper triangle nonzero (diagonal
/// included in the draw).
inline Matrix random_sparse_sym(Index n, double density, Rng& rng) {
  Matrix a = Matrix::Zero(n, n);
  std::normal_distribution<double> nd;
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i <= j; ++i)
      if (uniform(rng) < density) a(i, j) = a(j, i) = nd(rng);
  return a;
}

inline Matrix random_spd(Index n, Rng& rng, double shift = 0.5) {
  const Matrix a = gaussian(n, n, rng);
  return a * a.transpose() / static_cast<double>(n) + shift * Matrix::Identity(n, n);
}

inline Vector random_soc_interior(Index n, Rng& rng) {
  Vector v(n);
  v.tail(n - 1) = gaussian(n - 1, 1, rng);
  v(0) = v.tail(n - 1).norm() + uniform(rng, 0.2, 1.5);
  return v;
}

inline Vector random_positive(Index n, Rng& rng) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = uniform(rng, 0.2, 2.0);
  return v;
}

/// A point strictly inside the cone (primal side). Free blocks get a
/// Gaussian vector.
inline Matrix random_interior(const BlockSpec& s, Rng& rng) {
  switch (s.kind) {
    case ConeKind::Sdp: return random_spd(s.dim, rng);
    case ConeKind::Soc: return random_soc_interior(s.dim, rng);
    case ConeKind::Lin: return random_positive(s.dim, rng);
    case ConeKind::Free: return gaussian(s.dim, 1, rng);
  }
  return {};
}

inline BlockVec random_primal(const std::vector<BlockSpec>& specs, Rng& rng) {
  BlockVec x;
  for (const auto& s : specs) x.blocks.push_back(random_interior(s, rng));
  return x;
}

/// Interior of the dual cone; zero on free blocks.
inline BlockVec random_dual(const std::vector<BlockSpec>& specs, Rng& rng) {
  BlockVec z;
  for (const auto& s : specs) {
    z.blocks.push_back(s.kind == ConeKind::Free ? Matrix(Matrix::Zero(s.dim, 1))
                                                : random_interior(s, rng));
  }
  return z;
}

inline Vector svec_oracle(const Matrix& a) {
  const Index n = a.rows();
  Vector v(n * (n + 1) / 2);
  Index k = 0;
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i <= j; ++i) v(k++) = i == j ? a(i, j) : std::sqrt(2.0) * a(i, j);
  return v;
}

inline Matrix smat_oracle(const Vector& v, Index n) {
  Matrix a(n, n);
  Index k = 0;
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i <= j; ++i) {
      a(i, j) = a(j, i) = i == j ? v(k) : v(k) / std::sqrt(2.0);
      ++k;
    }
  return a;
}

inline Vector vec_of(const Matrix& v, const BlockSpec& s) {
  return s.kind == ConeKind::Sdp ? svec_oracle(v) : Vector(v.col(0));
}

inline Matrix unvec_of(const Vector& v, const BlockSpec& s) {
  return s.kind == ConeKind::Sdp ? smat_oracle(v, s.dim) : Matrix(v);
}

inline Index vec_len(const BlockSpec& s) {
  return s.kind == ConeKind::Sdp ? s.dim * (s.dim + 1) / 2 : s.dim;
}

/// Coefficient column of a random constraint for block s, in vec layout.
inline Vector random_coefficient(const BlockSpec& s, Rng& rng, double sdp_density = 1.0) {
  if (s.kind == ConeKind::Sdp) {
    Matrix a = sdp_density < 1.0 ? random_sparse_sym(s.dim, sdp_density, rng)
                                 : random_sym(s.dim, rng);
    if (a.isZero()) a(0, 0) = 1.0;
    return svec_oracle(a);
  }
  return gaussian(s.dim, 1, rng);
}

struct PlantedInstance {
  ProblemData problem;
  BlockVec x;  // primal feasible, interior
  Vector y;
  BlockVec z;  // dual feasible, interior (zero on free blocks)
};

/// b = Σ Aᵖx*ᵖ and cᵖ = z*ᵖ + (Aᵖ)ᵀy* for interior x*, z* and Gaussian y*,
/// so both problems are strictly feasible.
inline PlantedInstance planted(const std::vector<BlockSpec>& specs, Index m, Rng& rng,
                               double sdp_density = 1.0) {
  PlantedInstance inst;
  ProblemData& p = inst.problem;
  p.specs = specs;
  p.m = m;
  for (const auto& s : specs) {
    Matrix at(vec_len(s), m);
    for (Index k = 0; k < m; ++k) at.col(k) = random_coefficient(s, rng, sdp_density);
    p.at.push_back(at);
  }
  inst.x = random_primal(specs, rng);
  inst.z = random_dual(specs, rng);
  inst.y = gaussian(m, 1, rng);
  p.b = Vector::Zero(m);
  for (std::size_t k = 0; k < specs.size(); ++k) {
    p.b += p.at[k].transpose() * vec_of(inst.x[k], specs[k]);
    p.c.blocks.push_back(unvec_of(vec_of(inst.z[k], specs[k]) + p.at[k] * inst.y, specs[k]));
  }
  return inst;
}

/// 1 to 3 blocks drawn from SDP (n ≤ 8), SOC (n ≤ 10) and LIN (n ≤ 20) with
/// m ≤ min(15, total vectorized length).
inline std::pair<std::vector<BlockSpec>, Index> random_structure(Rng& rng) {
  std::vector<BlockSpec> specs;
  const int nblocks = uniform_int(rng, 1, 3);
  Index total = 0;
  for (int b = 0; b < nblocks; ++b) {
    BlockSpec s;
    switch (uniform_int(rng, 0, 2)) {
      case 0: s = {ConeKind::Sdp, uniform_int(rng, 1, 8), 0.0}; break;
      case 1: s = {ConeKind::Soc, uniform_int(rng, 2, 10), 0.0}; break;
      default: s = {ConeKind::Lin, uniform_int(rng, 1, 20), 0.0}; break;
    }
    total += vec_len(s);
    specs.push_back(s);
  }
  const Index m = uniform_int(rng, 1, static_cast<int>(std::min<Index>(15, total)));
  return {specs, m};
}

// ---------------------------------------------------------------------------
// Scaling and Newton-system oracles

inline Matrix sym_pow(const Matrix& a, double e) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()));
  const Vector d = es.eigenvalues().array().pow(e);
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

inline double gamma_oracle(const Vector& v) {
  return std::sqrt(v(0) * v(0) - v.tail(v.size() - 1).squaredNorm());
}

inline Matrix soc_g_oracle(double omega, const Vector& t) {
  const Index n = t.size();
  const Vector tb = t.tail(n - 1);
  Matrix g(n, n);
  g(0, 0) = t(0);
  g.block(0, 1, 1, n - 1) = tb.transpose();
  g.block(1, 0, n - 1, 1) = tb;
  g.bottomRightCorner(n - 1, n - 1) =
      Matrix::Identity(n - 1, n - 1) + tb * tb.transpose() / (1.0 + t(0));
  return omega * g;
}

/// Scaling matrix Gᵖ of a block. For SDP the action is v ↦ G v Gᵀ.
inline Matrix g_oracle(const BlockSpec& s, const Matrix& x, const Matrix& z, Direction d) {
  switch (s.kind) {
    case ConeKind::Sdp: {
      if (d == Direction::Hkm) return sym_pow(z, 0.5);
      const Matrix xh = sym_pow(x, 0.5);
      const Matrix w = xh * sym_pow(xh * z * xh, -0.5) * xh;
      return sym_pow(w, -0.5);
    }
    case ConeKind::Soc: {
      const Vector xv = x.col(0);
      const Vector zv = z.col(0);
      if (d == Direction::Hkm) {
        const double gz = gamma_oracle(zv);
        return soc_g_oracle(gz, zv / gz);
      }
      const double omega = std::sqrt(gamma_oracle(zv) / gamma_oracle(xv));
      Vector xi(xv.size());
      xi(0) = zv(0) / omega + omega * xv(0);
      xi.tail(xv.size() - 1) = zv.tail(xv.size() - 1) / omega - omega * xv.tail(xv.size() - 1);
      return soc_g_oracle(omega, xi / gamma_oracle(xi));
    }
    default: return Matrix::Identity(s.dim, s.dim);
  }
}

inline Matrix jordan_oracle(const Matrix& a, const Matrix& b, const BlockSpec& s) {
  switch (s.kind) {
    case ConeKind::Sdp: return 0.5 * (a * b.transpose() + b * a.transpose());
    case ConeKind::Soc: {
      const Index n = a.rows();
      Vector out(n);
      out(0) = a.col(0).dot(b.col(0));
      out.tail(n - 1) = a(0, 0) * b.col(0).tail(n - 1) + b(0, 0) * a.col(0).tail(n - 1);
      return out;
    }
    default: return a.cwiseProduct(b);
  }
}

inline Matrix e_oracle(const BlockSpec& s) {
  switch (s.kind) {
    case ConeKind::Sdp: return Matrix::Identity(s.dim, s.dim);
    case ConeKind::Soc: {
      Vector e = Vector::Zero(s.dim);
      e(0) = 1.0;
      return e;
    }
    default: return Vector::Ones(s.dim);
  }
}

inline Matrix apply_g(const Matrix& g, const Matrix& v, const BlockSpec& s) {
  return s.kind == ConeKind::Sdp ? Matrix(g * v * g.transpose()) : Matrix(g * v);
}

inline Matrix apply_g_inv(const Matrix& g, const Matrix& v, const BlockSpec& s) {
  const Matrix gi = g.inverse();
  return s.kind == ConeKind::Sdp ? Matrix(gi * v * gi.transpose()) : Matrix(gi * v);
}

/// Dense matrices of Eᵖ and Fᵖ acting on vec coordinates.
struct EF {
  Matrix e;
  Matrix f;
  Vector rc_base;  // (Gx)∘(G⁻¹z), vectorized
};

inline EF ef_oracle(const BlockSpec& s, const Matrix& x, const Matrix& z, Direction d) {
  const Matrix g = g_oracle(s, x, z, d);
  const Matrix gx = apply_g(g, x, s);
  const Matrix giz = apply_g_inv(g, z, s);
  const Index n = vec_len(s);
  EF out;
  out.e.resize(n, n);
  out.f.resize(n, n);
  for (Index j = 0; j < n; ++j) {
    const Matrix basis = unvec_of(Vector::Unit(n, j), s);
    out.e.col(j) = vec_of(jordan_oracle(apply_g(g, basis, s), giz, s), s);
    out.f.col(j) = vec_of(jordan_oracle(gx, apply_g_inv(g, basis, s), s), s);
  }
  out.rc_base = vec_of(jordan_oracle(gx, giz, s), s);
  return out;
}

struct DenseNewton {
  Matrix lhs;
  Vector rhs;
  std::vector<Index> offset;  // start of each block inside Δx (and Δz)
  Index nx = 0;
};

/// The full Newton system in (vec Δx, Δy, vec Δz) assembled without any
/// elimination. Free blocks carry the row Δzᵖ = 0.
inline DenseNewton newton_oracle(const ProblemData& p, const BlockVec& x, const Vector& y,
                                 const BlockVec& z, Direction d,
                                 const std::vector<double>& targets) {
  DenseNewton out;
  for (const auto& s : p.specs) {
    out.offset.push_back(out.nx);
    out.nx += vec_len(s);
  }
  const Index nx = out.nx;
  const Index m = p.m;
  const Index n = 2 * nx + m;
  out.lhs = Matrix::Zero(n, n);
  out.rhs = Vector::Zero(n);
  Vector ax = Vector::Zero(m);
  for (std::size_t k = 0; k < p.specs.size(); ++k) {
    const auto& s = p.specs[k];
    const Index o = out.offset[k];
    const Index len = vec_len(s);
    const Vector xv = vec_of(x[k], s);
    ax += p.at[k].transpose() * xv;
    // primal rows
    out.lhs.block(0, o, m, len) = p.at[k].transpose();
    // dual rows
    out.lhs.block(m + o, nx, len, m) = p.at[k];
    out.lhs.block(m + o, nx + m + o, len, len) = Matrix::Identity(len, len);
    out.rhs.segment(m + o, len) = vec_of(p.c[k], s) - vec_of(z[k], s) - p.at[k] * y;
    // complementarity rows
    const Index r = m + nx + o;
    if (s.kind == ConeKind::Free) {
      out.lhs.block(r, nx + m + o, len, len) = Matrix::Identity(len, len);
      continue;
    }
    const EF ef = ef_oracle(s, x[k], z[k], d);
    out.lhs.block(r, o, len, len) = ef.e;
    out.lhs.block(r, nx + m + o, len, len) = ef.f;
    out.rhs.segment(r, len) = targets[k] * vec_of(e_oracle(s), s) - ef.rc_base;
  }
  out.rhs.head(m) = p.b - ax;
  return out;
}

/// Stacks a direction in the oracle's unknown ordering.
inline Vector stack_direction(const ProblemData& p, const BlockVec& dx, const Vector& dy,
                              const BlockVec& dz) {
  Index nx = 0;
  for (const auto& s : p.specs) nx += vec_len(s);
  Vector v(2 * nx + p.m);
  Index o = 0;
  for (std::size_t k = 0; k < p.specs.size(); ++k) {
    const Index len = vec_len(p.specs[k]);
    v.segment(o, len) = vec_of(dx[k], p.specs[k]);
    v.segment(nx + p.m + o, len) = vec_of(dz[k], p.specs[k]);
    o += len;
  }
  v.segment(nx, p.m) = dy;
  return v;
}

/// Relative residual of each of the three row groups of the Newton system.
struct RowResiduals {
  double primal = 0.0;
  double dual = 0.0;
  double comp = 0.0;
  double max() const { return std::max({primal, dual, comp}); }
};

inline RowResiduals row_residuals(const DenseNewton& sys, const Vector& sol, Index m) {
  const Vector r = sys.lhs * sol - sys.rhs;
  const Index nx = sys.nx;
  auto rel = [&](Index off, Index len) {
    return r.segment(off, len).norm() / (1.0 + sys.rhs.segment(off, len).norm());
  };
  return {rel(0, m), rel(m, nx), rel(m + nx, nx)};
}

/// Mᵖ = (Aᵖ)ᵀ E⁻¹F Aᵖ in vec coordinates.
inline Matrix schur_oracle(const BlockSpec& s, const Matrix& at, const Matrix& x,
                           const Matrix& z, Direction d) {
  const EF ef = ef_oracle(s, x, z, d);
  const Matrix h = ef.e.fullPivLu().solve(ef.f);
  return at.transpose() * h * at;
}

/// Distance of v to the boundary of its cone, signed so that interior points
/// are positive: λ_min for SDP, γ for SOC (negative outside), min component
/// for LIN.
inline double boundary_measure(const Matrix& v, const BlockSpec& s) {
  switch (s.kind) {
    case ConeKind::Sdp:
      return Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (v + v.transpose()))
          .eigenvalues()
          .minCoeff();
    case ConeKind::Soc: {
      const double xn = v.col(0).tail(v.rows() - 1).norm();
      const double q = (v(0, 0) - xn) * (v(0, 0) + xn);
      return q >= 0.0 ? std::sqrt(q) : -std::sqrt(-q);
    }
    case ConeKind::Lin: return v.minCoeff();
    case ConeKind::Free: return 1.0;
  }
  return 0.0;
}

}  // namespace sqlp::test
