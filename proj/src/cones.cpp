#include "sqlp/cones.hpp"

#include <cmath>
#include <string>

namespace sqlp {

std::string_view to_string(ConeKind kind) {
  switch (kind) {
    case ConeKind::Sdp: return "sdp";
    case ConeKind::Soc: return "soc";
    case ConeKind::Lin: return "lin";
    case ConeKind::Free: return "free";
  }
  return "?";
}

std::optional<ConeKind> parse_cone_kind(std::string_view name) {
  if (name == "sdp" || name == "s") return ConeKind::Sdp;
  if (name == "soc" || name == "q") return ConeKind::Soc;
  if (name == "lin" || name == "l") return ConeKind::Lin;
  if (name == "free" || name == "u") return ConeKind::Free;
  return std::nullopt;
}

Index vec_length(const BlockSpec& spec) {
  return spec.kind == ConeKind::Sdp ? spec.dim * (spec.dim + 1) / 2 : spec.dim;
}

BlockVec BlockVec::zeros(std::span<const BlockSpec> specs) {
  BlockVec v;
  v.blocks.reserve(specs.size());
  for (const auto& s : specs) {
    v.blocks.push_back(s.kind == ConeKind::Sdp ? Matrix::Zero(s.dim, s.dim)
                                               : Matrix::Zero(s.dim, 1));
  }
  return v;
}

bool BlockVec::matches(std::span<const BlockSpec> specs) const {
  if (blocks.size() != specs.size()) return false;
  for (std::size_t p = 0; p < specs.size(); ++p) {
    const Index cols = specs[p].kind == ConeKind::Sdp ? specs[p].dim : 1;
    if (blocks[p].rows() != specs[p].dim || blocks[p].cols() != cols) return false;
  }
  return true;
}

namespace {

void require_same_shape(const BlockVec& a, const BlockVec& b) {
  if (a.size() != b.size()) throw linalg::DimensionError("block count mismatch");
  for (std::size_t p = 0; p < a.size(); ++p) {
    if (a[p].rows() != b[p].rows() || a[p].cols() != b[p].cols()) {
      throw linalg::DimensionError("block " + std::to_string(p + 1) +
                                   ": shape mismatch");
    }
  }
}

}  // namespace

BlockVec& BlockVec::operator+=(const BlockVec& other) {
  require_same_shape(*this, other);
  for (std::size_t p = 0; p < size(); ++p) blocks[p] += other[p];
  return *this;
}

BlockVec& BlockVec::operator-=(const BlockVec& other) {
  require_same_shape(*this, other);
  for (std::size_t p = 0; p < size(); ++p) blocks[p] -= other[p];
  return *this;
}

BlockVec& BlockVec::operator*=(double s) {
  for (auto& b : blocks) b *= s;
  return *this;
}

BlockVec operator+(BlockVec a, const BlockVec& b) { return a += b; }
BlockVec operator-(BlockVec a, const BlockVec& b) { return a -= b; }
BlockVec operator*(double s, BlockVec a) { return a *= s; }

namespace cones {

Vector svec(const Matrix& a) {
  if (a.rows() != a.cols()) throw linalg::DimensionError("svec: not square");
  const Index n = a.rows();
  Vector v(n * (n + 1) / 2);
  Index k = 0;
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < j; ++i) v(k++) = M_SQRT2 * a(i, j);
    v(k++) = a(j, j);
  }
  return v;
}

Matrix smat(const Vector& v) {
  const double root = (std::sqrt(8.0 * static_cast<double>(v.size()) + 1.0) - 1.0) / 2.0;
  const Index n = static_cast<Index>(std::llround(root));
  if (n * (n + 1) / 2 != v.size()) {
    throw linalg::DimensionError("smat: length " + std::to_string(v.size()) +
                                 " is not a triangular number");
  }
  Matrix a(n, n);
  Index k = 0;
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < j; ++i) {
      a(i, j) = a(j, i) = v(k++) / M_SQRT2;
    }
    a(j, j) = v(k++);
  }
  return a;
}

double inner(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw linalg::DimensionError("inner: shape mismatch");
  }
  return a.cwiseProduct(b).sum();
}

double inner(const BlockVec& a, const BlockVec& b) {
  require_same_shape(a, b);
  double s = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p) s += inner(a[p], b[p]);
  return s;
}

double norm_sum(const BlockVec& a) {
  double s = 0.0;
  for (const auto& b : a.blocks) s += b.norm();
  return s;
}

Matrix identity(const BlockSpec& spec) {
  switch (spec.kind) {
    case ConeKind::Sdp: return Matrix::Identity(spec.dim, spec.dim);
    case ConeKind::Soc: {
      Matrix e = Matrix::Zero(spec.dim, 1);
      e(0, 0) = 1.0;
      return e;
    }
    case ConeKind::Lin: return Matrix::Ones(spec.dim, 1);
    case ConeKind::Free: break;
  }
  throw ConeError("free blocks have no identity element");
}

Matrix jordan(const Matrix& x, const Matrix& z, const BlockSpec& spec) {
  switch (spec.kind) {
    case ConeKind::Sdp:
      return 0.5 * (x * z.transpose() + z * x.transpose());
    case ConeKind::Soc: {
      Matrix out(spec.dim, 1);
      out(0, 0) = x.col(0).dot(z.col(0));
      const Index r = spec.dim - 1;
      out.col(0).tail(r) = x(0, 0) * z.col(0).tail(r) + z(0, 0) * x.col(0).tail(r);
      return out;
    }
    case ConeKind::Lin: return x.cwiseProduct(z);
    case ConeKind::Free: break;
  }
  throw ConeError("Jordan product is undefined on free blocks");
}

double gamma_soc(const Vector& x) {
  const double q = x(0) * x(0) - x.tail(x.size() - 1).squaredNorm();
  if (q < -kInteriorTol) {
    throw ConeError("gamma: point lies outside the second-order cone");
  }
  return std::sqrt(std::max(q, 0.0));
}

Matrix jordan_inv(const Matrix& z, const BlockSpec& spec) {
  switch (spec.kind) {
    case ConeKind::Sdp: {
      try {
        const auto f = linalg::chol(linalg::SymMat(z), kInteriorTol);
        const Matrix inv = linalg::chol_solve(f, Matrix(Matrix::Identity(z.rows(), z.rows())));
        return 0.5 * (inv + inv.transpose());
      } catch (const linalg::NotPositiveDefinite&) {
        throw ConeError("jordan_inv: semidefinite block is not interior");
      }
    }
    case ConeKind::Soc: {
      const Vector zv = z.col(0);
      const double g = gamma_soc(zv);
      if (zv(0) <= 0.0 || g <= kInteriorTol) {
        throw ConeError("jordan_inv: second-order block is on the boundary");
      }
      Matrix out = z / (g * g);
      out.col(0).tail(spec.dim - 1) *= -1.0;
      return out;
    }
    case ConeKind::Lin:
      if ((z.array() <= 0.0).any()) {
        throw ConeError("jordan_inv: linear block has a nonpositive entry");
      }
      return z.cwiseInverse();
    case ConeKind::Free: break;
  }
  throw ConeError("jordan_inv is undefined on free blocks");
}

bool is_interior(const Matrix& v, const BlockSpec& spec) {
  switch (spec.kind) {
    case ConeKind::Sdp:
      try {
        linalg::chol(linalg::SymMat(v), kInteriorTol);
        return true;
      } catch (const linalg::NotPositiveDefinite&) {
        return false;
      }
    case ConeKind::Soc: {
      const double q = v(0, 0) * v(0, 0) - v.col(0).tail(spec.dim - 1).squaredNorm();
      return v(0, 0) > 0.0 && q > kInteriorTol * kInteriorTol;
    }
    case ConeKind::Lin: return (v.array() > 0.0).all();
    case ConeKind::Free: return true;
  }
  return false;
}

namespace {

double log_det_pd(const Matrix& v) {
  try {
    const auto f = linalg::chol(linalg::SymMat(v), 0.0);
    return 2.0 * f.lower.diagonal().array().log().sum();
  } catch (const linalg::NotPositiveDefinite&) {
    throw ConeError("barrier: log of a non-positive-definite matrix");
  }
}

double log_gamma(const Vector& v) {
  const double g = gamma_soc(v);
  if (!(g > 0.0) || v(0) <= 0.0) throw ConeError("barrier: log of nonpositive gamma");
  return std::log(g);
}

double sum_log(const Matrix& v) {
  if ((v.array() <= 0.0).any()) throw ConeError("barrier: log of nonpositive entry");
  return v.array().log().sum();
}

}  // namespace

double barrier_term(const Matrix& v, const BlockSpec& spec, Side side) {
  const double nu = spec.barrier;
  if (nu == 0.0 || spec.kind == ConeKind::Free) return 0.0;
  const double n = static_cast<double>(spec.dim);
  const double shift = nu * (1.0 - std::log(nu));
  switch (spec.kind) {
    case ConeKind::Sdp:
      return side == Side::Primal ? -nu * log_det_pd(v) : nu * log_det_pd(v) + n * shift;
    case ConeKind::Soc:
      return side == Side::Primal ? -nu * log_gamma(v.col(0))
                                  : nu * log_gamma(v.col(0)) + shift;
    case ConeKind::Lin:
      return side == Side::Primal ? -nu * sum_log(v) : nu * sum_log(v) + n * shift;
    case ConeKind::Free: break;
  }
  return 0.0;
}

double barrier_terms(const BlockVec& v, std::span<const BlockSpec> specs, Side side) {
  if (v.size() != specs.size()) throw linalg::DimensionError("barrier: block count mismatch");
  double s = 0.0;
  for (std::size_t p = 0; p < specs.size(); ++p) s += barrier_term(v[p], specs[p], side);
  return s;
}

Matrix arw(const Vector& f) {
  const Index n = f.size();
  Matrix a = f(0) * Matrix::Identity(n, n);
  a.row(0).tail(n - 1) = f.tail(n - 1).transpose();
  a.col(0).tail(n - 1) = f.tail(n - 1);
  return a;
}

Vector arw_apply(const Vector& f, const Vector& v) {
  if (f.size() != v.size()) throw linalg::DimensionError("arw_apply: size mismatch");
  const Index r = f.size() - 1;
  Vector out(f.size());
  out(0) = f.dot(v);
  out.tail(r) = f(0) * v.tail(r) + v(0) * f.tail(r);
  return out;
}

Vector arw_solve(const Vector& f, const Vector& v) {
  if (f.size() != v.size()) throw linalg::DimensionError("arw_solve: size mismatch");
  const Index r = f.size() - 1;
  const double g2 = f(0) * f(0) - f.tail(r).squaredNorm();
  if (!(f(0) > 0.0) || !(g2 > 0.0)) throw ConeError("arw_solve: Arw(f) is singular");
  const auto fbar = f.tail(r);
  const double fv = fbar.dot(v.tail(r));
  Vector out(f.size());
  out(0) = (f(0) * v(0) - fv) / g2;
  out.tail(r) = (-v(0) * fbar + (g2 * v.tail(r) + fv * fbar) / f(0)) / g2;
  return out;
}

}  // namespace cones
}  // namespace sqlp
