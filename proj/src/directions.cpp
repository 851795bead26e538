#include "sqlp/directions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sqlp::directions {

using cones::kInteriorTol;

Residuals residuals(const ProblemData& p, const BlockVec& x, const Vector& y,
                    const BlockVec& z) {
  Residuals r;
  r.rprim = p.b - apply_op(p, x);
  r.rdual.blocks.reserve(p.specs.size());
  for (std::size_t k = 0; k < p.specs.size(); ++k) {
    r.rdual.blocks.push_back(p.c[k] - z[k] - apply_adjoint_block(p, k, y));
  }
  r.rprim_norm = r.rprim.norm();
  r.rdual_norm_sum = cones::norm_sum(r.rdual);
  return r;
}

double mu(const BlockVec& x, const BlockVec& z, std::span<const BlockSpec> specs) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t p = 0; p < specs.size(); ++p) {
    if (specs[p].kind == ConeKind::Free || specs[p].barrier != 0.0) continue;
    num += cones::inner(x[p], z[p]);
    den += static_cast<double>(specs[p].dim);
  }
  if (den == 0.0) throw std::logic_error("mu: no block with zero barrier parameter");
  return num / den;
}

Matrix nt_scaling_sdp(const Matrix& x, const Matrix& z) {
  const Index n = x.rows();
  const auto fz = linalg::chol(linalg::SymMat(z), kInteriorTol);
  const Matrix u = fz.lower.transpose();  // z = UᵀU
  const auto eig = linalg::sym_eig(linalg::SymMat(u * x * u.transpose()));
  if (eig.values.minCoeff() <= 0.0) throw ConeError("NT scaling: x is not positive definite");
  // U⁻¹V
  const Matrix uinv_v = u.triangularView<Eigen::Upper>().solve(eig.vectors);
  const Vector root = eig.values.array().sqrt();
  Matrix w = uinv_v * root.asDiagonal() * uinv_v.transpose();
  (void)n;
  return 0.5 * (w + w.transpose());
}

NtSoc nt_scaling_soc(const Vector& x, const Vector& z) {
  const double gx = cones::gamma_soc(x);
  const double gz = cones::gamma_soc(z);
  if (gx <= kInteriorTol || gz <= kInteriorTol || x(0) <= 0.0 || z(0) <= 0.0) {
    throw ConeError("NT scaling: iterate on the second-order cone boundary");
  }
  NtSoc s;
  s.omega = std::sqrt(gz / gx);
  const Index r = x.size() - 1;
  Vector xi(x.size());
  xi(0) = z(0) / s.omega + s.omega * x(0);
  xi.tail(r) = z.tail(r) / s.omega - s.omega * x.tail(r);
  s.t = xi / cones::gamma_soc(xi);
  s.t /= cones::gamma_soc(s.t);
  return s;
}

HkmSoc hkm_scaling_soc(const Vector& z) {
  const double g = cones::gamma_soc(z);
  if (g <= kInteriorTol || z(0) <= 0.0) {
    throw ConeError("HKM scaling: z on the second-order cone boundary");
  }
  HkmSoc s;
  s.gamma_z = g;
  s.t = z / g;
  s.z_invj = z / (g * g);
  s.z_invj.tail(z.size() - 1) *= -1.0;
  return s;
}

Matrix soc_g(double omega, const Vector& t) {
  const Index n = t.size();
  const auto tb = t.tail(n - 1);
  Matrix g(n, n);
  g(0, 0) = t(0);
  g.row(0).tail(n - 1) = tb.transpose();
  g.col(0).tail(n - 1) = tb;
  g.bottomRightCorner(n - 1, n - 1) =
      Matrix::Identity(n - 1, n - 1) + tb * tb.transpose() / (1.0 + t(0));
  return omega * g;
}

Matrix soc_g_inv(double omega, const Vector& t) {
  const Index n = t.size();
  const auto tb = t.tail(n - 1);
  Matrix g(n, n);
  g(0, 0) = t(0);
  g.row(0).tail(n - 1) = -tb.transpose();
  g.col(0).tail(n - 1) = -tb;
  g.bottomRightCorner(n - 1, n - 1) =
      Matrix::Identity(n - 1, n - 1) + tb * tb.transpose() / (1.0 + t(0));
  return g / omega;
}

BlockScaling block_scaling(const BlockSpec& spec, const Matrix& x, const Matrix& z,
                           Direction direction) {
  switch (spec.kind) {
    case ConeKind::Sdp: {
      if (direction == Direction::Hkm) return HkmSdp{cones::jordan_inv(z, spec)};
      NtSdp s;
      s.w = nt_scaling_sdp(x, z);
      const auto we = linalg::sym_eig(linalg::SymMat(s.w));
      if (we.values.minCoeff() <= 0.0) throw ConeError("NT scaling: W is not positive definite");
      const Vector root = we.values.array().sqrt();
      s.g = we.vectors * root.cwiseInverse().asDiagonal() * we.vectors.transpose();
      s.g_inv = we.vectors * root.asDiagonal() * we.vectors.transpose();
      s.v = linalg::sym_eig(linalg::SymMat(s.g * x * s.g));
      return s;
    }
    case ConeKind::Soc:
      if (direction == Direction::Hkm) return hkm_scaling_soc(z.col(0));
      return nt_scaling_soc(x.col(0), z.col(0));
    case ConeKind::Lin:
      if ((z.array() <= 0.0).any() || (x.array() <= 0.0).any()) {
        throw ConeError("scaling: linear block is not strictly positive");
      }
      return LinScaling{x.col(0).cwiseQuotient(z.col(0))};
    case ConeKind::Free: return FreeScaling{};
  }
  return FreeScaling{};
}

Scaling compute_scaling(std::span<const BlockSpec> specs, const BlockVec& x,
                        const BlockVec& z, Direction direction) {
  Scaling s;
  s.direction = direction;
  s.blocks.reserve(specs.size());
  for (std::size_t p = 0; p < specs.size(); ++p) {
    s.blocks.push_back(block_scaling(specs[p], x[p], z[p], direction));
  }
  return s;
}

Matrix einv_rcomp(const BlockSpec& spec, const Matrix& x, const Matrix& z, double target) {
  if (spec.kind == ConeKind::Free) throw ConeError("einv_rcomp: free block");
  if (target == 0.0) return -x;
  return target * cones::jordan_inv(z, spec) - x;
}

namespace {

Vector apply_j(const Vector& v) {
  Vector out = -v;
  out(0) = v(0);
  return out;
}

// Solves ½(Y v + v Y) = r for Y with v = Q diag(λ) Qᵀ.
Matrix lyapunov(const linalg::EigenDecomposition& v, const Matrix& r) {
  Matrix rt = v.vectors.transpose() * r * v.vectors;
  const Index n = rt.rows();
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) rt(i, j) *= 2.0 / (v.values(i) + v.values(j));
  }
  return v.vectors * rt * v.vectors.transpose();
}

}  // namespace

Matrix h_rdual(const BlockSpec& spec, const BlockScaling& scaling, const Matrix& x,
               const Matrix& z, const Matrix& r) {
  (void)z;
  if (const auto* s = std::get_if<HkmSdp>(&scaling)) {
    const Matrix t = x * r * s->z_inv;
    return 0.5 * (t + t.transpose());
  }
  if (const auto* s = std::get_if<NtSdp>(&scaling)) {
    const Matrix t = s->w * r * s->w;
    return 0.5 * (t + t.transpose());
  }
  if (const auto* s = std::get_if<HkmSoc>(&scaling)) {
    const Vector xv = x.col(0);
    const Vector rv = r.col(0);
    const double beta = xv.dot(apply_j(s->z_invj));
    Vector out = -beta * apply_j(rv) + s->z_invj.dot(rv) * xv + rv.dot(xv) * s->z_invj;
    return out;
  }
  if (const auto* s = std::get_if<NtSoc>(&scaling)) {
    // G⁻² with G built from t is (1/ω²)(−J + 2(Jt)(Jt)ᵀ)
    const Vector rv = r.col(0);
    const Vector jt = apply_j(s->t);
    Vector out = (-apply_j(rv) + 2.0 * rv.dot(jt) * jt) / (s->omega * s->omega);
    return out;
  }
  if (const auto* s = std::get_if<LinScaling>(&scaling)) {
    return Matrix(s->ratio.cwiseProduct(r.col(0)));
  }
  (void)spec;
  throw ConeError("h_rdual: free blocks have no H operator");
}

Matrix einv_second_order(const BlockSpec& spec, const BlockScaling& scaling,
                         const Matrix& x, const Matrix& z, const Matrix& dx,
                         const Matrix& dz) {
  (void)x;
  if (const auto* s = std::get_if<HkmSdp>(&scaling)) {
    const Matrix t = dx * dz * s->z_inv;
    return 0.5 * (t + t.transpose());
  }
  if (const auto* s = std::get_if<NtSdp>(&scaling)) {
    const Matrix yx = s->g * dx * s->g;
    const Matrix qz = s->g_inv * dz * s->g_inv;
    const Matrix r = 0.5 * (yx * qz + qz * yx);
    const Matrix y = lyapunov(s->v, r);
    const Matrix out = s->g_inv * y * s->g_inv;
    return 0.5 * (out + out.transpose());
  }
  if (const auto* s = std::get_if<HkmSoc>(&scaling)) {
    const Matrix gm = soc_g(s->gamma_z, s->t);
    const Matrix gi = soc_g_inv(s->gamma_z, s->t);
    // G⁻¹z = e, so Arw(G⁻¹z) = I
    const Vector so = cones::arw_apply(gm * dx.col(0), gi * dz.col(0));
    return Matrix(gi * so);
  }
  if (const auto* s = std::get_if<NtSoc>(&scaling)) {
    const Matrix gm = soc_g(s->omega, s->t);
    const Matrix gi = soc_g_inv(s->omega, s->t);
    const Vector so = cones::arw_apply(gm * dx.col(0), gi * dz.col(0));
    const Vector f = gi * z.col(0);
    return Matrix(gi * cones::arw_solve(f, so));
  }
  if (std::holds_alternative<LinScaling>(scaling)) {
    return Matrix(dx.col(0).cwiseProduct(dz.col(0)).cwiseQuotient(z.col(0)));
  }
  (void)spec;
  throw ConeError("einv_second_order: free blocks have no complementarity");
}

SdpPlan plan_sdp(const Matrix& at, Index n, std::optional<Strategy> forced) {
  const BlockSpec spec{ConeKind::Sdp, n, 0.0};
  if (at.rows() != vec_length(spec)) throw linalg::DimensionError("plan_sdp: row count");
  const Index m = at.cols();
  SdpPlan plan;
  plan.n = n;
  plan.coeff.reserve(static_cast<std::size_t>(m));
  plan.pattern.resize(static_cast<std::size_t>(m));
  std::vector<Index> nnz(static_cast<std::size_t>(m));
  for (Index k = 0; k < m; ++k) {
    plan.coeff.push_back(cones::smat(at.col(k)));
    const Matrix& a = plan.coeff.back();
    auto& pat = plan.pattern[static_cast<std::size_t>(k)];
    for (Index j = 0; j < n; ++j) {
      for (Index i = 0; i < n; ++i) {
        if (a(i, j) != 0.0) pat.emplace_back(i, j);
      }
    }
    nnz[static_cast<std::size_t>(k)] = static_cast<Index>(pat.size());
  }
  plan.order.resize(static_cast<std::size_t>(m));
  for (Index k = 0; k < m; ++k) plan.order[static_cast<std::size_t>(k)] = k;
  std::stable_sort(plan.order.begin(), plan.order.end(), [&](Index a, Index b) {
    return nnz[static_cast<std::size_t>(a)] < nnz[static_cast<std::size_t>(b)];
  });

  std::vector<bool> in_set(static_cast<std::size_t>(n * n), false);
  const double nd = static_cast<double>(n);
  for (std::size_t j = 0; j < plan.order.size(); ++j) {
    const Index k = plan.order[j];
    for (const auto& [r, c] : plan.pattern[static_cast<std::size_t>(k)]) {
      const auto key = static_cast<std::size_t>(c * n + r);
      if (!in_set[key]) {
        in_set[key] = true;
        plan.needed_positions.emplace_back(r, c);
      }
    }
    plan.needed_count.push_back(plan.needed_positions.size());
    if (forced) {
      plan.strategy.push_back(*forced);
      continue;
    }
    const double f = static_cast<double>(nnz[static_cast<std::size_t>(k)]);
    const double isz = static_cast<double>(plan.needed_positions.size());
    const double c1 = nd * f + nd * nd * nd;
    const double c2 = nd * (f + isz);
    const double c3 = 2.0 * f * isz;
    Strategy best = Strategy::F1;
    double cost = c1;
    if (c2 < cost) { best = Strategy::F2; cost = c2; }
    if (c3 < cost) { best = Strategy::F3; }
    plan.strategy.push_back(best);
  }
  return plan;
}

Matrix schur_block_sdp(const SdpPlan& plan, const Matrix& x, const BlockScaling& scaling) {
  const Matrix* left = nullptr;
  const Matrix* right = nullptr;
  if (const auto* s = std::get_if<HkmSdp>(&scaling)) {
    left = &x;
    right = &s->z_inv;
  } else if (const auto* s = std::get_if<NtSdp>(&scaling)) {
    left = &s->w;
    right = &s->w;
  } else {
    throw std::invalid_argument("schur_block_sdp: scaling is not for an SDP block");
  }
  const Index m = static_cast<Index>(plan.order.size());
  const Index n = plan.n;
  Matrix out = Matrix::Zero(m, m);
  Matrix g = Matrix::Zero(n, n);
  for (std::size_t j = 0; j < plan.order.size(); ++j) {
    const Index k = plan.order[j];
    const Matrix& a = plan.coeff[static_cast<std::size_t>(k)];
    const auto& pat = plan.pattern[static_cast<std::size_t>(k)];
    const std::size_t needed = plan.needed_size(j);
    switch (plan.strategy[j]) {
      case Strategy::F1: {
        g.noalias() = *left * (a * *right);
        break;
      }
      case Strategy::F2: {
        const Matrix f = a * *right;
        for (std::size_t q = 0; q < needed; ++q) {
          const auto [r, c] = plan.needed_positions[q];
          g(r, c) = left->row(r).dot(f.col(c));
        }
        break;
      }
      case Strategy::F3: {
        for (std::size_t q = 0; q < needed; ++q) {
          const auto [r, c] = plan.needed_positions[q];
          double acc = 0.0;
          for (const auto& [gi, di] : pat) acc += (*left)(r, gi) * a(gi, di) * (*right)(di, c);
          g(r, c) = acc;
        }
        break;
      }
    }
    for (std::size_t i = 0; i <= j; ++i) {
      const Index ki = plan.order[i];
      const Matrix& ai = plan.coeff[static_cast<std::size_t>(ki)];
      double acc = 0.0;
      for (const auto& [r, c] : plan.pattern[static_cast<std::size_t>(ki)]) acc += ai(r, c) * g(r, c);
      out(ki, k) = acc;
      out(k, ki) = acc;
    }
  }
  return out;
}

Matrix schur_block_dense(const BlockSpec& spec, const Matrix& at, const Matrix& x,
                         const Matrix& z, const BlockScaling& scaling) {
  const Index m = at.cols();
  switch (spec.kind) {
    case ConeKind::Sdp: {
      std::vector<Matrix> a;
      a.reserve(static_cast<std::size_t>(m));
      for (Index k = 0; k < m; ++k) a.push_back(cones::smat(at.col(k)));
      Matrix out(m, m);
      for (Index l = 0; l < m; ++l) {
        Matrix g;
        if (const auto* s = std::get_if<HkmSdp>(&scaling)) {
          g = x * a[static_cast<std::size_t>(l)] * s->z_inv;
        } else {
          const auto& w = std::get<NtSdp>(scaling).w;
          g = w * a[static_cast<std::size_t>(l)] * w;
        }
        for (Index k = 0; k < m; ++k) out(k, l) = cones::inner(a[static_cast<std::size_t>(k)], g);
      }
      return 0.5 * (out + out.transpose());
    }
    case ConeKind::Soc: {
      const Matrix a = at.transpose();  // m × n
      Matrix ajat = a * a.transpose() - 2.0 * a.col(0) * a.col(0).transpose();  // −A J Aᵀ
      if (const auto* s = std::get_if<HkmSoc>(&scaling)) {
        const Vector xv = x.col(0);
        const double beta = xv.dot(apply_j(s->z_invj));
        const Vector u = a * xv;
        const Vector v = a * s->z_invj;
        return beta * ajat + u * v.transpose() + v * u.transpose();
      }
      const auto& s = std::get<NtSoc>(scaling);
      const Vector u = a * apply_j(s.t);
      return (ajat + 2.0 * u * u.transpose()) / (s.omega * s.omega);
    }
    case ConeKind::Lin: {
      const auto& s = std::get<LinScaling>(scaling);
      return at.transpose() * s.ratio.asDiagonal() * at;
    }
    case ConeKind::Free: break;
  }
  (void)z;
  throw ConeError("schur_block_dense: free blocks contribute no Schur block");
}

std::vector<bool> dense_columns(const Matrix& at, double ratio) {
  const Index m = at.cols();
  std::vector<bool> out(static_cast<std::size_t>(at.rows()), false);
  if (m == 0) return out;
  for (Index i = 0; i < at.rows(); ++i) {
    const double filled = static_cast<double>((at.row(i).array() != 0.0).count());
    out[static_cast<std::size_t>(i)] = filled / static_cast<double>(m) > ratio;
  }
  return out;
}

SchurIngredients schur_block_lowrank(const BlockSpec& spec, const Matrix& at,
                                     const Matrix& x, const Matrix& z,
                                     const BlockScaling& scaling,
                                     const std::vector<bool>& dense) {
  if (spec.kind != ConeKind::Soc && spec.kind != ConeKind::Lin) {
    throw std::invalid_argument("schur_block_lowrank: SOC or LIN block expected");
  }
  const Index m = at.cols();
  std::vector<Index> sp, dn;
  for (Index i = 0; i < at.rows(); ++i) (dense[static_cast<std::size_t>(i)] ? dn : sp).push_back(i);
  const Matrix a = at.transpose();  // m × n
  Matrix as(m, static_cast<Index>(sp.size()));
  Matrix ad(m, static_cast<Index>(dn.size()));
  for (std::size_t i = 0; i < sp.size(); ++i) as.col(static_cast<Index>(i)) = a.col(sp[i]);
  for (std::size_t i = 0; i < dn.size(); ++i) ad.col(static_cast<Index>(i)) = a.col(dn[i]);

  SchurIngredients out;
  out.a_sparse_gram = as * as.transpose();
  const Index nd = ad.cols();
  if (nd == 0) {
    out.m_sparse = schur_block_dense(spec, at, x, z, scaling);
    out.u = Matrix::Zero(m, 0);
    out.neg_dinv = Matrix::Zero(0, 0);
    return out;
  }

  if (const auto* s = std::get_if<LinScaling>(&scaling)) {
    Vector rs(static_cast<Index>(sp.size())), rd(nd);
    for (std::size_t i = 0; i < sp.size(); ++i) rs(static_cast<Index>(i)) = s->ratio(sp[i]);
    for (std::size_t i = 0; i < dn.size(); ++i) rd(static_cast<Index>(i)) = s->ratio(dn[i]);
    out.m_sparse = as * rs.asDiagonal() * as.transpose();
    out.u = ad * rd.cwiseSqrt().asDiagonal();
    out.neg_dinv = -Matrix::Identity(nd, nd);
    return out;
  }
  const Vector k = a.col(0);
  if (const auto* s = std::get_if<HkmSoc>(&scaling)) {
    const Vector xv = x.col(0);
    const double beta = xv.dot(apply_j(s->z_invj));
    if (!(beta > 0.0)) throw ConeError("low-rank split: xᵀJz⁻ᴶ is not positive");
    const double g2 = s->gamma_z * s->gamma_z;
    out.m_sparse = beta * out.a_sparse_gram;
    out.u.resize(m, nd + 3);
    out.u.leftCols(nd) = std::sqrt(beta) * ad;
    out.u.col(nd) = a * xv;
    out.u.col(nd + 1) = g2 * (a * s->z_invj);
    out.u.col(nd + 2) = -std::sqrt(2.0 * beta) * k;
    out.neg_dinv = Matrix::Zero(nd + 3, nd + 3);
    out.neg_dinv.topLeftCorner(nd, nd) = -Matrix::Identity(nd, nd);
    out.neg_dinv(nd, nd + 1) = -g2;
    out.neg_dinv(nd + 1, nd) = -g2;
    out.neg_dinv(nd + 2, nd + 2) = 1.0;
    return out;
  }
  const auto& s = std::get<NtSoc>(scaling);
  const double w = s.omega;
  out.m_sparse = out.a_sparse_gram / (w * w);
  out.u.resize(m, nd + 2);
  out.u.leftCols(nd) = ad / w;
  out.u.col(nd) = std::sqrt(2.0) * (a * apply_j(s.t));
  out.u.col(nd + 1) = -(std::sqrt(2.0) / w) * k;
  out.neg_dinv = Matrix::Zero(nd + 2, nd + 2);
  out.neg_dinv.topLeftCorner(nd, nd) = -Matrix::Identity(nd, nd);
  out.neg_dinv(nd, nd) = -w * w;
  out.neg_dinv(nd + 1, nd + 1) = 1.0;
  return out;
}

Vector h_block(const ProblemData& p, std::size_t block, const Matrix& einv_rc,
               const Matrix& h_rd) {
  return apply_op_block(p, block, einv_rc - h_rd);
}

std::pair<BlockVec, BlockVec> recover_dxdz(const ProblemData& p, const Residuals& res,
                                           const BlockVec& x, const BlockVec& z,
                                           const Scaling& scaling, const Vector& dy,
                                           const Vector& dx_free,
                                           const BlockVec& einv_rc) {
  BlockVec dx, dz;
  dx.blocks.reserve(p.specs.size());
  dz.blocks.reserve(p.specs.size());
  Index offset = 0;
  for (std::size_t k = 0; k < p.specs.size(); ++k) {
    const auto& s = p.specs[k];
    if (s.kind == ConeKind::Free) {
      if (offset + s.dim > dx_free.size()) {
        throw linalg::DimensionError("recover_dxdz: free-variable step too short");
      }
      dx.blocks.push_back(dx_free.segment(offset, s.dim));
      dz.blocks.push_back(Matrix::Zero(s.dim, 1));
      offset += s.dim;
      continue;
    }
    Matrix dzk = res.rdual[k] - apply_adjoint_block(p, k, dy);
    Matrix dxk = einv_rc[k] - h_rdual(s, scaling.blocks[k], x[k], z[k], dzk);
    dx.blocks.push_back(std::move(dxk));
    dz.blocks.push_back(std::move(dzk));
  }
  return {std::move(dx), std::move(dz)};
}

}  // namespace sqlp::directions
