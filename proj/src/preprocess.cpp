#include "sqlp/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sqlp::preprocess {

namespace {

Matrix coefficient(const ProblemData& p, std::size_t block, Index k) {
  return unvectorize(p.at[block].col(k), p.specs[block]);
}

bool is_skew(const Matrix& a) { return (a + a.transpose()).cwiseAbs().maxCoeff() <= 0.0; }

void check_hermitian(const Matrix& re, const Matrix& im, Index n, const std::string& what) {
  if (re.rows() != n || re.cols() != n || im.rows() != n || im.cols() != n) {
    throw std::invalid_argument(what + ": expected " + std::to_string(n) + "x" +
                                std::to_string(n) + " parts");
  }
  if (re != re.transpose() || !(n == 0 || is_skew(im))) {
    throw std::invalid_argument(what + " is not Hermitian");
  }
}

}  // namespace

Matrix real_embedding(const Matrix& re, const Matrix& im) {
  const Index n = re.rows();
  Matrix out(2 * n, 2 * n);
  out.topLeftCorner(n, n) = re;
  out.topRightCorner(n, n) = -im;
  out.bottomLeftCorner(n, n) = im;
  out.bottomRightCorner(n, n) = re;
  return out;
}

ProblemData complex_to_real(const ComplexProblem& cp) {
  if (cp.b.size() != cp.m) throw std::invalid_argument("complex problem: b length differs from m");
  ProblemData p;
  p.m = cp.m;
  p.b = cp.b;
  for (std::size_t q = 0; q < cp.blocks.size(); ++q) {
    const auto& hb = cp.blocks[q];
    const std::string tag = "hermitian block " + std::to_string(q + 1);
    check_hermitian(hb.c_re, hb.c_im, hb.dim, tag + " C");
    if (static_cast<Index>(hb.a_re.size()) != cp.m || static_cast<Index>(hb.a_im.size()) != cp.m) {
      throw std::invalid_argument(tag + ": expected m coefficient matrices");
    }
    BlockSpec s{ConeKind::Sdp, 2 * hb.dim, 0.0};
    p.specs.push_back(s);
    p.c.blocks.push_back(real_embedding(hb.c_re, hb.c_im));
    Matrix at(vec_length(s), cp.m);
    for (Index k = 0; k < cp.m; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      check_hermitian(hb.a_re[ku], hb.a_im[ku], hb.dim, tag + " A" + std::to_string(k + 1));
      at.col(k) = cones::svec(real_embedding(hb.a_re[ku], hb.a_im[ku]));
    }
    p.at.push_back(std::move(at));
  }
  return p;
}

std::pair<Matrix, Matrix> hermitian_from_real(const Matrix& xbar) {
  const Index n = xbar.rows() / 2;
  Matrix re = xbar.topLeftCorner(n, n) + xbar.bottomRightCorner(n, n);
  Matrix im = xbar.bottomLeftCorner(n, n) - xbar.topRightCorner(n, n);
  return {re, im};
}

Transformed extract_isolated_diagonals(const ProblemData& p) {
  Transformed out{p, {}};
  ProblemData& q = out.problem;
  for (std::size_t blk = 0; blk < p.specs.size(); ++blk) {
    const auto& s = p.specs[blk];
    if (s.kind != ConeKind::Sdp) continue;
    const Index n = s.dim;
    // coupling(i) is true when row/column i has any off-diagonal nonzero
    std::vector<bool> coupled(static_cast<std::size_t>(n), false);
    auto mark = [&](const Matrix& a) {
      for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < n; ++i) {
          if (i != j && a(i, j) != 0.0) coupled[static_cast<std::size_t>(i)] = true;
        }
      }
    };
    mark(p.c[blk]);
    for (Index k = 0; k < p.m; ++k) mark(coefficient(p, blk, k));

    DiagonalExtraction e{blk, n, {}, {}, false, 0};
    for (Index i = 0; i < n; ++i) {
      (coupled[static_cast<std::size_t>(i)] ? e.kept : e.removed).push_back(i);
    }
    if (e.removed.empty()) continue;

    auto diag_of = [&](const Matrix& a, const std::vector<Index>& idx) {
      Matrix d(static_cast<Index>(idx.size()), 1);
      for (std::size_t r = 0; r < idx.size(); ++r) d(static_cast<Index>(r), 0) = a(idx[r], idx[r]);
      return d;
    };
    auto sub_of = [&](const Matrix& a, const std::vector<Index>& idx) {
      const Index r = static_cast<Index>(idx.size());
      Matrix b(r, r);
      for (Index j = 0; j < r; ++j) {
        for (Index i = 0; i < r; ++i) {
          b(i, j) = a(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
        }
      }
      return b;
    };

    const BlockSpec lin{ConeKind::Lin, static_cast<Index>(e.removed.size()), s.barrier};
    Matrix lin_c = diag_of(p.c[blk], e.removed);
    Matrix lin_at(lin.dim, p.m);
    for (Index k = 0; k < p.m; ++k) lin_at.col(k) = diag_of(coefficient(p, blk, k), e.removed).col(0);

    if (e.kept.empty()) {
      e.whole_block = true;
      q.specs[blk] = lin;
      q.c[blk] = std::move(lin_c);
      q.at[blk] = std::move(lin_at);
    } else {
      const BlockSpec sdp{ConeKind::Sdp, static_cast<Index>(e.kept.size()), s.barrier};
      q.specs[blk] = sdp;
      q.c[blk] = sub_of(p.c[blk], e.kept);
      Matrix at(vec_length(sdp), p.m);
      for (Index k = 0; k < p.m; ++k) at.col(k) = cones::svec(sub_of(coefficient(p, blk, k), e.kept));
      q.at[blk] = std::move(at);
      e.appended_block = q.specs.size();
      q.specs.push_back(lin);
      q.c.blocks.push_back(std::move(lin_c));
      q.at.push_back(std::move(lin_at));
    }
    out.log.entries.push_back(std::move(e));
  }
  return out;
}

Transformed split_unrestricted(const ProblemData& p) {
  Transformed out{p, {}};
  ProblemData& q = out.problem;
  for (std::size_t blk = 0; blk < p.specs.size(); ++blk) {
    const auto& s = p.specs[blk];
    if (s.kind != ConeKind::Free) continue;
    const Index n = s.dim;
    q.specs[blk] = BlockSpec{ConeKind::Lin, 2 * n, 0.0};
    Matrix c(2 * n, 1);
    c << p.c[blk], -p.c[blk];
    q.c[blk] = std::move(c);
    Matrix at(2 * n, p.m);
    at << p.at[blk], -p.at[blk];
    q.at[blk] = std::move(at);
    out.log.entries.push_back(SplitFree{blk, n});
  }
  return out;
}

Transformed append_artificial_variable(const ProblemData& p) {
  Transformed out{p, {}};
  ProblemData& q = out.problem;
  const Index m = p.m;
  q.m = m + 1;
  q.b.conservativeResize(m + 1);
  q.b(m) = 0.0;
  for (std::size_t blk = 0; blk < p.specs.size(); ++blk) {
    const auto& s = p.specs[blk];
    Matrix at(vec_length(s), m + 1);
    at.leftCols(m) = p.at[blk];
    if (s.kind == ConeKind::Free) {
      at.col(m).setZero();
    } else {
      at.col(m) = -vectorize(cones::identity(s), s);
    }
    q.at[blk] = std::move(at);
  }
  q.specs.push_back(BlockSpec{ConeKind::Lin, 1, 0.0});
  q.c.blocks.push_back(Matrix::Zero(1, 1));
  Matrix at = Matrix::Zero(1, m + 1);
  at(0, m) = 1.0;
  q.at.push_back(std::move(at));
  out.log.entries.push_back(Augmentation{p.specs, m});
  return out;
}

Transformed augment_artificial(const ProblemData& p) {
  const bool has_p0 = std::any_of(p.specs.begin(), p.specs.end(), [](const BlockSpec& s) {
    return s.kind != ConeKind::Free && s.barrier == 0.0;
  });
  if (p.m >= 1 && has_p0) return {p, {}};
  return append_artificial_variable(p);
}

Transformed rcm_reorder(const ProblemData& p) {
  Transformed out{p, {}};
  ProblemData& q = out.problem;
  for (std::size_t blk = 0; blk < p.specs.size(); ++blk) {
    const auto& s = p.specs[blk];
    if (s.kind != ConeKind::Sdp || s.dim < 3) continue;
    Matrix t = p.c[blk].cwiseAbs();
    for (Index k = 0; k < p.m; ++k) t += coefficient(p, blk, k).cwiseAbs();
    auto perm = linalg::rcm(linalg::SparseMat::from_dense(t));
    bool identity = true;
    for (std::size_t i = 0; i < perm.size(); ++i) identity = identity && perm[i] == static_cast<Index>(i);
    if (identity) continue;
    q.c[blk] = linalg::permute_symmetric(p.c[blk], perm);
    for (Index k = 0; k < p.m; ++k) {
      q.at[blk].col(k) = cones::svec(linalg::permute_symmetric(coefficient(p, blk, k), perm));
    }
    out.log.entries.push_back(Reorder{blk, std::move(perm)});
  }
  return out;
}

std::vector<VariablePair> detect_implicit_unrestricted(const ProblemData& p) {
  std::vector<VariablePair> out;
  for (std::size_t blk = 0; blk < p.specs.size(); ++blk) {
    const auto& s = p.specs[blk];
    if (s.kind != ConeKind::Lin || s.barrier != 0.0) continue;
    const Matrix& at = p.at[blk];
    const Matrix& c = p.c[blk];
    std::vector<bool> used(static_cast<std::size_t>(s.dim), false);
    for (Index i = 0; i < s.dim; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      if (c(i, 0) == 0.0 && (p.m == 0 || at.row(i).isZero(0.0))) continue;
      for (Index j = i + 1; j < s.dim; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        if (c(i, 0) != -c(j, 0)) continue;
        if (at.row(i) != -at.row(j)) continue;
        used[static_cast<std::size_t>(i)] = used[static_cast<std::size_t>(j)] = true;
        out.push_back({blk, i, j});
        break;
      }
    }
  }
  return out;
}

std::vector<VariablePair> split_pairs(const TransformLog& log) {
  std::vector<VariablePair> out;
  for (const auto& e : log.entries) {
    if (const auto* s = std::get_if<SplitFree>(&e)) {
      for (Index i = 0; i < s->dim; ++i) out.push_back({s->block, i, s->dim + i});
    }
  }
  return out;
}

void append_log(TransformLog& log, const TransformLog& next) {
  log.entries.insert(log.entries.end(), next.entries.begin(), next.entries.end());
}

Transformed run_pipeline(const ProblemData& p, bool full) {
  Transformed cur{p, {}};
  auto step = [&](Transformed (*fn)(const ProblemData&)) {
    Transformed t = fn(cur.problem);
    cur.problem = std::move(t.problem);
    append_log(cur.log, t.log);
  };
  if (full) {
    step(&extract_isolated_diagonals);
    step(&split_unrestricted);
  }
  step(&augment_artificial);
  if (full) step(&rcm_reorder);
  return cur;
}

namespace {

Matrix unpermute(const Matrix& xbar, const std::vector<Index>& perm) {
  const Index n = xbar.rows();
  Matrix x(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) {
      x(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]) = xbar(i, j);
    }
  }
  return x;
}

struct Inverter {
  Point& pt;

  void operator()(const Reorder& r) {
    pt.x[r.block] = unpermute(pt.x[r.block], r.perm);
    pt.z[r.block] = unpermute(pt.z[r.block], r.perm);
  }

  void operator()(const Augmentation& a) {
    const std::size_t nb = a.original_specs.size();
    if (pt.x.size() != nb + 1 || pt.y.size() != a.original_m + 1) {
      throw std::logic_error("transform log does not match the point (augmentation)");
    }
    const double y_new = pt.y(a.original_m);
    pt.x.blocks.pop_back();
    pt.z.blocks.pop_back();
    pt.y.conservativeResize(a.original_m);
    // the artificial row added y_new·eᵖ to every dual slack
    for (std::size_t blk = 0; blk < nb; ++blk) {
      const auto& s = a.original_specs[blk];
      if (s.kind == ConeKind::Free) continue;
      pt.z[blk] -= y_new * cones::identity(s);
    }
  }

  void operator()(const SplitFree& s) {
    const Matrix& x = pt.x[s.block];
    if (x.rows() != 2 * s.dim) throw std::logic_error("transform log does not match the point (split)");
    Matrix xf = x.topRows(s.dim) - x.bottomRows(s.dim);
    pt.x[s.block] = std::move(xf);
    pt.z[s.block] = Matrix::Zero(s.dim, 1);
  }

  void operator()(const DiagonalExtraction& e) {
    const Index n = e.original_dim;
    auto rebuild = [&](BlockVec& v) {
      Matrix full = Matrix::Zero(n, n);
      const Matrix& lin = e.whole_block ? v[e.block] : v[e.appended_block];
      for (std::size_t r = 0; r < e.removed.size(); ++r) {
        full(e.removed[r], e.removed[r]) = lin(static_cast<Index>(r), 0);
      }
      if (!e.whole_block) {
        const Matrix& sub = v[e.block];
        for (std::size_t j = 0; j < e.kept.size(); ++j) {
          for (std::size_t i = 0; i < e.kept.size(); ++i) {
            full(e.kept[i], e.kept[j]) = sub(static_cast<Index>(i), static_cast<Index>(j));
          }
        }
      }
      v[e.block] = std::move(full);
      if (!e.whole_block) {
        if (e.appended_block + 1 != v.size()) {
          throw std::logic_error("transform log does not match the point (diagonal extraction)");
        }
        v.blocks.pop_back();
      }
    };
    rebuild(pt.x);
    rebuild(pt.z);
  }

};

}  // namespace

Point map_back(const Point& transformed, const TransformLog& log, const ProblemData& original) {
  Point pt = transformed;
  for (auto it = log.entries.rbegin(); it != log.entries.rend(); ++it) {
    std::visit(Inverter{pt}, *it);
  }
  if (!pt.x.matches(original.specs) || !pt.z.matches(original.specs) ||
      pt.y.size() != original.m) {
    throw std::logic_error("transform log does not reproduce the original block structure");
  }
  return pt;
}

SolveResult postprocess(const SolveResult& result, const TransformLog& log,
                        const ProblemData& original) {
  SolveResult out = result;
  Point pt = map_back({result.x, result.y, result.z}, log, original);
  out.x = std::move(pt.x);
  out.y = std::move(pt.y);
  out.z = std::move(pt.z);
  try {
    const Metrics mt = evaluate_metrics(original, out.x, out.y, out.z);
    out.pobj = mt.pobj;
    out.dobj = mt.dobj;
    out.gap = mt.gap;
    out.relgap = mt.relgap;
    out.pinfeas = mt.pinfeas;
    out.dinfeas = mt.dinfeas;
  } catch (const std::exception& e) {
    // barrier terms undefined at the mapped point; keep transformed-space values
    if (!out.message.empty()) out.message += "; ";
    out.message += std::string("original-space metrics unavailable: ") + e.what();
  }
  return out;
}

}  // namespace sqlp::preprocess
