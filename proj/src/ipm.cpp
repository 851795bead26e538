#include "sqlp/ipm.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace sqlp::ipm {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Point initial_point(const ProblemData& p) {
  Point pt;
  pt.y = Vector::Zero(p.m);
  for (std::size_t k = 0; k < p.specs.size(); ++k) {
    const auto& s = p.specs[k];
    if (s.kind == ConeKind::Free) {
      pt.x.blocks.push_back(Matrix::Zero(s.dim, 1));
      pt.z.blocks.push_back(Matrix::Zero(s.dim, 1));
      continue;
    }
    const double n = static_cast<double>(s.dim);
    const double theta = s.kind == ConeKind::Sdp ? n : s.kind == ConeKind::Soc ? std::sqrt(n) : 1.0;
    double ratio = 0.0;
    double anorm = 0.0;
    for (Index i = 0; i < p.m; ++i) {
      const double a = p.at[k].col(i).norm();
      ratio = std::max(ratio, (1.0 + std::abs(p.b(i))) / (1.0 + a));
      anorm = std::max(anorm, a);
    }
    const double zeta = std::max({10.0, std::sqrt(n), theta * ratio});
    const double eta = std::max({10.0, std::sqrt(n), anorm, p.c[k].norm()});
    const Matrix e = cones::identity(s);
    pt.x.blocks.push_back(zeta * e);
    pt.z.blocks.push_back(eta * e);
  }
  return pt;
}

double max_step_block(const BlockSpec& spec, const Matrix& v, const Matrix& dv,
                      const linalg::LinalgSettings& settings) {
  switch (spec.kind) {
    case ConeKind::Free: return kInf;
    case ConeKind::Lin: {
      double a = kInf;
      for (Index i = 0; i < v.rows(); ++i) {
        if (dv(i, 0) < 0.0) a = std::min(a, -v(i, 0) / dv(i, 0));
      }
      return a;
    }
    case ConeKind::Soc: {
      const Vector x = v.col(0);
      const Vector d = dv.col(0);
      const Index r = x.size() - 1;
      const double a = d(0) * d(0) - d.tail(r).squaredNorm();
      const double b = x(0) * d(0) - x.tail(r).dot(d.tail(r));
      const double xn = x.tail(r).norm();
      const double c = (x(0) - xn) * (x(0) + xn);
      if (!(c > 0.0) || !(x(0) > 0.0)) throw ConeError("step length: iterate not interior");
      const double disc = b * b - a * c;
      if (a < 0.0) {
        const double sd = std::sqrt(disc);
        return b <= 0.0 ? c / (sd - b) : (-b - sd) / a;
      }
      if (a == 0.0) return b < 0.0 ? -c / (2.0 * b) : kInf;
      if (b < 0.0 && disc >= 0.0) return c / (-b + std::sqrt(disc));
      return kInf;
    }
    case ConeKind::Sdp: {
      linalg::CholFactor f;
      try {
        f = linalg::chol(linalg::SymMat(v));
      } catch (const linalg::NotPositiveDefinite&) {
        throw ConeError("step length: iterate not positive definite");
      }
      const auto& l = f.lower;
      const Matrix t = l.triangularView<Eigen::Lower>().solve(dv);
      const Matrix w = l.triangularView<Eigen::Lower>().solve(t.transpose());
      const double lmax = linalg::max_eigval(linalg::SymMat(Matrix(-w)), settings);
      return lmax > 0.0 ? 1.0 / lmax : kInf;
    }
  }
  return kInf;
}

double max_step(std::span<const BlockSpec> specs, const BlockVec& v, const BlockVec& dv,
                const linalg::LinalgSettings& settings) {
  double a = 1.0;
  for (std::size_t k = 0; k < specs.size(); ++k) {
    a = std::min(a, max_step_block(specs[k], v[k], dv[k], settings));
  }
  return a;
}

Steps step_lengths(std::span<const BlockSpec> specs, const BlockVec& x, const BlockVec& dx,
                   const BlockVec& z, const BlockVec& dz, double gamma,
                   const linalg::LinalgSettings& settings) {
  return {gamma * max_step(specs, x, dx, settings), gamma * max_step(specs, z, dz, settings)};
}

double centering_exponent(double mu, double alpha_p, double alpha_d, double psi_hat) {
  const double a = std::min(alpha_p, alpha_d);
  const double t = 3.0 * a * a;
  if (mu > 1e-6) return std::max(psi_hat, t);
  return std::max(1.0, std::min(psi_hat, t));
}

double centering_sigma(std::span<const BlockSpec> specs, const BlockVec& x, const BlockVec& z,
                       const BlockVec& dx, const BlockVec& dz, double alpha_p, double alpha_d,
                       double mu, double psi_hat) {
  // same blocks as μ: barrier blocks keep ⟨x,z⟩ near νn and would pin r at 1
  double xz = 0.0;
  double next = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (specs[k].kind == ConeKind::Free || specs[k].barrier != 0.0) continue;
    xz += cones::inner(x[k], z[k]);
    next += cones::inner(Matrix(x[k] + alpha_p * dx[k]), Matrix(z[k] + alpha_d * dz[k]));
  }
  if (!(xz > 0.0)) throw std::domain_error("centering: <x,z> is not positive");
  const double r = next / xz;
  if (r >= 1.0) return 1.0;
  if (r <= 0.0) return 0.0;
  return std::min(1.0, std::pow(r, centering_exponent(mu, alpha_p, alpha_d, psi_hat)));
}

InfeasibilityRatios infeasibility_ratios(const ProblemData& p, const BlockVec& x,
                                         const Vector& y, const BlockVec& z) {
  InfeasibilityRatios r;
  double den = 0.0;
  for (std::size_t k = 0; k < p.specs.size(); ++k) {
    den += (apply_adjoint_block(p, k, y) + z[k]).norm();
  }
  const double by = p.b.dot(y);
  r.primal = den > 0.0 ? by / den : 0.0;
  const double ax = apply_op(p, x).norm();
  const double cx = -cones::inner(p.c, x);
  r.dual = ax > 0.0 ? cx / ax : 0.0;
  return r;
}

void History::push(const Metrics& m, std::size_t window) {
  recent.push_back(m);
  while (recent.size() > window + 1) recent.pop_front();
  if (m.gap > 0.0) min_gap = std::min(min_gap, m.gap);
}

std::optional<Status> check_termination(const Metrics& m, const InfeasibilityRatios& r,
                                        const History& history, int iteration,
                                        const SolverOptions& options) {
  if (!std::isfinite(m.gap) || !std::isfinite(m.pinfeas) || !std::isfinite(m.dinfeas)) {
    return Status::NumericalFailure;
  }
  if (std::max({m.relgap, m.pinfeas, m.dinfeas}) < options.eps) return Status::Optimal;
  if (r.primal > options.kappa) return Status::PrimalInfeasible;
  if (r.dual > options.kappa) return Status::DualInfeasible;
  const bool near_feasible = std::max(m.pinfeas, m.dinfeas) < std::sqrt(options.eps);
  if (near_feasible && std::isfinite(history.min_gap) && m.relgap > options.eps &&
      m.gap > options.divergence_factor * history.min_gap) {
    return Status::NumericalFailure;
  }
  const auto w = static_cast<std::size_t>(options.slow_window);
  if (w > 0 && near_feasible && history.recent.size() >= w && m.relgap < 1e4 * options.eps) {
    bool stalled = true;
    double next = m.relgap;
    for (std::size_t i = 0; i < w; ++i) {
      const double prev = history.recent[history.recent.size() - 1 - i].relgap;
      if (next < 0.9 * prev) {
        stalled = false;
        break;
      }
      next = prev;
    }
    if (stalled) return Status::SlowProgress;
  }
  if (iteration >= options.max_iters) return Status::MaxIter;
  return std::nullopt;
}

void stabilize_split(Vector& xplus, Vector& xminus, Vector& zplus, Vector& zminus,
                     double mu, double shift) {
  const Vector mn = xplus.cwiseMin(xminus);
  xplus -= 0.8 * mn;
  xminus -= 0.8 * mn;
  zplus.array() += shift * mu;
  zminus.array() += shift * mu;
}

void stabilize_pairs(BlockVec& x, BlockVec& z, std::span<const preprocess::VariablePair> pairs,
                     double mu, double shift) {
  for (const auto& pr : pairs) {
    Vector xp(1), xm(1), zp(1), zm(1);
    xp(0) = x[pr.block](pr.plus, 0);
    xm(0) = x[pr.block](pr.minus, 0);
    zp(0) = z[pr.block](pr.plus, 0);
    zm(0) = z[pr.block](pr.minus, 0);
    stabilize_split(xp, xm, zp, zm, mu, shift);
    x[pr.block](pr.plus, 0) = xp(0);
    x[pr.block](pr.minus, 0) = xm(0);
    z[pr.block](pr.plus, 0) = zp(0);
    z[pr.block](pr.minus, 0) = zm(0);
  }
}

Structure analyse(const ProblemData& p, const SolverOptions& options) {
  Structure s;
  s.plans.resize(p.specs.size());
  s.dense.resize(p.specs.size());
  Index nu = 0;
  for (std::size_t k = 0; k < p.specs.size(); ++k) {
    const auto& spec = p.specs[k];
    if (spec.kind == ConeKind::Sdp) s.plans[k] = directions::plan_sdp(p.at[k], spec.dim);
    if (spec.kind == ConeKind::Soc || spec.kind == ConeKind::Lin) {
      s.dense[k] = directions::dense_columns(p.at[k], options.dense_column_ratio);
    }
    if (spec.kind == ConeKind::Free) {
      s.free_blocks.push_back(k);
      nu += spec.dim;
    }
  }
  s.au.resize(p.m, nu);
  Index off = 0;
  for (std::size_t k : s.free_blocks) {
    s.au.middleCols(off, p.specs[k].dim) = p.at[k].transpose();
    off += p.specs[k].dim;
  }
  return s;
}

NewtonSystem::NewtonSystem(const ProblemData& p, const Structure& s, const BlockVec& x,
                           const Vector& y, const BlockVec& z, const SolverOptions& options,
                           const schur::PerturbationState& state)
    : p_(&p), x_(&x), z_(&z) {
  const std::span<const BlockSpec> specs(p.specs);
  res_ = directions::residuals(p, x, y, z);
  scaling_ = directions::compute_scaling(specs, x, z, options.direction);
  std::vector<directions::SchurIngredients> ingredients;
  for (std::size_t k = 0; k < specs.size(); ++k) {
    const auto& spec = specs[k];
    if (spec.kind == ConeKind::Free) continue;
    if (spec.kind == ConeKind::Sdp) {
      directions::SchurIngredients ing;
      ing.m_sparse = directions::schur_block_sdp(*s.plans[k], x[k], scaling_.blocks[k]);
      ing.u = Matrix::Zero(p.m, 0);
      ing.neg_dinv = Matrix::Zero(0, 0);
      ing.a_sparse_gram = p.at[k].transpose() * p.at[k];
      ingredients.push_back(std::move(ing));
    } else {
      ingredients.push_back(directions::schur_block_lowrank(spec, p.at[k], x[k], z[k],
                                                            scaling_.blocks[k], s.dense[k]));
    }
  }
  sys_ = schur::assemble(ingredients, s.au, state);
  schur::factorize(sys_, options.lu_fallback_ratio, options.linalg.lu_pivot_threshold);
  rd_free_.resize(s.au.cols());
  Index off = 0;
  for (std::size_t k : s.free_blocks) {
    rd_free_.segment(off, p.specs[k].dim) = res_.rdual[k].col(0);
    off += p.specs[k].dim;
  }
  krylov_ = {options.krylov_tol, options.krylov_max_iters, options.krylov_fail_tol, 10};
}

NewtonSystem::Rhs NewtonSystem::rhs(std::span<const double> targets) const {
  const auto& p = *p_;
  Rhs out;
  out.h = res_.rprim;
  for (std::size_t k = 0; k < p.specs.size(); ++k) {
    const auto& spec = p.specs[k];
    if (spec.kind == ConeKind::Free) {
      out.einv_rc.blocks.push_back(Matrix::Zero(spec.dim, 1));
      continue;
    }
    out.einv_rc.blocks.push_back(
        directions::einv_rcomp(spec, (*x_)[k], (*z_)[k], targets[k]));
    const Matrix hrd =
        directions::h_rdual(spec, scaling_.blocks[k], (*x_)[k], (*z_)[k], res_.rdual[k]);
    out.h -= directions::h_block(p, k, out.einv_rc[k], hrd);
  }
  return out;
}

SearchDirection NewtonSystem::finish(const Vector& h, const BlockVec& einv_rc) const {
  const auto sol = schur::solve(sys_, h, rd_free_, krylov_);
  auto [dx, dz] = directions::recover_dxdz(*p_, res_, *x_, *z_, scaling_, sol.dy, sol.dx_free,
                                           einv_rc);
  SearchDirection out{std::move(dx), sol.dy, std::move(dz), sol.iterations, sol.residual};
  refine_primal_rows(out);
  return out;
}

// Near the boundary h is dominated by the H-weighted terms and r_p is lost to
// cancellation, so Σ𝒜ᵖΔxᵖ can miss r_p badly even when the Schur system is
// solved to machine precision. A correction with right-hand side
// (r_p − Σ𝒜ᵖΔxᵖ, R_dualᵘ − (Aᵘ)ᵀΔy) reuses the factorization; δz = −𝒜ᵀδy and
// δx = −H δz leave the dual and complementarity rows unchanged.
void NewtonSystem::refine_primal_rows(SearchDirection& d) const {
  const auto& p = *p_;
  auto defect = [&](const SearchDirection& s, Vector& rp, Vector& ru) {
    rp = res_.rprim - apply_op(p, s.dx);
    ru = rd_free_ - sys_.au.transpose() * s.dy;
    return std::hypot(rp.norm(), ru.norm());
  };
  Vector rp, ru;
  double err = defect(d, rp, ru);
  directions::Residuals none;
  none.rprim = Vector::Zero(p.m);
  none.rdual = BlockVec::zeros(p.specs);
  const BlockVec no_rc = BlockVec::zeros(p.specs);
  for (int pass = 0; pass < 2 && err > 0.0; ++pass) {
    schur::Solution corr;
    try {
      corr = schur::solve(sys_, rp, ru, krylov_);
    } catch (const schur::NonConvergence&) {
      return;
    }
    auto [cx, cz] = directions::recover_dxdz(p, none, *x_, *z_, scaling_, corr.dy, corr.dx_free,
                                             no_rc);
    SearchDirection next = d;
    next.dy += corr.dy;
    for (std::size_t k = 0; k < p.specs.size(); ++k) {
      next.dx.blocks[k] += cx[k];
      next.dz.blocks[k] += cz[k];
    }
    next.krylov_iters += corr.iterations;
    Vector rp2, ru2;
    const double err2 = defect(next, rp2, ru2);
    if (!(err2 < err)) return;
    d = std::move(next);
    err = err2;
    rp = std::move(rp2);
    ru = std::move(ru2);
  }
}

SearchDirection NewtonSystem::solve(std::span<const double> targets) const {
  if (targets.size() != p_->specs.size()) {
    throw std::invalid_argument("NewtonSystem::solve: one target per block expected");
  }
  const Rhs r = rhs(targets);
  return finish(r.h, r.einv_rc);
}

SearchDirection NewtonSystem::correct(const SearchDirection& pred,
                                      std::span<const double> pred_targets,
                                      std::span<const double> targets) const {
  if (targets.size() != p_->specs.size() || pred_targets.size() != p_->specs.size()) {
    throw std::invalid_argument("NewtonSystem::correct: one target per block expected");
  }
  const Rhs r = rhs(pred_targets);
  const auto c = schur::corrector_rhs(*p_, r.h, r.einv_rc, scaling_, *x_, *z_, pred.dx, pred.dz,
                                      pred_targets, targets);
  return finish(c.h, c.einv_rc);
}

namespace {

bool strictly_interior(const Matrix& v, const BlockSpec& spec) {
  switch (spec.kind) {
    case ConeKind::Free: return true;
    case ConeKind::Lin: return (v.array() > 0.0).all();
    case ConeKind::Soc: {
      const double xn = v.col(0).tail(spec.dim - 1).norm();
      return v(0, 0) > xn;
    }
    case ConeKind::Sdp:
      try {
        linalg::chol(linalg::SymMat(v));
        return true;
      } catch (const linalg::NotPositiveDefinite&) {
        return false;
      }
  }
  return false;
}

}  // namespace

SolveResult solve_preprocessed(const ProblemData& p, const SolverOptions& options,
                               std::span<const preprocess::VariablePair> pairs) {
  SolveResult result;
  if (const auto bad = options.check(); !bad.empty()) {
    result.status = Status::NumericalFailure;
    result.message = "invalid options: " + bad.front();
    return result;
  }
  const auto findings = validate(p);
  if (!findings.empty()) {
    result.status = Status::NumericalFailure;
    result.message = "invalid problem: " + findings.front().message;
    return result;
  }

  const std::span<const BlockSpec> specs(p.specs);
  Point cur = initial_point(p);
  History history;
  IterationRecord pending;
  bool previous_failed = false;
  int iter = 0;
  const std::uint64_t factorizations_before = schur::factorization_count();

  auto finish = [&](Status st, const Metrics& m, std::string msg) {
    result.status = st;
    result.factorizations = static_cast<int>(schur::factorization_count() - factorizations_before);
    result.x = cur.x;
    result.y = cur.y;
    result.z = cur.z;
    result.pobj = m.pobj;
    result.dobj = m.dobj;
    result.gap = m.gap;
    result.relgap = m.relgap;
    result.pinfeas = m.pinfeas;
    result.dinfeas = m.dinfeas;
    result.iterations = iter;
    result.message = std::move(msg);
    return result;
  };

  Structure st;
  Metrics metrics;
  try {
    st = analyse(p, options);
    metrics = evaluate_metrics(p, cur.x, cur.y, cur.z);
  } catch (const std::exception& e) {
    return finish(Status::NumericalFailure, metrics, e.what());
  }

  while (true) {
    double mu_now = 0.0;
    try {
      metrics = evaluate_metrics(p, cur.x, cur.y, cur.z);
      mu_now = directions::mu(cur.x, cur.z, specs);
    } catch (const std::exception& e) {
      return finish(Status::NumericalFailure, metrics, e.what());
    }
    pending.iter = iter;
    pending.mu = mu_now;
    pending.pobj = metrics.pobj;
    pending.dobj = metrics.dobj;
    pending.gap = metrics.gap;
    pending.relgap = metrics.relgap;
    pending.pinfeas = metrics.pinfeas;
    pending.dinfeas = metrics.dinfeas;
    result.trace.push_back(pending);

    const auto ratios = infeasibility_ratios(p, cur.x, cur.y, cur.z);
    if (const auto status = check_termination(metrics, ratios, history, iter, options)) {
      std::string msg;
      if (*status == Status::NumericalFailure) msg = "duality gap diverged";
      return finish(*status, metrics, msg);
    }
    history.push(metrics, static_cast<std::size_t>(options.slow_window));

    try {
      schur::PerturbationState pstate;
      pstate.iteration = iter;
      pstate.previous_failed = previous_failed;
      pstate.rho0 = options.rho0;
      pstate.lambda0 = options.lambda0;
      const NewtonSystem newton(p, st, cur.x, cur.y, cur.z, options, pstate);
      const auto& sys = newton.system();
      previous_failed = sys.path == schur::Path::FullLu;

      std::vector<double> tpred(specs.size(), 0.0);
      std::vector<double> tcorr(specs.size(), 0.0);
      for (std::size_t k = 0; k < specs.size(); ++k) {
        if (specs[k].kind != ConeKind::Free) tpred[k] = specs[k].barrier;
      }
      const auto pred = newton.solve(tpred);
      const Steps trial =
          step_lengths(specs, cur.x, pred.dx, cur.z, pred.dz, options.gamma, options.linalg);
      const double sigma = centering_sigma(specs, cur.x, cur.z, pred.dx, pred.dz, trial.primal,
                                           trial.dual, mu_now, options.psi_hat);
      for (std::size_t k = 0; k < specs.size(); ++k) {
        if (specs[k].kind != ConeKind::Free) tcorr[k] = std::max(sigma * mu_now, specs[k].barrier);
      }
      const auto sol = newton.correct(pred, tpred, tcorr);
      const auto& ddx = sol.dx;
      const auto& ddz = sol.dz;
      const Steps beta = step_lengths(specs, cur.x, ddx, cur.z, ddz, options.gamma, options.linalg);

      Point next = cur;
      for (std::size_t k = 0; k < specs.size(); ++k) {
        next.x.blocks[k] += beta.primal * ddx[k];
        next.z.blocks[k] += beta.dual * ddz[k];
      }
      next.y += beta.dual * sol.dy;
      if (!pairs.empty()) {
        stabilize_pairs(next.x, next.z, pairs, directions::mu(next.x, next.z, specs),
                        options.stabilize_dual_shift);
      }
      for (std::size_t k = 0; k < specs.size(); ++k) {
        if (!strictly_interior(next.x[k], specs[k])) throw ConeError("primal iterate left the cone");
        if (!strictly_interior(next.z[k], specs[k])) throw ConeError("dual iterate left the cone");
      }
      cur = std::move(next);
      ++iter;
      pending = IterationRecord{};
      pending.sigma = sigma;
      pending.alpha_p = beta.primal;
      pending.alpha_d = beta.dual;
      pending.path = std::string(schur::to_string(sys.path));
      pending.perturbed = sys.perturbed;
      pending.krylov_iters = pred.krylov_iters + sol.krylov_iters;
    } catch (const std::exception& e) {
      return finish(Status::NumericalFailure, metrics, e.what());
    }
  }
}

namespace {

std::vector<preprocess::VariablePair> stabilization_pairs(const preprocess::Transformed& t) {
  auto pairs = preprocess::split_pairs(t.log);
  for (const auto& pr : preprocess::detect_implicit_unrestricted(t.problem)) {
    if (std::find(pairs.begin(), pairs.end(), pr) == pairs.end()) pairs.push_back(pr);
  }
  return pairs;
}

}  // namespace

SolveResult solve(const ProblemData& p, const SolverOptions& options) {
  try {
    const auto findings = validate(p);
    if (!findings.empty()) {
      SolveResult r;
      r.status = Status::NumericalFailure;
      r.message = "invalid problem: " + findings.front().message;
      return r;
    }
    const auto t = preprocess::run_pipeline(p, options.preprocess);
    const auto pairs = stabilization_pairs(t);
    const SolveResult inner = solve_preprocessed(t.problem, options, pairs);
    if (inner.x.size() != t.problem.specs.size()) return inner;
    return preprocess::postprocess(inner, t.log, p);
  } catch (const std::exception& e) {
    SolveResult r;
    r.status = Status::NumericalFailure;
    r.message = e.what();
    return r;
  }
}

}  // namespace sqlp::ipm
