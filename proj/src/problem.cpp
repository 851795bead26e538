#include "sqlp/problem.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sqlp {

namespace {

std::string block_label(std::size_t p) { return "block " + std::to_string(p + 1); }

bool all_finite(const Matrix& a) { return a.allFinite(); }

}  // namespace

std::vector<Finding> validate(const ProblemData& p) {
  std::vector<Finding> out;
  auto add = [&](std::string msg, int block = -1, int constraint = -1) {
    out.push_back({std::move(msg), block, constraint});
  };

  if (p.specs.empty()) add("problem has no blocks");
  if (p.m < 0) add("negative constraint count");
  if (p.b.size() != p.m) {
    add("b has length " + std::to_string(p.b.size()) + ", expected m = " +
        std::to_string(p.m));
  } else if (!p.b.allFinite()) {
    add("b has non-finite entries");
  }
  if (p.c.size() != p.specs.size()) add("C has wrong number of blocks");
  if (p.at.size() != p.specs.size()) add("A has wrong number of blocks");

  for (std::size_t k = 0; k < p.specs.size(); ++k) {
    const auto& s = p.specs[k];
    const int bi = static_cast<int>(k);
    if (s.dim < 1) add(block_label(k) + ": dimension must be positive", bi);
    if (s.kind == ConeKind::Soc && s.dim < 2) {
      add(block_label(k) + ": second-order block needs dimension >= 2", bi);
    }
    if (!(s.barrier >= 0.0) || !std::isfinite(s.barrier)) {
      add(block_label(k) + ": barrier parameter must be finite and >= 0", bi);
    }
    if (s.dim < 1) continue;
    if (k < p.c.size()) {
      const Matrix& c = p.c[k];
      const Index cols = s.kind == ConeKind::Sdp ? s.dim : 1;
      if (c.rows() != s.dim || c.cols() != cols) {
        add(block_label(k) + ": C has the wrong shape", bi);
      } else if (!all_finite(c)) {
        add(block_label(k) + ": C has non-finite entries", bi);
      } else if (s.kind == ConeKind::Sdp && c != c.transpose()) {
        add(block_label(k) + ": C is not symmetric", bi);
      }
    }
    if (k < p.at.size()) {
      const Matrix& a = p.at[k];
      if (a.rows() != vec_length(s) || a.cols() != p.m) {
        add(block_label(k) + ": A has shape " + std::to_string(a.rows()) + "x" +
                std::to_string(a.cols()) + ", expected " +
                std::to_string(vec_length(s)) + "x" + std::to_string(p.m),
            bi);
      } else {
        for (Index j = 0; j < a.cols(); ++j) {
          if (!a.col(j).allFinite()) {
            add(block_label(k) + ": constraint " + std::to_string(j + 1) +
                    " has non-finite coefficients",
                bi, static_cast<int>(j));
          }
        }
      }
    }
  }
  return out;
}

void require_valid(const ProblemData& p) {
  const auto findings = validate(p);
  if (findings.empty()) return;
  std::ostringstream os;
  os << "invalid problem:";
  for (const auto& f : findings) os << "\n  " << f.message;
  throw std::invalid_argument(os.str());
}

Vector vectorize(const Matrix& v, const BlockSpec& spec) {
  if (spec.kind == ConeKind::Sdp) return cones::svec(v);
  return v.col(0);
}

Matrix unvectorize(const Vector& v, const BlockSpec& spec) {
  if (spec.kind == ConeKind::Sdp) return cones::smat(v);
  return v;
}

Vector apply_op_block(const ProblemData& p, std::size_t block, const Matrix& x) {
  return p.at[block].transpose() * vectorize(x, p.specs[block]);
}

Vector apply_op(const ProblemData& p, const BlockVec& x) {
  if (x.size() != p.specs.size()) throw linalg::DimensionError("apply_op: block count");
  Vector out = Vector::Zero(p.m);
  for (std::size_t k = 0; k < p.specs.size(); ++k) out += apply_op_block(p, k, x[k]);
  return out;
}

Matrix apply_adjoint_block(const ProblemData& p, std::size_t block, const Vector& y) {
  if (y.size() != p.m) throw linalg::DimensionError("apply_adjoint: y length");
  return unvectorize(p.at[block] * y, p.specs[block]);
}

BlockVec apply_adjoint(const ProblemData& p, const Vector& y) {
  BlockVec out;
  out.blocks.reserve(p.specs.size());
  for (std::size_t k = 0; k < p.specs.size(); ++k) {
    out.blocks.push_back(apply_adjoint_block(p, k, y));
  }
  return out;
}

Objectives objectives(const ProblemData& p, const BlockVec& x, const Vector& y,
                      const BlockVec& z) {
  Objectives o;
  o.primal = cones::inner(p.c, x) + cones::barrier_terms(x, p.specs, cones::Side::Primal);
  o.dual = p.b.dot(y) + cones::barrier_terms(z, p.specs, cones::Side::Dual);
  return o;
}

Metrics evaluate_metrics(const ProblemData& p, const BlockVec& x, const Vector& y,
                         const BlockVec& z) {
  Metrics mt;
  const Objectives o = objectives(p, x, y, z);
  mt.pobj = o.primal;
  mt.dobj = o.dual;
  mt.gap = cones::inner(x, z) +
           cones::barrier_terms(x, p.specs, cones::Side::Primal) -
           cones::barrier_terms(z, p.specs, cones::Side::Dual);
  const double cx = cones::inner(p.c, x);
  const double by = p.b.dot(y);
  mt.relgap = mt.gap / (1.0 + std::abs(cx) + std::abs(by));
  mt.pinfeas = (p.b - apply_op(p, x)).norm() / (1.0 + p.b.norm());
  double rd = 0.0;
  for (std::size_t k = 0; k < p.specs.size(); ++k) {
    rd += (p.c[k] - z[k] - apply_adjoint_block(p, k, y)).norm();
  }
  mt.dinfeas = rd / (1.0 + cones::norm_sum(p.c));
  return mt;
}

std::string_view to_string(Direction d) { return d == Direction::Hkm ? "hkm" : "nt"; }

std::optional<Direction> parse_direction(std::string_view name) {
  if (name == "hkm" || name == "HKM") return Direction::Hkm;
  if (name == "nt" || name == "NT") return Direction::Nt;
  return std::nullopt;
}

std::vector<std::string> SolverOptions::check() const {
  std::vector<std::string> out;
  if (!(gamma > 0.0 && gamma < 1.0)) out.push_back("gamma must lie in (0, 1)");
  if (!(eps > 0.0)) out.push_back("eps must be positive");
  if (!(kappa > 0.0)) out.push_back("kappa must be positive");
  if (!(psi_hat >= 1.0)) out.push_back("psi_hat must be >= 1");
  if (!(dense_column_ratio > 0.0 && dense_column_ratio <= 1.0)) {
    out.push_back("dense column ratio must lie in (0, 1]");
  }
  if (max_iters < 0) out.push_back("max_iters must be >= 0");
  if (krylov_max_iters < 1) out.push_back("krylov_max_iters must be >= 1");
  if (slow_window < 1) out.push_back("slow_window must be >= 1");
  return out;
}

std::string_view to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::MaxIter: return "max iterations";
    case Status::PrimalInfeasible: return "primal infeasible";
    case Status::DualInfeasible: return "dual infeasible";
    case Status::NumericalFailure: return "numerical failure";
    case Status::SlowProgress: return "slow progress";
  }
  return "?";
}

std::optional<Status> parse_status(std::string_view name) {
  for (Status s : {Status::Optimal, Status::MaxIter, Status::PrimalInfeasible,
                   Status::DualInfeasible, Status::NumericalFailure,
                   Status::SlowProgress}) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

}  // namespace sqlp
