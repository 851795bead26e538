#pragma once

// Problem instance, solver options and results, plus the linear maps
// x ↦ Σ Aᵖxᵖ and y ↦ (Aᵖ)ᵀy shared by every stage of the solver.

#include "sqlp/cones.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sqlp {

/// min Σ⟨cᵖ,xᵖ⟩ + Σφᵖ(xᵖ;νᵖ)  s.t.  Σ Aᵖxᵖ = b,  xᵖ ∈ 𝕂ᵖ.
///
/// at[p] has one column per constraint. Row layout is svec(aᵖ_k) for SDP
/// blocks and aᵖ_k itself otherwise, so 𝒜ᵖxᵖ = at[p]ᵀ vec(xᵖ).
struct ProblemData {
  std::vector<BlockSpec> specs;
  Index m = 0;
  Vector b;
  BlockVec c;
  std::vector<Matrix> at;

  std::size_t num_blocks() const { return specs.size(); }
  bool operator==(const ProblemData&) const = default;
};

struct Finding {
  std::string message;
  int block = -1;       // zero-based, -1 when not block specific
  int constraint = -1;  // zero-based, -1 when not constraint specific
};

/// Empty iff every structural invariant holds.
std::vector<Finding> validate(const ProblemData& p);
/// Throws std::invalid_argument listing the findings, if any.
void require_valid(const ProblemData& p);

/// vec(xᵖ): svec for SDP payloads, the payload itself otherwise.
Vector vectorize(const Matrix& v, const BlockSpec& spec);
Matrix unvectorize(const Vector& v, const BlockSpec& spec);

Vector apply_op(const ProblemData& p, const BlockVec& x);
Vector apply_op_block(const ProblemData& p, std::size_t block, const Matrix& x);
BlockVec apply_adjoint(const ProblemData& p, const Vector& y);
Matrix apply_adjoint_block(const ProblemData& p, std::size_t block, const Vector& y);

struct Objectives {
  double primal = 0.0;
  double dual = 0.0;
};

Objectives objectives(const ProblemData& p, const BlockVec& x, const Vector& y,
                      const BlockVec& z);

enum class Direction { Hkm, Nt };

std::string_view to_string(Direction d);
std::optional<Direction> parse_direction(std::string_view name);

struct SolverOptions {
  Direction direction = Direction::Hkm;
  double eps = 1e-8;
  double kappa = 1e10;
  int max_iters = 100;
  double gamma = 0.99;
  double psi_hat = 3.0;
  double dense_column_ratio = 0.4;
  double rho0 = 1e-6;
  double lambda0 = 1e-4;
  double krylov_tol = 1e-11;
  int krylov_max_iters = 50;
  double krylov_fail_tol = 1e-4;
  double lu_fallback_ratio = 1e30;
  double divergence_factor = 1e3;
  int slow_window = 5;
  double stabilize_dual_shift = 0.1;
  bool preprocess = true;
  std::uint64_t seed = 0;
  linalg::LinalgSettings linalg;

  /// Empty iff the option invariants hold.
  std::vector<std::string> check() const;
};

enum class Status {
  Optimal,
  MaxIter,
  PrimalInfeasible,
  DualInfeasible,
  NumericalFailure,
  SlowProgress,
};

std::string_view to_string(Status s);
std::optional<Status> parse_status(std::string_view name);

struct IterationRecord {
  int iter = 0;
  double mu = 0.0;
  double sigma = 0.0;
  double alpha_p = 0.0;
  double alpha_d = 0.0;
  double pobj = 0.0;
  double dobj = 0.0;
  double gap = 0.0;
  double relgap = 0.0;
  double pinfeas = 0.0;
  double dinfeas = 0.0;
  std::string path;  // "chol" or "lu"; empty on the final metrics-only row
  bool perturbed = false;
  int krylov_iters = 0;

  bool operator==(const IterationRecord&) const = default;
};

struct SolveResult {
  Status status = Status::NumericalFailure;
  BlockVec x;
  Vector y;
  BlockVec z;
  double pobj = 0.0;
  double dobj = 0.0;
  double gap = 0.0;
  double relgap = 0.0;
  double pinfeas = 0.0;
  double dinfeas = 0.0;
  int iterations = 0;
  int factorizations = 0;
  std::string message;
  std::vector<IterationRecord> trace;
};

/// Residual-based quality measures of (x, y, z) for p.
struct Metrics {
  double pobj = 0.0;
  double dobj = 0.0;
  double gap = 0.0;
  double relgap = 0.0;
  double pinfeas = 0.0;
  double dinfeas = 0.0;
};

Metrics evaluate_metrics(const ProblemData& p, const BlockVec& x, const Vector& y,
                         const BlockVec& z);

}  // namespace sqlp
