#pragma once

// Infeasible primal-dual path-following driver with Mehrotra-type
// predictor-corrector steps.

#include "sqlp/preprocess.hpp"
#include "sqlp/schur.hpp"

#include <deque>
#include <limits>

namespace sqlp::ipm {

using preprocess::Point;

/// y = 0, xᵖ = ζᵖeᵖ, zᵖ = ηᵖeᵖ (zero on free blocks).
Point initial_point(const ProblemData& p);

/// sup{α ≥ 0 : v + α dv ∈ 𝕂}, +∞ when unbounded. v must be interior.
double max_step_block(const BlockSpec& spec, const Matrix& v, const Matrix& dv,
                      const linalg::LinalgSettings& settings = {});

/// min{1, minₚ max_step_block}.
double max_step(std::span<const BlockSpec> specs, const BlockVec& v, const BlockVec& dv,
                const linalg::LinalgSettings& settings = {});

struct Steps {
  double primal = 0.0;
  double dual = 0.0;
};

/// (γ α_x, γ α_z).
Steps step_lengths(std::span<const BlockSpec> specs, const BlockVec& x, const BlockVec& dx,
                   const BlockVec& z, const BlockVec& dz, double gamma,
                   const linalg::LinalgSettings& settings = {});

/// Adaptive exponent ψ of the centering rule.
double centering_exponent(double mu, double alpha_p, double alpha_d, double psi_hat);

/// σ = min{1, (⟨x+αP δx, z+αD δz⟩ / ⟨x,z⟩)^ψ}, with the inner products taken
/// over the blocks that enter μ (ν = 0, not free).
double centering_sigma(std::span<const BlockSpec> specs, const BlockVec& x, const BlockVec& z,
                       const BlockVec& dx, const BlockVec& dz, double alpha_p, double alpha_d,
                       double mu, double psi_hat);

/// bᵀy / Σ‖(Aᵖ)ᵀy + zᵖ‖ and −⟨c,x⟩ / ‖Σ Aᵖxᵖ‖; a zero denominator gives 0.
struct InfeasibilityRatios {
  double primal = 0.0;
  double dual = 0.0;
};

InfeasibilityRatios infeasibility_ratios(const ProblemData& p, const BlockVec& x,
                                         const Vector& y, const BlockVec& z);

struct History {
  std::deque<Metrics> recent;  // newest last
  double min_gap = std::numeric_limits<double>::infinity();

  void push(const Metrics& m, std::size_t window);
};

/// Checks, in order: optimality, primal and dual infeasibility, gap
/// divergence, slow progress and the iteration limit. `history` holds the
/// records before `m`. Divergence and slow progress are only considered once
/// both infeasibilities are below √ε.
std::optional<Status> check_termination(const Metrics& m, const InfeasibilityRatios& r,
                                        const History& history, int iteration,
                                        const SolverOptions& options);

/// x± ← x± − 0.8 min(x₊, x₋) elementwise, z± ← z± + shift·μ.
void stabilize_split(Vector& xplus, Vector& xminus, Vector& zplus, Vector& zminus,
                     double mu, double shift = 0.1);

/// Applies stabilize_split to every pair of LIN coordinates.
void stabilize_pairs(BlockVec& x, BlockVec& z, std::span<const preprocess::VariablePair> pairs,
                     double mu, double shift = 0.1);

/// Sparsity analysis reused by every iteration.
struct Structure {
  std::vector<std::optional<directions::SdpPlan>> plans;
  std::vector<std::vector<bool>> dense;  // per SOC/LIN block
  Matrix au;                             // m × n_u, free columns side by side
  std::vector<std::size_t> free_blocks;
};

Structure analyse(const ProblemData& p, const SolverOptions& options);

struct SearchDirection {
  BlockVec dx;
  Vector dy;
  BlockVec dz;
  int krylov_iters = 0;
  double residual = 0.0;
};

/// The Newton equations at one iterate. Construction assembles and factors
/// the augmented system once; every solve reuses that factorization. p, x and
/// z are referenced, not copied.
class NewtonSystem {
 public:
  NewtonSystem(const ProblemData& p, const Structure& s, const BlockVec& x, const Vector& y,
               const BlockVec& z, const SolverOptions& options,
               const schur::PerturbationState& state);

  /// Direction with complementarity target targets[p]·eᵖ on each block.
  SearchDirection solve(std::span<const double> targets) const;

  /// Corrected direction from the predictor `pred` computed with `pred_targets`.
  SearchDirection correct(const SearchDirection& pred, std::span<const double> pred_targets,
                          std::span<const double> targets) const;

  const schur::AugmentedSystem& system() const { return sys_; }
  const directions::Scaling& scaling() const { return scaling_; }
  const directions::Residuals& residuals() const { return res_; }

 private:
  struct Rhs {
    Vector h;
    BlockVec einv_rc;
  };
  Rhs rhs(std::span<const double> targets) const;
  SearchDirection finish(const Vector& h, const BlockVec& einv_rc) const;
  void refine_primal_rows(SearchDirection& d) const;

  const ProblemData* p_;
  const BlockVec* x_;
  const BlockVec* z_;
  directions::Residuals res_;
  directions::Scaling scaling_;
  schur::AugmentedSystem sys_;
  Vector rd_free_;
  schur::KrylovSettings krylov_;
};

/// Runs the loop on an already preprocessed problem.
SolveResult solve_preprocessed(const ProblemData& p, const SolverOptions& options,
                               std::span<const preprocess::VariablePair> pairs = {});

/// Preprocesses, solves and maps the solution back to p. Never throws.
SolveResult solve(const ProblemData& p, const SolverOptions& options = {});

}  // namespace sqlp::ipm
