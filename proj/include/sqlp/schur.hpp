#pragma once

// The augmented Schur system
//
//   [ M_sparse  Aᵘ  U    ] [Δy ]   [h     ]
//   [ Aᵘᵀ       0   0    ] [Δxᵘ] = [R_dualᵘ]
//   [ Uᵀ        0   −D⁻¹ ] [λ  ]   [0     ]
//
// with its perturbation, factorization and preconditioned Krylov solve.

#include "sqlp/directions.hpp"

#include <cstdint>
#include <span>

namespace sqlp::schur {

class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Iteration-dependent perturbation. The k-th perturbed iteration uses
/// ρ = max(1e-15, ρ₀·2⁻ᵏ) and λ = max(1e-15, λ₀·2⁻ᵏ).
struct PerturbationState {
  int iteration = 0;
  bool previous_failed = false;
  double rho0 = 1e-6;
  double lambda0 = 1e-4;
  bool force = false;  // apply regardless of the trigger
  bool disable = false;
};

enum class Path { CholSchur, FullLu };

std::string_view to_string(Path p);

struct AugmentedSystem {
  Matrix m_sparse;  // perturbed, m × m
  Matrix au;        // m × n_u
  Matrix u;         // m × n₊
  Matrix neg_dinv;  // n₊ × n₊
  double rho = 0.0;
  double lambda = 0.0;
  bool perturbed = false;

  // factorization state
  bool factorized = false;
  Path path = Path::CholSchur;
  linalg::CholFactor chol_m;
  linalg::LuFactor lu_s;
  linalg::LuFactor lu_full;
  Matrix minv_aprime;             // M⁻¹[Aᵘ U], path A
  std::vector<Index> boosted;     // diagonal entries raised to 1 in the preconditioner
  double condition_proxy = 1.0;   // (max/min diag of L)²

  Index m() const { return m_sparse.rows(); }
  Index n_free() const { return au.cols(); }
  Index n_aux() const { return u.cols(); }
  Index size() const { return m() + n_free() + n_aux(); }

  Matrix dense() const;
  Vector apply(const Vector& v) const;
  /// Exact inverse of the factored matrix applied to r.
  Vector precondition(const Vector& r) const;
};

/// Sums the block ingredients, applies the perturbation when triggered and
/// concatenates U and −D⁻¹ block-diagonally.
AugmentedSystem assemble(std::span<const directions::SchurIngredients> ingredients,
                         const Matrix& au, const PerturbationState& state);

/// Path A (Cholesky of M_sparse plus LU of the small Schur complement) with
/// fallback to path B (LU of the whole matrix). Throws linalg::SingularMatrix
/// when path B fails as well.
void factorize(AugmentedSystem& sys, double lu_fallback_ratio = 1e30,
               double lu_threshold = 0.1);

/// Number of factorize calls made so far on the calling thread.
std::uint64_t factorization_count();

struct KrylovSettings {
  double tol = 1e-11;
  int max_iters = 50;
  double fail_tol = 1e-4;
  int restart = 10;
};

struct Solution {
  Vector dy;
  Vector dx_free;
  Vector aux;           // λ = D Uᵀ Δy
  double residual = 0;  // relative, of the augmented system
  int iterations = 0;
};

/// Restarted GMRES, right-preconditioned by the factorization.
Solution solve(const AugmentedSystem& sys, const Vector& h, const Vector& rdual_free,
               const KrylovSettings& settings = {});

struct CorrectorRhs {
  Vector h;
  BlockVec einv_rc;  // E⁻¹R_comp of the corrector, per block (free blocks empty)
};

/// h_corr = h_pred − Σ 𝒜ᵖ((t_corr − t_pred) z⁻ᴶ) + Σ 𝒜ᵖ E⁻¹((Gδx)∘(G⁻¹δz)).
CorrectorRhs corrector_rhs(const ProblemData& p, const Vector& h_pred,
                           const BlockVec& einv_rc_pred, const directions::Scaling& scaling,
                           const BlockVec& x, const BlockVec& z, const BlockVec& dx,
                           const BlockVec& dz, std::span<const double> target_pred,
                           std::span<const double> target_corr);

}  // namespace sqlp::schur
