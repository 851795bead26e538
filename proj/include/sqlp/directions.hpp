#pragma once

// Per-iteration ingredients of the Newton system: residuals, scalings, the
// maps E⁻¹R_comp and H·R_dual, the blocks Mᵖ of the Schur matrix (with the
// sparse + low-rank split for SOC and LIN blocks), and recovery of Δx, Δz.

#include "sqlp/problem.hpp"

#include <optional>
#include <utility>
#include <variant>
#include <vector>

namespace sqlp::directions {

struct Residuals {
  Vector rprim;    // b − Σ Aᵖxᵖ
  BlockVec rdual;  // cᵖ − zᵖ − (Aᵖ)ᵀy
  double rprim_norm = 0.0;
  double rdual_norm_sum = 0.0;
};

Residuals residuals(const ProblemData& p, const BlockVec& x, const Vector& y,
                    const BlockVec& z);

/// Average complementarity over blocks with ν = 0 (free blocks excluded).
double mu(const BlockVec& x, const BlockVec& z, std::span<const BlockSpec> specs);

struct HkmSdp {
  Matrix z_inv;
};

struct NtSdp {
  Matrix w;      // WzW = x
  Matrix g;      // W^{-1/2}
  Matrix g_inv;  // W^{1/2}
  linalg::EigenDecomposition v;  // of v = GxG = G⁻¹zG⁻¹
};

struct HkmSoc {
  double gamma_z = 1.0;
  Vector t;       // z / γ(z)
  Vector z_invj;  // Jz / γ(z)²
};

struct NtSoc {
  double omega = 1.0;
  Vector t;  // γ(t) = 1; G is built from t, so H = G⁻² involves Jt
};

struct LinScaling {
  Vector ratio;  // x / z
};

struct FreeScaling {};

using BlockScaling = std::variant<HkmSdp, NtSdp, HkmSoc, NtSoc, LinScaling, FreeScaling>;

struct Scaling {
  Direction direction = Direction::Hkm;
  std::vector<BlockScaling> blocks;
};

/// W with WzW = x, via z = UᵀU and U x Uᵀ = VΛVᵀ, S = Λ^{1/4}VᵀU⁻ᵀ, W = SᵀS.
Matrix nt_scaling_sdp(const Matrix& x, const Matrix& z);
NtSoc nt_scaling_soc(const Vector& x, const Vector& z);
HkmSoc hkm_scaling_soc(const Vector& z);

/// G = ω [[t₀, t̄ᵀ], [t̄, I + t̄t̄ᵀ/(1+t₀)]] and its inverse (γ(t) = 1 assumed).
Matrix soc_g(double omega, const Vector& t);
Matrix soc_g_inv(double omega, const Vector& t);

BlockScaling block_scaling(const BlockSpec& spec, const Matrix& x, const Matrix& z,
                           Direction direction);
Scaling compute_scaling(std::span<const BlockSpec> specs, const BlockVec& x,
                        const BlockVec& z, Direction direction);

/// target·z⁻ᴶ − x.
Matrix einv_rcomp(const BlockSpec& spec, const Matrix& x, const Matrix& z, double target);

/// Hᵖ r = (Eᵖ)⁻¹Fᵖ r.
Matrix h_rdual(const BlockSpec& spec, const BlockScaling& scaling, const Matrix& x,
               const Matrix& z, const Matrix& r);

/// (Eᵖ)⁻¹((Gᵖδx)∘((Gᵖ)⁻¹δz)), the second-order term of the corrector.
Matrix einv_second_order(const BlockSpec& spec, const BlockScaling& scaling,
                         const Matrix& x, const Matrix& z, const Matrix& dx,
                         const Matrix& dz);

enum class Strategy { F1, F2, F3 };

/// Evaluation plan for an SDP block of the Schur matrix. Constraints are
/// processed by ascending nonzero count; needed(j) lists the positions of
/// G required while handling the j-th constraint in that order.
struct SdpPlan {
  Index n = 0;
  std::vector<Index> order;
  std::vector<Strategy> strategy;
  std::vector<Matrix> coeff;                                 // aᵖ_k as matrices
  std::vector<std::vector<std::pair<Index, Index>>> pattern; // nonzeros of aᵖ_k
  std::vector<std::pair<Index, Index>> needed_positions;     // growing set I
  std::vector<std::size_t> needed_count;                     // |I| per position j

  std::size_t needed_size(std::size_t j) const { return needed_count[j]; }
};

/// Chooses per column the strategy with the lowest multiplication count,
/// unless `forced` is given.
SdpPlan plan_sdp(const Matrix& at, Index n, std::optional<Strategy> forced = std::nullopt);

/// Mᵖ for an SDP block: entries ⟨aᵖ_k, x aᵖ_l z⁻¹⟩ (HKM) or ⟨aᵖ_k, W aᵖ_l W⟩ (NT).
Matrix schur_block_sdp(const SdpPlan& plan, const Matrix& x, const BlockScaling& scaling);

/// Mᵖ assembled densely from the closed forms (no sparsity split).
Matrix schur_block_dense(const BlockSpec& spec, const Matrix& at, const Matrix& x,
                         const Matrix& z, const BlockScaling& scaling);

struct SchurIngredients {
  Matrix m_sparse;      // m × m
  Matrix u;             // m × k
  Matrix neg_dinv;      // k × k, −D⁻¹
  Matrix a_sparse_gram; // A_sparse A_sparseᵀ, used by the perturbation
};

/// Coordinate i of a SOC/LIN block is dense when more than `ratio` of the
/// constraints touch it.
std::vector<bool> dense_columns(const Matrix& at, double ratio);

SchurIngredients schur_block_lowrank(const BlockSpec& spec, const Matrix& at,
                                     const Matrix& x, const Matrix& z,
                                     const BlockScaling& scaling,
                                     const std::vector<bool>& dense);

/// Assembles the block-p term of h = Rprim − Σ𝒜ᵖ(E⁻¹R_comp − H R_dual),
/// i.e. returns 𝒜ᵖ(E⁻¹R_comp − H R_dual).
Vector h_block(const ProblemData& p, std::size_t block, const Matrix& einv_rc,
               const Matrix& h_rd);

/// Δzᵖ = R_dualᵖ − (Aᵖ)ᵀΔy (zero on free blocks) and
/// Δxᵖ = E⁻¹R_comp − HᵖΔzᵖ (free blocks take Δx_u).
std::pair<BlockVec, BlockVec> recover_dxdz(const ProblemData& p, const Residuals& res,
                                           const BlockVec& x, const BlockVec& z,
                                           const Scaling& scaling, const Vector& dy,
                                           const Vector& dx_free,
                                           const BlockVec& einv_rc);

}  // namespace sqlp::directions
