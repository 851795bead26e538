#pragma once

// Model transformations applied before the interior-point loop, and the
// inverse maps that carry a solution back to the caller's formulation.

#include "sqlp/problem.hpp"

#include <variant>
#include <vector>

namespace sqlp::preprocess {

/// One Hermitian semidefinite block: min ⟨C,X⟩ s.t. ⟨A_k,X⟩ = b_k, X ∈ ℍⁿ₊.
/// Each matrix is stored as (real part, imaginary part).
struct HermitianBlock {
  Index dim = 0;
  Matrix c_re, c_im;
  std::vector<Matrix> a_re, a_im;  // one per constraint
};

struct ComplexProblem {
  Index m = 0;
  Vector b;
  std::vector<HermitianBlock> blocks;
};

/// Γ(a) = [[Re a, −Im a], [Im a, Re a]] applied to every coefficient.
Matrix real_embedding(const Matrix& re, const Matrix& im);

/// Real SDP with one block of order 2n per Hermitian block and b unchanged.
/// Since ⟨Γ(a),Γ(x)⟩ = 2⟨a,x⟩, a real solution X̄ corresponds to the
/// Hermitian x with X̄ = Γ(x)/2.
ProblemData complex_to_real(const ComplexProblem& cp);

/// Re x = X̄₁₁ + X̄₂₂, Im x = X̄₂₁ − X̄₁₂.
std::pair<Matrix, Matrix> hermitian_from_real(const Matrix& xbar);

struct DiagonalExtraction {
  std::size_t block;            // index of the SDP block in the input
  Index original_dim;
  std::vector<Index> kept;      // indices left in the SDP block
  std::vector<Index> removed;   // isolated indices moved out
  bool whole_block;             // block replaced in place by a LIN block
  std::size_t appended_block;   // index of the new LIN block (when !whole_block)
};

struct SplitFree {
  std::size_t block;
  Index dim;  // dimension of the original free block
};

struct Augmentation {
  std::vector<BlockSpec> original_specs;
  Index original_m;
};

struct Reorder {
  std::size_t block;
  std::vector<Index> perm;  // x̄(i,j) = x(perm[i], perm[j])
};

using Transform = std::variant<DiagonalExtraction, SplitFree, Augmentation, Reorder>;

struct TransformLog {
  std::vector<Transform> entries;
  bool empty() const { return entries.empty(); }
};

/// Pair of LIN coordinates that together encode one free variable.
struct VariablePair {
  std::size_t block;
  Index plus;
  Index minus;
  bool operator==(const VariablePair&) const = default;
};

struct Transformed {
  ProblemData problem;
  TransformLog log;
};

Transformed extract_isolated_diagonals(const ProblemData& p);
Transformed split_unrestricted(const ProblemData& p);
/// Adds the artificial LIN variable when m = 0 or no non-free block has ν = 0.
Transformed augment_artificial(const ProblemData& p);
/// Adds the artificial variable unconditionally.
Transformed append_artificial_variable(const ProblemData& p);
Transformed rcm_reorder(const ProblemData& p);

/// LIN coordinates i, j (ν = 0) with column i = −column j and cᵢ = −cⱼ,
/// compared exactly. All-zero coordinates are not paired.
std::vector<VariablePair> detect_implicit_unrestricted(const ProblemData& p);

/// Pairs created by split_unrestricted, in the coordinates of `transformed`.
std::vector<VariablePair> split_pairs(const TransformLog& log);

/// Full pipeline: diagonal extraction, free splitting, augmentation, RCM.
/// With `full` false only the augmentation needed by the solver is applied.
Transformed run_pipeline(const ProblemData& p, bool full = true);

/// Appends the entries of `next` to `log`.
void append_log(TransformLog& log, const TransformLog& next);

struct Point {
  BlockVec x;
  Vector y;
  BlockVec z;
};

/// Maps a point of the transformed problem back through every logged
/// transform, last first.
Point map_back(const Point& transformed, const TransformLog& log,
               const ProblemData& original);

/// Maps x, y, z back and recomputes objectives and metrics on `original`.
SolveResult postprocess(const SolveResult& result, const TransformLog& log,
                        const ProblemData& original);

}  // namespace sqlp::preprocess
