#pragma once

// Block-structured cone algebra. A block payload is an Eigen matrix: n×n
// (symmetric) for semidefinite blocks and n×1 for every other kind, so inner
// products and norms are the same expression for all cones.

#include "sqlp/linalg.hpp"

#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace sqlp {

using linalg::Index;
using linalg::Matrix;
using linalg::Vector;

enum class ConeKind { Sdp, Soc, Lin, Free };

std::string_view to_string(ConeKind kind);
std::optional<ConeKind> parse_cone_kind(std::string_view name);

struct BlockSpec {
  ConeKind kind = ConeKind::Lin;
  Index dim = 1;
  double barrier = 0.0;  // ν; ignored for free blocks

  bool operator==(const BlockSpec&) const = default;
};

/// Length of the vectorized payload: n(n+1)/2 for SDP, n otherwise.
Index vec_length(const BlockSpec& spec);

struct BlockVec {
  std::vector<Matrix> blocks;

  static BlockVec zeros(std::span<const BlockSpec> specs);

  std::size_t size() const { return blocks.size(); }
  Matrix& operator[](std::size_t p) { return blocks[p]; }
  const Matrix& operator[](std::size_t p) const { return blocks[p]; }

  bool matches(std::span<const BlockSpec> specs) const;

  BlockVec& operator+=(const BlockVec& other);
  BlockVec& operator-=(const BlockVec& other);
  BlockVec& operator*=(double s);

  bool operator==(const BlockVec&) const = default;
};

BlockVec operator+(BlockVec a, const BlockVec& b);
BlockVec operator-(BlockVec a, const BlockVec& b);
BlockVec operator*(double s, BlockVec a);

/// Raised when a point needed strictly inside a cone is not.
class ConeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace cones {

/// Tolerance on Cholesky pivots and γ for interior tests.
inline constexpr double kInteriorTol = 1e-12;

enum class Side { Primal, Dual };

Vector svec(const Matrix& a);
Matrix smat(const Vector& v);

double inner(const Matrix& a, const Matrix& b);
double inner(const BlockVec& a, const BlockVec& b);
/// Frobenius / Euclidean norm summed over blocks.
double norm_sum(const BlockVec& a);

Matrix identity(const BlockSpec& spec);
Matrix jordan(const Matrix& x, const Matrix& z, const BlockSpec& spec);
Matrix jordan_inv(const Matrix& z, const BlockSpec& spec);

double gamma_soc(const Vector& x);

bool is_interior(const Matrix& v, const BlockSpec& spec);

/// Σφᵖ(xᵖ;νᵖ) for Side::Primal, Σφᵖ*(zᵖ;νᵖ) for Side::Dual.
double barrier_terms(const BlockVec& v, std::span<const BlockSpec> specs,
                     Side side);
double barrier_term(const Matrix& v, const BlockSpec& spec, Side side);

/// Arrow matrix of f: [[f0, f̄ᵀ], [f̄, f0 I]].
Matrix arw(const Vector& f);
Vector arw_apply(const Vector& f, const Vector& v);
Vector arw_solve(const Vector& f, const Vector& v);

}  // namespace cones
}  // namespace sqlp
