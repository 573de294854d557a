#pragma once

#include "pdhg/types.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace pdhg {

enum class OperatorKind { dense, sparse, grid_divergence, birkhoff, vertical_stack, transpose };

namespace detail {
struct OperatorImpl;
}

/// An immutable m-by-n linear map K with matrix-free apply and adjoint.
///
/// Copies share the underlying representation. All realizations are
/// thread-safe for concurrent apply/apply_adjoint.
class LinearOperator {
 public:
  static LinearOperator dense(Mat matrix);
  static LinearOperator sparse(SpMat matrix);

  /// Discrete divergence on an M-by-N node grid acting on fluxes
  /// x = (vec(m1), vec(m2)) of length 2MN (column-major vec):
  ///   div(m)_ij = h (m1_ij - m1_{i-1,j} + m2_ij - m2_{i,j-1}).
  /// Entries m1_{M,j} and m2_{i,N} are held at zero: apply ignores them and
  /// apply_adjoint returns zero there.
  static LinearOperator grid_divergence(Index grid_m, Index grid_n, double h);

  /// Row- and column-sum constraints of an n-by-n matrix X acting on vec(X):
  /// K vec(X) = (X e, X^T e).  Never materialized.
  static LinearOperator birkhoff(Index n);

  /// [K_1; K_2; ...] for children sharing the column count.
  static LinearOperator vstack(std::vector<LinearOperator> children);

  /// K^T of another operator.
  static LinearOperator transpose(LinearOperator op);

  Index rows() const;
  Index cols() const;
  OperatorKind kind() const;

  Vec apply(const Vec& x) const;
  Vec apply_adjoint(const Vec& y) const;

  /// Explicit sparse form. Cheap for every realization in this library.
  SpMat to_sparse() const;
  Mat to_dense() const;

  /// Children of a vertical stack (empty for other kinds).
  const std::vector<LinearOperator>& children() const;

  /// Grid parameters of a grid divergence (zeros otherwise).
  Index grid_m() const;
  Index grid_n() const;
  double grid_h() const;
  /// Size parameter of a Birkhoff operator (zero otherwise).
  Index birkhoff_n() const;

 private:
  explicit LinearOperator(std::shared_ptr<const detail::OperatorImpl> impl);
  std::shared_ptr<const detail::OperatorImpl> impl_;
};

struct SpectralEstimate {
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Power iteration on K^T K from a seeded random start. The returned value
/// approximates ||K||^2 from below; `converged` is set once the relative
/// change between successive Rayleigh quotients drops below `tol`.
SpectralEstimate spectral_norm_sq(const LinearOperator& op, double tol = 1e-12,
                                  int max_iter = 10000, std::uint64_t seed = 0x5eed);

}  // namespace pdhg
