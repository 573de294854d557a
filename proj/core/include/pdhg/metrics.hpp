#pragma once

#include "pdhg/operators.hpp"
#include "pdhg/types.hpp"

#include <memory>
#include <utility>
#include <vector>

namespace pdhg {

enum class MetricKind {
  scalar,
  diagonal,
  dense,        // SPD matrix with a cached Cholesky factor
  gram_shift,   // gamma * tau * K K^T + P
  sgs,          // (D + U) D^{-1} (D + U^T) for a block partition of Q
  block_diag,   // direct sum of child metrics
  bcd_inexact,  // Q applied exactly, solved approximately by block Gauss-Seidel
};

/// Index sets partitioning {0, ..., dim-1}.
using Partition = std::vector<std::vector<Index>>;

namespace detail {
struct MetricImpl;
}

/// Symmetric positive definite preconditioner. Immutable; factorizations are
/// computed at construction.
class Metric {
 public:
  static Metric scalar(Index dim, double s);
  static Metric diagonal(Vec d);
  static Metric dense(Mat m);
  /// P = theta * I. theta = 0 requires gamma * tau * K K^T to be nonsingular.
  static Metric gram_shift(double gamma, double tau, const LinearOperator& op, double theta);
  static Metric gram_shift(double gamma, double tau, const LinearOperator& op, const Mat& p);
  static Metric sgs(const SpMat& q, Partition blocks);
  static Metric block_diag(std::vector<Metric> children);
  static Metric bcd_inexact(const SpMat& q, Partition blocks, int epochs);

  Index dim() const;
  MetricKind kind() const;

  Vec apply(const Vec& z) const;
  Vec solve(const Vec& r) const;
  double quad(const Vec& z) const { return z.dot(apply(z)); }
  Mat to_dense() const;

  /// True for scalar and diagonal metrics.
  bool is_diagonal() const;
  /// Entries of a scalar or diagonal metric; throws ConfigError otherwise.
  Vec diag() const;
  /// False only for bcd_inexact, whose solve is an approximation.
  bool is_exact() const;

  const std::vector<Metric>& children() const;
  /// gram-shift parameters (zero for other kinds).
  double gram_gamma() const;
  double gram_tau() const;
  double gram_theta() const;
  /// The matrix Q of sgs, bcd_inexact and (materialized) gram-shift metrics.
  SpMat q_matrix() const;
  /// Block partition of sgs and bcd_inexact metrics.
  const Partition& partition() const;
  int bcd_epochs() const;

  /// Symmetric square root and its inverse by eigendecomposition (dim <= 64).
  Mat sqrt_dense() const;
  Mat inv_sqrt_dense() const;

 private:
  explicit Metric(std::shared_ptr<const detail::MetricImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const detail::MetricImpl> impl_;
};

enum class Verdict { pass_unit, pass_strict, fail };

const char* to_string(Verdict v);

struct ConditionReport {
  double s_hat = 0.0;
  double threshold = 4.0 / 3.0;
  double margin = 0.0;
  bool pass_strict = false;
  bool pass_unit = false;
  bool converged = false;
  int iterations = 0;

  Verdict verdict() const {
    if (pass_unit) return Verdict::pass_unit;
    return pass_strict ? Verdict::pass_strict : Verdict::fail;
  }
};

inline constexpr double kCheckerSlack = 1e-9;

/// Estimates ||M2^{-1/2} K (M1 + Sigma/2)^{-1/2}||^2 by power iteration on
/// z <- (M1 + Sigma/2)^{-1} K^T M2^{-1} K z.
ConditionReport check_condition(const Metric& m1, const Vec& sigma_f, const Metric& m2,
                                const LinearOperator& k, double tol = 1e-13, int max_iter = 200000);

/// M1 = gamma1 diag(tau_j), tau_j = delta + sum_i |K_ij|^(2-alpha);
/// M2 = gamma2 diag(sigma_i), sigma_i = delta + sum_j |K_ij|^alpha.
/// Sums run over structural nonzeros only.
std::pair<Metric, Metric> build_diag_preconditioner(const LinearOperator& k, double alpha, double delta,
                                                    double gamma1, double gamma2);

/// Two-coloring of an M-by-N node grid (node i + j*M is red when i + j is even).
Partition red_black_partition(Index grid_m, Index grid_n);

/// Greedy coloring of the sparsity graph of a symmetric matrix, so that every
/// color class has a diagonal principal submatrix.
Partition greedy_coloring(const SpMat& q);

}  // namespace pdhg
