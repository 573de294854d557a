#pragma once

#include "pdhg/types.hpp"

#include <vector>

namespace pdhg {

enum class ProxKind {
  zero,
  linear,                  // <b, x>
  quadratic_shift,         // 1/2 ||x - c||^2
  quadratic_shift_nonneg,  // 1/2 ||x - c||^2 + indicator(x >= 0)
  indicator_simplex,
  indicator_nonneg,
  indicator_linf_ball,  // ||x||_inf <= radius
  indicator_singleton,  // {b}
  l1_norm,              // weight * ||x||_1
  group_l12,            // weight * sum_k ||(x_k, x_{k+MN})||_2 over an M-by-N grid
  separable_sum,        // concatenation of independent parts
};

/// A closed proper convex function with a cheap proximal map under scalar or
/// diagonal metrics, together with its strong-convexity diagonal.
class Proximable {
 public:
  static Proximable zero(Index n);
  static Proximable linear(Vec b);
  static Proximable quadratic_shift(Vec c);
  static Proximable quadratic_shift_nonneg(Vec c);
  static Proximable indicator_simplex(Index n);
  static Proximable indicator_nonneg(Index n);
  static Proximable indicator_linf_ball(Index n, double radius);
  static Proximable indicator_singleton(Vec b);
  static Proximable l1_norm(Index n, double weight = 1.0);
  static Proximable group_l12(Index grid_m, Index grid_n, double weight = 1.0);
  static Proximable separable_sum(std::vector<Proximable> parts);

  Index dim() const { return dim_; }
  ProxKind kind() const { return kind_; }
  /// b for linear/singleton, c for the quadratic kinds, empty otherwise.
  const Vec& data() const { return data_; }
  /// l1/group weight or ball radius.
  double weight() const { return weight_; }
  const std::vector<Proximable>& parts() const { return parts_; }
  Index grid_m() const { return grid_m_; }
  Index grid_n() const { return grid_n_; }

  /// Diagonal of the strong-convexity matrix: ones for the quadratic kinds,
  /// zeros otherwise.
  Vec sigma() const;

  /// f(x); +infinity outside the domain of an indicator.
  double eval(const Vec& x) const;

  /// argmin_z f(z) + 1/2 ||z - v||^2_D with D = diag(d), d > 0.
  Vec prox_diag(const Vec& v, const Vec& d) const;

  /// Throws ConfigError unless prox_diag supports the metric diag(d).
  void validate_diag(const Vec& d) const;

  /// Proximal map of f~ = f - 1/2 ||.||^2_Sigma under diag(d), where d is the
  /// diagonal of M + Sigma.
  Vec prox_shifted_diag(const Vec& w, const Vec& d) const;

  /// True when f is zero, linear or an unconstrained quadratic shift, so its
  /// prox under any SPD metric reduces to one linear solve.
  bool is_affine_quadratic() const;

  /// For affine-quadratic f, writes f = <l, x> + 1/2 ||x - c||^2_S as the
  /// 0/1 diagonal S and the vector S c - l. Throws ConfigError otherwise.
  void affine_parts(Vec& s, Vec& shift) const;

 private:
  Proximable(ProxKind kind, Index dim) : kind_(kind), dim_(dim) {}

  ProxKind kind_;
  Index dim_;
  Vec data_;
  double weight_ = 0.0;
  Index grid_m_ = 0;
  Index grid_n_ = 0;
  std::vector<Proximable> parts_;
};

/// Euclidean projection onto the unit simplex by the sort-and-threshold rule.
Vec project_simplex(const Vec& v);

/// Projection onto the simplex in the metric diag(d).
Vec project_simplex_weighted(const Vec& v, const Vec& d);

/// prox of f* under D^{-1} at D x, obtained from prox_f^D through the
/// generalized Moreau identity: D (x - prox_f^D(x)).
Vec moreau_conjugate_prox(const Proximable& f, const Vec& x, const Vec& d);

}  // namespace pdhg
