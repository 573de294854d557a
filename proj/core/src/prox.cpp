#include "pdhg/prox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

namespace pdhg {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFeasTol = 1e-9;

Vec soft_threshold(const Vec& v, const Vec& t) {
  return v.array().sign() * (v.array().abs() - t.array()).max(0.0);
}

}  // namespace

Proximable Proximable::zero(Index n) {
  if (n < 1) throw DimensionError("zero: dim must be positive");
  return {ProxKind::zero, n};
}

Proximable Proximable::linear(Vec b) {
  Proximable f(ProxKind::linear, b.size());
  f.data_ = std::move(b);
  return f;
}

Proximable Proximable::quadratic_shift(Vec c) {
  Proximable f(ProxKind::quadratic_shift, c.size());
  f.data_ = std::move(c);
  return f;
}

Proximable Proximable::quadratic_shift_nonneg(Vec c) {
  Proximable f(ProxKind::quadratic_shift_nonneg, c.size());
  f.data_ = std::move(c);
  return f;
}

Proximable Proximable::indicator_simplex(Index n) {
  if (n < 1) throw DimensionError("simplex: dim must be positive");
  return {ProxKind::indicator_simplex, n};
}

Proximable Proximable::indicator_nonneg(Index n) {
  if (n < 1) throw DimensionError("nonneg: dim must be positive");
  return {ProxKind::indicator_nonneg, n};
}

Proximable Proximable::indicator_linf_ball(Index n, double radius) {
  if (!(radius >= 0.0)) throw ConfigError("linf ball: radius must be nonnegative");
  Proximable f(ProxKind::indicator_linf_ball, n);
  f.weight_ = radius;
  return f;
}

Proximable Proximable::indicator_singleton(Vec b) {
  Proximable f(ProxKind::indicator_singleton, b.size());
  f.data_ = std::move(b);
  return f;
}

Proximable Proximable::l1_norm(Index n, double weight) {
  if (!(weight >= 0.0)) throw ConfigError("l1: weight must be nonnegative");
  Proximable f(ProxKind::l1_norm, n);
  f.weight_ = weight;
  return f;
}

Proximable Proximable::group_l12(Index grid_m, Index grid_n, double weight) {
  if (grid_m < 1 || grid_n < 1) throw DimensionError("group l12: grid must be non-empty");
  if (!(weight >= 0.0)) throw ConfigError("group l12: weight must be nonnegative");
  Proximable f(ProxKind::group_l12, 2 * grid_m * grid_n);
  f.weight_ = weight;
  f.grid_m_ = grid_m;
  f.grid_n_ = grid_n;
  return f;
}

Proximable Proximable::separable_sum(std::vector<Proximable> parts) {
  if (parts.empty()) throw DimensionError("separable sum: no parts");
  Index n = 0;
  for (const auto& p : parts) n += p.dim();
  Proximable f(ProxKind::separable_sum, n);
  f.parts_ = std::move(parts);
  return f;
}

Vec Proximable::sigma() const {
  switch (kind_) {
    case ProxKind::quadratic_shift:
    case ProxKind::quadratic_shift_nonneg:
      return Vec::Ones(dim_);
    case ProxKind::separable_sum: {
      Vec s(dim_);
      Index off = 0;
      for (const auto& p : parts_) {
        s.segment(off, p.dim()) = p.sigma();
        off += p.dim();
      }
      return s;
    }
    default:
      return Vec::Zero(dim_);
  }
}

double Proximable::eval(const Vec& x) const {
  require_dim(x.size(), dim_, "eval");
  switch (kind_) {
    case ProxKind::zero:
      return 0.0;
    case ProxKind::linear:
      return data_.dot(x);
    case ProxKind::quadratic_shift:
      return 0.5 * (x - data_).squaredNorm();
    case ProxKind::quadratic_shift_nonneg:
      if (x.minCoeff() < -kFeasTol) return kInf;
      return 0.5 * (x - data_).squaredNorm();
    case ProxKind::indicator_simplex:
      if (x.minCoeff() < -kFeasTol || std::abs(x.sum() - 1.0) > kFeasTol * (1.0 + x.size())) return kInf;
      return 0.0;
    case ProxKind::indicator_nonneg:
      return x.minCoeff() < -kFeasTol ? kInf : 0.0;
    case ProxKind::indicator_linf_ball:
      return x.cwiseAbs().maxCoeff() > weight_ * (1.0 + kFeasTol) + kFeasTol ? kInf : 0.0;
    case ProxKind::indicator_singleton:
      return (x - data_).cwiseAbs().maxCoeff() > kFeasTol * (1.0 + data_.cwiseAbs().maxCoeff()) ? kInf : 0.0;
    case ProxKind::l1_norm:
      return weight_ * x.lpNorm<1>();
    case ProxKind::group_l12: {
      const Index mn = dim_ / 2;
      return weight_ * (x.head(mn).array().square() + x.tail(mn).array().square()).sqrt().sum();
    }
    case ProxKind::separable_sum: {
      double total = 0.0;
      Index off = 0;
      for (const auto& p : parts_) {
        total += p.eval(x.segment(off, p.dim()));
        off += p.dim();
      }
      return total;
    }
  }
  return kInf;
}

void Proximable::validate_diag(const Vec& d) const {
  require_dim(d.size(), dim_, "prox metric");
  if (!(d.array() > 0.0).all()) throw ConfigError("prox metric must be strictly positive");
  if (kind_ == ProxKind::group_l12) {
    const Index mn = dim_ / 2;
    const Vec diff = (d.head(mn) - d.tail(mn)).cwiseAbs();
    if ((diff.array() > 1e-12 * d.head(mn).array()).any()) {
      throw ConfigError("group l12 prox needs equal metric weights on each (m1, m2) pair");
    }
  }
  if (kind_ == ProxKind::separable_sum) {
    Index off = 0;
    for (const auto& p : parts_) {
      p.validate_diag(d.segment(off, p.dim()));
      off += p.dim();
    }
  }
}

Vec Proximable::prox_diag(const Vec& v, const Vec& d) const {
  require_dim(v.size(), dim_, "prox input");
  require_dim(d.size(), dim_, "prox metric");
  switch (kind_) {
    case ProxKind::zero:
      return v;
    case ProxKind::linear:
      return v - data_.cwiseQuotient(d);
    case ProxKind::quadratic_shift:
      return (data_ + d.cwiseProduct(v)).cwiseQuotient(Vec::Ones(dim_) + d);
    case ProxKind::quadratic_shift_nonneg:
      return (data_ + d.cwiseProduct(v)).cwiseQuotient(Vec::Ones(dim_) + d).cwiseMax(0.0);
    case ProxKind::indicator_simplex:
      if ((d.array() == d[0]).all()) return project_simplex(v);
      return project_simplex_weighted(v, d);
    case ProxKind::indicator_nonneg:
      return v.cwiseMax(0.0);
    case ProxKind::indicator_linf_ball:
      return v.cwiseMax(-weight_).cwiseMin(weight_);
    case ProxKind::indicator_singleton:
      return data_;
    case ProxKind::l1_norm:
      return soft_threshold(v, weight_ * d.cwiseInverse());
    case ProxKind::group_l12: {
      const Index mn = dim_ / 2;
      Vec z(dim_);
      for (Index k = 0; k < mn; ++k) {
        const double a = v[k];
        const double b = v[k + mn];
        const double r = std::hypot(a, b);
        const double t = weight_ / d[k];
        const double scale = r > t ? 1.0 - t / r : 0.0;
        z[k] = scale * a;
        z[k + mn] = scale * b;
      }
      return z;
    }
    case ProxKind::separable_sum: {
      Vec z(dim_);
      Index off = 0;
      for (const auto& p : parts_) {
        z.segment(off, p.dim()) = p.prox_diag(v.segment(off, p.dim()), d.segment(off, p.dim()));
        off += p.dim();
      }
      return z;
    }
  }
  return v;
}

Vec Proximable::prox_shifted_diag(const Vec& w, const Vec& d) const {
  require_dim(w.size(), dim_, "shifted prox input");
  switch (kind_) {
    // f~(z) = -<c, z> + const once the quadratic part is removed.
    case ProxKind::quadratic_shift:
      return w + data_.cwiseQuotient(d);
    case ProxKind::quadratic_shift_nonneg:
      return (w + data_.cwiseQuotient(d)).cwiseMax(0.0);
    case ProxKind::separable_sum: {
      Vec z(dim_);
      Index off = 0;
      for (const auto& p : parts_) {
        z.segment(off, p.dim()) = p.prox_shifted_diag(w.segment(off, p.dim()), d.segment(off, p.dim()));
        off += p.dim();
      }
      return z;
    }
    default:
      return prox_diag(w, d);
  }
}

bool Proximable::is_affine_quadratic() const {
  switch (kind_) {
    case ProxKind::zero:
    case ProxKind::linear:
    case ProxKind::quadratic_shift:
      return true;
    case ProxKind::separable_sum:
      return std::all_of(parts_.begin(), parts_.end(), [](const Proximable& p) { return p.is_affine_quadratic(); });
    default:
      return false;
  }
}

void Proximable::affine_parts(Vec& s, Vec& shift) const {
  s = Vec::Zero(dim_);
  shift = Vec::Zero(dim_);
  switch (kind_) {
    case ProxKind::zero:
      break;
    case ProxKind::linear:
      shift = -data_;
      break;
    case ProxKind::quadratic_shift:
      s.setOnes();
      shift = data_;
      break;
    case ProxKind::separable_sum: {
      Index off = 0;
      for (const auto& p : parts_) {
        Vec ps, psh;
        p.affine_parts(ps, psh);
        s.segment(off, p.dim()) = ps;
        shift.segment(off, p.dim()) = psh;
        off += p.dim();
      }
      break;
    }
    default:
      throw ConfigError("function is not zero, linear or an unconstrained quadratic");
  }
}

Vec project_simplex(const Vec& v) {
  const Index n = v.size();
  if (n < 1) throw DimensionError("project_simplex: empty vector");
  // Michelot's iteration (Newton on sum (v - theta)_+ = 1): the threshold
  // increases monotonically, so entries once below it stay out. Any start
  // below the optimum works; max(v) - 1 is one since no entry exceeds 1.
  // Full-length reductions vectorize better than compacting the active set.
  const auto a = v.array();
  Index active = -1;
  double theta = std::max((v.sum() - 1.0) / static_cast<double>(n), v.maxCoeff() - 1.0);
  for (Index pass = 0; pass <= n; ++pass) {
    const Index kept = (a > theta).count();
    if (kept == active) break;
    active = kept;
    theta += ((a - theta).max(0.0).sum() - 1.0) / static_cast<double>(kept);
  }
  Vec z = (a - theta).max(0.0);
  // Remove the rounding residue of the threshold from the largest entry.
  const double zmax = z.maxCoeff();
  Index imax = 0;
  while (z[imax] != zmax) ++imax;
  z[imax] += 1.0 - z.sum();
  return z;
}

Vec project_simplex_weighted(const Vec& v, const Vec& d) {
  const Index n = v.size();
  require_dim(d.size(), n, "weighted simplex metric");
  // z_i = max(0, v_i - t / d_i); coordinate i is active while t < d_i v_i.
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return d[a] * v[a] > d[b] * v[b]; });
  double sum_v = 0.0;
  double sum_inv = 0.0;
  double t = 0.0;
  for (Index k = 0; k < n; ++k) {
    const Index i = order[k];
    sum_v += v[i];
    sum_inv += 1.0 / d[i];
    const double cand = (sum_v - 1.0) / sum_inv;
    if (d[i] * v[i] > cand) t = cand;
  }
  Vec z(n);
  for (Index i = 0; i < n; ++i) z[i] = std::max(0.0, v[i] - t / d[i]);
  return z;
}

Vec moreau_conjugate_prox(const Proximable& f, const Vec& x, const Vec& d) {
  f.validate_diag(d);
  return d.cwiseProduct(x - f.prox_diag(x, d));
}

}  // namespace pdhg
