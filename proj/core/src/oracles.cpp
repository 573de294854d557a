#include "pdhg/problems.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <bit>
#include <cmath>
#include <limits>

namespace pdhg {
namespace {

// min over the simplex of max_i (A x)_i by enumerating vertices of
//   min v  s.t.  A x <= v e,  x >= 0,  e^T x = 1.
std::pair<Vec, double> minimax_vertex(const Mat& a) {
  const Index m = a.rows();
  const Index n = a.cols();
  const Index ncons = m + n;
  const double inf = std::numeric_limits<double>::infinity();
  Vec best_x = Vec::Constant(n, 1.0 / static_cast<double>(n));
  double best_v = inf;
  for (unsigned mask = 0; mask < (1u << ncons); ++mask) {
    if (std::popcount(mask) != n) continue;
    // Unknowns (x, v); rows: chosen active inequalities plus e^T x = 1.
    Mat sys = Mat::Zero(n + 1, n + 1);
    Vec rhs = Vec::Zero(n + 1);
    Index row = 0;
    for (Index c = 0; c < ncons; ++c) {
      if (!(mask & (1u << c))) continue;
      if (c < m) {
        sys.row(row).head(n) = a.row(c);
        sys(row, n) = -1.0;
      } else {
        sys(row, c - m) = 1.0;
      }
      ++row;
    }
    sys.row(n).head(n).setOnes();
    rhs[n] = 1.0;
    Eigen::FullPivLU<Mat> lu(sys);
    if (lu.rank() < n + 1) continue;
    const Vec z = lu.solve(rhs);
    const Vec x = z.head(n);
    const double v = z[n];
    if ((x.array() < -1e-12).any()) continue;
    if (((a * x).array() > v + 1e-12).any()) continue;
    if (v < best_v) {
      best_v = v;
      best_x = x.cwiseMax(0.0);
    }
  }
  if (!std::isfinite(best_v)) throw ConfigError("matrix game oracle found no vertex");
  return {best_x, best_v};
}

Mat birkhoff_affine_projection(const Mat& x) {
  const double n = static_cast<double>(x.rows());
  const Vec r = x.rowwise().sum().array() - 1.0;
  const Vec c = x.colwise().sum().transpose().array() - 1.0;
  const double s = x.sum() - n;
  Mat out = x;
  out.colwise() -= r / n;
  out.rowwise() -= c.transpose() / n;
  out.array() += s / (n * n);
  return out;
}

}  // namespace

OracleResult matrix_game_oracle(const Mat& k) {
  if (k.rows() > 4 || k.cols() > 4 || k.size() == 0) throw ConfigError("matrix game oracle needs n, m <= 4");
  auto [x, v] = minimax_vertex(k);
  auto [y, w] = minimax_vertex(-k.transpose());
  return {x, y, v};
}

Mat birkhoff_oracle(const Mat& c) {
  if (c.rows() != c.cols() || c.rows() < 1) throw DimensionError("Birkhoff oracle: C must be square");
  if (c.rows() > 8) throw ConfigError("Birkhoff oracle needs n <= 8");
  // Dykstra: alternate projections onto the affine constraints and the
  // nonnegative orthant with correction terms.
  Mat x = c;
  Mat p = Mat::Zero(c.rows(), c.cols());
  Mat q = Mat::Zero(c.rows(), c.cols());
  for (int it = 0; it < 2000000; ++it) {
    const Mat ya = birkhoff_affine_projection(x + p);
    p = x + p - ya;
    const Mat xn = (ya + q).cwiseMax(0.0);
    q = ya + q - xn;
    const double change = (xn - x).cwiseAbs().maxCoeff();
    x = xn;
    if (change < 1e-15 && (birkhoff_affine_projection(x) - x).cwiseAbs().maxCoeff() < 1e-13) break;
  }
  return x;
}

OracleResult emd_oracle(const Mat& rho_diff, Index grid_m, Index grid_n, double h) {
  if (grid_m * grid_n > 16 || grid_m > 4 || grid_n > 4) throw ConfigError("EMD oracle needs a grid of at most 4x4");
  if (grid_m * grid_n < 2) throw DimensionError("EMD oracle needs at least two nodes");
  require_dim(rho_diff.size(), grid_m * grid_n, "EMD density difference");
  const Index mn = grid_m * grid_n;
  const Mat kfull = LinearOperator::grid_divergence(grid_m, grid_n, h).to_dense();
  const Vec b = Eigen::Map<const Vec>(rho_diff.data(), mn);

  // Free flux entries grouped by node.
  std::vector<Index> free_idx;
  std::vector<std::vector<Index>> groups;  // positions into free_idx
  for (Index k = 0; k < mn; ++k) {
    const Index i = k % grid_m;
    const Index j = k / grid_m;
    std::vector<Index> g;
    if (i < grid_m - 1) {
      g.push_back(static_cast<Index>(free_idx.size()));
      free_idx.push_back(k);
    }
    if (j < grid_n - 1) {
      g.push_back(static_cast<Index>(free_idx.size()));
      free_idx.push_back(mn + k);
    }
    if (!g.empty()) groups.push_back(std::move(g));
  }
  const Index p = static_cast<Index>(free_idx.size());
  const Index ng = static_cast<Index>(groups.size());

  // The rows of the divergence sum to zero; drop the last one. Fluxes are
  // m = m0 + N w with N spanning ker A, so every iterate stays feasible (a
  // KKT solve loses the equality once the barrier Hessian grows large).
  Mat a(mn - 1, p);
  for (Index c = 0; c < p; ++c) a.col(c) = kfull.col(free_idx[c]).head(mn - 1);
  const Vec bb = b.head(mn - 1);
  const Vec m0 = a.transpose() * (a * a.transpose()).ldlt().solve(bb);
  const Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeFullV);
  const Index rank = svd.rank();
  const Mat null = svd.matrixV().rightCols(p - rank);
  const Index nw = null.cols();
  const Index nz = nw + ng;

  auto fluxes = [&](const Vec& v) -> Vec { return m0 + null * v.head(nw); };
  auto group_norm = [&](const Vec& m, Index g) {
    double s = 0.0;
    for (Index c : groups[g]) s += m[c] * m[c];
    return std::sqrt(s);
  };
  Vec v = Vec::Zero(nz);
  for (Index g = 0; g < ng; ++g) v[nw + g] = group_norm(m0, g) + 1.0;

  // F(v) = s * sum t - sum log(t^2 - ||m||^2); +inf outside the cone.
  auto barrier = [&](const Vec& vv, double s) {
    const Vec m = fluxes(vv);
    double val = 0.0;
    for (Index g = 0; g < ng; ++g) {
      const double t = vv[nw + g];
      const double nm = group_norm(m, g);
      const double u = t * t - nm * nm;
      if (!(t > nm) || !(u > 0.0)) return std::numeric_limits<double>::infinity();
      val += s * t - std::log(u);
    }
    return val;
  };

  const double nu = 2.0 * static_cast<double>(ng);
  for (double s = 1.0; nu / s > 1e-12; s *= 8.0) {
    for (int newton = 0; newton < 200; ++newton) {
      // Derivatives in (m, t), then chained through m = m0 + N w.
      const Vec m = fluxes(v);
      Vec gm = Vec::Zero(p), gt = Vec::Zero(ng);
      Mat hmm = Mat::Zero(p, p), hmt = Mat::Zero(p, ng);
      Vec htt = Vec::Zero(ng);
      for (Index g = 0; g < ng; ++g) {
        const double t = v[nw + g];
        const double nm = group_norm(m, g);
        const double u = t * t - nm * nm;
        gt[g] = s - 2.0 * t / u;
        htt[g] = -2.0 / u + 4.0 * t * t / (u * u);
        for (Index c : groups[g]) {
          gm[c] = 2.0 * m[c] / u;
          hmt(c, g) = -4.0 * t * m[c] / (u * u);
          for (Index c2 : groups[g]) hmm(c, c2) = 4.0 * m[c] * m[c2] / (u * u) + (c == c2 ? 2.0 / u : 0.0);
        }
      }
      Vec grad(nz);
      grad << null.transpose() * gm, gt;
      Mat hess(nz, nz);
      hess.topLeftCorner(nw, nw) = null.transpose() * hmm * null;
      hess.topRightCorner(nw, ng) = null.transpose() * hmt;
      hess.bottomLeftCorner(ng, nw) = hess.topRightCorner(nw, ng).transpose();
      hess.bottomRightCorner(ng, ng) = htt.asDiagonal();
      const Vec dv = hess.ldlt().solve(-grad);
      const double dec = -grad.dot(dv);
      if (!(dec / 2.0 >= 1e-14)) break;
      const double f0 = barrier(v, s);
      double alpha = 1.0;
      while (alpha > 1e-16 && !(barrier(v + alpha * dv, s) <= f0 - 0.25 * alpha * dec)) alpha *= 0.5;
      if (alpha <= 1e-16) break;
      v += alpha * dv;
    }
  }

  const Vec z = fluxes(v);
  OracleResult res;
  res.x = Vec::Zero(2 * mn);
  for (Index c = 0; c < p; ++c) res.x[free_idx[c]] = z[c];
  res.objective = emd_objective(res.x, grid_m, grid_n);
  return res;
}

OracleResult oracle_solve(const ProblemInstance& inst) {
  switch (inst.kind) {
    case ProblemKind::matrix_game:
      return matrix_game_oracle(inst.data);
    case ProblemKind::birkhoff: {
      const Mat x = birkhoff_oracle(inst.data);
      OracleResult res;
      res.x = Eigen::Map<const Vec>(x.data(), x.size());
      res.objective = 0.5 * (x - inst.data).squaredNorm();
      return res;
    }
    case ProblemKind::emd:
      return emd_oracle(inst.data, inst.grid_m, inst.grid_n, inst.h);
    case ProblemKind::tvls:
      break;
  }
  throw ConfigError("no oracle for this problem");
}

}  // namespace pdhg
