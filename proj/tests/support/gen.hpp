#pragma once

// Seeded generators for property tests. SplitMix64 with hand-written
// distributions so that cases are identical across standard libraries.

#include "pdhg/metrics.hpp"
#include "pdhg/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace pdhg::testing {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : s_(seed * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL) {}

  std::uint64_t next() {
    std::uint64_t z = (s_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// [0, 1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  /// Inclusive range.
  Index integer(Index lo, Index hi) { return lo + static_cast<Index>(next() % static_cast<std::uint64_t>(hi - lo + 1)); }

  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * uniform());
  }

  Vec normal_vec(Index n, double scale = 1.0) {
    Vec v(n);
    for (Index i = 0; i < n; ++i) v[i] = scale * normal();
    return v;
  }
  Vec uniform_vec(Index n, double a, double b) {
    Vec v(n);
    for (Index i = 0; i < n; ++i) v[i] = uniform(a, b);
    return v;
  }
  Mat normal_mat(Index m, Index n) {
    Mat a(m, n);
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < m; ++i) a(i, j) = normal();
    return a;
  }
  /// A A^T / n + shift I.
  Mat spd(Index n, double shift = 0.5) {
    const Mat a = normal_mat(n, n);
    return a * a.transpose() / static_cast<double>(n) + shift * Mat::Identity(n, n);
  }
  SpMat sparse(Index m, Index n, double density) {
    std::vector<Eigen::Triplet<double>> t;
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < m; ++i)
        if (uniform() < density) t.emplace_back(i, j, normal());
    SpMat s(m, n);
    s.setFromTriplets(t.begin(), t.end());
    return s;
  }
  /// Random split of {0..n-1} into `blocks` non-empty index sets.
  Partition partition(Index n, Index blocks) {
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    for (Index i = n - 1; i > 0; --i) std::swap(perm[i], perm[integer(0, i)]);
    std::vector<Index> cuts;
    while (static_cast<Index>(cuts.size()) < blocks - 1) {
      const Index c = integer(1, n - 1);
      if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.push_back(n);
    Partition out;
    Index start = 0;
    for (Index c : cuts) {
      out.emplace_back(perm.begin() + start, perm.begin() + c);
      std::sort(out.back().begin(), out.back().end());
      start = c;
    }
    return out;
  }

 private:
  std::uint64_t s_;
};

/// Dense generalized eigenvalue oracle: largest s with B^T A^{-1} B z = s C z.
inline double dense_condition_oracle(const Mat& m1_plus_half_sigma, const Mat& m2, const Mat& k) {
  const Mat lhs = k.transpose() * m2.ldlt().solve(k);
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(lhs, m1_plus_half_sigma);
  return es.eigenvalues().maxCoeff();
}

}  // namespace pdhg::testing
