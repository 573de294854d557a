#include "gen.hpp"

#include "pdhg/metrics.hpp"

#include <gtest/gtest.h>

using namespace pdhg;
using pdhg::testing::Gen;

namespace {

// (D + U) D^{-1} (D + U^T) assembled densely for the block order given.
Mat sgs_dense(const Mat& q, const Partition& blocks) {
  const Index n = q.rows();
  Mat d = Mat::Zero(n, n), u = Mat::Zero(n, n);
  for (std::size_t a = 0; a < blocks.size(); ++a) {
    for (std::size_t b = a; b < blocks.size(); ++b) {
      for (Index i : blocks[a])
        for (Index j : blocks[b]) (a == b ? d : u)(i, j) = q(i, j);
    }
  }
  return (d + u) * d.inverse() * (d + u.transpose());
}

SpMat sparse_of(const Mat& m) { return m.sparseView(0.0, 0.0); }

Vec diag2(double a, double b) { return (Vec(2) << a, b).finished(); }

}  // namespace

TEST(Metrics, ScalarAndDiagonal) {
  Gen g(1);
  const Vec z = g.normal_vec(4), d = g.uniform_vec(4, 0.5, 2.0);
  EXPECT_TRUE(Metric::scalar(4, 1.0 / 0.3).apply(z).isApprox(z / 0.3));
  EXPECT_TRUE(Metric::diagonal(d).solve(z).isApprox(z.cwiseQuotient(d)));
  EXPECT_THROW(Metric::diagonal(-d), ConfigError);
  EXPECT_THROW(Metric::scalar(3, 1.0).apply(z), DimensionError);
}

TEST(Metrics, BirkhoffGramShiftMatchesDense) {
  for (Index n : {2, 3, 4}) {
    for (double theta : {1e-4, 0.3}) {
      const auto k = LinearOperator::birkhoff(n);
      const Metric m = Metric::gram_shift(1.0, 1.0, k, theta);
      const Mat kd = k.to_dense();
      const Mat dense = kd * kd.transpose() + theta * Mat::Identity(2 * n, 2 * n);
      EXPECT_LE((m.to_dense() - dense).norm(), 1e-12 * dense.norm());
      Gen g(static_cast<std::uint64_t>(n));
      const Vec r = g.normal_vec(2 * n);
      // Closed-form inverse against dense inversion.
      EXPECT_LE((m.solve(r) - dense.inverse() * r).norm(), 1e-10 * (1 + (dense.inverse() * r).norm()));
      EXPECT_LE((m.apply(m.solve(r)) - r).norm(), 1e-10 * (1 + r.norm()));
    }
  }
  const auto k3 = LinearOperator::birkhoff(3);
  const Vec e = Vec::Ones(6);
  // K K^T e = 2n e for the all-ones dual vector.
  EXPECT_TRUE(Metric::gram_shift(1.0, 1.0, k3, 0.5).apply(e).isApprox((6.0 + 0.5) * e));
}

TEST(Metrics, GramShiftScaling) {
  Gen g(2);
  const auto k = LinearOperator::dense(g.normal_mat(4, 6));
  const Metric m = Metric::gram_shift(0.8, 0.5, k, 0.1);
  const Mat kd = k.to_dense();
  const Mat want = 0.8 * 0.5 * kd * kd.transpose() + 0.1 * Mat::Identity(4, 4);
  EXPECT_LE((m.to_dense() - want).norm(), 1e-12 * want.norm());
}

TEST(Metrics, GramShiftSingularWithoutThetaRejected) {
  const auto k = LinearOperator::birkhoff(3);  // K K^T is rank deficient
  EXPECT_THROW(Metric::gram_shift(1.0, 1.0, k, 0.0), ConfigError);
}

TEST(Metrics, SgsTwoBlockExample) {
  Mat q(3, 3);
  q << 4, 1, 1, 1, 3, 0.5, 1, 0.5, 2;
  const Partition p = {{0}, {1, 2}};
  const Metric m = Metric::sgs(sparse_of(q), p);
  const Mat want = sgs_dense(q, p);
  EXPECT_LE((m.to_dense() - want).norm(), 1e-12 * want.norm());
}

TEST(Metrics, SgsNonSpdBlockRejected) {
  Mat q(2, 2);
  q << -1, 0.5, 0.5, 2;
  EXPECT_THROW(Metric::sgs(sparse_of(q), {{0}, {1}}), ConfigError);
}

TEST(MetricsProperty, SgsMatchesDenseAssembly) {
  Gen g(5);
  for (int t = 0; t < 40; ++t) {
    const Index n = g.integer(4, 30);
    const Mat q = g.spd(n);
    const Partition p = g.partition(n, g.integer(2, 4));
    const Metric m = Metric::sgs(sparse_of(q), p);
    const Mat want = sgs_dense(q, p);
    const Vec z = g.normal_vec(n);
    ASSERT_LE((m.apply(z) - want * z).norm(), 1e-10 * (1 + (want * z).norm()));
    ASSERT_LE((m.solve(z) - want.ldlt().solve(z)).norm(), 1e-10 * (1 + want.ldlt().solve(z).norm()));
    ASSERT_LE((m.solve(m.apply(z)) - z).norm(), 1e-10 * (1 + z.norm()));
  }
}

TEST(MetricsProperty, SolveInvertsApply) {
  Gen g(6);
  for (int t = 0; t < 20; ++t) {
    const Index n = g.integer(2, 10);
    const auto k = LinearOperator::dense(g.normal_mat(n, n + 2));
    std::vector<Metric> ms = {
        Metric::scalar(n, g.uniform(0.1, 3)),
        Metric::diagonal(g.uniform_vec(n, 0.1, 3)),
        Metric::dense(g.spd(n)),
        Metric::gram_shift(g.uniform(0, 2), g.uniform(0.1, 2), k, g.uniform(0.01, 1)),
        Metric::block_diag({Metric::scalar(1, 2.0), Metric::dense(g.spd(n))}),
    };
    for (const auto& m : ms) {
      const Vec z = g.normal_vec(m.dim());
      ASSERT_LE((m.solve(m.apply(z)) - z).norm(), 1e-10 * (1 + z.norm())) << "kind " << int(m.kind());
      const Mat d = m.to_dense();
      ASSERT_LE((d - d.transpose()).norm(), 1e-12 * d.norm());
    }
  }
}

TEST(MetricsProperty, GramShiftRayleighFloor) {
  Gen g(7);
  for (int t = 0; t < 10; ++t) {
    const double theta = g.uniform(1e-3, 1.0);
    const auto k = LinearOperator::dense(g.normal_mat(6, 3));  // K K^T singular
    const Metric m = Metric::gram_shift(g.uniform(0, 2), 1.0, k, theta);
    for (int s = 0; s < 100; ++s) {
      const Vec z = g.normal_vec(6);
      ASSERT_GE(m.quad(z) / z.squaredNorm(), theta * (1 - 1e-12));
    }
  }
}

TEST(Condition, ScalarExamples) {
  const auto k = LinearOperator::dense(Mat::Identity(2, 2));
  const double tau = 2.0;
  auto at = [&](double prod) {
    return check_condition(Metric::scalar(2, 1.0 / tau), Vec::Zero(2), Metric::scalar(2, tau / prod), k);
  };
  const auto one = at(1.0);
  EXPECT_NEAR(one.s_hat, 1.0, 1e-12);
  EXPECT_EQ(one.verdict(), Verdict::pass_strict);
  EXPECT_FALSE(one.pass_unit);
  const auto edge = at(4.0 / 3.0);
  EXPECT_NEAR(edge.s_hat, 4.0 / 3.0, 1e-12);
  EXPECT_EQ(edge.verdict(), Verdict::fail);
  EXPECT_EQ(at(0.5).verdict(), Verdict::pass_unit);
  EXPECT_NEAR(edge.margin, edge.threshold - edge.s_hat, 0.0);
}

TEST(Condition, StrongConvexityEnlargesPrimalMetric) {
  const auto k = LinearOperator::dense(Mat::Identity(1, 1));
  // s = tau sigma / (1 + tau/2) with Sigma_f = 1.
  const auto rep = check_condition(Metric::scalar(1, 1.0), Vec::Ones(1), Metric::scalar(1, 0.5), k);
  EXPECT_NEAR(rep.s_hat, 2.0 / 1.5, 1e-12);
}

TEST(Condition, IndefinitePrimalMetricRejected) {
  Mat m(2, 2);
  m << 1, 2, 2, 1;
  EXPECT_THROW(check_condition(Metric::dense(m), Vec::Zero(2), Metric::scalar(2, 1),
                               LinearOperator::dense(Mat::Identity(2, 2))),
               ConfigError);
}

TEST(ConditionProperty, MatchesGeneralizedEigenOracle) {
  Gen g(8);
  for (int t = 0; t < 50; ++t) {
    const Index n = g.integer(1, 8), m = g.integer(1, 8);
    const Mat k = g.normal_mat(m, n);
    const Mat m1 = g.spd(n, 0.3), m2 = g.spd(m, 0.3);
    Vec sig = g.uniform_vec(n, 0.0, 1.0);
    if (t % 2) sig.setZero();
    const double want = pdhg::testing::dense_condition_oracle(m1 + 0.5 * Mat(sig.asDiagonal()), m2, k);
    const auto rep = check_condition(Metric::dense(m1), sig, Metric::dense(m2), LinearOperator::dense(k));
    ASSERT_NEAR(rep.s_hat, want, 1e-8 * want) << "instance " << t;
  }
}

TEST(DiagPreconditioner, HandExample) {
  Mat k(2, 2);
  k << 1, -2, 0, 3;
  const auto [m1, m2] = build_diag_preconditioner(LinearOperator::dense(k), 1.0, 0.0, 1.0, 1.0);
  EXPECT_EQ(m1.diag(), diag2(1, 5));
  EXPECT_EQ(m2.diag(), diag2(3, 3));
  EXPECT_LE(check_condition(m1, Vec::Zero(2), m2, LinearOperator::dense(k)).s_hat, 1.0 + 1e-12);

  const auto [a1, a2] = build_diag_preconditioner(LinearOperator::dense(Mat::Ones(2, 2)), 0.0, 0.0, 1.0, 1.0);
  EXPECT_EQ(a1.diag(), diag2(2, 2));
  EXPECT_EQ(a2.diag(), diag2(2, 2));
}

TEST(DiagPreconditioner, ZeroRowNeedsDelta) {
  Mat k(2, 2);
  k << 1, 1, 0, 0;
  EXPECT_THROW(build_diag_preconditioner(LinearOperator::dense(k), 1.0, 0.0, 1.0, 1.0), ConfigError);
  EXPECT_NO_THROW(build_diag_preconditioner(LinearOperator::dense(k), 1.0, 0.1, 1.0, 1.0));
  EXPECT_THROW(build_diag_preconditioner(LinearOperator::dense(k), 2.5, 0.1, 1.0, 1.0), ConfigError);
}

TEST(DiagPreconditionerProperty, NormBound) {
  Gen g(9);
  for (int t = 0; t < 40; ++t) {
    const Mat k = g.normal_mat(g.integer(2, 8), g.integer(2, 8));
    const double alpha = g.uniform(0, 2), g1 = g.uniform(0.5, 2), g2 = g.uniform(0.5, 2);
    const auto op = LinearOperator::dense(k);
    const auto [m1, m2] = build_diag_preconditioner(op, alpha, 0.0, g1, g2);
    const auto rep = check_condition(m1, Vec::Zero(k.cols()), m2, op);
    ASSERT_LE(rep.s_hat, 1.0 / (g1 * g2) + 1e-12);
  }
}

TEST(DiagPreconditioner, ProductThreshold) {
  // |K| of rank one makes the bound 1/(gamma1 gamma2) attained.
  Gen g(10);
  for (int t = 0; t < 10; ++t) {
    const Mat k = g.uniform_vec(5, 0.1, 1) * g.uniform_vec(4, 0.1, 1).transpose();
    const auto op = LinearOperator::dense(k);
    auto verdict = [&](double g1, double g2) {
      const auto [m1, m2] = build_diag_preconditioner(op, 1.0, 0.0, g1, g2);
      return check_condition(m1, Vec::Zero(4), m2, op).verdict();
    };
    EXPECT_NE(verdict(0.76, 1.0), Verdict::fail);
    EXPECT_NE(verdict(2.0, 0.38), Verdict::fail);
    EXPECT_EQ(verdict(0.74, 1.0), Verdict::fail);
    EXPECT_EQ(verdict(1.0, 0.74), Verdict::fail);
  }
}

TEST(Partitions, RedBlackAndGreedy) {
  const Partition rb = red_black_partition(3, 4);
  ASSERT_EQ(rb.size(), 2u);
  EXPECT_EQ(rb[0].size() + rb[1].size(), 12u);
  for (Index i : rb[0]) EXPECT_EQ((i % 3 + i / 3) % 2, 0);

  const auto k = LinearOperator::grid_divergence(4, 5, 1.0).to_dense();
  const SpMat q = sparse_of(k * k.transpose());
  for (const auto& block : greedy_coloring(q)) {
    for (Index a : block)
      for (Index b : block)
        if (a != b) EXPECT_EQ(q.coeff(a, b), 0.0);
  }
}
