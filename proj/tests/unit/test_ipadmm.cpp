#include "gen.hpp"

#include "pdhg/counterexamples.hpp"
#include "pdhg/ipadmm.hpp"
#include "pdhg/problems.hpp"

#include <gtest/gtest.h>

using namespace pdhg;
using pdhg::testing::Gen;

namespace {

struct Dense {
  SaddleProblem p;
  Metric m1, m2;
};

// l1 primal, linear dual, scalar metrics with tau sigma ||K||^2 = 1.
Dense random_l1_problem(std::uint64_t seed, Index m = 10, Index n = 8) {
  Gen g(seed);
  const Mat k = g.normal_mat(m, n);
  const double knorm = std::sqrt(spectral_norm_sq(LinearOperator::dense(k)).value);
  const double tau = 0.7 / knorm, sigma = 1.0 / (0.7 * knorm);
  return {{Proximable::l1_norm(n, 0.5), Proximable::linear(g.normal_vec(m)), LinearOperator::dense(k)},
          Metric::scalar(n, 1.0 / tau),
          Metric::scalar(m, 1.0 / sigma)};
}

}  // namespace

TEST(Admm, SingletonGFixesSplittingVariable) {
  auto d = random_l1_problem(1);
  Gen g(2);
  AdmmState st{g.normal_vec(10), g.normal_vec(8), g.normal_vec(10)};
  for (int i = 0; i < 5; ++i) {
    st = ipadmm_step(d.p, d.m1, d.m2, st);
    EXPECT_LE((st.u - d.p.gstar.data()).norm(), 1e-12);
  }
}

TEST(Admm, RecoveredDualFromZeroIsZero) {
  auto cs = toy_problem(make_toy(ToyKind::bilinear, 0.5, 0.5));
  std::vector<AdmmState> sts = {{Vec::Zero(1), Vec::Zero(1), Vec::Zero(1)}};
  sts.push_back(ipadmm_step(cs.problem, cs.config.M1, cs.config.M2, sts[0]));
  const auto rec = recover_pdhg_iterates(sts, cs.config.M2, cs.problem.K);
  ASSERT_EQ(rec.size(), 1u);
  EXPECT_EQ(rec[0].second, Vec::Zero(1));
}

TEST(Admm, RecoveredDualSingletonFormula) {
  auto d = random_l1_problem(3);
  Gen g(4);
  AdmmState s0{Vec::Zero(10), g.normal_vec(8), g.normal_vec(10)};
  const auto s1 = ipadmm_step(d.p, d.m1, d.m2, s0);
  const auto rec = recover_pdhg_iterates({s0, s1}, d.m2, d.p.K);
  const Vec want = d.m2.solve(d.m2.sqrt_dense() * s0.lambda + d.p.K.apply(s0.x) - d.p.gstar.data());
  EXPECT_LE((rec[0].second - want).norm(), 1e-12 * (1 + want.norm()));
}

TEST(Admm, KktPointIsStationary) {
  // Symmetric matrix game in (P1) form: x = y = (1/2, 1/2) with u = K x.
  auto inst = matrix_game((Mat(2, 2) << 1, -1, -1, 1).finished(), 1.0, 1.0);
  const Vec half = Vec::Constant(2, 0.5);
  const Metric& m2 = inst.config.M2;
  // lambda from y = M2^{-1}(M2^{1/2} lambda + K x - u) with u = K x.
  AdmmState st{inst.saddle.K.apply(half), half, m2.inv_sqrt_dense() * m2.apply(half)};
  const auto nx = ipadmm_step(inst.saddle, inst.config.M1, m2, st);
  EXPECT_LE((nx.x - st.x).norm(), 1e-12);
  EXPECT_LE((nx.u - st.u).norm(), 1e-12);
  EXPECT_LE((nx.lambda - st.lambda).norm(), 1e-12);
}

TEST(Admm, FeasibilityResidualShrinks) {
  auto d = random_l1_problem(5, 6, 4);
  AdmmState st{Vec::Zero(6), Vec::Zero(4), Vec::Zero(6)};
  const Mat ih = d.m2.inv_sqrt_dense();
  std::vector<double> res;
  for (int i = 0; i < 100; ++i) {
    st = ipadmm_step(d.p, d.m1, d.m2, st);
    res.push_back((ih * (d.p.K.apply(st.x) - st.u)).norm());
  }
  EXPECT_LT(*std::min_element(res.begin() + 50, res.end()), res.front());
}

TEST(Admm, TransformRoundTrip) {
  Gen g(6);
  for (int t = 0; t < 10; ++t) {
    auto d = random_l1_problem(10 + t, 7, 5);
    std::vector<AdmmState> sts = {{g.normal_vec(7), g.normal_vec(5), g.normal_vec(7)}};
    for (int i = 0; i < 3; ++i) sts.push_back(ipadmm_step(d.p, d.m1, d.m2, sts.back()));
    const auto rec = recover_pdhg_iterates(sts, d.m2, d.p.K);
    for (std::size_t k = 0; k + 1 < rec.size(); ++k) {
      const auto back = reverse_transform(sts[k].lambda, rec[k].first, rec[k].second, sts[k + 1].x, d.m2, d.p.K);
      ASSERT_LE((back.u - sts[k + 1].u).norm(), 1e-12 * (1 + sts[k + 1].u.norm()));
      ASSERT_LE((back.lambda - sts[k + 1].lambda).norm(), 1e-12 * (1 + sts[k + 1].lambda.norm()));
    }
  }
}

TEST(Admm, ReducesToClassicalAdmm) {
  Gen g(7);
  for (int t = 0; t < 5; ++t) {
    const Index m = 6, n = 4;
    const Mat k = g.normal_mat(m, n);
    const Mat m2d = g.spd(m);
    const Mat m1d = k.transpose() * m2d.ldlt().solve(k);  // proximal term vanishes
    const Vec c = g.normal_vec(n), b = g.normal_vec(m);
    SaddleProblem p{Proximable::quadratic_shift(c), Proximable::linear(b), LinearOperator::dense(k)};
    const Metric m2 = Metric::dense(m2d);
    AdmmState st{g.normal_vec(m), g.normal_vec(n), g.normal_vec(m)};
    const auto nx = ipadmm_step(p, Metric::dense(m1d), m2, st);
    // argmin 1/2||x - c||^2 + 1/2||M2^{-1/2}(K x - u+) + lambda||^2 with u+ = b.
    const Vec w = m2.sqrt_dense() * st.lambda + k * st.x;
    const Vec want =
        (Mat::Identity(n, n) + m1d).ldlt().solve(c + k.transpose() * m2d.ldlt().solve(k * st.x - w + b));
    ASSERT_LE((nx.x - want).norm(), 1e-10 * (1 + want.norm()));
    ASSERT_LE((nx.u - b).norm(), 1e-12 * (1 + b.norm()));
  }
}

TEST(Harness, BilinearToy) {
  auto cs = toy_problem(make_toy(ToyKind::bilinear, 0.5, 0.5));
  const auto r = equivalence_harness(cs.problem, cs.config.M1, cs.config.M2, 100, 1e-10, Vec::Ones(1), Vec::Ones(1));
  EXPECT_TRUE(r.pass) << r.max_deviation;
}

TEST(Harness, RandomDenseL1) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto d = random_l1_problem(seed);
    Gen g(seed + 100);
    const auto r = equivalence_harness(d.p, d.m1, d.m2, 100, 1e-10, g.normal_vec(8), g.normal_vec(10));
    EXPECT_TRUE(r.pass) << "seed " << seed << " deviation " << r.max_deviation;
  }
}

TEST(Harness, Birkhoff) {
  const auto inst = birkhoff_projection(random_birkhoff_cost(4, 1), birkhoff_tau(1.0, 4), BirkhoffMode::pdhg, 1.0);
  const auto r = equivalence_harness(inst.saddle, inst.config.M1, inst.config.M2, 100, 1e-10);
  EXPECT_TRUE(r.pass) << r.max_deviation;
}

TEST(Harness, DetectsInjectedFault) {
  auto d = random_l1_problem(9);
  const auto r = equivalence_harness(d.p, d.m1, d.m2, 100, 1e-10, Vec(), Vec(), 1e-6);
  EXPECT_FALSE(r.pass);
  EXPECT_GE(r.max_deviation, 1e-7);
}

TEST(Harness, SizeLimit) {
  auto d = random_l1_problem(1, 65, 2);
  EXPECT_THROW(equivalence_harness(d.p, d.m1, d.m2, 2, 1e-10), ConfigError);
}
