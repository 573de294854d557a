#include "gen.hpp"

#include "pdhg/problems.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

using namespace pdhg;
using pdhg::testing::Gen;

namespace {

Mat sym_game() { return (Mat(2, 2) << 1, -1, -1, 1).finished(); }

SolveReport run(ProblemInstance& inst, double tol, int max_iter) {
  inst.config.tol = tol;
  inst.config.max_iter = max_iter;
  return solve(inst.saddle, inst.config);
}

// Random balanced pair with a fixed grid.
std::pair<Mat, Mat> pair_on(Index m, Index n, std::uint64_t seed) { return random_emd_pair(m, n, seed); }

}  // namespace

// ---- matrix game ----

TEST(MatrixGame, SymmetricEquilibrium) {
  auto inst = matrix_game(sym_game(), 1.0, 1.0);
  const auto rep = run(inst, 1e-9, 100000);
  ASSERT_EQ(rep.status, Status::converged);
  EXPECT_LE((rep.x - Vec::Constant(2, 0.5)).norm(), 1e-6);
  EXPECT_LE(duality_gap_matrix_game(inst.saddle.K, rep.x, rep.y), 1e-6);
}

TEST(MatrixGame, ParameterisationAndBounds) {
  Gen g(1);
  const Mat k = g.normal_mat(5, 4);
  const double knorm = std::sqrt(spectral_norm_sq(LinearOperator::dense(k)).value);
  const auto inst = matrix_game(k, 0.4, 0.9);
  EXPECT_NEAR(inst.config.M1.diag()[0], knorm / 0.4, 1e-9 * knorm);
  EXPECT_NEAR(inst.config.M2.diag()[0], 0.9 * 0.4 * knorm, 1e-9 * knorm);
  EXPECT_EQ(inst.saddle.f.kind(), ProxKind::indicator_simplex);
  EXPECT_EQ(inst.saddle.gstar.kind(), ProxKind::indicator_simplex);
  EXPECT_THROW(matrix_game(k, 0.4, 0.75), ConfigError);
  EXPECT_NO_THROW(matrix_game(k, 0.4, 0.751));
}

TEST(MatrixGame, GeneratorsAreSeeded) {
  for (auto gen : {GameGenerator::uniform, GameGenerator::normal, GameGenerator::scaled_normal,
                   GameGenerator::sparse_uniform}) {
    EXPECT_EQ(random_game_matrix(6, 5, gen, 7), random_game_matrix(6, 5, gen, 7));
    EXPECT_NE(random_game_matrix(6, 5, gen, 7), random_game_matrix(6, 5, gen, 8));
    EXPECT_EQ(parse_game_generator(to_string(gen)), gen);
  }
  EXPECT_THROW(parse_game_generator("cauchy"), ConfigError);
  const Mat u = random_game_matrix(20, 20, GameGenerator::uniform, 1);
  EXPECT_GE(u.minCoeff(), 0.0);
  EXPECT_LE(u.maxCoeff(), 1.0);
}

TEST(MatrixGame, MatchesVertexOracle) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Gen g(seed);
    const Mat k = g.normal_mat(g.integer(2, 4), g.integer(2, 4));
    const auto oracle = matrix_game_oracle(k);
    // Oracle strategies are optimal: zero gap.
    EXPECT_LE(duality_gap_matrix_game(LinearOperator::dense(k), oracle.x, oracle.y), 1e-10);
    auto inst = matrix_game(k, 1.0, 1.0);
    const auto rep = run(inst, 1e-9, 200000);
    ASSERT_EQ(rep.status, Status::converged);
    EXPECT_NEAR(rep.y.dot(k * rep.x), oracle.objective, 1e-6) << "seed " << seed;
  }
}

// ---- Birkhoff ----

TEST(Birkhoff, DoublyStochasticIsFixed) {
  Mat c(3, 3);
  c << 0.2, 0.3, 0.5, 0.5, 0.2, 0.3, 0.3, 0.5, 0.2;
  auto inst = birkhoff_projection(c, birkhoff_tau(1.0, 3), BirkhoffMode::ebalm, 1.0);
  inst.config.x0 = c.reshaped();
  const auto rep = run(inst, 1e-8, 1000);
  EXPECT_EQ(rep.status, Status::converged);
  EXPECT_EQ(rep.iters, 1);
  EXPECT_LE((rep.x - c.reshaped()).norm(), 1e-12);
}

TEST(Birkhoff, TwoByTwoProjection) {
  const Mat c = (Mat(2, 2) << 1, 0, 0, 0).finished();
  const Mat want = (Mat(2, 2) << 0.75, 0.25, 0.25, 0.75).finished();
  EXPECT_LE((birkhoff_oracle(c) - want).norm(), 1e-10);
  for (auto mode : {BirkhoffMode::pdhg, BirkhoffMode::ebalm}) {
    const double tau = birkhoff_tau(2.0, 2);
    auto inst = birkhoff_projection(c, tau, mode, 1.0);
    const auto rep = run(inst, 1e-10, 100000);
    ASSERT_EQ(rep.status, Status::converged);
    EXPECT_LE((rep.x.reshaped(2, 2) - want).norm(), 1e-6);
  }
}

TEST(Birkhoff, MatchesOracleUpToEight) {
  for (Index n = 2; n <= 8; ++n) {
    const Mat c = random_birkhoff_cost(n, static_cast<std::uint64_t>(n));
    const Mat want = birkhoff_oracle(c);
    const double tau = birkhoff_tau(2.0, n);
    // gamma_min sits on the condition boundary up to theta; its -1 mode decays
    // too slowly for a 1e-10 tolerance, so use an interior gamma.
    auto inst = birkhoff_projection(c, tau, BirkhoffMode::ebalm, 1.0);
    const auto rep = run(inst, 1e-10, 200000);
    ASSERT_EQ(rep.status, Status::converged) << "n " << n;
    EXPECT_LE((rep.x.reshaped(n, n) - want).cwiseAbs().maxCoeff(), 1e-6) << "n " << n;
  }
}

TEST(Birkhoff, OracleSatisfiesVariationalInequality) {
  // <C - X*, P - X*> <= 0 for every permutation matrix P (the polytope's vertices).
  for (Index n : {2, 3, 4, 5}) {
    const Mat c = random_birkhoff_cost(n, 40 + static_cast<std::uint64_t>(n));
    const Mat x = birkhoff_oracle(c);
    EXPECT_LE((x.rowwise().sum() - Vec::Ones(n)).norm(), 1e-10);
    EXPECT_LE((x.colwise().sum().transpose() - Vec::Ones(n)).norm(), 1e-10);
    EXPECT_GE(x.minCoeff(), -1e-12);
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    do {
      Mat p = Mat::Zero(n, n);
      for (Index i = 0; i < n; ++i) p(i, perm[i]) = 1.0;
      ASSERT_LE((c - x).cwiseProduct(p - x).sum(), 1e-9);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
}

TEST(Birkhoff, ParameterBounds) {
  const Mat c = random_birkhoff_cost(4, 1);
  const double tau = 1.0;
  EXPECT_NEAR(birkhoff_ebalm_gamma_min(tau), 0.5, 1e-15);
  EXPECT_NO_THROW(birkhoff_projection(c, tau, BirkhoffMode::ebalm, 0.5));
  EXPECT_THROW(birkhoff_projection(c, tau, BirkhoffMode::ebalm, 0.49), ConfigError);
  // PDHG: 1/gamma < (4/3)(1 + tau/2) = 2.
  EXPECT_NO_THROW(birkhoff_projection(c, tau, BirkhoffMode::pdhg, 0.51));
  EXPECT_THROW(birkhoff_projection(c, tau, BirkhoffMode::pdhg, 0.5), ConfigError);
  EXPECT_THROW(birkhoff_projection(Mat::Zero(2, 3), tau, BirkhoffMode::pdhg, 1.0), DimensionError);
}

// ---- EMD ----

TEST(Emd, EqualDensitiesGiveZeroFlux) {
  const auto [r0, r1] = pair_on(4, 4, 3);
  auto inst = emd(r0, r0, emd_default_h(4), 1e-2, 1.0);
  const auto rep = run(inst, 1e-8, 1000);
  EXPECT_EQ(rep.status, Status::converged);
  EXPECT_LE(rep.x.norm(), 1e-12);
  EXPECT_EQ(emd_oracle(r0 - r0, 4, 4, 1.0).objective, 0.0);
}

TEST(Emd, OneByTwoMovesOneCell) {
  const Mat r0 = (Mat(1, 2) << 1, 0).finished(), r1 = (Mat(1, 2) << 0, 1).finished();
  for (double h : {0.5, 1.0, 2.0}) {
    EXPECT_NEAR(emd_oracle(r0 - r1, 1, 2, h).objective, 1.0 / h, 1e-10);
    auto inst = emd(r0, r1, h, 0.1, 1.0);
    const auto rep = run(inst, 1e-9, 100000);
    ASSERT_EQ(rep.status, Status::converged);
    EXPECT_NEAR(emd_objective(rep.x, 1, 2), 1.0 / h, 1e-4);
  }
}

TEST(Emd, MatchesOracleOnSmallGrids) {
  const std::pair<Index, Index> grids[] = {{2, 2}, {2, 3}, {3, 3}, {3, 4}, {4, 4}};
  std::uint64_t seed = 1;
  for (const auto& [m, n] : grids) {
    const auto [r0, r1] = pair_on(m, n, seed++);
    const double h = 1.0;
    const auto oracle = emd_oracle(r0 - r1, m, n, h);
    auto inst = emd(r0, r1, h, 0.05, 0.8);
    const auto rep = run(inst, 1e-8, 200000);
    ASSERT_EQ(rep.status, Status::converged) << m << "x" << n;
    EXPECT_NEAR(emd_objective(rep.x, m, n), oracle.objective, 1e-4) << m << "x" << n;
    // Divergence constraint holds to the stopping tolerance (relative).
    const Vec b = inst.saddle.gstar.data();
    EXPECT_LE((inst.saddle.K.apply(rep.x) - b).norm() / b.norm(), 1e-8);
  }
}

TEST(Emd, InputValidation) {
  const Mat a = (Mat(1, 2) << 1, 0).finished();
  EXPECT_THROW(emd(a, (Mat(1, 2) << 0, 0.9).finished(), 1.0, 0.1, 1.0), ConfigError);
  EXPECT_THROW(emd(a, (Mat(1, 2) << -1, 2).finished(), 1.0, 0.1, 1.0), ConfigError);
  EXPECT_THROW(emd(a, Mat::Ones(2, 1) / 2, 1.0, 0.1, 1.0), DimensionError);
}

TEST(Emd, SgsGammaThreshold) {
  const auto [r0, r1] = pair_on(16, 16, 1);
  const double h = emd_default_h(16);
  EXPECT_THROW(emd(r0, r1, h, 1e-3, 0.749), ConfigError);
  const auto flagged = emd(r0, r1, h, 1e-3, 0.749, 1e-6, EmdSolver::ebalm_sgs, true);
  ASSERT_TRUE(flagged.condition.has_value());
  EXPECT_EQ(flagged.condition->verdict(), Verdict::fail);

  auto ok = emd(r0, r1, h, 1e-3, 0.75);
  ASSERT_TRUE(ok.condition.has_value());
  EXPECT_TRUE(ok.condition->pass_strict);
  const auto rep = run(ok, 5e-5, 100000);
  EXPECT_EQ(rep.status, Status::converged);
}

TEST(Emd, ZeroShiftAtThreeQuartersIsOnTheBoundary) {
  const auto [r0, r1] = pair_on(6, 6, 2);
  EXPECT_THROW(emd(r0, r1, emd_default_h(6), 1e-2, 0.75, 0.0), ConfigError);
  EXPECT_NO_THROW(emd(r0, r1, emd_default_h(6), 1e-2, 0.76, 0.0));
}

TEST(Emd, InexactVariantSkipsCertification) {
  const auto [r0, r1] = pair_on(4, 4, 5);
  const auto inst = emd(r0, r1, 1.0, 0.1, 1.0, 1e-6, EmdSolver::iebalm);
  EXPECT_TRUE(inst.config.override_condition);
  EXPECT_FALSE(inst.config.M2.is_exact());
}

// ---- TV least squares ----

TEST(Tvls, ZeroDataGivesZeroImage) {
  const Index m = 6, n = 6;
  const SpMat r = random_sparse_matrix(18, 36, 0.2, 1);
  auto inst = tv_least_squares(r, Vec::Zero(18), 0.1, m, n, 0.5, 1.0);
  const auto rep = run(inst, 1e-8, 1000);
  EXPECT_EQ(rep.status, Status::converged);
  EXPECT_LE(rep.iters, 2);
  EXPECT_EQ(rep.x, Vec::Zero(36));
}

TEST(Tvls, DataBlockClosedForm) {
  Gen g(3);
  const Index m = 5, n = 4, rows = 10;
  const SpMat r = random_sparse_matrix(rows, m * n, 0.3, 2);
  const Vec b = g.normal_vec(rows);
  const double tau = 0.6;
  const auto inst = tv_least_squares(r, b, 0.05, m, n, tau, 0.8);
  const double rn = spectral_norm_sq(LinearOperator::sparse(r)).value;
  const Index ny = inst.saddle.K.rows();
  const Vec x = g.normal_vec(m * n), y = g.normal_vec(ny) * 0.01;
  const auto [xn, yn] = prepdhg_step(inst.saddle, inst.config, x, y);
  EXPECT_LE((xn - (x - tau / (2 * 0.8) * inst.saddle.K.apply_adjoint(y))).norm(), 1e-13);
  const Vec want = (tau * rn * y.head(rows) + r * (2 * xn - x) - b) / (1 + tau * rn);
  EXPECT_LE((yn.head(rows) - want).norm(), 1e-9 * (1 + want.norm()));
  EXPECT_LE(yn.tail(ny - rows).cwiseAbs().maxCoeff(), 0.05);
}

TEST(Tvls, ResidualAtReturnedIterate) {
  const Index m = 8, n = 8;
  const SpMat r = random_sparse_matrix(32, 64, 0.05, 4);
  const Vec b = r * phantom(m, n);
  auto inst = tv_least_squares(r, b, 0.01, m, n, 0.3, 0.75);
  const auto rep = run(inst, 1e-5, 100000);
  ASSERT_EQ(rep.status, Status::converged);
  const double kkt = tv_kkt_residual(LinearOperator::sparse(r), tv_gradient(m, n), b, 0.01, rep.x, rep.y);
  EXPECT_LE(kkt, 2 * rep.history.back().rhat_full);
  EXPECT_TRUE(rep.inexact);
}

TEST(Tvls, GammaBound) {
  const SpMat r = random_sparse_matrix(8, 16, 0.3, 1);
  EXPECT_THROW(tv_least_squares(r, Vec::Ones(8), 0.1, 4, 4, 0.5, 0.74), ConfigError);
  EXPECT_THROW(tv_least_squares(r, Vec::Ones(8), 0.0, 4, 4, 0.5, 1.0), ConfigError);
  EXPECT_THROW(tv_least_squares(r, Vec::Ones(7), 0.1, 4, 4, 0.5, 1.0), DimensionError);
}

// ---- builders certify their configurations ----

TEST(BuilderProperty, AcceptedParametersPassStrictCheck) {
  const Mat k = random_game_matrix(6, 5, GameGenerator::normal, 1);
  const Mat c = random_birkhoff_cost(4, 1);
  const auto [r0, r1] = random_emd_pair(5, 5, 1);
  const SpMat r = random_sparse_matrix(12, 25, 0.2, 1);
  const Vec b = r * phantom(5, 5);
  const auto taus = log10_grid(-2, 1.0 / 3.0, 1);
  ASSERT_EQ(taus.size(), 10u);
  for (int i = 0; i < 10; ++i) {
    const double t = taus[static_cast<std::size_t>(i)];
    const double gamma = 0.7501 + i * (1.5 - 0.7501) / 9;
    auto check = [&](const ProblemInstance& inst) {
      const auto rep = check_condition(inst.config.M1, inst.saddle.f.sigma(), inst.config.M2, inst.saddle.K);
      EXPECT_TRUE(rep.pass_strict) << "kind " << int(inst.kind) << " tau " << t << " gamma " << gamma;
    };
    check(matrix_game(k, t, gamma));
    check(birkhoff_projection(c, t, BirkhoffMode::ebalm, std::max(gamma, birkhoff_ebalm_gamma_min(t))));
    check(birkhoff_projection(c, t, BirkhoffMode::pdhg, std::max(gamma, 0.76 / (1 + t / 2))));
    check(tv_least_squares(r, b, 0.01, 5, 5, t, gamma));
    // The sGS metric is exact, so it is re-checked from scratch too.
    check(emd(r0, r1, emd_default_h(5), t * 1e-2, gamma));
  }
}

TEST(Grid, Log10Grid) {
  const auto g = log10_grid(-0.7, 0.01, -0.3);
  ASSERT_EQ(g.size(), 41u);
  EXPECT_DOUBLE_EQ(g.front(), std::pow(10.0, -0.7));
  EXPECT_DOUBLE_EQ(g.back(), std::pow(10.0, -0.3));
}
