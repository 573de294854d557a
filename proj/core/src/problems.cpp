#include "pdhg/problems.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace pdhg {

const char* to_string(GameGenerator g) {
  switch (g) {
    case GameGenerator::uniform:
      return "uniform";
    case GameGenerator::normal:
      return "normal";
    case GameGenerator::scaled_normal:
      return "scaled-normal";
    case GameGenerator::sparse_uniform:
      return "sparse-uniform";
  }
  return "uniform";
}

GameGenerator parse_game_generator(const std::string& s) {
  for (auto g : {GameGenerator::uniform, GameGenerator::normal, GameGenerator::scaled_normal,
                 GameGenerator::sparse_uniform}) {
    if (s == to_string(g)) return g;
  }
  throw ConfigError("unknown game generator '" + s + "'");
}

Mat random_game_matrix(Index m, Index n, GameGenerator gen, std::uint64_t seed) {
  if (m < 1 || n < 1) throw DimensionError("game matrix must be non-empty");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat k(m, n);
  // Column-major fill keeps the stream order independent of Eigen internals.
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < m; ++i) {
      switch (gen) {
        case GameGenerator::uniform:
          k(i, j) = unif(rng);
          break;
        case GameGenerator::normal:
          k(i, j) = normal(rng);
          break;
        case GameGenerator::scaled_normal:
          k(i, j) = 10.0 * normal(rng);
          break;
        case GameGenerator::sparse_uniform: {
          const double keep = unif(rng);
          const double v = unif(rng);
          k(i, j) = keep < 0.1 ? v : 0.0;
          break;
        }
      }
    }
  }
  return k;
}

namespace {

// Runs the strict check once at build time; solve() then skips it.
void certify(ProblemInstance& inst) {
  inst.condition = check_condition(inst.config.M1, inst.saddle.f.sigma(), inst.config.M2, inst.saddle.K);
  if (!inst.condition->pass_strict) {
    std::ostringstream msg;
    msg.precision(12);
    msg << "convergence condition violated: s_hat = " << inst.condition->s_hat << " >= 4/3";
    throw ConfigError(msg.str());
  }
  inst.config.override_condition = true;
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(what) + " must be positive");
}

}  // namespace

ProblemInstance matrix_game(const Mat& k, double tau_tilde, double gamma, double k_norm) {
  if (k.size() == 0) throw DimensionError("game matrix must be non-empty");
  require_positive(tau_tilde, "tau_tilde");
  if (!(gamma > 0.75)) throw ConfigError("matrix game: gamma must exceed 3/4");
  const auto op = LinearOperator::dense(k);
  if (!(k_norm > 0.0)) k_norm = std::sqrt(spectral_norm_sq(op).value);
  // K = 0: any positive stepsizes work; use ||K|| = 1.
  if (!(k_norm > 0.0)) k_norm = 1.0;
  const double tau = tau_tilde / k_norm;
  const double sigma = 1.0 / (gamma * tau_tilde * k_norm);

  ProblemInstance inst{ProblemKind::matrix_game,
                       {Proximable::indicator_simplex(k.cols()), Proximable::indicator_simplex(k.rows()), op},
                       SolverConfig(Metric::scalar(k.cols(), 1.0 / tau), Metric::scalar(k.rows(), 1.0 / sigma)),
                       std::nullopt,
                       k};
  inst.config.tol = 1e-5;
  inst.config.max_iter = 200000;
  inst.config.x0 = Vec::Constant(k.cols(), 1.0 / static_cast<double>(k.cols()));
  inst.config.y0 = Vec::Constant(k.rows(), 1.0 / static_cast<double>(k.rows()));
  certify(inst);
  return inst;
}

double birkhoff_tau(double tau_tilde, Index n) { return tau_tilde / std::sqrt(2.0 * static_cast<double>(n)); }

double birkhoff_ebalm_gamma_min(double tau) { return 0.75 / (1.0 + tau / 2.0); }

Mat random_birkhoff_cost(Index n, std::uint64_t seed) {
  const Mat c = random_game_matrix(n, n, GameGenerator::uniform, seed);
  return (c + c.transpose()) / 2.0;
}

ProblemInstance birkhoff_projection(const Mat& c, double tau, BirkhoffMode mode, double gamma, double theta) {
  if (c.rows() != c.cols() || c.rows() < 1) throw DimensionError("Birkhoff: C must be square and non-empty");
  require_positive(tau, "tau");
  require_positive(gamma, "gamma");
  require_positive(theta, "theta");
  const Index n = c.rows();
  const auto k = LinearOperator::birkhoff(n);
  const Vec cvec = Eigen::Map<const Vec>(c.data(), c.size());

  Metric m2 = Metric::scalar(2 * n, 1.0);
  if (mode == BirkhoffMode::pdhg) {
    const double sigma = 1.0 / (2.0 * static_cast<double>(n) * gamma * tau);
    if (!(1.0 / gamma < (4.0 / 3.0) * (1.0 + tau / 2.0))) {
      throw ConfigError("Birkhoff PDHG: need 2n tau sigma < (4/3)(1 + tau/2)");
    }
    m2 = Metric::scalar(2 * n, 1.0 / sigma);
  } else {
    // Accept gamma equal to the bound up to rounding in the caller's formula.
    if (gamma < birkhoff_ebalm_gamma_min(tau) * (1.0 - 1e-12)) {
      throw ConfigError("Birkhoff eBALM: need gamma >= 0.75/(1 + tau/2)");
    }
    m2 = Metric::gram_shift(gamma, tau, k, gamma * theta);
  }

  ProblemInstance inst{ProblemKind::birkhoff,
                       {Proximable::quadratic_shift_nonneg(cvec), Proximable::linear(Vec::Ones(2 * n)), k},
                       SolverConfig(Metric::scalar(n * n, 1.0 / tau), std::move(m2)),
                       std::nullopt,
                       c};
  inst.config.residual_mode = ResidualMode::linear_g;
  inst.config.stop_on_half = true;
  inst.config.tol = 1e-8;
  inst.config.max_iter = 200000;
  inst.config.x0 = Vec::Constant(n * n, 1.0 / static_cast<double>(n));
  inst.config.y0 = Vec::Zero(2 * n);
  certify(inst);
  return inst;
}

double emd_default_h(Index grid_n) { return grid_n > 1 ? static_cast<double>(grid_n - 1) / 4.0 : 1.0; }

std::pair<Mat, Mat> random_emd_pair(Index grid_m, Index grid_n, std::uint64_t seed) {
  Mat a = random_game_matrix(grid_m, grid_n, GameGenerator::uniform, seed);
  Mat b = random_game_matrix(grid_m, grid_n, GameGenerator::uniform, seed ^ 0x9e3779b97f4a7c15ULL);
  a /= a.sum();
  b /= b.sum();
  return {a, b};
}

ProblemInstance emd(const Mat& rho0, const Mat& rho1, double h, double tau, double gamma, double theta,
                    EmdSolver solver, bool allow_small_gamma) {
  if (rho0.rows() != rho1.rows() || rho0.cols() != rho1.cols()) throw DimensionError("EMD: density shapes differ");
  if (rho0.size() < 2) throw DimensionError("EMD: grid needs at least two nodes");
  if ((rho0.array() < 0.0).any() || (rho1.array() < 0.0).any()) throw ConfigError("EMD: densities must be nonnegative");
  if (std::abs(rho0.sum() - rho1.sum()) > 1e-12) throw ConfigError("EMD: total masses differ");
  require_positive(h, "h");
  require_positive(tau, "tau");
  require_positive(gamma, "gamma");
  if (!(theta >= 0.0)) throw ConfigError("theta must be nonnegative");

  const Index gm = rho0.rows();
  const Index gn = rho0.cols();
  const Mat diff = rho0 - rho1;
  const Vec b = Eigen::Map<const Vec>(diff.data(), diff.size());
  const auto k = LinearOperator::grid_divergence(gm, gn, h);
  const auto f = Proximable::group_l12(gm, gn);
  const Partition rb = red_black_partition(gm, gn);

  ConfiguredSolve cs = solver == EmdSolver::ebalm_sgs
                           ? configure_ebalm_sgs(f, k, b, tau, theta, gamma, rb, allow_small_gamma)
                           : configure_iebalm(f, k, b, tau, theta, gamma, rb, 2);
  ProblemInstance inst{ProblemKind::emd, std::move(cs.problem), std::move(cs.config), std::nullopt, diff};
  inst.grid_m = gm;
  inst.grid_n = gn;
  inst.h = h;
  inst.config.relative_feasibility = true;
  inst.config.tol = 5e-5;
  inst.config.max_iter = 100000;
  if (solver == EmdSolver::ebalm_sgs) {
    if (gamma < kEbalmGammaMin) {
      // Below the guaranteed range: report the check, run anyway.
      inst.condition = check_condition(inst.config.M1, inst.saddle.f.sigma(), inst.config.M2, k);
      inst.config.override_condition = true;
    } else {
      certify(inst);
    }
  }
  return inst;
}

double emd_objective(const Vec& flux, Index grid_m, Index grid_n) {
  const Index mn = grid_m * grid_n;
  require_dim(flux.size(), 2 * mn, "EMD flux");
  double total = 0.0;
  for (Index k = 0; k < mn; ++k) total += std::hypot(flux[k], flux[mn + k]);
  return total;
}

SpMat random_sparse_matrix(Index rows, Index cols, double density, std::uint64_t seed) {
  if (rows < 1 || cols < 1) throw DimensionError("sparse matrix must be non-empty");
  if (!(density > 0.0 && density <= 1.0)) throw ConfigError("density must lie in (0, 1]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Eigen::Triplet<double>> trip;
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      const double keep = unif(rng);
      const double v = unif(rng);
      if (keep < density) trip.emplace_back(i, j, v);
    }
  }
  SpMat r(rows, cols);
  r.setFromTriplets(trip.begin(), trip.end());
  return r;
}

Vec phantom(Index grid_m, Index grid_n) {
  Vec x = Vec::Zero(grid_m * grid_n);
  const double cm = (static_cast<double>(grid_m) - 1.0) / 2.0;
  const double cn = (static_cast<double>(grid_n) - 1.0) / 2.0;
  for (Index j = 0; j < grid_n; ++j) {
    for (Index i = 0; i < grid_m; ++i) {
      const double u = (static_cast<double>(i) - cm) / std::max(1.0, cm);
      const double v = (static_cast<double>(j) - cn) / std::max(1.0, cn);
      double val = 0.0;
      if (u * u / 0.8 + v * v / 0.6 <= 1.0) val = 1.0;
      if ((u - 0.2) * (u - 0.2) + (v + 0.1) * (v + 0.1) <= 0.09) val = 0.4;
      if (std::abs(u + 0.35) <= 0.15 && std::abs(v - 0.3) <= 0.2) val = 0.7;
      x[i + j * grid_m] = val;
    }
  }
  return x;
}

LinearOperator tv_gradient(Index grid_m, Index grid_n) {
  return LinearOperator::transpose(LinearOperator::grid_divergence(grid_m, grid_n, 1.0));
}

namespace {

// Three-term residual from K x = (Rx, Dx) and K^T y = R^T y1 + D^T y2.
double tv_terms(const Vec& kx, const Vec& kty, const Vec& b, double lambda, const Vec& y) {
  const Index m = b.size();
  const Index p = y.size() - m;
  const double stationarity = kty.norm();
  const double fit = (kx.head(m) - y.head(m) - b).norm();
  const double edge = 1e-12 * lambda;
  double cone_sq = 0.0;
  for (Index i = 0; i < p; ++i) {
    const double yi = y[m + i];
    const double dxi = kx[m + i];
    double d;
    if (yi >= lambda - edge && yi <= -lambda + edge) {
      d = 0.0;  // lambda = 0: the cone is the whole line
    } else if (yi >= lambda - edge) {
      d = std::max(0.0, -dxi);
    } else if (yi <= -lambda + edge) {
      d = std::max(0.0, dxi);
    } else {
      d = std::abs(dxi);
    }
    cone_sq += d * d;
  }
  return std::max({stationarity, fit, std::sqrt(cone_sq)});
}

}  // namespace

double tv_kkt_residual(const LinearOperator& r, const LinearOperator& d, const Vec& b, double lambda, const Vec& x,
                       const Vec& y) {
  require_dim(r.cols(), d.cols(), "R and D columns");
  require_dim(y.size(), r.rows() + d.rows(), "y");
  require_dim(b.size(), r.rows(), "b");
  Vec kx(y.size());
  kx << r.apply(x), d.apply(x);
  const Vec kty = r.apply_adjoint(y.head(r.rows())) + d.apply_adjoint(y.tail(d.rows()));
  return tv_terms(kx, kty, b, lambda, y);
}

ProblemInstance tv_least_squares(const SpMat& r, const Vec& b, double lambda, Index grid_m, Index grid_n, double tau,
                                 double gamma, double theta, int inner_epochs, double r_norm_sq,
                                 bool allow_small_gamma) {
  require_dim(r.cols(), grid_m * grid_n, "R columns vs grid");
  require_dim(b.size(), r.rows(), "b");
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  require_positive(tau, "tau");
  require_positive(gamma, "gamma");
  require_positive(theta, "theta");
  if (gamma < kEbalmGammaMin && !allow_small_gamma) throw ConfigError("gamma must be at least 3/4");

  const auto rop = LinearOperator::sparse(r);
  const auto d = tv_gradient(grid_m, grid_n);
  if (!(r_norm_sq > 0.0)) r_norm_sq = spectral_norm_sq(rop).value;
  if (!(r_norm_sq > 0.0)) throw ConfigError("R must be nonzero");

  const Index m = r.rows();
  SaddleProblem p{Proximable::zero(r.cols()),
                  Proximable::separable_sum({Proximable::quadratic_shift(-b),
                                             Proximable::indicator_linf_ball(d.rows(), lambda)}),
                  LinearOperator::vstack({rop, d})};
  Metric m2 = Metric::block_diag({Metric::scalar(m, tau * r_norm_sq), Metric::gram_shift(1.0, tau, d, theta)});
  ProblemInstance inst{ProblemKind::tvls, std::move(p),
                       SolverConfig(Metric::scalar(r.cols(), 2.0 * gamma / tau), std::move(m2)), std::nullopt,
                       Mat()};
  inst.grid_m = grid_m;
  inst.grid_n = grid_n;
  auto& cfg = inst.config;
  cfg.inner_epochs = inner_epochs;
  cfg.tol = 1e-5;
  cfg.max_iter = 100000;
  cfg.residual_mode = ResidualMode::custom;
  cfg.custom_residual = [k = inst.saddle.K, b, lambda](const ResidualContext& ctx) {
    const double v = tv_terms(ctx.kx_new, k.apply_adjoint(ctx.y_new), b, lambda, ctx.y_new);
    return Residuals{v, v};
  };
  if (gamma < kEbalmGammaMin) {
    inst.condition = check_condition(cfg.M1, inst.saddle.f.sigma(), cfg.M2, inst.saddle.K);
    cfg.override_condition = true;
  } else {
    certify(inst);
  }
  return inst;
}

std::vector<double> log10_grid(double a0, double step, double a1) {
  if (!(step > 0.0) || a1 < a0) throw ConfigError("log grid: need step > 0 and a1 >= a0");
  const auto count = static_cast<long long>(std::llround((a1 - a0) / step)) + 1;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  for (long long i = 0; i < count; ++i) out.push_back(std::pow(10.0, a0 + static_cast<double>(i) * step));
  return out;
}

}  // namespace pdhg
