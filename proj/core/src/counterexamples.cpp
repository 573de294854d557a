#include "pdhg/counterexamples.hpp"

#include <cmath>

namespace pdhg {

ToyDynamics make_toy(ToyKind kind, double tau, double sigma) {
  if (!(tau > 0.0) || !(sigma > 0.0)) throw ConfigError("toy dynamics: tau and sigma must be positive");
  ToyDynamics dyn{kind, tau, sigma, Eigen::Matrix2d::Zero()};
  const double ts = tau * sigma;
  if (kind == ToyKind::bilinear) {
    dyn.G << 1.0, -tau, sigma, 1.0 - 2.0 * ts;
  } else {
    dyn.G << 1.0, -tau, sigma * (1.0 - tau), 1.0 + tau - 2.0 * ts;
    dyn.G /= 1.0 + tau;
  }
  return dyn;
}

ConfiguredSolve toy_problem(const ToyDynamics& dyn) {
  Proximable f = dyn.kind == ToyKind::bilinear ? Proximable::zero(1) : Proximable::quadratic_shift(Vec::Zero(1));
  SaddleProblem p{std::move(f), Proximable::zero(1), LinearOperator::dense(Mat::Ones(1, 1))};
  SolverConfig cfg(Metric::scalar(1, 1.0 / dyn.tau), Metric::scalar(1, 1.0 / dyn.sigma));
  cfg.override_condition = true;
  return {std::move(p), std::move(cfg)};
}

std::pair<std::complex<double>, std::complex<double>> eig2(const Eigen::Matrix2d& g) {
  const double half_tr = 0.5 * (g(0, 0) + g(1, 1));
  const double det = g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0);
  const std::complex<double> root = std::sqrt(std::complex<double>(half_tr * half_tr - det, 0.0));
  std::complex<double> a = half_tr + root;
  std::complex<double> b = half_tr - root;
  // Cancellation-free smaller root when both are real.
  if (root.imag() == 0.0 && a.real() != 0.0 && b.real() != 0.0) {
    const double big = half_tr >= 0.0 ? half_tr + root.real() : half_tr - root.real();
    a = big;
    b = det / big;
  }
  if (std::abs(b) > std::abs(a)) std::swap(a, b);
  return {a, b};
}

const char* to_string(ToyVerdict v) {
  switch (v) {
    case ToyVerdict::converges:
      return "converges-to-zero";
    case ToyVerdict::oscillates:
      return "oscillates";
    case ToyVerdict::diverges:
      return "diverges";
  }
  return "converges-to-zero";
}

namespace {

constexpr double kAngleTol = 1e-12;
constexpr double kUnitTol = 1e-12;

// A real eigenvector of g for the real eigenvalue mu.
Eigen::Vector2d eigenvector(const Eigen::Matrix2d& g, double mu) {
  const Eigen::Matrix2d a = g - mu * Eigen::Matrix2d::Identity();
  Eigen::Vector2d v1(a(0, 1), -a(0, 0));
  Eigen::Vector2d v2(a(1, 1), -a(1, 0));
  return v1.norm() >= v2.norm() ? v1 : v2;
}

bool on_line(const Eigen::Vector2d& x, const Eigen::Vector2d& v) {
  const double nx = x.norm();
  const double nv = v.norm();
  if (nx == 0.0) return true;
  if (nv == 0.0) return true;  // g = mu I: every direction is an eigenvector
  return std::abs(x[0] * v[1] - x[1] * v[0]) / (nx * nv) <= kAngleTol;
}

ToyVerdict verdict_for_radius(double r) {
  if (r < 1.0 - kUnitTol) return ToyVerdict::converges;
  if (r <= 1.0 + kUnitTol) return ToyVerdict::oscillates;
  return ToyVerdict::diverges;
}

}  // namespace

Classification classify(const ToyDynamics& dyn, const Eigen::Vector2d& x0, int max_iter) {
  if (max_iter < 1) throw ConfigError("classify needs max_iter >= 1");
  Classification out;
  const auto [mu1, mu2] = eig2(dyn.G);
  out.radius = std::abs(mu1);
  out.effective_radius = out.radius;
  const bool real_pair = mu1.imag() == 0.0 && mu2.imag() == 0.0;
  if (x0.norm() == 0.0) {
    out.effective_radius = 0.0;
  } else if (real_pair && std::abs(mu1 - mu2) > kUnitTol &&
             on_line(x0, eigenvector(dyn.G, mu2.real()))) {
    out.effective_radius = std::abs(mu2);
  }
  out.spectral = verdict_for_radius(out.effective_radius);

  Eigen::Vector2d z = x0;
  out.simulated = ToyVerdict::oscillates;
  bool decided = false;
  for (int k = 1; k <= max_iter; ++k) {
    z = dyn.G * z;
    out.iters = k;
    const double nz = z.norm();
    if (!std::isfinite(nz) || nz > 1e12) {
      out.simulated = ToyVerdict::diverges;
      decided = true;
      break;
    }
    if (nz <= 1e-8) {
      out.simulated = ToyVerdict::converges;
      decided = true;
      break;
    }
  }
  out.final_norm = z.norm();
  if (!decided) {
    if (out.final_norm < 1e-3) {
      out.simulated = ToyVerdict::converges;
    } else if (out.final_norm > 1e3) {
      out.simulated = ToyVerdict::diverges;
    }
  }
  return out;
}

std::vector<ScanRow> rho2_boundary_scan(double tau, const std::vector<double>& rho3_grid) {
  std::vector<ScanRow> rows;
  rows.reserve(rho3_grid.size());
  for (double rho3 : rho3_grid) {
    const double sigma = (4.0 / 3.0) * (1.0 / tau + rho3);
    const auto dyn = make_toy(ToyKind::quadratic, tau, sigma);
    rows.push_back({rho3, sigma, std::abs(eig2(dyn.G).first)});
  }
  return rows;
}

}  // namespace pdhg
