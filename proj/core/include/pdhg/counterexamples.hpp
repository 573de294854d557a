#pragma once

#include "pdhg/solver.hpp"

#include <complex>
#include <utility>
#include <vector>

namespace pdhg {

enum class ToyKind {
  bilinear,   // min_x max_y xy
  quadratic,  // min_x max_y x^2/2 + xy
};

/// Exact 2x2 iteration map (x, y) -> G (x, y) of PDHG with scalar steps.
struct ToyDynamics {
  ToyKind kind;
  double tau;
  double sigma;
  Eigen::Matrix2d G;
};

ToyDynamics make_toy(ToyKind kind, double tau, double sigma);

/// The toy as a saddle problem with M1 = 1/tau, M2 = 1/sigma.
ConfiguredSolve toy_problem(const ToyDynamics& dyn);

/// Roots of the characteristic polynomial, |mu1| >= |mu2|.
std::pair<std::complex<double>, std::complex<double>> eig2(const Eigen::Matrix2d& g);

enum class ToyVerdict { converges, oscillates, diverges };

const char* to_string(ToyVerdict v);

struct Classification {
  ToyVerdict spectral = ToyVerdict::converges;
  ToyVerdict simulated = ToyVerdict::converges;
  double radius = 0.0;            // spectral radius of G
  double effective_radius = 0.0;  // largest |mu| excited by x0
  double final_norm = 0.0;
  int iters = 0;

  bool agree() const { return spectral == simulated; }
};

/// Spectral verdict (x0 on an eigenline only excites that eigenvalue, with
/// angular tolerance 1e-12) cross-checked by iterating G. The simulation
/// stops early below 1e-8 or above 1e12; otherwise the norm at max_iter
/// decides: < 1e-3 converges, > 1e3 diverges, else oscillates.
Classification classify(const ToyDynamics& dyn, const Eigen::Vector2d& x0, int max_iter = 100000);

struct ScanRow {
  double rho3 = 0.0;
  double sigma = 0.0;
  double mu_abs = 0.0;  // |dominant eigenvalue|
};

/// Quadratic toy with sigma = (4/3)(1/tau + rho3) for each rho3.
std::vector<ScanRow> rho2_boundary_scan(double tau, const std::vector<double>& rho3_grid);

}  // namespace pdhg
