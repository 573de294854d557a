#pragma once

#include "pdhg/metrics.hpp"
#include "pdhg/solver.hpp"

#include <vector>

namespace pdhg {

/// Iterate of the proximal ADMM on
///   min f(x) + g(u)  s.t.  M2^{-1/2} (K x - u) = 0.
struct AdmmState {
  Vec u;
  Vec x;
  Vec lambda;
};

/// Small dense factors shared by the ADMM routines (dim M2 <= 64).
class AdmmContext {
 public:
  AdmmContext(const SaddleProblem& p, const Metric& m1, const Metric& m2);

  const SaddleProblem& problem() const { return p_; }
  const Mat& m2_half() const { return m2_half_; }
  const Mat& m2_inv_half() const { return m2_inv_half_; }

  AdmmState step(const AdmmState& st) const;

 private:
  SaddleProblem p_;
  Metric m1_;
  Metric m2_;
  Mat m2_half_;
  Mat m2_inv_half_;
  StepKernel dual_kernel_;  // prox of g* under M2
  bool diag_ = false;
  Vec d_shift_;             // diagonal of M1 + Sigma_f
  Vec f_s_;
  Vec f_shift_;
  Eigen::LLT<Mat> dense_llt_;  // M1 + S for affine-quadratic f
};

/// u+ = prox_g^{M2^{-1}}(M2^{1/2} lambda + K x) via the Moreau identity,
/// x+ = prox_{f~}^{M1+Sigma}((M1+Sigma)^{-1}(M1 x - K^T M2^{-1}(w - u+))),
/// lambda+ = lambda + M2^{-1/2}(K x+ - u+).
AdmmState ipadmm_step(const SaddleProblem& p, const Metric& m1, const Metric& m2, const AdmmState& st);

/// y^k = M2^{-1}(M2^{1/2} lambda^k + K x^k - u^{k+1}) for k = 0..size-2.
std::vector<std::pair<Vec, Vec>> recover_pdhg_iterates(const std::vector<AdmmState>& states, const Metric& m2,
                                                       const LinearOperator& k);

/// Inverse map: given lambda^k and PrePDHG iterates (x^k, y^k), x^{k+1}, returns
/// (u^{k+1}, x^{k+1}, lambda^{k+1}).
AdmmState reverse_transform(const Vec& lambda_k, const Vec& x_k, const Vec& y_k, const Vec& x_next,
                            const Metric& m2, const LinearOperator& k);

struct HarnessResult {
  bool pass = false;
  double max_deviation = 0.0;
};

/// Runs the ADMM from (x0, lambda0), maps its iterates to PrePDHG variables,
/// runs PrePDHG from the induced start and compares the sequences.
/// `perturbation` is added to every transformed y (harness self-test).
HarnessResult equivalence_harness(const SaddleProblem& p, const Metric& m1, const Metric& m2, int iters,
                                  double tol, const Vec& x0 = Vec(), const Vec& lambda0 = Vec(),
                                  double perturbation = 0.0);

}  // namespace pdhg
