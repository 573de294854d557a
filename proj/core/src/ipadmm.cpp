#include "pdhg/ipadmm.hpp"

#include <algorithm>

namespace pdhg {
AdmmContext::AdmmContext(const SaddleProblem& p, const Metric& m1, const Metric& m2)
    : p_(p),
      m1_(m1),
      m2_(m2),
      m2_half_(m2.sqrt_dense()),
      m2_inv_half_(m2.inv_sqrt_dense()),
      dual_kernel_(p, m1.is_diagonal() ? m1 : Metric::scalar(p.K.cols(), 1.0), m2) {
  if (m1_.is_diagonal()) {
    diag_ = true;
    d_shift_ = m1_.diag() + p_.f.sigma();
  } else {
    // f~ = f - 1/2 ||.||^2_S is linear: -<S c - l, .>.
    p_.f.affine_parts(f_s_, f_shift_);
    Mat a = m1_.to_dense();
    a.diagonal() += f_s_;
    dense_llt_.compute(a);
    if (dense_llt_.info() != Eigen::Success) throw ConfigError("M1 + Sigma_f is not positive definite");
  }
}

AdmmState AdmmContext::step(const AdmmState& st) const {
  const LinearOperator& k = p_.K;
  const Vec w = m2_half_ * st.lambda + k.apply(st.x);
  // Moreau: w = prox_g^{M2^{-1}}(w) + M2 prox_{g*}^{M2}(M2^{-1} w).
  const Vec ystar = dual_kernel_.dual(m2_.solve(w), Vec::Zero(w.size()));
  AdmmState next;
  next.u = w - m2_.apply(ystar);

  const Vec rhs = m1_.apply(st.x) - k.apply_adjoint(m2_.solve(w - next.u));
  if (diag_) {
    next.x = p_.f.prox_shifted_diag(rhs.cwiseQuotient(d_shift_), d_shift_);
  } else {
    next.x = dense_llt_.solve(f_shift_ + rhs);
  }
  next.lambda = st.lambda + m2_inv_half_ * (k.apply(next.x) - next.u);
  return next;
}

AdmmState ipadmm_step(const SaddleProblem& p, const Metric& m1, const Metric& m2, const AdmmState& st) {
  return AdmmContext(p, m1, m2).step(st);
}

std::vector<std::pair<Vec, Vec>> recover_pdhg_iterates(const std::vector<AdmmState>& states, const Metric& m2,
                                                       const LinearOperator& k) {
  std::vector<std::pair<Vec, Vec>> out;
  if (states.size() < 2) return out;
  const Mat half = m2.sqrt_dense();
  for (std::size_t i = 0; i + 1 < states.size(); ++i) {
    const auto& st = states[i];
    out.emplace_back(st.x, m2.solve(half * st.lambda + k.apply(st.x) - states[i + 1].u));
  }
  return out;
}

AdmmState reverse_transform(const Vec& lambda_k, const Vec& x_k, const Vec& y_k, const Vec& x_next,
                            const Metric& m2, const LinearOperator& k) {
  const Mat half = m2.sqrt_dense();
  const Mat inv_half = m2.inv_sqrt_dense();
  AdmmState st;
  st.x = x_next;
  st.lambda = inv_half * k.apply(x_next - x_k) + half * y_k;
  st.u = half * lambda_k + k.apply(x_k) - m2.apply(y_k);
  return st;
}

HarnessResult equivalence_harness(const SaddleProblem& p, const Metric& m1, const Metric& m2, int iters,
                                  double tol, const Vec& x0, const Vec& lambda0, double perturbation) {
  p.validate();
  if (iters < 1) throw ConfigError("harness needs at least one iteration");
  if (p.K.rows() > 64 || p.K.cols() > 64) throw ConfigError("equivalence harness is limited to dims <= 64");
  const AdmmContext ctx(p, m1, m2);

  std::vector<AdmmState> states;
  AdmmState st{Vec::Zero(p.K.rows()), x0.size() ? x0 : Vec::Zero(p.K.cols()),
               lambda0.size() ? lambda0 : Vec::Zero(p.K.rows())};
  states.push_back(st);
  for (int i = 0; i <= iters; ++i) {
    st = ctx.step(st);
    states.push_back(st);
  }
  auto mapped = recover_pdhg_iterates(states, m2, p.K);
  for (auto& pair : mapped) pair.second.array() += perturbation;

  SolverConfig cfg(m1, m2);
  cfg.override_condition = true;
  const StepKernel kernel(p, m1, m2, cfg.inner_epochs);
  Vec x = mapped.front().first;
  Vec y = mapped.front().second;
  HarnessResult res;
  for (int i = 1; i <= iters; ++i) {
    Vec x_new = kernel.primal(x, p.K.apply_adjoint(y));
    Vec y_new = kernel.dual(y, p.K.apply(2.0 * x_new - x));
    x = std::move(x_new);
    y = std::move(y_new);
    const auto& [ax, ay] = mapped[static_cast<std::size_t>(i)];
    res.max_deviation = std::max({res.max_deviation, (ax - x).cwiseAbs().maxCoeff(), (ay - y).cwiseAbs().maxCoeff()});
  }
  res.pass = res.max_deviation <= tol;
  return res;
}

}  // namespace pdhg
