#include "pdhg/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace pdhg {

void SaddleProblem::validate() const {
  require_dim(f.dim(), K.cols(), "f dimension vs K columns");
  require_dim(gstar.dim(), K.rows(), "g* dimension vs K rows");
}

const char* to_string(Status s) {
  switch (s) {
    case Status::converged:
      return "converged";
    case Status::max_iter:
      return "max-iter";
    case Status::diverged:
      return "diverged";
  }
  return "max-iter";
}

namespace {

constexpr Index kDenseLimit = 4096;

}  // namespace

namespace detail {

struct DualPlan {
  enum class Mode { diag, affine, block, box_bcd } mode = Mode::diag;
  Proximable g;
  Metric m;
  Vec d;
  Vec s;
  Vec shift;
  std::optional<Eigen::LLT<Mat>> llt;
  std::vector<DualPlan> children;
  SpMat q;
  std::vector<Index> order;
  Vec qdiag;
  int epochs = 2;
  bool inexact = false;

  DualPlan(const Proximable& gs, const Metric& metric, int inner_epochs) : g(gs), m(metric), epochs(inner_epochs) {
    require_dim(m.dim(), g.dim(), "dual metric dimension");
    if (m.is_diagonal()) {
      mode = Mode::diag;
      d = m.diag();
      g.validate_diag(d);
      return;
    }
    if (g.is_affine_quadratic()) {
      mode = Mode::affine;
      g.affine_parts(s, shift);
      inexact = !m.is_exact();
      if (s.any()) {
        if (m.dim() > kDenseLimit) throw ConfigError("quadratic g* under a large non-diagonal M2 is unsupported");
        Mat a = m.to_dense();
        a.diagonal() += s;
        llt.emplace(a);
        if (llt->info() != Eigen::Success) throw ConfigError("dual metric not positive definite");
      }
      return;
    }
    if (m.kind() == MetricKind::block_diag && g.kind() == ProxKind::separable_sum &&
        m.children().size() == g.parts().size()) {
      mode = Mode::block;
      for (std::size_t i = 0; i < g.parts().size(); ++i) {
        children.emplace_back(g.parts()[i], m.children()[i], epochs);
        inexact = inexact || children.back().inexact;
      }
      return;
    }
    if (g.kind() == ProxKind::indicator_linf_ball) {
      if (epochs < 1) throw ConfigError("inner BCD needs at least one epoch");
      mode = Mode::box_bcd;
      inexact = true;
      q = m.q_matrix();
      qdiag = Vec(q.diagonal());
      if (!(qdiag.array() > 0.0).all()) throw ConfigError("inner BCD needs a positive diagonal");
      for (const auto& block : greedy_coloring(q)) order.insert(order.end(), block.begin(), block.end());
      return;
    }
    throw ConfigError("unsupported (g*, M2) combination");
  }

  Vec run(const Vec& yk, const Vec& r) const {
    switch (mode) {
      case Mode::diag:
        return g.prox_diag(yk + r.cwiseQuotient(d), d);
      case Mode::affine:
        if (llt) return llt->solve(shift + r + m.apply(yk));
        return yk + m.solve(r + shift);
      case Mode::block: {
        Vec out(yk.size());
        Index off = 0;
        for (const auto& c : children) {
          const Index n = c.g.dim();
          out.segment(off, n) = c.run(yk.segment(off, n), r.segment(off, n));
          off += n;
        }
        return out;
      }
      case Mode::box_bcd: {
        // min 1/2 y^T Q y - <Q yk + r, y> over |y| <= radius, coordinate
        // sweeps in color order (coordinates within a color are uncoupled).
        const double rad = g.weight();
        Vec y = yk;
        const Vec rhs = q * yk + r;
        for (int e = 0; e < epochs; ++e) {
          for (Index i : order) {
            double v = rhs[i];
            for (SpMat::InnerIterator it(q, i); it; ++it) {
              if (it.col() != i) v -= it.value() * y[it.col()];
            }
            y[i] = std::clamp(v / qdiag[i], -rad, rad);
          }
        }
        return y;
      }
    }
    return yk;
  }
};

}  // namespace detail

StepKernel::StepKernel(const SaddleProblem& p, const Metric& m1, const Metric& m2, int inner_epochs)
    : p_(p), m1_(m1), m2_(m2) {
  p_.validate();
  require_dim(m1_.dim(), p_.K.cols(), "M1 dimension");
  require_dim(m2_.dim(), p_.K.rows(), "M2 dimension");
  if (m1_.is_diagonal()) {
    primal_diag_ = true;
    m1_diag_ = m1_.diag();
    p_.f.validate_diag(m1_diag_);
  } else if (p_.f.is_affine_quadratic()) {
    if (!m1_.is_exact()) throw ConfigError("primal metric must be solved exactly");
    p_.f.affine_parts(f_s_, f_shift_);
    if (f_s_.any()) {
      if (m1_.dim() > kDenseLimit) throw ConfigError("quadratic f under a large non-diagonal M1 is unsupported");
      Mat a = m1_.to_dense();
      a.diagonal() += f_s_;
      primal_llt_.emplace(a);
      if (primal_llt_->info() != Eigen::Success) throw ConfigError("primal metric not positive definite");
    }
  } else {
    throw ConfigError("unsupported (f, M1) combination: non-diagonal M1 needs f zero, linear or quadratic");
  }
  dual_ = std::make_unique<detail::DualPlan>(p_.gstar, m2_, inner_epochs);
}

StepKernel::~StepKernel() = default;
StepKernel::StepKernel(StepKernel&&) noexcept = default;
StepKernel& StepKernel::operator=(StepKernel&&) noexcept = default;

Vec StepKernel::primal(const Vec& xk, const Vec& kty) const {
  if (primal_diag_) return p_.f.prox_diag(xk - kty.cwiseQuotient(m1_diag_), m1_diag_);
  if (primal_llt_) return primal_llt_->solve(f_shift_ + m1_.apply(xk) - kty);
  return xk + m1_.solve(f_shift_ - kty);
}

Vec StepKernel::dual(const Vec& yk, const Vec& r) const { return dual_->run(yk, r); }

bool StepKernel::inexact() const { return dual_->inexact; }

std::pair<Vec, Vec> prepdhg_step(const SaddleProblem& p, const SolverConfig& cfg, const Vec& x, const Vec& y) {
  require_dim(x.size(), p.K.cols(), "x");
  require_dim(y.size(), p.K.rows(), "y");
  const StepKernel kernel(p, cfg.M1, cfg.M2, cfg.inner_epochs);
  Vec x_new = kernel.primal(x, p.K.apply_adjoint(y));
  Vec y_new = kernel.dual(y, p.K.apply(2.0 * x_new - x));
  return {std::move(x_new), std::move(y_new)};
}

Residuals residual_hat(const SaddleProblem& p, const Metric& m1, const Metric& m2, const Vec& x_new,
                       const Vec& x, const Vec& y_new, const Vec& y, const Vec& x_prev, const Vec& y_prev) {
  const Vec dx = x_new - x;
  const Vec dy = y_new - y;
  const Vec m1dx = m1.apply(dx);
  Residuals r;
  r.full = std::max((p.K.apply_adjoint(dy) - m1dx).norm(), (p.K.apply(dx) - m2.apply(dy)).norm());
  r.half = std::max(m1dx.norm(),
                    (p.K.apply(2.0 * x - x_prev - x_new) - m2.apply(y - y_prev)).norm());
  return r;
}

struct Solver::State {
  State(const SaddleProblem& problem, const SolverConfig& config)
      : p(problem), cfg(config), kernel(problem, config.M1, config.M2, config.inner_epochs) {}

  SaddleProblem p;
  SolverConfig cfg;
  StepKernel kernel;
  SolveReport rep;
  Vec x, y, kx, kty, x_prev, y_prev, kx_prev;
  Residuals last;
  double feas_scale = 1.0;
  bool done = false;
  std::chrono::steady_clock::time_point t0;

  double elapsed() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); }
  void record() {
    const double gap = cfg.gap ? cfg.gap(x, y) : std::numeric_limits<double>::quiet_NaN();
    rep.history.push_back({rep.iters, last.full, last.half, gap, elapsed()});
  }
};

Solver::Solver(const SaddleProblem& p, const SolverConfig& cfg) {
  p.validate();
  if (cfg.max_iter < 0) throw ConfigError("max_iter must be nonnegative");
  if (!(cfg.tol >= 0.0)) throw ConfigError("tol must be nonnegative");
  if (cfg.record_every < 1) throw ConfigError("record_every must be positive");
  if (cfg.residual_mode == ResidualMode::linear_g && p.gstar.kind() != ProxKind::linear) {
    throw ConfigError("linear-g residual mode needs g* linear");
  }
  if (cfg.residual_mode == ResidualMode::custom && !cfg.custom_residual) {
    throw ConfigError("custom residual mode needs a residual function");
  }

  s_ = std::make_unique<State>(p, cfg);
  SolveReport& rep = s_->rep;
  rep.inexact = s_->kernel.inexact() || !cfg.M1.is_exact() || !cfg.M2.is_exact();
  if (!cfg.override_condition) {
    if (!cfg.M1.is_exact() || !cfg.M2.is_exact()) {
      throw ConfigError("inexact metrics carry no convergence guarantee; set override_condition");
    }
    rep.condition = check_condition(cfg.M1, p.f.sigma(), cfg.M2, p.K);
    if (!rep.condition->pass_strict) {
      std::ostringstream msg;
      msg.precision(12);
      msg << "convergence condition violated: s_hat = " << rep.condition->s_hat << " >= 4/3";
      throw ConfigError(msg.str());
    }
  }

  s_->x = cfg.x0.size() ? cfg.x0 : Vec::Zero(p.K.cols());
  s_->y = cfg.y0.size() ? cfg.y0 : Vec::Zero(p.K.rows());
  require_dim(s_->x.size(), p.K.cols(), "x0");
  require_dim(s_->y.size(), p.K.rows(), "y0");

  if (cfg.residual_mode == ResidualMode::linear_g && cfg.relative_feasibility) {
    const double bn = p.gstar.data().norm();
    if (bn > 0.0) s_->feas_scale = 1.0 / bn;
  }

  s_->kx = p.K.apply(s_->x);
  s_->kty = p.K.apply_adjoint(s_->y);
  s_->x_prev = s_->x;
  s_->y_prev = s_->y;
  s_->kx_prev = s_->kx;
  s_->done = cfg.max_iter == 0;
  s_->t0 = std::chrono::steady_clock::now();
}

Solver::~Solver() = default;
Solver::Solver(Solver&&) noexcept = default;
Solver& Solver::operator=(Solver&&) noexcept = default;

bool Solver::advance(int until) {
  State& st = *s_;
  const SaddleProblem& p = st.p;
  const SolverConfig& cfg = st.cfg;
  SolveReport& rep = st.rep;
  Vec& x = st.x;
  Vec& y = st.y;
  Vec& kx = st.kx;
  Vec& kty = st.kty;
  until = std::min(until, cfg.max_iter);

  while (!st.done && rep.iters < until) {
    const int k = rep.iters;
    Vec x_new = st.kernel.primal(x, kty);
    Vec kx_new = p.K.apply(x_new);
    Vec y_new = st.kernel.dual(y, 2.0 * kx_new - kx);
    Vec kty_new = p.K.apply_adjoint(y_new);

    Residuals res;
    if (cfg.residual_mode == ResidualMode::custom) {
      res = cfg.custom_residual(ResidualContext{k, st.x_prev, x, x_new, st.y_prev, y, y_new, kx_new});
    } else {
      const Vec m1dx = cfg.M1.apply(x_new - x);
      const double dual_term = (kty_new - kty - m1dx).norm();
      if (cfg.residual_mode == ResidualMode::linear_g) {
        const double feas = st.feas_scale * (kx_new - p.gstar.data()).norm();
        res.full = std::max(dual_term, feas);
        res.half = std::max(m1dx.norm(), feas);
      } else {
        res.full = std::max(dual_term, (kx_new - kx - cfg.M2.apply(y_new - y)).norm());
        res.half = std::max(m1dx.norm(), ((kx - st.kx_prev) + (kx - kx_new) - cfg.M2.apply(y - st.y_prev)).norm());
      }
    }

    st.x_prev = std::move(x);
    st.y_prev = std::move(y);
    st.kx_prev = std::move(kx);
    x = std::move(x_new);
    y = std::move(y_new);
    kx = std::move(kx_new);
    kty = std::move(kty_new);
    rep.iters = k + 1;
    st.last = res;

    const double rhat = cfg.stop_on_half ? res.half : res.full;
    const double size = std::max(x.cwiseAbs().maxCoeff(), y.cwiseAbs().maxCoeff());
    if (!std::isfinite(size) || size > cfg.blowup) {
      rep.status = Status::diverged;
      st.done = true;
    } else if (rhat <= cfg.tol) {
      rep.status = Status::converged;
      st.done = true;
    } else if (rep.iters == cfg.max_iter) {
      rep.status = Status::max_iter;
      st.done = true;
    }
    if (st.done || rep.iters % cfg.record_every == 0) st.record();
  }
  return st.done;
}

bool Solver::stopped() const { return s_->done; }
int Solver::iters() const { return s_->rep.iters; }
Status Solver::status() const { return s_->rep.status; }

SolveReport Solver::finish() {
  State& st = *s_;
  if (st.rep.iters > 0 && (st.rep.history.empty() || st.rep.history.back().k != st.rep.iters)) st.record();
  st.rep.x = std::move(st.x);
  st.rep.y = std::move(st.y);
  SolveReport out = std::move(st.rep);
  s_.reset();
  return out;
}

SolveReport solve(const SaddleProblem& p, const SolverConfig& cfg) {
  Solver run(p, cfg);
  run.advance(cfg.max_iter);
  return run.finish();
}

double duality_gap_matrix_game(const LinearOperator& k, const Vec& x, const Vec& y) {
  const Vec xs = project_simplex(x);
  const Vec ys = project_simplex(y);
  return std::max(0.0, k.apply(xs).maxCoeff() - k.apply_adjoint(ys).minCoeff());
}

SublinearDiagnostic sublinear_diagnostic(const std::vector<HistoryRow>& history, bool use_half) {
  if (history.empty()) throw ConfigError("sublinear diagnostic needs a non-empty history");
  SublinearDiagnostic diag;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& row : history) {
    best = std::min(best, use_half ? row.rhat_half : row.rhat_full);
    if (row.k > 0) diag.curve.emplace_back(row.k, std::sqrt(static_cast<double>(row.k)) * best);
  }
  if (diag.curve.empty()) return diag;
  const auto [t_end, v_end] = diag.curve.back();
  const std::pair<int, double>* quarter = nullptr;
  for (const auto& pt : diag.curve) {
    if (4 * static_cast<long long>(pt.first) <= t_end) quarter = &pt;
  }
  diag.flagged = quarter != nullptr && v_end > 1.2 * quarter->second;
  return diag;
}

namespace {

void check_ebalm_params(const LinearOperator& k, const Vec& b, double tau, double theta, double gamma,
                        bool allow_small_gamma) {
  require_dim(b.size(), k.rows(), "b");
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (!(theta >= 0.0)) throw ConfigError("theta must be nonnegative");
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (gamma < kEbalmGammaMin && !allow_small_gamma) {
    throw ConfigError("gamma must be at least 3/4");
  }
}

SpMat scaled_gram(const LinearOperator& k, double scale, double shift) {
  const SpMat ks = k.to_sparse();
  SpMat q = scale * SpMat(ks * SpMat(ks.transpose()));
  SpMat id(q.rows(), q.cols());
  id.setIdentity();
  q = q + shift * id;
  q.prune(0.0);
  return q;
}

SolverConfig ebalm_config(Metric m1, Metric m2) {
  SolverConfig cfg(std::move(m1), std::move(m2));
  cfg.residual_mode = ResidualMode::linear_g;
  cfg.stop_on_half = true;
  return cfg;
}

}  // namespace

ConfiguredSolve configure_ebalm(const Proximable& f, const LinearOperator& k, const Vec& b, double tau,
                                double theta, double gamma, bool allow_small_gamma) {
  check_ebalm_params(k, b, tau, theta, gamma, allow_small_gamma);
  if (!(theta > 0.0)) throw ConfigError("theta must be positive");
  SaddleProblem p{f, Proximable::linear(b), k};
  p.validate();
  auto m2 = Metric::gram_shift(gamma, tau, k, gamma * theta);
  return {p, ebalm_config(Metric::scalar(k.cols(), 1.0 / tau), std::move(m2))};
}

ConfiguredSolve configure_ebalm_sgs(const Proximable& f, const LinearOperator& k, const Vec& b, double tau,
                                    double theta, double gamma, const Partition& partition,
                                    bool allow_small_gamma) {
  check_ebalm_params(k, b, tau, theta, gamma, allow_small_gamma);
  SaddleProblem p{f, Proximable::linear(b), k};
  p.validate();
  const SpMat q = scaled_gram(k, gamma * tau, theta);

  std::vector<Index> block_of(static_cast<std::size_t>(q.rows()), -1);
  for (std::size_t bi = 0; bi < partition.size(); ++bi) {
    for (Index i : partition[bi]) {
      if (i < 0 || i >= q.rows()) throw DimensionError("partition index out of range");
      block_of[i] = static_cast<Index>(bi);
    }
  }
  bool coupled = false;
  for (Index r = 0; r < q.outerSize() && !coupled; ++r) {
    for (SpMat::InnerIterator it(q, r); it; ++it) {
      if (it.value() != 0.0 && block_of[r] != block_of[it.col()]) {
        coupled = true;
        break;
      }
    }
  }
  if (!coupled) {
    throw ConfigError("partition leaves no off-diagonal blocks (U = 0); use configure_ebalm instead");
  }
  return {p, ebalm_config(Metric::scalar(k.cols(), 1.0 / tau), Metric::sgs(q, partition))};
}

ConfiguredSolve configure_iebalm(const Proximable& f, const LinearOperator& k, const Vec& b, double tau,
                                 double theta, double gamma, const Partition& partition, int epochs) {
  check_ebalm_params(k, b, tau, theta, gamma, false);
  SaddleProblem p{f, Proximable::linear(b), k};
  p.validate();
  const SpMat q = scaled_gram(k, gamma * tau, gamma * theta);
  auto cfg = ebalm_config(Metric::scalar(k.cols(), 1.0 / tau), Metric::bcd_inexact(q, partition, epochs));
  cfg.override_condition = true;
  return {p, std::move(cfg)};
}

}  // namespace pdhg
