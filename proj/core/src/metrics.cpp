#include "pdhg/metrics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <random>
#include <string>

namespace pdhg {
namespace detail {

struct MetricImpl {
  virtual ~MetricImpl() = default;
  virtual Index dim() const = 0;
  virtual MetricKind kind() const = 0;
  virtual Vec apply(const Vec& z) const = 0;
  virtual Vec solve(const Vec& r) const = 0;
  virtual Mat to_dense() const {
    Mat out(dim(), dim());
    for (Index c = 0; c < dim(); ++c) out.col(c) = apply(Vec::Unit(dim(), c));
    return out;
  }
};

namespace {

using SparseLLT = Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>;

struct ScalarMetric final : MetricImpl {
  Index n;
  double s;
  ScalarMetric(Index dim, double value) : n(dim), s(value) {}
  Index dim() const override { return n; }
  MetricKind kind() const override { return MetricKind::scalar; }
  Vec apply(const Vec& z) const override { return s * z; }
  Vec solve(const Vec& r) const override { return r / s; }
};

struct DiagonalMetric final : MetricImpl {
  Vec d;
  explicit DiagonalMetric(Vec diag) : d(std::move(diag)) {}
  Index dim() const override { return d.size(); }
  MetricKind kind() const override { return MetricKind::diagonal; }
  Vec apply(const Vec& z) const override { return d.cwiseProduct(z); }
  Vec solve(const Vec& r) const override { return r.cwiseQuotient(d); }
};

struct DenseMetric final : MetricImpl {
  Mat m;
  Eigen::LLT<Mat> llt;
  explicit DenseMetric(Mat matrix) : m(std::move(matrix)), llt(m) {}
  Index dim() const override { return m.rows(); }
  MetricKind kind() const override { return MetricKind::dense; }
  Vec apply(const Vec& z) const override { return m * z; }
  Vec solve(const Vec& r) const override { return llt.solve(r); }
  Mat to_dense() const override { return m; }
};

SpMat gram_matrix(const LinearOperator& op) {
  const SpMat k = op.to_sparse();
  return SpMat(k * SpMat(k.transpose()));
}

struct GramShiftMetric final : MetricImpl {
  double gamma, tau, theta;
  LinearOperator op;
  Mat p;  // empty when P = theta I
  Index birkhoff_n = 0;
  std::unique_ptr<SparseLLT> sparse_llt;
  Eigen::LLT<Mat> dense_llt;

  GramShiftMetric(double g, double t, LinearOperator k, double th, Mat pm)
      : gamma(g), tau(t), theta(th), op(std::move(k)), p(std::move(pm)) {}

  Index dim() const override { return op.rows(); }
  MetricKind kind() const override { return MetricKind::gram_shift; }

  Vec apply(const Vec& z) const override {
    Vec out = gamma * tau * op.apply(op.apply_adjoint(z));
    if (p.size()) {
      out.noalias() += p * z;
    } else {
      out += theta * z;
    }
    return out;
  }

  Vec solve(const Vec& r) const override {
    if (birkhoff_n > 0) return birkhoff_solve(r);
    if (p.size()) return dense_llt.solve(r);
    return sparse_llt->solve(r);
  }

  // (KK^T + t I)^{-1} = (n+t)^{-1} I + (2nt+t^2)^{-1} [[n/(n+t) E, -E], [-E, n/(n+t) E]]
  // with E = ee^T, then scaled by 1/(gamma tau).
  Vec birkhoff_solve(const Vec& r) const {
    const Index n = birkhoff_n;
    const double gt = gamma * tau;
    const double t = theta / gt;
    const double nn = static_cast<double>(n);
    const double a = 1.0 / (nn + t);
    const double c = -1.0 / (2.0 * nn * t + t * t);
    const double b = -nn * c / (nn + t);
    const double s1 = r.head(n).sum();
    const double s2 = r.tail(n).sum();
    Vec out(2 * n);
    out.head(n) = a * r.head(n).array() + (b * s1 + c * s2);
    out.tail(n) = a * r.tail(n).array() + (c * s1 + b * s2);
    return out / gt;
  }

  SpMat materialize() const {
    SpMat q = gamma * tau * gram_matrix(op);
    if (p.size()) {
      q = SpMat(Mat(Mat(q) + p).sparseView());
    } else {
      SpMat id(q.rows(), q.cols());
      id.setIdentity();
      q = q + theta * id;
    }
    return q;
  }
};

// Block structure shared by the sGS and inexact BCD metrics.
struct BlockSystem {
  SpMat q;
  Partition blocks;
  std::vector<Index> block_of;
  std::vector<std::unique_ptr<SparseLLT>> factors;

  BlockSystem(const SpMat& matrix, Partition parts) : q(matrix), blocks(std::move(parts)) {
    if (q.rows() != q.cols()) throw DimensionError("block metric: Q must be square");
    const Index n = q.rows();
    block_of.assign(static_cast<std::size_t>(n), -1);
    std::vector<Index> local(static_cast<std::size_t>(n), 0);
    for (Index b = 0; b < static_cast<Index>(blocks.size()); ++b) {
      if (blocks[b].empty()) throw ConfigError("block metric: empty block");
      for (Index pos = 0; pos < static_cast<Index>(blocks[b].size()); ++pos) {
        const Index i = blocks[b][pos];
        if (i < 0 || i >= n) throw DimensionError("block metric: index out of range");
        if (block_of[i] != -1) throw ConfigError("block metric: index assigned to two blocks");
        block_of[i] = b;
        local[i] = pos;
      }
    }
    for (Index i = 0; i < n; ++i) {
      if (block_of[i] == -1) throw ConfigError("block metric: partition does not cover all indices");
    }
    for (Index b = 0; b < static_cast<Index>(blocks.size()); ++b) {
      std::vector<Eigen::Triplet<double>> t;
      for (Index r : blocks[b]) {
        for (SpMat::InnerIterator it(q, r); it; ++it) {
          if (block_of[it.col()] == b) t.emplace_back(local[r], local[it.col()], it.value());
        }
      }
      const Index sz = static_cast<Index>(blocks[b].size());
      Eigen::SparseMatrix<double> d(sz, sz);
      d.setFromTriplets(t.begin(), t.end());
      auto f = std::make_unique<SparseLLT>(d);
      if (f->info() != Eigen::Success) {
        throw ConfigError("block metric: diagonal block " + std::to_string(b) + " is not positive definite");
      }
      factors.push_back(std::move(f));
    }
  }

  Index dim() const { return q.rows(); }
  Index nblocks() const { return static_cast<Index>(blocks.size()); }

  // Solves D_b v_b = rhs_b - sum over off-block columns chosen by pick(col_block).
  template <class Pick>
  void block_update(Index b, const Vec& rhs, Vec& target, Pick pick) const {
    const auto& idx = blocks[b];
    Vec t(static_cast<Index>(idx.size()));
    for (Index pos = 0; pos < t.size(); ++pos) {
      const Index r = idx[pos];
      double v = rhs[r];
      for (SpMat::InnerIterator it(q, r); it; ++it) {
        const Index cb = block_of[it.col()];
        if (cb != b) v -= it.value() * pick(cb)[it.col()];
      }
      t[pos] = v;
    }
    const Vec s = factors[b]->solve(t);
    for (Index pos = 0; pos < t.size(); ++pos) target[idx[pos]] = s[pos];
  }

  Vec solve_diag_blocks(const Vec& z) const {
    Vec out(dim());
    for (Index b = 0; b < nblocks(); ++b) {
      const auto& idx = blocks[b];
      Vec t(static_cast<Index>(idx.size()));
      for (Index pos = 0; pos < t.size(); ++pos) t[pos] = z[idx[pos]];
      const Vec s = factors[b]->solve(t);
      for (Index pos = 0; pos < t.size(); ++pos) out[idx[pos]] = s[pos];
    }
    return out;
  }

  // Row r of (D + U^T) z (lower == true) or (D + U) z.
  Vec triangular(const Vec& z, bool lower) const {
    Vec out(dim());
    for (Index r = 0; r < dim(); ++r) {
      const Index rb = block_of[r];
      double v = 0.0;
      for (SpMat::InnerIterator it(q, r); it; ++it) {
        const Index cb = block_of[it.col()];
        if (lower ? cb <= rb : cb >= rb) v += it.value() * z[it.col()];
      }
      out[r] = v;
    }
    return out;
  }
};

struct SgsMetric final : MetricImpl {
  BlockSystem sys;
  SgsMetric(const SpMat& q, Partition blocks) : sys(q, std::move(blocks)) {}
  Index dim() const override { return sys.dim(); }
  MetricKind kind() const override { return MetricKind::sgs; }

  Vec apply(const Vec& z) const override {
    const Vec w = sys.triangular(z, true);
    const Vec u = sys.solve_diag_blocks(w);
    return sys.triangular(u, false);
  }

  // Backward sweep over blocks s..2 for the auxiliary vector, then a forward
  // sweep over 1..s that reads later blocks from it.
  Vec solve(const Vec& r) const override {
    const Index s = sys.nblocks();
    Vec bar = Vec::Zero(dim());
    Vec out = Vec::Zero(dim());
    for (Index b = s - 1; b >= 1; --b) {
      sys.block_update(b, r, bar, [&](Index) -> const Vec& { return bar; });
    }
    for (Index b = 0; b < s; ++b) {
      sys.block_update(b, r, out, [&](Index cb) -> const Vec& { return cb < b ? out : bar; });
    }
    return out;
  }
};

struct BcdMetric final : MetricImpl {
  BlockSystem sys;
  int epochs;
  BcdMetric(const SpMat& q, Partition blocks, int n_epochs) : sys(q, std::move(blocks)), epochs(n_epochs) {}
  Index dim() const override { return sys.dim(); }
  MetricKind kind() const override { return MetricKind::bcd_inexact; }
  Vec apply(const Vec& z) const override { return sys.q * z; }
  Vec solve(const Vec& r) const override {
    Vec v = Vec::Zero(dim());
    for (int e = 0; e < epochs; ++e) {
      for (Index b = 0; b < sys.nblocks(); ++b) {
        sys.block_update(b, r, v, [&](Index) -> const Vec& { return v; });
      }
    }
    return v;
  }
  Mat to_dense() const override { return Mat(sys.q); }
};

struct BlockDiagMetric final : MetricImpl {
  std::vector<Metric> parts;
  Index n = 0;
  explicit BlockDiagMetric(std::vector<Metric> p) : parts(std::move(p)) {
    for (const auto& c : parts) n += c.dim();
  }
  Index dim() const override { return n; }
  MetricKind kind() const override { return MetricKind::block_diag; }
  Vec apply(const Vec& z) const override {
    Vec out(n);
    Index off = 0;
    for (const auto& c : parts) {
      out.segment(off, c.dim()) = c.apply(z.segment(off, c.dim()));
      off += c.dim();
    }
    return out;
  }
  Vec solve(const Vec& r) const override {
    Vec out(n);
    Index off = 0;
    for (const auto& c : parts) {
      out.segment(off, c.dim()) = c.solve(r.segment(off, c.dim()));
      off += c.dim();
    }
    return out;
  }
  Mat to_dense() const override {
    Mat out = Mat::Zero(n, n);
    Index off = 0;
    for (const auto& c : parts) {
      out.block(off, off, c.dim(), c.dim()) = c.to_dense();
      off += c.dim();
    }
    return out;
  }
};

Vec seeded_normal(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vec v(n);
  for (Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

}  // namespace
}  // namespace detail

using detail::MetricImpl;

Metric Metric::scalar(Index dim, double s) {
  if (dim < 1) throw DimensionError("scalar metric: dim must be positive");
  if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("scalar metric must be positive and finite");
  return Metric(std::make_shared<detail::ScalarMetric>(dim, s));
}

Metric Metric::diagonal(Vec d) {
  if (d.size() < 1) throw DimensionError("diagonal metric: empty");
  if (!(d.array() > 0.0).all() || !d.allFinite()) {
    throw ConfigError("diagonal metric entries must be positive and finite");
  }
  return Metric(std::make_shared<detail::DiagonalMetric>(std::move(d)));
}

Metric Metric::dense(Mat m) {
  if (m.rows() < 1 || m.rows() != m.cols()) throw DimensionError("dense metric must be square and non-empty");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + m.cwiseAbs().maxCoeff())) {
    throw ConfigError("dense metric must be symmetric");
  }
  auto impl = std::make_shared<detail::DenseMetric>(std::move(m));
  if (impl->llt.info() != Eigen::Success) throw ConfigError("dense metric is not positive definite");
  return Metric(impl);
}

Metric Metric::gram_shift(double gamma, double tau, const LinearOperator& op, double theta) {
  if (!(gamma >= 0.0) || !(tau > 0.0) || !(theta >= 0.0)) {
    throw ConfigError("gram-shift metric needs gamma >= 0, tau > 0, theta >= 0");
  }
  auto impl = std::make_shared<detail::GramShiftMetric>(gamma, tau, op, theta, Mat());
  if (op.kind() == OperatorKind::birkhoff && gamma > 0.0 && theta > 0.0) {
    impl->birkhoff_n = op.birkhoff_n();
    return Metric(impl);
  }
  const SpMat q = impl->materialize();
  impl->sparse_llt = std::make_unique<detail::SparseLLT>(Eigen::SparseMatrix<double>(q));
  if (impl->sparse_llt->info() != Eigen::Success) {
    throw ConfigError("gram-shift metric is not positive definite");
  }
  if (theta == 0.0) {
    // Minimum-eigenvalue probe by inverse iteration against the largest one.
    Vec v = detail::seeded_normal(q.rows(), 0x5eed).normalized();
    double inv_max = 0.0;
    for (int it = 0; it < 300; ++it) {
      Vec w = impl->sparse_llt->solve(v);
      inv_max = w.norm();
      v = w / inv_max;
    }
    const double lmax = spectral_norm_sq(op, 1e-10).value * gamma * tau;
    if (!(inv_max > 0.0) || 1.0 / inv_max <= 1e-12 * lmax) {
      throw ConfigError("gram-shift metric with theta = 0 is singular");
    }
  }
  return Metric(impl);
}

Metric Metric::gram_shift(double gamma, double tau, const LinearOperator& op, const Mat& p) {
  if (!(gamma >= 0.0) || !(tau > 0.0)) throw ConfigError("gram-shift metric needs gamma >= 0, tau > 0");
  require_dim(p.rows(), op.rows(), "gram-shift P rows");
  require_dim(p.cols(), op.rows(), "gram-shift P cols");
  auto impl = std::make_shared<detail::GramShiftMetric>(gamma, tau, op, 0.0, p);
  const Mat q = Mat(impl->materialize());
  impl->dense_llt.compute(q);
  if (impl->dense_llt.info() != Eigen::Success) throw ConfigError("gram-shift metric is not positive definite");
  return Metric(impl);
}

Metric Metric::sgs(const SpMat& q, Partition blocks) {
  return Metric(std::make_shared<detail::SgsMetric>(q, std::move(blocks)));
}

Metric Metric::block_diag(std::vector<Metric> children) {
  if (children.empty()) throw DimensionError("block-diagonal metric: no children");
  return Metric(std::make_shared<detail::BlockDiagMetric>(std::move(children)));
}

Metric Metric::bcd_inexact(const SpMat& q, Partition blocks, int epochs) {
  if (epochs < 1) throw ConfigError("inexact BCD metric needs at least one epoch");
  return Metric(std::make_shared<detail::BcdMetric>(q, std::move(blocks), epochs));
}

Index Metric::dim() const { return impl_->dim(); }
MetricKind Metric::kind() const { return impl_->kind(); }

Vec Metric::apply(const Vec& z) const {
  require_dim(z.size(), dim(), "metric apply");
  return impl_->apply(z);
}

Vec Metric::solve(const Vec& r) const {
  require_dim(r.size(), dim(), "metric solve");
  return impl_->solve(r);
}

Mat Metric::to_dense() const { return impl_->to_dense(); }

bool Metric::is_diagonal() const { return kind() == MetricKind::scalar || kind() == MetricKind::diagonal; }

Vec Metric::diag() const {
  if (const auto* s = dynamic_cast<const detail::ScalarMetric*>(impl_.get())) return Vec::Constant(s->n, s->s);
  if (const auto* d = dynamic_cast<const detail::DiagonalMetric*>(impl_.get())) return d->d;
  throw ConfigError("metric is not diagonal");
}

bool Metric::is_exact() const {
  if (kind() == MetricKind::bcd_inexact) return false;
  for (const auto& c : children()) {
    if (!c.is_exact()) return false;
  }
  return true;
}

const std::vector<Metric>& Metric::children() const {
  static const std::vector<Metric> none;
  if (const auto* b = dynamic_cast<const detail::BlockDiagMetric*>(impl_.get())) return b->parts;
  return none;
}

double Metric::gram_gamma() const {
  const auto* g = dynamic_cast<const detail::GramShiftMetric*>(impl_.get());
  return g ? g->gamma : 0.0;
}

double Metric::gram_tau() const {
  const auto* g = dynamic_cast<const detail::GramShiftMetric*>(impl_.get());
  return g ? g->tau : 0.0;
}

double Metric::gram_theta() const {
  const auto* g = dynamic_cast<const detail::GramShiftMetric*>(impl_.get());
  return g ? g->theta : 0.0;
}

SpMat Metric::q_matrix() const {
  if (const auto* g = dynamic_cast<const detail::GramShiftMetric*>(impl_.get())) return g->materialize();
  if (const auto* s = dynamic_cast<const detail::SgsMetric*>(impl_.get())) return s->sys.q;
  if (const auto* b = dynamic_cast<const detail::BcdMetric*>(impl_.get())) return b->sys.q;
  return SpMat(to_dense().sparseView());
}

const Partition& Metric::partition() const {
  static const Partition none;
  if (const auto* s = dynamic_cast<const detail::SgsMetric*>(impl_.get())) return s->sys.blocks;
  if (const auto* b = dynamic_cast<const detail::BcdMetric*>(impl_.get())) return b->sys.blocks;
  return none;
}

int Metric::bcd_epochs() const {
  const auto* b = dynamic_cast<const detail::BcdMetric*>(impl_.get());
  return b ? b->epochs : 0;
}

namespace {

Eigen::SelfAdjointEigenSolver<Mat> small_eigen(const Metric& m) {
  if (m.dim() > 64) throw ConfigError("matrix square roots are limited to dim <= 64");
  Eigen::SelfAdjointEigenSolver<Mat> es(m.to_dense());
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0) {
    throw ConfigError("metric is not positive definite");
  }
  return es;
}

}  // namespace

Mat Metric::sqrt_dense() const {
  const auto es = small_eigen(*this);
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

Mat Metric::inv_sqrt_dense() const {
  const auto es = small_eigen(*this);
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass_unit:
      return "pass-unit";
    case Verdict::pass_strict:
      return "pass-strict";
    case Verdict::fail:
      return "fail";
  }
  return "fail";
}

ConditionReport check_condition(const Metric& m1, const Vec& sigma_f, const Metric& m2, const LinearOperator& k,
                                double tol, int max_iter) {
  require_dim(m1.dim(), k.cols(), "M1 dimension");
  require_dim(m2.dim(), k.rows(), "M2 dimension");
  require_dim(sigma_f.size(), k.cols(), "sigma_f dimension");
  if (!m1.is_exact() || !m2.is_exact()) throw ConfigError("condition check needs exact metrics");
  if ((sigma_f.array() < 0.0).any()) throw ConfigError("sigma_f must be nonnegative");

  // A = M1 + Sigma/2.
  Metric a = m1;
  if (sigma_f.any()) {
    try {
      if (m1.is_diagonal()) {
        a = Metric::diagonal(m1.diag() + 0.5 * sigma_f);
      } else {
        Mat dense = m1.to_dense();
        dense.diagonal() += 0.5 * sigma_f;
        a = Metric::dense(std::move(dense));
      }
    } catch (const ConfigError&) {
      throw ConfigError("primal metric not positive definite");
    }
  }

  ConditionReport rep;
  Vec z = detail::seeded_normal(k.cols(), 0xc0ffee);
  z /= std::sqrt(a.quad(z));
  double prev = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    const Vec w = k.apply_adjoint(m2.solve(k.apply(z)));
    const double s = z.dot(w);  // z is A-normalized
    rep.s_hat = s;
    rep.iterations = it;
    if (w.squaredNorm() == 0.0) {
      rep.converged = true;
      break;
    }
    if (it > 1 && std::abs(s - prev) <= tol * std::abs(s)) {
      rep.converged = true;
      break;
    }
    prev = s;
    z = a.solve(w);
    z /= std::sqrt(a.quad(z));
  }
  rep.margin = rep.threshold - rep.s_hat;
  rep.pass_strict = rep.s_hat < rep.threshold - kCheckerSlack;
  rep.pass_unit = rep.s_hat < 1.0 - kCheckerSlack;
  return rep;
}

std::pair<Metric, Metric> build_diag_preconditioner(const LinearOperator& k, double alpha, double delta,
                                                    double gamma1, double gamma2) {
  if (!(alpha >= 0.0 && alpha <= 2.0)) throw ConfigError("alpha must lie in [0, 2]");
  if (!(delta >= 0.0)) throw ConfigError("delta must be nonnegative");
  if (!(gamma1 > 0.0) || !(gamma2 > 0.0)) throw ConfigError("gamma1 and gamma2 must be positive");
  const SpMat s = k.to_sparse();
  Vec tau = Vec::Constant(k.cols(), delta);
  Vec sigma = Vec::Constant(k.rows(), delta);
  for (Index r = 0; r < s.outerSize(); ++r) {
    for (SpMat::InnerIterator it(s, r); it; ++it) {
      const double v = std::abs(it.value());
      if (v == 0.0) continue;
      tau[it.col()] += std::pow(v, 2.0 - alpha);
      sigma[it.row()] += std::pow(v, alpha);
    }
  }
  if (!(tau.array() > 0.0).all() || !(sigma.array() > 0.0).all()) {
    throw ConfigError("zero row or column in K with delta = 0");
  }
  return {Metric::diagonal(gamma1 * tau), Metric::diagonal(gamma2 * sigma)};
}

Partition red_black_partition(Index grid_m, Index grid_n) {
  Partition p(2);
  for (Index j = 0; j < grid_n; ++j) {
    for (Index i = 0; i < grid_m; ++i) p[(i + j) % 2].push_back(i + j * grid_m);
  }
  if (p[1].empty()) p.pop_back();
  return p;
}

Partition greedy_coloring(const SpMat& q) {
  const Index n = q.rows();
  std::vector<Index> color(static_cast<std::size_t>(n), -1);
  Index ncolors = 0;
  std::vector<char> used;
  for (Index r = 0; r < n; ++r) {
    used.assign(static_cast<std::size_t>(ncolors) + 1, 0);
    for (SpMat::InnerIterator it(q, r); it; ++it) {
      if (it.col() != r && it.value() != 0.0 && color[it.col()] >= 0) used[color[it.col()]] = 1;
    }
    Index c = 0;
    while (used[c]) ++c;
    color[r] = c;
    ncolors = std::max(ncolors, c + 1);
  }
  Partition p(static_cast<std::size_t>(ncolors));
  for (Index r = 0; r < n; ++r) p[color[r]].push_back(r);
  return p;
}

}  // namespace pdhg
