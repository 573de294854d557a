#include "pdhg/operators.hpp"

#include <cmath>
#include <random>
#include <utility>

namespace pdhg {
namespace detail {

struct OperatorImpl {
  virtual ~OperatorImpl() = default;
  virtual Index rows() const = 0;
  virtual Index cols() const = 0;
  virtual OperatorKind kind() const = 0;
  virtual void apply(const Vec& x, Vec& out) const = 0;
  virtual void apply_adjoint(const Vec& y, Vec& out) const = 0;
  virtual SpMat to_sparse() const = 0;
};

namespace {

struct DenseOp final : OperatorImpl {
  Mat a;
  explicit DenseOp(Mat m) : a(std::move(m)) {}
  Index rows() const override { return a.rows(); }
  Index cols() const override { return a.cols(); }
  OperatorKind kind() const override { return OperatorKind::dense; }
  void apply(const Vec& x, Vec& out) const override { out.noalias() = a * x; }
  void apply_adjoint(const Vec& y, Vec& out) const override { out.noalias() = a.transpose() * y; }
  SpMat to_sparse() const override { return a.sparseView(); }
};

struct SparseOp final : OperatorImpl {
  SpMat a;
  SpMat at;
  explicit SparseOp(SpMat m) : a(std::move(m)), at(a.transpose()) { a.makeCompressed(); }
  Index rows() const override { return a.rows(); }
  Index cols() const override { return a.cols(); }
  OperatorKind kind() const override { return OperatorKind::sparse; }
  void apply(const Vec& x, Vec& out) const override { out.noalias() = a * x; }
  void apply_adjoint(const Vec& y, Vec& out) const override { out.noalias() = at * y; }
  SpMat to_sparse() const override { return a; }
};

struct GridDivergenceOp final : OperatorImpl {
  Index m, n;
  double h;
  GridDivergenceOp(Index gm, Index gn, double gh) : m(gm), n(gn), h(gh) {}
  Index rows() const override { return m * n; }
  Index cols() const override { return 2 * m * n; }
  OperatorKind kind() const override { return OperatorKind::grid_divergence; }

  void apply(const Vec& x, Vec& out) const override {
    const Index mn = m * n;
    out.resize(mn);
    for (Index j = 0; j < n; ++j) {
      for (Index i = 0; i < m; ++i) {
        const Index k = i + j * m;
        double v = 0.0;
        if (i < m - 1) v += x[k];
        if (i > 0) v -= x[k - 1];
        if (j < n - 1) v += x[mn + k];
        if (j > 0) v -= x[mn + k - m];
        out[k] = h * v;
      }
    }
  }

  void apply_adjoint(const Vec& y, Vec& out) const override {
    const Index mn = m * n;
    out.setZero(2 * mn);
    for (Index j = 0; j < n; ++j) {
      for (Index i = 0; i < m; ++i) {
        const Index k = i + j * m;
        if (i < m - 1) out[k] = h * (y[k] - y[k + 1]);
        if (j < n - 1) out[mn + k] = h * (y[k] - y[k + m]);
      }
    }
  }

  SpMat to_sparse() const override {
    const Index mn = m * n;
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(4 * mn);
    for (Index j = 0; j < n; ++j) {
      for (Index i = 0; i < m; ++i) {
        const Index k = i + j * m;
        if (i < m - 1) t.emplace_back(k, k, h);
        if (i > 0) t.emplace_back(k, k - 1, -h);
        if (j < n - 1) t.emplace_back(k, mn + k, h);
        if (j > 0) t.emplace_back(k, mn + k - m, -h);
      }
    }
    SpMat s(mn, 2 * mn);
    s.setFromTriplets(t.begin(), t.end());
    return s;
  }
};

struct BirkhoffOp final : OperatorImpl {
  Index n;
  explicit BirkhoffOp(Index size) : n(size) {}
  Index rows() const override { return 2 * n; }
  Index cols() const override { return n * n; }
  OperatorKind kind() const override { return OperatorKind::birkhoff; }

  void apply(const Vec& x, Vec& out) const override {
    const auto xm = x.reshaped(n, n);
    out.resize(2 * n);
    out.head(n) = xm.rowwise().sum();
    out.tail(n) = xm.colwise().sum().transpose();
  }

  void apply_adjoint(const Vec& y, Vec& out) const override {
    out.resize(n * n);
    auto om = out.reshaped(n, n);
    for (Index c = 0; c < n; ++c) {
      om.col(c) = y.head(n).array() + y[n + c];
    }
  }

  SpMat to_sparse() const override {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(2 * n * n);
    for (Index c = 0; c < n; ++c) {
      for (Index r = 0; r < n; ++r) {
        t.emplace_back(r, r + c * n, 1.0);
        t.emplace_back(n + c, r + c * n, 1.0);
      }
    }
    SpMat s(2 * n, n * n);
    s.setFromTriplets(t.begin(), t.end());
    return s;
  }
};

struct StackOp final : OperatorImpl {
  std::vector<LinearOperator> parts;
  Index total_rows = 0;
  explicit StackOp(std::vector<LinearOperator> p) : parts(std::move(p)) {
    for (const auto& c : parts) total_rows += c.rows();
  }
  Index rows() const override { return total_rows; }
  Index cols() const override { return parts.front().cols(); }
  OperatorKind kind() const override { return OperatorKind::vertical_stack; }

  void apply(const Vec& x, Vec& out) const override {
    out.resize(total_rows);
    Index off = 0;
    for (const auto& c : parts) {
      out.segment(off, c.rows()) = c.apply(x);
      off += c.rows();
    }
  }

  void apply_adjoint(const Vec& y, Vec& out) const override {
    out.setZero(cols());
    Index off = 0;
    for (const auto& c : parts) {
      out += c.apply_adjoint(y.segment(off, c.rows()));
      off += c.rows();
    }
  }

  SpMat to_sparse() const override {
    std::vector<Eigen::Triplet<double>> t;
    Index off = 0;
    for (const auto& c : parts) {
      const SpMat s = c.to_sparse();
      for (Index r = 0; r < s.outerSize(); ++r) {
        for (SpMat::InnerIterator it(s, r); it; ++it) {
          t.emplace_back(off + it.row(), it.col(), it.value());
        }
      }
      off += c.rows();
    }
    SpMat s(total_rows, cols());
    s.setFromTriplets(t.begin(), t.end());
    return s;
  }
};

struct TransposeOp final : OperatorImpl {
  LinearOperator inner;
  explicit TransposeOp(LinearOperator op) : inner(std::move(op)) {}
  Index rows() const override { return inner.cols(); }
  Index cols() const override { return inner.rows(); }
  OperatorKind kind() const override { return OperatorKind::transpose; }
  void apply(const Vec& x, Vec& out) const override { out = inner.apply_adjoint(x); }
  void apply_adjoint(const Vec& y, Vec& out) const override { out = inner.apply(y); }
  SpMat to_sparse() const override { return SpMat(inner.to_sparse().transpose()); }
};

}  // namespace
}  // namespace detail

LinearOperator::LinearOperator(std::shared_ptr<const detail::OperatorImpl> impl)
    : impl_(std::move(impl)) {}

LinearOperator LinearOperator::dense(Mat matrix) {
  if (matrix.rows() < 1 || matrix.cols() < 1) throw DimensionError("dense operator: empty matrix");
  return LinearOperator(std::make_shared<detail::DenseOp>(std::move(matrix)));
}

LinearOperator LinearOperator::sparse(SpMat matrix) {
  if (matrix.rows() < 1 || matrix.cols() < 1) throw DimensionError("sparse operator: empty matrix");
  return LinearOperator(std::make_shared<detail::SparseOp>(std::move(matrix)));
}

LinearOperator LinearOperator::grid_divergence(Index grid_m, Index grid_n, double h) {
  if (grid_m < 1 || grid_n < 1) throw DimensionError("grid divergence: grid must be non-empty");
  if (!(h > 0.0)) throw ConfigError("grid divergence: h must be positive");
  return LinearOperator(std::make_shared<detail::GridDivergenceOp>(grid_m, grid_n, h));
}

LinearOperator LinearOperator::birkhoff(Index n) {
  if (n < 1) throw DimensionError("birkhoff operator: n must be positive");
  return LinearOperator(std::make_shared<detail::BirkhoffOp>(n));
}

LinearOperator LinearOperator::vstack(std::vector<LinearOperator> children) {
  if (children.empty()) throw DimensionError("vstack: no children");
  for (const auto& c : children) {
    require_dim(c.cols(), children.front().cols(), "vstack child columns");
  }
  return LinearOperator(std::make_shared<detail::StackOp>(std::move(children)));
}

LinearOperator LinearOperator::transpose(LinearOperator op) {
  return LinearOperator(std::make_shared<detail::TransposeOp>(std::move(op)));
}

Index LinearOperator::rows() const { return impl_->rows(); }
Index LinearOperator::cols() const { return impl_->cols(); }
OperatorKind LinearOperator::kind() const { return impl_->kind(); }

Vec LinearOperator::apply(const Vec& x) const {
  require_dim(x.size(), cols(), "apply");
  Vec out;
  impl_->apply(x, out);
  return out;
}

Vec LinearOperator::apply_adjoint(const Vec& y) const {
  require_dim(y.size(), rows(), "apply_adjoint");
  Vec out;
  impl_->apply_adjoint(y, out);
  return out;
}

SpMat LinearOperator::to_sparse() const { return impl_->to_sparse(); }

Mat LinearOperator::to_dense() const { return Mat(impl_->to_sparse()); }

const std::vector<LinearOperator>& LinearOperator::children() const {
  static const std::vector<LinearOperator> none;
  if (const auto* s = dynamic_cast<const detail::StackOp*>(impl_.get())) return s->parts;
  return none;
}

Index LinearOperator::grid_m() const {
  const auto* g = dynamic_cast<const detail::GridDivergenceOp*>(impl_.get());
  return g ? g->m : 0;
}

Index LinearOperator::grid_n() const {
  const auto* g = dynamic_cast<const detail::GridDivergenceOp*>(impl_.get());
  return g ? g->n : 0;
}

double LinearOperator::grid_h() const {
  const auto* g = dynamic_cast<const detail::GridDivergenceOp*>(impl_.get());
  return g ? g->h : 0.0;
}

Index LinearOperator::birkhoff_n() const {
  const auto* b = dynamic_cast<const detail::BirkhoffOp*>(impl_.get());
  return b ? b->n : 0;
}

SpectralEstimate spectral_norm_sq(const LinearOperator& op, double tol, int max_iter,
                                  std::uint64_t seed) {
  if (!(tol > 0.0)) throw ConfigError("spectral_norm_sq: tol must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vec v(op.cols());
  for (Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
  v.normalize();

  SpectralEstimate est;
  double prev = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    const Vec w = op.apply_adjoint(op.apply(v));
    const double lambda = v.dot(w);
    const double wn = w.norm();
    est.value = lambda;
    est.iterations = it;
    if (wn == 0.0) {
      est.converged = true;
      return est;
    }
    if (it > 1 && std::abs(lambda - prev) <= tol * std::abs(lambda)) {
      est.converged = true;
      return est;
    }
    prev = lambda;
    v = w / wn;
  }
  return est;
}

}  // namespace pdhg
