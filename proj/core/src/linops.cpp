#include "imask/linops.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <utility>

#include "imask/errors.hpp"

namespace imask {

double dot(ConstSpan a, ConstSpan b) {
  if (a.size() != b.size()) throw DimensionError("dot", a.size(), b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(ConstSpan a) { return std::sqrt(dot(a, a)); }

void axpy(double a, ConstSpan x, MutSpan y) {
  if (x.size() != y.size()) throw DimensionError("axpy", y.size(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

Vec standard_normal(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Vec v(n);
  for (auto& e : v) e = dist(gen);
  return v;
}

// ---------------------------------------------------------------------------
// LinOp

LinOp::LinOp(std::size_t domain_dim, std::size_t range_dim, Kernel forward,
             Kernel adjoint, std::string name)
    : domain_dim_(domain_dim),
      range_dim_(range_dim),
      forward_(std::move(forward)),
      adjoint_(std::move(adjoint)),
      name_(std::move(name)) {
  if (domain_dim_ == 0 || range_dim_ == 0) {
    throw ConfigError("LinOp '" + name_ + "': dimensions must be positive");
  }
}

Vec LinOp::apply(ConstSpan x) const {
  Vec out(range_dim_);
  apply(x, out);
  return out;
}

void LinOp::apply(ConstSpan x, MutSpan out) const {
  if (x.size() != domain_dim_) throw DimensionError(name_ + " apply (input)", domain_dim_, x.size());
  if (out.size() != range_dim_) throw DimensionError(name_ + " apply (output)", range_dim_, out.size());
  forward_(x, out);
}

Vec LinOp::adjoint_apply(ConstSpan y) const {
  Vec out(domain_dim_);
  adjoint_apply(y, out);
  return out;
}

void LinOp::adjoint_apply(ConstSpan y, MutSpan out) const {
  if (y.size() != range_dim_) throw DimensionError(name_ + " adjoint (input)", range_dim_, y.size());
  if (out.size() != domain_dim_) throw DimensionError(name_ + " adjoint (output)", domain_dim_, out.size());
  adjoint_(y, out);
}

LinOp LinOp::adjoint() const {
  return LinOp(range_dim_, domain_dim_, adjoint_, forward_, name_ + "^T");
}

LinOp LinOp::identity(std::size_t n) {
  auto copy = [](ConstSpan in, MutSpan out) { std::copy(in.begin(), in.end(), out.begin()); };
  return LinOp(n, n, copy, copy, "I");
}

LinOp LinOp::zero(std::size_t domain_dim, std::size_t range_dim) {
  auto fill = [](ConstSpan, MutSpan out) { std::fill(out.begin(), out.end(), 0.0); };
  return LinOp(domain_dim, range_dim, fill, fill, "0");
}

// ---------------------------------------------------------------------------
// Combinators

LinOp dense_op(DenseMatrix m) {
  if (m.data.size() != m.rows * m.cols) throw DimensionError("dense_op", m.rows * m.cols, m.data.size());
  auto mat = std::make_shared<const DenseMatrix>(std::move(m));
  auto fwd = [mat](ConstSpan x, MutSpan out) {
    for (std::size_t i = 0; i < mat->rows; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < mat->cols; ++j) s += (*mat)(i, j) * x[j];
      out[i] = s;
    }
  };
  auto adj = [mat](ConstSpan y, MutSpan out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < mat->rows; ++i) {
      for (std::size_t j = 0; j < mat->cols; ++j) out[j] += (*mat)(i, j) * y[i];
    }
  };
  return LinOp(mat->cols, mat->rows, fwd, adj, "dense");
}

LinOp compose(const LinOp& outer, const LinOp& inner) {
  if (outer.domain_dim() != inner.range_dim()) {
    throw DimensionError("compose " + outer.name() + " ∘ " + inner.name(), outer.domain_dim(),
                         inner.range_dim());
  }
  auto fwd = [outer, inner](ConstSpan x, MutSpan out) {
    Vec mid(inner.range_dim());
    inner.apply(x, mid);
    outer.apply(mid, out);
  };
  auto adj = [outer, inner](ConstSpan y, MutSpan out) {
    Vec mid(outer.domain_dim());
    outer.adjoint_apply(y, mid);
    inner.adjoint_apply(mid, out);
  };
  return LinOp(inner.domain_dim(), outer.range_dim(), fwd, adj, outer.name() + "∘" + inner.name());
}

LinOp scaled(const LinOp& op, double alpha) {
  auto fwd = [op, alpha](ConstSpan x, MutSpan out) {
    op.apply(x, out);
    for (auto& e : out) e *= alpha;
  };
  auto adj = [op, alpha](ConstSpan y, MutSpan out) {
    op.adjoint_apply(y, out);
    for (auto& e : out) e *= alpha;
  };
  return LinOp(op.domain_dim(), op.range_dim(), fwd, adj, op.name());
}

LinOp stacked(std::vector<LinOp> blocks) {
  if (blocks.empty()) throw ConfigError("stacked: no blocks");
  const std::size_t n = blocks.front().domain_dim();
  std::size_t m = 0;
  for (const auto& b : blocks) {
    if (b.domain_dim() != n) throw DimensionError("stacked: block domain", n, b.domain_dim());
    m += b.range_dim();
  }
  auto shared = std::make_shared<const std::vector<LinOp>>(std::move(blocks));
  auto fwd = [shared](ConstSpan x, MutSpan out) {
    std::size_t offset = 0;
    for (const auto& b : *shared) {
      b.apply(x, out.subspan(offset, b.range_dim()));
      offset += b.range_dim();
    }
  };
  auto adj = [shared, n](ConstSpan y, MutSpan out) {
    std::fill(out.begin(), out.end(), 0.0);
    Vec tmp(n);
    std::size_t offset = 0;
    for (const auto& b : *shared) {
      b.adjoint_apply(y.subspan(offset, b.range_dim()), tmp);
      for (std::size_t j = 0; j < n; ++j) out[j] += tmp[j];
      offset += b.range_dim();
    }
  };
  return LinOp(n, m, fwd, adj, "stack");
}

DenseMatrix densify(const LinOp& op, std::size_t max_entries) {
  const std::size_t rows = op.range_dim();
  const std::size_t cols = op.domain_dim();
  if (cols != 0 && rows > max_entries / cols) {
    throw ConfigError("densify: " + std::to_string(rows) + "x" + std::to_string(cols) +
                      " exceeds the entry guard of " + std::to_string(max_entries));
  }
  DenseMatrix m{rows, cols, Vec(rows * cols, 0.0)};
  Vec e(cols, 0.0);
  Vec col(rows);
  for (std::size_t j = 0; j < cols; ++j) {
    e[j] = 1.0;
    op.apply(e, col);
    e[j] = 0.0;
    for (std::size_t i = 0; i < rows; ++i) m(i, j) = col[i];
  }
  return m;
}

double adjoint_test(const LinOp& op, std::size_t trials, std::uint64_t seed) {
  if (trials == 0) throw ConfigError("adjoint_test: trials must be >= 1");
  double worst = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const Vec x = standard_normal(op.domain_dim(), seed + 2 * t);
    const Vec y = standard_normal(op.range_dim(), seed + 2 * t + 1);
    const Vec ax = op.apply(x);
    const Vec aty = op.adjoint_apply(y);
    const double gap = std::abs(dot(ax, y) - dot(x, aty)) /
                       (norm(ax) * norm(y) + std::numeric_limits<double>::min());
    worst = std::max(worst, gap);
  }
  return worst;
}

PowerResult power_method(const LinOp& op, const PowerOptions& opts) {
  if (!(opts.tol > 0.0)) throw ConfigError("power_method: tol must be positive");
  Vec v = standard_normal(op.domain_dim(), opts.seed);
  const double v0 = norm(v);
  for (auto& e : v) e /= v0;

  Vec w(op.range_dim());
  Vec u(op.domain_dim());
  PowerResult res;
  double prev = 0.0;
  for (std::size_t it = 1; it <= opts.max_iter; ++it) {
    op.apply(v, w);
    const double est = norm(w);
    res.norm = std::max(res.norm, est);
    res.iterations = it;
    if (est == 0.0) {
      res.converged = true;
      return res;
    }
    if (it > 1 && std::abs(est - prev) < opts.tol * est) {
      res.converged = true;
      return res;
    }
    prev = est;
    op.adjoint_apply(w, u);
    const double un = norm(u);
    if (un == 0.0) {
      res.converged = true;
      return res;
    }
    for (std::size_t i = 0; i < u.size(); ++i) v[i] = u[i] / un;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Joint variable

double joint_pairing(const JointVec& a, const JointVec& b) {
  if (a.x.size() != b.x.size()) throw DimensionError("joint_pairing (x)", a.x.size(), b.x.size());
  if (a.y.size() != b.y.size()) throw DimensionError("joint_pairing (y)", a.y.size(), b.y.size());
  return dot(a.x, b.x) + dot(a.y, b.y);
}

Vec concat(const JointVec& z) {
  Vec out(z.x.size() + z.y.size());
  std::copy(z.x.begin(), z.x.end(), out.begin());
  std::copy(z.y.begin(), z.y.end(), out.begin() + static_cast<std::ptrdiff_t>(z.x.size()));
  return out;
}

JointVec split(ConstSpan z, std::size_t x_dim) {
  if (x_dim > z.size()) throw DimensionError("split", x_dim, z.size());
  return {Vec(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(x_dim)),
          Vec(z.begin() + static_cast<std::ptrdiff_t>(x_dim), z.end())};
}

JointOperator::JointOperator(std::vector<LinOp> blocks) : blocks_(std::move(blocks)) {
  if (blocks_.empty()) throw ConfigError("JointOperator: no blocks");
  x_dim_ = blocks_.front().domain_dim();
  y_dim_ = blocks_.front().range_dim();
  for (const auto& b : blocks_) {
    if (b.domain_dim() != x_dim_) throw DimensionError("JointOperator block domain", x_dim_, b.domain_dim());
    if (b.range_dim() != y_dim_) throw DimensionError("JointOperator block range", y_dim_, b.range_dim());
  }
}

namespace {

// (x, y) ↦ (A^T y, -A x); its adjoint is (x, y) ↦ (-A^T y, A x).
void skew_apply(const LinOp& a, ConstSpan z, MutSpan out, double sign) {
  const std::size_t nx = a.domain_dim();
  const std::size_t ny = a.range_dim();
  a.adjoint_apply(z.subspan(nx, ny), out.subspan(0, nx));
  a.apply(z.subspan(0, nx), out.subspan(nx, ny));
  for (std::size_t i = 0; i < nx; ++i) out[i] *= sign;
  for (std::size_t i = nx; i < nx + ny; ++i) out[i] *= -sign;
}

}  // namespace

LinOp JointOperator::block(std::size_t i) const {
  const LinOp a = blocks_.at(i);
  const std::size_t n = dim();
  return LinOp(
      n, n, [a](ConstSpan z, MutSpan out) { skew_apply(a, z, out, 1.0); },
      [a](ConstSpan z, MutSpan out) { skew_apply(a, z, out, -1.0); },
      "B" + std::to_string(i + 1));
}

LinOp JointOperator::total() const {
  auto shared = std::make_shared<const std::vector<LinOp>>(blocks_);
  const std::size_t n = dim();
  auto run = [shared, n](ConstSpan z, MutSpan out, double sign) {
    std::fill(out.begin(), out.end(), 0.0);
    Vec tmp(n);
    for (const auto& a : *shared) {
      skew_apply(a, z, tmp, sign);
      for (std::size_t j = 0; j < n; ++j) out[j] += tmp[j];
    }
  };
  return LinOp(
      n, n, [run](ConstSpan z, MutSpan out) { run(z, out, 1.0); },
      [run](ConstSpan z, MutSpan out) { run(z, out, -1.0); }, "B");
}

LinOp JointOperator::stacked(ConstSpan weights) const {
  if (weights.size() != blocks_.size()) throw DimensionError("JointOperator::stacked weights", blocks_.size(), weights.size());
  std::vector<LinOp> rows;
  rows.reserve(blocks_.size());
  for (std::size_t i = 0; i < blocks_.size(); ++i) rows.push_back(scaled(block(i), weights[i]));
  return imask::stacked(std::move(rows));
}

JointVec JointOperator::apply(const JointVec& z) const {
  return split(total().apply(concat(z)), x_dim_);
}

}  // namespace imask
