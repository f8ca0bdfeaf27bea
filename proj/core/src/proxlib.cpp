#include "imask/proxlib.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "imask/errors.hpp"

namespace imask {

Vec ProxFn::operator()(ConstSpan p, double step) const {
  Vec out(p.size());
  prox(p, step, out);
  return out;
}

Vec prox_quadratic_conjugate(ConstSpan p, double sigma, ConstSpan b) {
  if (!(sigma > 0.0)) throw ConfigError("prox_quadratic_conjugate: sigma must be positive");
  if (p.size() != b.size()) throw DimensionError("prox_quadratic_conjugate", b.size(), p.size());
  Vec out(p.size());
  const double inv = 1.0 / (1.0 + sigma);
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = (p[i] - sigma * b[i]) * inv;
  return out;
}

Vec prox_ridge(ConstSpan x, double sigma, double mu_g) {
  if (!(sigma > 0.0)) throw ConfigError("prox_ridge: sigma must be positive");
  if (!(mu_g > 0.0)) throw ConfigError("prox_ridge: mu_g must be positive");
  Vec out(x.begin(), x.end());
  const double inv = 1.0 / (1.0 + sigma * mu_g);
  for (auto& v : out) v *= inv;
  return out;
}

// ---------------------------------------------------------------------------
// Gradient field

namespace {

void grad_into(ConstSpan x, std::size_t n, MutSpan g) {
  const std::size_t d = n * n;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t k = i * n + j;
      g[k] = (j + 1 < n) ? x[k + 1] - x[k] : 0.0;
      g[d + k] = (i + 1 < n) ? x[k + n] - x[k] : 0.0;
    }
  }
}

// Adjoint of grad_into (negative divergence).
void grad_adjoint_into(ConstSpan g, std::size_t n, MutSpan out) {
  const std::size_t d = n * n;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t k = i * n + j;
      double v = 0.0;
      if (j + 1 < n) v -= g[k];
      if (j > 0) v += g[k - 1];
      if (i + 1 < n) v -= g[d + k];
      if (i > 0) v += g[d + k - n];
      out[k] = v;
    }
  }
}

}  // namespace

LinOp gradient_op(std::size_t side) {
  if (side == 0) throw ConfigError("gradient_op: side must be positive");
  const std::size_t d = side * side;
  return LinOp(
      d, 2 * d, [side](ConstSpan x, MutSpan g) { grad_into(x, side, g); },
      [side](ConstSpan g, MutSpan out) { grad_adjoint_into(g, side, out); }, "grad");
}

double total_variation(ConstSpan x, std::size_t side) {
  const std::size_t d = side * side;
  if (x.size() != d) throw DimensionError("total_variation", d, x.size());
  Vec g(2 * d);
  grad_into(x, side, g);
  double tv = 0.0;
  for (std::size_t k = 0; k < d; ++k) tv += std::sqrt(g[k] * g[k] + g[d + k] * g[d + k]);
  return tv;
}

TvProxResult prox_tv_nonneg(ConstSpan x, std::size_t side, double sigma, double mu_g,
                            const TvProxOptions& opts) {
  const std::size_t d = side * side;
  if (x.size() != d) throw DimensionError("prox_tv_nonneg", d, x.size());
  if (!(sigma > 0.0) || !(mu_g > 0.0)) throw ConfigError("prox_tv_nonneg: sigma and mu_g must be positive");
  const double lambda = sigma * mu_g;
  const double step = 1.0 / (8.0 * lambda);

  Vec p(2 * d, 0.0);
  Vec r(2 * d, 0.0);
  Vec p_new(2 * d);
  Vec primal(d);
  Vec tmp(d);
  Vec g(2 * d);

  // primal = P_{>=0}(x - lambda grad^T q)
  auto primal_of = [&](const Vec& q, Vec& out) {
    grad_adjoint_into(q, side, tmp);
    for (std::size_t k = 0; k < d; ++k) out[k] = std::max(0.0, x[k] - lambda * tmp[k]);
  };

  TvProxResult res;
  double t = 1.0;
  for (std::size_t it = 1; it <= opts.inner_iters; ++it) {
    primal_of(r, primal);
    grad_into(primal, side, g);
    double diff2 = 0.0;
    double norm2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      double a = r[k] + step * g[k];
      double b = r[d + k] + step * g[d + k];
      const double mag2 = a * a + b * b;
      if (mag2 > 1.0) {
        const double inv = 1.0 / std::sqrt(mag2);
        a *= inv;
        b *= inv;
      }
      p_new[k] = a;
      p_new[d + k] = b;
      diff2 += (a - p[k]) * (a - p[k]) + (b - p[d + k]) * (b - p[d + k]);
      norm2 += a * a + b * b;
    }
    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double beta = (t - 1.0) / t_new;
    for (std::size_t k = 0; k < 2 * d; ++k) r[k] = p_new[k] + beta * (p_new[k] - p[k]);
    p.swap(p_new);
    t = t_new;
    res.iterations = it;
    if (diff2 <= opts.inner_tol * opts.inner_tol * norm2) break;
  }

  primal_of(p, primal);
  grad_into(primal, side, g);
  double tv = 0.0;
  double pairing = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    tv += std::sqrt(g[k] * g[k] + g[d + k] * g[d + k]);
    pairing += p[k] * g[k] + p[d + k] * g[d + k];
  }
  res.duality_gap = lambda * (tv - pairing);
  res.image = std::move(primal);
  return res;
}

// ---------------------------------------------------------------------------
// ProxFn factories

ProxFn make_quadratic_conjugate(Vec b) {
  auto data = std::make_shared<const Vec>(std::move(b));
  ProxFn f;
  f.prox = [data](ConstSpan p, double step, MutSpan out) {
    const Vec& bb = *data;
    if (p.size() != bb.size()) throw DimensionError("quadratic conjugate prox", bb.size(), p.size());
    const double inv = 1.0 / (1.0 + step);
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = (p[i] - step * bb[i]) * inv;
  };
  f.eval = [data](ConstSpan y) { return dot(*data, y) + 0.5 * dot(y, y); };
  f.strong_convexity = 1.0;
  f.name = "quadratic-conjugate";
  return f;
}

ProxFn make_ridge(double mu_g) {
  if (!(mu_g > 0.0)) throw ConfigError("make_ridge: mu_g must be positive");
  ProxFn f;
  f.prox = [mu_g](ConstSpan p, double step, MutSpan out) {
    const double inv = 1.0 / (1.0 + step * mu_g);
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] * inv;
  };
  f.eval = [mu_g](ConstSpan x) { return 0.5 * mu_g * dot(x, x); };
  f.strong_convexity = mu_g;
  f.name = "ridge";
  return f;
}

ProxFn make_tv_nonneg(std::size_t side, double mu_g, TvProxOptions opts) {
  if (!(mu_g > 0.0)) throw ConfigError("make_tv_nonneg: mu_g must be positive");
  ProxFn f;
  f.prox = [side, mu_g, opts](ConstSpan p, double step, MutSpan out) {
    const TvProxResult r = prox_tv_nonneg(p, side, step, mu_g, opts);
    std::copy(r.image.begin(), r.image.end(), out.begin());
  };
  f.eval = [side, mu_g](ConstSpan x) {
    for (double v : x) {
      if (v < 0.0) return std::numeric_limits<double>::infinity();
    }
    return mu_g * total_variation(x, side);
  };
  f.strong_convexity = 0.0;
  f.name = "tv-nonneg";
  return f;
}

ProxFn rescale_prox(const ProxFn& h, double mu_h) {
  if (!(mu_h > 0.0)) throw ConfigError("rescale_prox: mu_h must be positive");
  const double root = std::sqrt(mu_h);
  ProxFn f;
  f.prox = [h, mu_h, root](ConstSpan p, double step, MutSpan out) {
    Vec shrunk(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) shrunk[i] = p[i] / root;
    h.prox(shrunk, step / mu_h, out);
    for (auto& v : out) v *= root;
  };
  if (h.eval) {
    f.eval = [h, root](ConstSpan u) {
      Vec v(u.begin(), u.end());
      for (auto& e : v) e /= root;
      return h.eval(v);
    };
  }
  f.strong_convexity = h.strong_convexity / mu_h;
  f.name = h.name + "~";
  return f;
}

}  // namespace imask
