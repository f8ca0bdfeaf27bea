#pragma once

#include <functional>
#include <optional>
#include <string>

#include "imask/linops.hpp"

namespace imask {

/// A convex function through its proximal map.
///
/// prox(p, step, out) writes argmin_u 1/2 |u - p|^2 + step * h(u).
struct ProxFn {
  using Prox = std::function<void(ConstSpan, double, MutSpan)>;
  using Eval = std::function<double(ConstSpan)>;

  Prox prox;
  Eval eval;                       ///< empty when not provided
  double strong_convexity = 0.0;   ///< mu >= 0
  std::string name;

  Vec operator()(ConstSpan p, double step) const;
};

/// prox of f*(y) = <b, y> + |y|^2 / 2, the conjugate of |z - b|^2 / 2.
Vec prox_quadratic_conjugate(ConstSpan p, double sigma, ConstSpan b);
/// prox of (mu_g / 2) |x|^2.
Vec prox_ridge(ConstSpan x, double sigma, double mu_g);

/// Forward differences with zero at the far boundary; R^{side²} -> R^{2 side²}
/// laid out as (horizontal field, vertical field).
LinOp gradient_op(std::size_t side);

struct TvProxResult {
  Vec image;
  std::size_t iterations = 0;
  double duality_gap = 0.0;  ///< primal minus dual objective at the returned pair
};

struct TvProxOptions {
  std::size_t inner_iters = 50;
  double inner_tol = 1e-8;
};

/// Approximate prox of mu_g |grad x|_{1,2} + indicator(x >= 0) by accelerated
/// projected gradient on the dual field. Output is entrywise nonnegative.
TvProxResult prox_tv_nonneg(ConstSpan x, std::size_t side, double sigma, double mu_g,
                            const TvProxOptions& opts = {});

/// Isotropic total variation |grad x|_{1,2}.
double total_variation(ConstSpan x, std::size_t side);

ProxFn make_quadratic_conjugate(Vec b);
ProxFn make_ridge(double mu_g);
ProxFn make_tv_nonneg(std::size_t side, double mu_g, TvProxOptions opts = {});

/// h~(u) = h(mu_h^{-1/2} u), which is 1-strongly convex when h is mu_h-strongly convex.
ProxFn rescale_prox(const ProxFn& h, double mu_h);

}  // namespace imask
