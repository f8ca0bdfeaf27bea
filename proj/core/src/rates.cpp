#include "imask/rates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "imask/errors.hpp"

namespace imask {

RateConstants RateConstants::inflated(double factor) const {
  RateConstants k = *this;
  k.L *= factor;
  k.Lbar *= factor;
  k.Lbar_p *= factor;
  return k;
}

RateConstants estimate_constants(const std::vector<LinOp>& blocks, ConstSpan probs, double mu_g,
                                 double mu_fstar, const PowerOptions& opts) {
  if (blocks.empty()) throw ConfigError("estimate_constants: no blocks");
  if (probs.size() != blocks.size())
    throw DimensionError("estimate_constants: probabilities", blocks.size(), probs.size());
  if (!(mu_g > 0.0) || !(mu_fstar > 0.0))
    throw ConfigError("estimate_constants: strong convexity constants must be positive");

  const double scale = 1.0 / std::sqrt(mu_g * mu_fstar);
  Vec inv_sqrt_p(blocks.size());
  double min_p = 1.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!(probs[i] > 0.0)) throw ConfigError("estimate_constants: probabilities must be positive");
    inv_sqrt_p[i] = 1.0 / std::sqrt(probs[i]);
    min_p = std::min(min_p, probs[i]);
  }

  // The stacked joint operator z -> (w_i B_i z)_i has normal operator
  // blockdiag(sum w_i^2 A_i^T A_i, sum w_i^2 A_i A_i^T), so its norm is the larger
  // of the column stack (w_i A_i)_i and the column stack (w_i A_i^T)_i. Iterating
  // on each invariant block separately avoids the slow mixing of two nearly equal
  // top eigenvalues.
  auto stacked_norm = [&](ConstSpan w, bool& ok) {
    std::vector<LinOp> fwd;
    std::vector<LinOp> adj;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      fwd.push_back(scaled(blocks[i], scale * w[i]));
      adj.push_back(fwd.back().adjoint());
    }
    const PowerResult a = power_method(stacked(std::move(fwd)), opts);
    const PowerResult b = power_method(stacked(std::move(adj)), opts);
    ok = ok && a.converged && b.converged;
    return std::max(a.norm, b.norm);
  };

  std::vector<LinOp> normalized;
  for (const auto& a : blocks) normalized.push_back(scaled(a, scale));
  const JointOperator joint(std::move(normalized));
  const PowerResult rl = power_method(joint.total(), opts);
  bool ok = rl.converged;
  const Vec ones(blocks.size(), 1.0);
  const double lbar = stacked_norm(ones, ok);
  const double lbar_p = stacked_norm(inv_sqrt_p, ok);

  RateConstants k;
  k.L = rl.norm;
  k.Lbar = lbar;
  k.Lbar_p = lbar_p;
  k.min_p = min_p;
  k.mu_g = mu_g;
  k.mu_fstar = mu_fstar;
  k.converged = ok;
  return k;
}

RateConstants estimate_constants(const SketchFamily& family, const LinOp& K, double mu_g,
                                 double mu_fstar, const PowerOptions& opts,
                                 const CoarseProjectorFactory& coarse) {
  std::vector<LinOp> sk = sketch_forward_all(family, K, coarse);
  for (std::size_t i = 0; i < sk.size(); ++i) sk[i] = scaled(sk[i], family.probs()[i]);
  return estimate_constants(sk, family.probs(), mu_g, mu_fstar, opts);
}

ImaskNorms estimate_imask_norms(const std::vector<LinOp>& sketched, ConstSpan probs,
                                const LinOp& K, const PowerOptions& opts) {
  if (sketched.size() != probs.size())
    throw DimensionError("estimate_imask_norms: probabilities", sketched.size(), probs.size());
  std::vector<LinOp> rows1;
  std::vector<LinOp> rows2;
  for (std::size_t i = 0; i < sketched.size(); ++i) {
    rows1.push_back(scaled(sketched[i], std::sqrt(probs[i])));
    rows2.push_back(scaled(sketched[i], probs[i]));
  }
  ImaskNorms n;
  n.K = power_method(K, opts).norm;
  n.K1 = power_method(stacked(std::move(rows1)), opts).norm;
  n.K2 = power_method(stacked(std::move(rows2)), opts).norm;
  return n;
}

// ---------------------------------------------------------------------------
// Contraction factor

double theta_phi(double eta, const ThetaParams& t) {
  return (eta - t.c) * (eta - t.c) / t.c + 1.0 - (1.0 - t.rho) * t.c;
}

double theta_psi(double eta, const ThetaParams& t) {
  return t.alpha_inv * eta * eta + 1.0 - t.min_p;
}

double theta(double eta, const ThetaParams& t) {
  return std::max(theta_phi(eta, t), theta_psi(eta, t));
}

double c_bar(const RateConstants& k) {
  return 1.0 / (1.0 + k.L * k.L + k.Lbar_p * k.Lbar_p);
}

double alpha_inv(const RateConstants& k, double c, double rho) {
  const double L2 = k.L * k.L;
  const double Lb2 = k.Lbar * k.Lbar;
  const double Lp2 = k.Lbar_p * k.Lbar_p;
  return Lb2 / (rho * c) * (1.0 - (1.0 + L2) * c) / (1.0 - (1.0 + L2 + Lp2) * c);
}

namespace {

void check_constants(const RateConstants& k) {
  if (!(k.Lbar > 0.0) || !(k.Lbar_p > 0.0) || !std::isfinite(k.Lbar) || !std::isfinite(k.Lbar_p))
    throw NumericalError("step plan: degenerate constants (Lbar and Lbar_p must be positive)");
  if (!(k.min_p > 0.0 && k.min_p <= 1.0)) throw ConfigError("step plan: min_p must lie in (0, 1]");
}

}  // namespace

StepPlan plan_for(const RateConstants& k, double c, double rho) {
  check_constants(k);
  const double cb = c_bar(k);
  if (!(c > 0.0 && c < cb)) throw ConfigError("plan_for: c must lie in (0, c_bar)");
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("plan_for: rho must lie in (0, 1)");

  StepPlan p;
  p.c = c;
  p.c_bar = cb;
  p.rho = rho;
  p.min_p = k.min_p;
  const double L2 = k.L * k.L;
  const double Lp2 = k.Lbar_p * k.Lbar_p;
  p.a = (1.0 / c - 1.0 - L2) / Lp2 - 1.0;
  p.b = rho * c / (k.Lbar * k.Lbar);
  p.alpha_inv = alpha_inv(k, c, rho);

  if (k.min_p > (p.alpha_inv * c + 1.0 - rho) * c) {
    p.eta_star = c;
    p.interior = false;
  } else {
    // Root of (alpha^{-1} - c^{-1}) eta^2 + 2 eta - (min_p + rho c) = 0 in (0, c).
    const double q = k.min_p + rho * c;
    const double D = p.alpha_inv - 1.0 / c;
    p.eta_star = q / (1.0 + std::sqrt(1.0 + D * q));
    p.interior = true;
  }
  p.sigma_star = p.eta_star / (1.0 - p.eta_star);
  p.theta_star = theta(p.eta_star, p.theta_params());
  return p;
}

namespace {

// Golden-section minimization of theta* over log c in [lo, hi].
StepPlan refine_c(const RateConstants& k, double rho, double lo, double hi) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  auto f = [&](double lc) { return plan_for(k, std::exp(lc), rho).theta_star; };
  double a = lo;
  double b = hi;
  double x1 = b - g * (b - a);
  double x2 = a + g * (b - a);
  double f1 = f(x1);
  double f2 = f(x2);
  for (int it = 0; it < 200 && b - a > 1e-13; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = f(x2);
    }
  }
  return plan_for(k, std::exp(0.5 * (a + b)), rho);
}

// Grid then golden refinement on log c in (0, c_bar).
StepPlan best_c(const RateConstants& k, double rho, std::size_t n) {
  const double cb = c_bar(k);
  const double lmin = std::log(cb * 1e-6);
  const double lmax = std::log(cb * (1.0 - 1e-9));
  std::size_t best = 0;
  double best_theta = std::numeric_limits<double>::infinity();
  std::vector<double> grid(n);
  for (std::size_t j = 0; j < n; ++j) {
    grid[j] = lmin + (lmax - lmin) * static_cast<double>(j) / static_cast<double>(n - 1);
    const double t = plan_for(k, std::exp(grid[j]), rho).theta_star;
    if (t < best_theta) {
      best_theta = t;
      best = j;
    }
  }
  const double lo = grid[best == 0 ? 0 : best - 1];
  const double hi = grid[best + 1 == n ? n - 1 : best + 1];
  StepPlan refined = refine_c(k, rho, lo, hi);
  const StepPlan at_grid = plan_for(k, std::exp(grid[best]), rho);
  return refined.theta_star <= at_grid.theta_star ? refined : at_grid;
}

}  // namespace

StepPlan optimal_step(const RateConstants& k, double rho) {
  check_constants(k);
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("optimal_step: rho must lie in (0, 1)");
  return best_c(k, rho, 400);
}

PlanGrid search_plane(const RateConstants& k, std::size_t n_c, std::size_t n_rho) {
  check_constants(k);
  if (n_c < 2 || n_rho < 2) throw ConfigError("search_plane: need at least a 2x2 grid");
  const double cb = c_bar(k);
  PlanGrid out;
  out.plans.reserve(n_c * n_rho);
  std::size_t best = 0;
  for (std::size_t i = 0; i < n_rho; ++i) {
    const double rho = std::pow(10.0, -3.0 * (1.0 - static_cast<double>(i) / n_rho));
    for (std::size_t j = 0; j < n_c; ++j) {
      const double c = cb * std::pow(10.0, -3.0 * (1.0 - static_cast<double>(j) / n_c));
      out.plans.push_back(plan_for(k, c, rho));
      if (out.plans.back().theta_star < out.plans[best].theta_star) best = out.plans.size() - 1;
    }
  }
  const StepPlan& g = out.plans[best];
  const StepPlan refined = best_c(k, g.rho, 400);
  out.best = refined.theta_star <= g.theta_star ? refined : g;
  return out;
}

double sigma_baseline(double L, double Lbar) {
  if (!(L > 0.0) || !(Lbar > 0.0)) throw ConfigError("sigma_baseline: L and Lbar must be positive");
  return 1.0 / (L * L + 3.0 * Lbar * Lbar);
}

double theta_imask(const ImaskThetaInputs& in) {
  if (!(in.sigma > 0.0) || !(in.mu > 0.0) || !(in.a > 0.0) || !(in.b > 0.0))
    throw ConfigError("theta_imask: sigma, mu, a and b must be positive");
  const double s2 = in.sigma * in.sigma;
  const double d = (1.0 + in.sigma) * (1.0 + in.sigma);
  const double first = (in.mu + s2 * (in.norm_K * in.norm_K + (1.0 + in.a) * in.norm_K1 * in.norm_K1)) /
                           (in.mu * d) +
                       in.b / in.mu * in.norm_K2 * in.norm_K2;
  const double second = (1.0 + 1.0 / in.a) * s2 / (in.b * d) + 1.0 - in.min_p;
  return std::max(first, second);
}

}  // namespace imask
