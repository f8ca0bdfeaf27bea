#pragma once

#include <vector>

#include "imask/linops.hpp"
#include "imask/mrsketch.hpp"

namespace imask {

/// Operator constants of the normalized saddle problem with blocks
/// A~_i = A_i / sqrt(mu_g mu_fstar).
struct RateConstants {
  double L = 0.0;       ///< |sum_i B_i|
  double Lbar = 0.0;    ///< |z -> (B_i z)_i|
  double Lbar_p = 0.0;  ///< |z -> (p_i^{-1/2} B_i z)_i|
  double min_p = 0.0;
  double mu_g = 1.0;
  double mu_fstar = 1.0;
  bool converged = true;  ///< all three power iterations converged

  /// Copy with L, Lbar, Lbar_p multiplied by `factor`; power-method estimates
  /// are lower bounds, so step sizes use slightly inflated constants.
  RateConstants inflated(double factor) const;
};

/// Blocks are A_i (already weighted so that sum_i A_i = A).
RateConstants estimate_constants(const std::vector<LinOp>& blocks, ConstSpan probs, double mu_g,
                                 double mu_fstar, const PowerOptions& opts = {});

/// ImaSk blocks A_i = p_i K_i built from the family.
RateConstants estimate_constants(const SketchFamily& family, const LinOp& K, double mu_g,
                                 double mu_fstar, const PowerOptions& opts = {},
                                 const CoarseProjectorFactory& coarse = {});

/// Unnormalized norms entering the ImaSk convergence factor.
struct ImaskNorms {
  double K = 0.0;   ///< |K|
  double K1 = 0.0;  ///< |x -> (p_i^{1/2} K_i x)_i|
  double K2 = 0.0;  ///< |x -> (p_i K_i x)_i|
};

ImaskNorms estimate_imask_norms(const std::vector<LinOp>& sketched, ConstSpan probs,
                                const LinOp& K, const PowerOptions& opts = {});

/// Parameters of the contraction factor as a function of eta = sigma / (1 + sigma).
struct ThetaParams {
  double c = 0.0;
  double rho = 0.0;
  double alpha_inv = 0.0;
  double min_p = 0.0;
};

double theta_phi(double eta, const ThetaParams& t);  ///< c^{-1}(eta-c)^2 + 1 - (1-rho)c
double theta_psi(double eta, const ThetaParams& t);  ///< alpha^{-1} eta^2 + 1 - min_p
double theta(double eta, const ThetaParams& t);

struct StepPlan {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double c_bar = 0.0;
  double rho = 0.0;
  double alpha_inv = 0.0;
  double eta_star = 0.0;
  double sigma_star = 0.0;
  double theta_star = 0.0;
  bool interior = false;  ///< eta* found where the two branches cross, rather than at c

  ThetaParams theta_params() const { return {c, rho, alpha_inv, min_p}; }
  double min_p = 0.0;
};

double c_bar(const RateConstants& k);
/// (1 + a^{-1}) / b written in terms of (c, rho).
double alpha_inv(const RateConstants& k, double c, double rho);

/// Plan for a fixed (c, rho) with c in (0, c_bar) and rho in (0, 1).
StepPlan plan_for(const RateConstants& k, double c, double rho);

/// Minimizes theta* over c in (0, c_bar) for fixed rho.
StepPlan optimal_step(const RateConstants& k, double rho = 0.5);

struct PlanGrid {
  std::vector<StepPlan> plans;  ///< row-major over (rho, c)
  StepPlan best;                ///< grid minimizer refined in c
};

/// Log-uniform n_c × n_rho search of the (c, rho) plane.
PlanGrid search_plane(const RateConstants& k, std::size_t n_c = 100, std::size_t n_rho = 100);

/// 1 / (L^2 + 3 Lbar^2)
double sigma_baseline(double L, double Lbar);

struct ImaskThetaInputs {
  double sigma = 0.0;
  double mu = 0.0;
  double norm_K = 0.0;
  double norm_K1 = 0.0;
  double norm_K2 = 0.0;
  double min_p = 0.0;
  double a = 0.0;
  double b = 0.0;
};

/// Convergence factor in unnormalized variables (mu_fstar = 1, mu_g = mu).
double theta_imask(const ImaskThetaInputs& in);

}  // namespace imask
