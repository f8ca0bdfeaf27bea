#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "imask/linops.hpp"
#include "imask/mrsketch.hpp"
#include "imask/proxlib.hpp"

namespace imask {

/// min_x f(Kx) + g(x) with f = |. - b|^2 / 2, sketched by a multiresolution family.
struct Problem {
  LinOp K;
  Vec b;
  SketchFamily family;
  std::vector<LinOp> sketched;  ///< K_1..K_r
  ProxFn g;
  ProxFn f_conj;

  /// Builds K_1..K_r from the family and uses the quadratic-conjugate dual prox.
  static Problem make(LinOp K, Vec b, SketchFamily family, ProxFn g,
                      const CoarseProjectorFactory& coarse = {});

  std::size_t x_dim() const noexcept { return K.domain_dim(); }
  std::size_t y_dim() const noexcept { return K.range_dim(); }
  void validate() const;
};

// ---------------------------------------------------------------------------
// Sampling

/// Uniform in [0, 1) from a hash of (seed, k). Stateless, so draw k never
/// depends on how many draws came before it.
double counter_uniform(std::uint64_t seed, std::uint64_t k);
/// Inverse CDF over probs in index order; returns a 1-based level.
std::size_t sample_level(ConstSpan probs, double u);
/// Level drawn at iteration k.
std::size_t draw_level(std::uint64_t seed, std::uint64_t k, ConstSpan probs);

// ---------------------------------------------------------------------------
// State

struct SaddleState {
  Vec x;
  Vec y;
  Vec x_bar;                 ///< extrapolated primal (sequential variant and PDHG)
  std::vector<Vec> phi;      ///< adjoint products per level, image-sized
  std::vector<Vec> psi;      ///< forward products per level, sinogram-sized
  Vec phi_sum;
  Vec psi_sum;
  std::uint64_t k = 0;
  double cost = 0.0;
  std::uint64_t seed = 0;
  std::size_t last_level = 0;

  /// x = y = 0 and zero memory.
  static SaddleState zeros(std::size_t x_dim, std::size_t y_dim, std::size_t blocks,
                           std::uint64_t seed);
  static SaddleState zeros(const Problem& prob, std::uint64_t seed);

  /// Memory set to (K_i^T y, K_i x) for the given point, sums weighted by `weights`.
  static SaddleState consistent(const std::vector<LinOp>& blocks, ConstSpan weights, Vec x,
                                Vec y, std::uint64_t seed);

  /// Recomputes phi_sum, psi_sum from the tables as sum_i w_i table_i.
  void resum(ConstSpan weights);
};

inline constexpr std::uint64_t kResumPeriod = 1000;

/// One ImaSk iteration: draw a level, refresh its memory row, prox steps on
/// x (step sigma/mu) and y (step sigma). Memory sums are p-weighted.
void imask_step(SaddleState& s, const Problem& prob, double sigma, double mu);

/// Generic saddle-point SAGA on min_x max_y <y, sum_i A_i x> - f*(y) + g(x).
struct SaddleBlocks {
  std::vector<LinOp> A;
  Vec probs;
  ProxFn g;
  ProxFn f_conj;

  /// A_i = p_i K_i, matching the weighting ImaSk uses implicitly.
  static SaddleBlocks from_problem(const Problem& prob);
  /// Probes sum_i A_i against `total` on random inputs; returns the worst relative gap.
  double sum_gap(const LinOp& total, std::size_t trials, std::uint64_t seed) const;
};

/// Memory sums are unweighted; fresh terms carry the 1/p correction.
void saga_saddle_step(SaddleState& s, const SaddleBlocks& blocks, double sigma_x,
                      double sigma_y);

/// Sequential variant: dual first from x_bar, then primal from the new dual,
/// then x_bar = x+ + theta_extrap (x+ - x).
void imask_seq_step(SaddleState& s, const Problem& prob, double sigma, double mu,
                    double theta_extrap);

// ---------------------------------------------------------------------------
// PDHG reference

struct PdhgParams {
  double kappa = 0.0;
  double sigma = 0.0;
  double tau = 0.0;
  double theta = 0.0;
};

/// Strong-convexity step rule. Throws NumericalError when norm_K is zero.
PdhgParams pdhg_params(double norm_K, double mu, double rho = 0.99);

struct PdhgOptions {
  std::size_t iters = 5000;
  double rho = 0.99;
  double norm_K = 0.0;  ///< estimated by power method when zero
  double tol = 0.0;     ///< stop once |x+ - x| <= tol |x+|; 0 runs all iterations
};

struct PdhgResult {
  Vec x;
  Vec y;
  std::size_t iterations = 0;
  PdhgParams params;
};

void pdhg_step(SaddleState& s, const LinOp& K, const ProxFn& g, const ProxFn& f_conj,
               const PdhgParams& prm);

PdhgResult pdhg_solve(const LinOp& K, const ProxFn& g, const ProxFn& f_conj, double mu,
                      const PdhgOptions& opts = {});
PdhgResult pdhg_solve(const Problem& prob, double mu, const PdhgOptions& opts = {});

// ---------------------------------------------------------------------------
// Driver

enum class Algorithm { imask, imask_seq, pdhg, saga_saddle };

Algorithm parse_algorithm(std::string_view name);
std::string to_string(Algorithm a);

struct RunOptions {
  Algorithm algorithm = Algorithm::imask;
  double sigma = 0.0;
  double mu = 1.0;
  std::size_t iters = 1000;
  std::size_t record_every = 10;
  std::uint64_t seed = 0;
  double theta_extrap = 1.0;          ///< sequential variant only
  double pdhg_rho = 0.99;             ///< PDHG only
  double norm_K = 0.0;                ///< PDHG only; estimated when zero
  std::optional<Vec> reference;       ///< rel_dist column
  std::optional<Vec> truth;           ///< psnr column
  double psnr_peak = 1.0;
  bool wall_time = false;             ///< seconds column is 0 unless set
  std::vector<double> snapshot_costs; ///< keep x when cost first reaches each value
};

struct MetricsRow {
  std::uint64_t k = 0;
  double cost = 0.0;
  std::size_t level = 0;  ///< 0 for the initial row and for PDHG
  double rel_dist = 0.0;
  double psnr = 0.0;
  double seconds = 0.0;
};

struct Snapshot {
  double budget = 0.0;
  std::uint64_t k = 0;
  double cost = 0.0;
  Vec x;
};

struct SolveReport {
  std::vector<MetricsRow> rows;
  std::vector<Snapshot> snapshots;
  Vec x;
  Vec y;
};

SolveReport run(const Problem& prob, const RunOptions& opts);

inline constexpr std::string_view kCsvHeader = "k,cost,level,rel_dist,psnr,seconds";

/// Decimal with 12 significant digits; NaN for missing metrics.
std::string format_number(double v);
void write_csv(std::ostream& os, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_csv(std::istream& is);

}  // namespace imask
