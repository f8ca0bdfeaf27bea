#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "imask/ctmodel.hpp"
#include "imask/metrics.hpp"
#include "imask/rates.hpp"
#include "imask/solvers.hpp"

namespace imask {

enum class Regularizer { ridge, tv };

Regularizer parse_regularizer(std::string_view name);
std::string to_string(Regularizer r);

/// Flat experiment description. Every field has a key in the text format.
struct RunConfig {
  // geometry
  std::size_t side = 64;
  std::size_t n_angles = 100;
  double pixel_size = 0.0;  ///< 0 selects 1/side (unit field of view)
  // phantom
  PhantomKind phantom = PhantomKind::shepp_logan;
  std::size_t alignment = 0;  ///< square-insert edge grid; 0 selects side/4
  // noise
  NoiseModel noise = NoiseModel::none;
  double photons = 1e4;
  std::uint64_t noise_seed = 0;
  // sketch family
  std::size_t levels = 1;
  Vec probs;  ///< empty selects uniform
  SketchMode sketch = SketchMode::coarse_projector;
  // regularizer
  Regularizer regularizer = Regularizer::ridge;
  double mu_g = 1.0;
  double mu = 0.0;  ///< strong convexity used by the steps; 0 selects mu_g (ridge) or 1 (tv)
  std::size_t tv_inner_iters = 50;
  double tv_inner_tol = 1e-8;
  // solver
  Algorithm algorithm = Algorithm::imask;
  std::string sigma = "optimal";  ///< "optimal", "baseline" or a positive number
  double sigma_scale = 1.0;
  std::string rho = "search";     ///< "search" or a number in (0, 1)
  double theta_extrap = 1.0;
  std::size_t iters = 1000;
  std::size_t record_every = 10;
  std::uint64_t seed = 0;
  std::size_t n_seeds = 1;
  // reference
  std::size_t reference_iters = 5000;
  double reference_tol = 0.0;
  // output
  std::vector<double> snapshot_costs{100.0, 500.0};
  bool record_wall_time = false;
  std::string output_dir;

  double effective_pixel_size() const;
  double effective_mu() const;
  void validate() const;

  bool operator==(const RunConfig&) const = default;
};

std::string serialize(const RunConfig& cfg);
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);
/// Applies one `key=value` assignment.
void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);

/// Geometry, data and the sketched problem described by a config.
struct Setup {
  Geometry geom;
  Vec truth;
  Vec clean_sinogram;
  Problem problem;
  double mu = 1.0;
};

Setup build_setup(const RunConfig& cfg);

struct StepChoice {
  RateConstants constants;
  std::optional<StepPlan> plan;
  double sigma_B = 0.0;
  double sigma = 0.0;
};

/// Resolves cfg.sigma against the problem's constants.
StepChoice choose_step(const RunConfig& cfg, const Setup& setup);

struct ExperimentResult {
  RunConfig config;
  StepChoice step;
  Vec reference;
  std::size_t reference_iterations = 0;
  double reference_gap = 0.0;  ///< prox fixed-point residual of the reference
  std::vector<std::uint64_t> seeds;
  std::vector<SolveReport> runs;
  std::vector<MetricsRow> mean;
};

/// Prox fixed-point residual |x - prox_{tau g}(x - tau K^T (Kx - b))| / |x| with tau = 1/mu.
double optimality_gap(const Problem& prob, ConstSpan x, double mu);

/// Runs every seed and, when cfg.output_dir is set, writes the artifact bundle.
ExperimentResult run_experiment(const RunConfig& cfg);
/// Reuses a precomputed reference (must match the problem).
ExperimentResult run_experiment(const RunConfig& cfg, const Setup& setup, const Vec& reference);

std::vector<MetricsRow> mean_rows(const std::vector<SolveReport>& runs);

void write_bundle(const ExperimentResult& res, const Setup& setup,
                  const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Comparison

struct Bundle {
  std::string label;
  std::string reference_id;
  std::vector<MetricsRow> rows;
};

Bundle load_bundle(const std::filesystem::path& dir);
/// Short stable fingerprint of an image, used to check that bundles share a reference.
std::string fingerprint(ConstSpan x);

struct CompareOptions {
  double threshold = 1e-3;
  double cost_max = 0.0;      ///< 0 selects the smallest final cost across bundles
  double rel_dist_floor = 1e-14;
  std::size_t grid_points = 50;
};

struct CompareRow {
  std::string label;
  double final_cost = 0.0;
  double final_rel_dist = 0.0;
  double final_psnr = 0.0;
  double slope = 0.0;             ///< d log(rel_dist) / d cost over the common window
  double cost_to_threshold = 0.0; ///< +inf when never reached
};

struct Comparison {
  std::vector<CompareRow> summary;
  std::vector<double> cost_grid;
  std::vector<std::vector<double>> rel_dist_at;  ///< [bundle][grid point]
  std::vector<std::vector<double>> psnr_at;
};

Comparison compare_runs(const std::vector<Bundle>& bundles, const CompareOptions& opts = {});

/// Least-squares slope of log(rel_dist) against cost for rows with cost <= cost_max.
double decay_slope(const std::vector<MetricsRow>& rows, double cost_max, double floor = 1e-14);
/// First cost with rel_dist <= threshold, linearly interpolated in log rel_dist; +inf if never.
double cost_to_reach(const std::vector<MetricsRow>& rows, double threshold);
/// Linear interpolation of a column at `cost`; NaN outside the recorded range.
double value_at_cost(const std::vector<MetricsRow>& rows, double cost, bool psnr_column);

void write_comparison(std::ostream& summary, std::ostream& aligned, const Comparison& c);

// ---------------------------------------------------------------------------
// Images

/// 16-bit binary graymap. Values are mapped linearly from [lo, hi] to [0, 65535];
/// the range is stored in a sidecar `<path>.range` so read_pgm can undo the map.
void write_pgm(const std::filesystem::path& path, ConstSpan values, std::size_t width,
               std::size_t height);

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  Vec values;
};

GrayImage read_pgm(const std::filesystem::path& path);

}  // namespace imask
