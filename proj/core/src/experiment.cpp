#include "imask/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "imask/errors.hpp"

namespace imask {

namespace fs = std::filesystem;

Regularizer parse_regularizer(std::string_view name) {
  if (name == "ridge") return Regularizer::ridge;
  if (name == "tv") return Regularizer::tv;
  throw ConfigError("unknown regularizer '" + std::string(name) + "' (expected ridge or tv)");
}

std::string to_string(Regularizer r) { return r == Regularizer::ridge ? "ridge" : "tv"; }

// ---------------------------------------------------------------------------
// Config text format

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out))
    throw ConfigError("config: '" + std::string(key) + "' expects a finite number, got '" +
                      std::string(v) + "'");
  return out;
}

std::uint64_t to_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end)
    throw ConfigError("config: '" + std::string(key) + "' expects a non-negative integer, got '" +
                      std::string(v) + "'");
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: '" + std::string(key) + "' expects true or false");
}

Vec to_list(std::string_view key, std::string_view v) {
  Vec out;
  if (v.empty() || v == "none" || v == "uniform") return out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const auto comma = v.find(',', start);
    const auto item = trim(v.substr(start, comma == std::string_view::npos ? v.size() - start
                                                                           : comma - start));
    out.push_back(to_double(key, item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string list_text(const Vec& v, const char* empty) {
  if (v.empty()) return empty;
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += exact(v[i]);
  }
  return s;
}

SketchMode to_sketch_mode(std::string_view v) {
  if (v == "exact") return SketchMode::exact;
  if (v == "coarse") return SketchMode::coarse_projector;
  throw ConfigError("config: 'sketch' expects exact or coarse, got '" + std::string(v) + "'");
}

}  // namespace

double RunConfig::effective_pixel_size() const {
  return pixel_size > 0.0 ? pixel_size : 1.0 / static_cast<double>(side);
}

double RunConfig::effective_mu() const {
  if (mu > 0.0) return mu;
  return regularizer == Regularizer::ridge ? mu_g : 1.0;
}

void RunConfig::validate() const {
  if (side == 0 || (side & (side - 1)) != 0) throw ConfigError("config: side must be a power of two");
  if (n_angles == 0) throw ConfigError("config: n_angles must be positive");
  if (pixel_size < 0.0) throw ConfigError("config: pixel_size must be non-negative");
  if (levels == 0) throw ConfigError("config: levels must be at least 1");
  if (!probs.empty() && probs.size() != levels)
    throw DimensionError("config: probs", levels, probs.size());
  if (!(mu_g > 0.0)) throw ConfigError("config: mu_g must be positive");
  if (mu < 0.0) throw ConfigError("config: mu must be non-negative");
  if (noise != NoiseModel::none && !(photons > 0.0)) throw ConfigError("config: photons must be positive");
  if (record_every == 0) throw ConfigError("config: record_every must be positive");
  if (n_seeds == 0) throw ConfigError("config: n_seeds must be positive");
  if (!(sigma_scale > 0.0)) throw ConfigError("config: sigma_scale must be positive");
  if (sigma != "optimal" && sigma != "baseline" && !(to_double("sigma", sigma) > 0.0))
    throw ConfigError("config: sigma must be optimal, baseline or a positive number");
  if (rho != "search") {
    const double r = to_double("rho", rho);
    if (!(r > 0.0 && r < 1.0)) throw ConfigError("config: rho must be search or lie in (0, 1)");
  }
  if (!(theta_extrap >= 0.0 && theta_extrap <= 1.0))
    throw ConfigError("config: theta_extrap must lie in [0, 1]");
}

std::string serialize(const RunConfig& c) {
  std::ostringstream os;
  auto line = [&](const char* key, const std::string& value, const char* note) {
    std::string kv = std::string(key) + " = " + value;
    if (kv.size() < 32) kv.resize(32, ' ');
    os << kv << " # " << note << '\n';
  };
  line("side", std::to_string(c.side), "pixels per image edge");
  line("n_angles", std::to_string(c.n_angles), "projection angles over [0, pi)");
  line("pixel_size", exact(c.pixel_size), "physical pixel width; 0 = 1/side");
  line("phantom", to_string(c.phantom), "shepp-logan | square-insert | flat");
  line("alignment", std::to_string(c.alignment), "pixels; square edge grid, 0 = side/4");
  line("noise", to_string(c.noise), "none | gaussian | poisson");
  line("photons", exact(c.photons), "incident counts per ray");
  line("noise_seed", std::to_string(c.noise_seed), "seed");
  line("levels", std::to_string(c.levels), "number of resolutions r");
  line("probs", list_text(c.probs, "uniform"), "level probabilities, coarse to fine");
  line("sketch", c.sketch == SketchMode::exact ? "exact" : "coarse", "exact | coarse");
  line("regularizer", to_string(c.regularizer), "ridge | tv");
  line("mu_g", exact(c.mu_g), "regularization weight");
  line("mu", exact(c.mu), "step strong convexity; 0 = mu_g (ridge) or 1 (tv)");
  line("tv_inner_iters", std::to_string(c.tv_inner_iters), "iterations per tv prox");
  line("tv_inner_tol", exact(c.tv_inner_tol), "relative dual change");
  line("algorithm", to_string(c.algorithm), "imask | imask-seq | pdhg | saga-saddle");
  line("sigma", c.sigma, "optimal | baseline | number");
  line("sigma_scale", exact(c.sigma_scale), "multiplier on sigma");
  line("rho", c.rho, "search | number in (0, 1)");
  line("theta_extrap", exact(c.theta_extrap), "extrapolation, imask-seq only");
  line("iters", std::to_string(c.iters), "iterations");
  line("record_every", std::to_string(c.record_every), "iterations between rows");
  line("seed", std::to_string(c.seed), "first sampling seed");
  line("n_seeds", std::to_string(c.n_seeds), "consecutive seeds");
  line("reference_iters", std::to_string(c.reference_iters), "pdhg iterations");
  line("reference_tol", exact(c.reference_tol), "pdhg early stop; 0 = off");
  line("snapshot_costs", list_text(c.snapshot_costs, "none"), "full-mult equivalents");
  line("record_wall_time", c.record_wall_time ? "true" : "false", "seconds column");
  line("output_dir", c.output_dir, "path");
  return os.str();
}

void set_config_value(RunConfig& c, std::string_view key, std::string_view v) {
  v = trim(v);
  if (key == "side") c.side = to_uint(key, v);
  else if (key == "n_angles") c.n_angles = to_uint(key, v);
  else if (key == "pixel_size") c.pixel_size = to_double(key, v);
  else if (key == "phantom") c.phantom = parse_phantom_kind(v);
  else if (key == "alignment") c.alignment = to_uint(key, v);
  else if (key == "noise") c.noise = parse_noise_model(v);
  else if (key == "photons") c.photons = to_double(key, v);
  else if (key == "noise_seed") c.noise_seed = to_uint(key, v);
  else if (key == "levels") c.levels = to_uint(key, v);
  else if (key == "probs") c.probs = to_list(key, v);
  else if (key == "sketch") c.sketch = to_sketch_mode(v);
  else if (key == "regularizer") c.regularizer = parse_regularizer(v);
  else if (key == "mu_g") c.mu_g = to_double(key, v);
  else if (key == "mu") c.mu = to_double(key, v);
  else if (key == "tv_inner_iters") c.tv_inner_iters = to_uint(key, v);
  else if (key == "tv_inner_tol") c.tv_inner_tol = to_double(key, v);
  else if (key == "algorithm") c.algorithm = parse_algorithm(v);
  else if (key == "sigma") c.sigma = std::string(v);
  else if (key == "sigma_scale") c.sigma_scale = to_double(key, v);
  else if (key == "rho") c.rho = std::string(v);
  else if (key == "theta_extrap") c.theta_extrap = to_double(key, v);
  else if (key == "iters") c.iters = to_uint(key, v);
  else if (key == "record_every") c.record_every = to_uint(key, v);
  else if (key == "seed") c.seed = to_uint(key, v);
  else if (key == "n_seeds") c.n_seeds = to_uint(key, v);
  else if (key == "reference_iters") c.reference_iters = to_uint(key, v);
  else if (key == "reference_tol") c.reference_tol = to_double(key, v);
  else if (key == "snapshot_costs") c.snapshot_costs = to_list(key, v);
  else if (key == "record_wall_time") c.record_wall_time = to_bool(key, v);
  else if (key == "output_dir") c.output_dir = std::string(v);
  else throw ConfigError("config: unknown key '" + std::string(key) + "'");
}

RunConfig parse_config(std::string_view text) {
  RunConfig c;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos)
        throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
      set_config_value(c, trim(line.substr(0, eq)), line.substr(eq + 1));
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// ---------------------------------------------------------------------------
// Setup

Setup build_setup(const RunConfig& cfg) {
  cfg.validate();
  const Geometry geom = Geometry::make(cfg.side, cfg.n_angles, cfg.effective_pixel_size());
  Phantom ph = make_phantom(cfg.phantom, cfg.side, cfg.alignment);
  LinOp K = projector(geom);
  Vec clean = K.apply(ph.values);
  Vec b = cfg.noise == NoiseModel::none ? clean
                                        : add_noise(clean, cfg.noise, cfg.photons, cfg.noise_seed);
  SketchFamily family = cfg.probs.empty() ? SketchFamily::uniform(cfg.levels, cfg.side, cfg.sketch)
                                          : SketchFamily(cfg.levels, cfg.side, cfg.probs, cfg.sketch);
  ProxFn g = cfg.regularizer == Regularizer::ridge
                 ? make_ridge(cfg.mu_g)
                 : make_tv_nonneg(cfg.side, cfg.mu_g, TvProxOptions{cfg.tv_inner_iters, cfg.tv_inner_tol});
  CoarseProjectorFactory coarse = [geom](std::size_t f) { return coarse_projector(geom, f); };
  Problem prob = Problem::make(std::move(K), std::move(b), std::move(family), std::move(g), coarse);
  return Setup{geom, std::move(ph.values), std::move(clean), std::move(prob), cfg.effective_mu()};
}

namespace {

constexpr double kSafety = 1.01;

PowerOptions constants_power() { return PowerOptions{1e-7, 1000, 0}; }

}  // namespace

StepChoice choose_step(const RunConfig& cfg, const Setup& setup) {
  StepChoice out;
  const Problem& prob = setup.problem;
  std::vector<LinOp> blocks;
  for (std::size_t i = 0; i < prob.sketched.size(); ++i)
    blocks.push_back(scaled(prob.sketched[i], prob.family.probs()[i]));
  out.constants = estimate_constants(blocks, prob.family.probs(), setup.mu, 1.0, constants_power());
  const RateConstants safe = out.constants.inflated(kSafety);
  out.sigma_B = sigma_baseline(safe.L, safe.Lbar);

  if (cfg.rho == "search") {
    out.plan = search_plane(safe).best;
  } else {
    out.plan = optimal_step(safe, to_double("rho", cfg.rho));
  }

  double base = 0.0;
  if (cfg.sigma == "optimal") base = out.plan->sigma_star;
  else if (cfg.sigma == "baseline") base = out.sigma_B;
  else base = to_double("sigma", cfg.sigma);
  out.sigma = base * cfg.sigma_scale;
  return out;
}

double optimality_gap(const Problem& prob, ConstSpan x, double mu) {
  if (x.size() != prob.x_dim()) throw DimensionError("optimality_gap", prob.x_dim(), x.size());
  Vec y = prob.K.apply(x);
  for (std::size_t j = 0; j < y.size(); ++j) y[j] -= prob.b[j];
  Vec u = prob.K.adjoint_apply(y);
  const double tau = 1.0 / mu;
  for (std::size_t j = 0; j < u.size(); ++j) u[j] = x[j] - tau * u[j];
  const Vec px = prob.g(u, tau);
  double diff = 0.0;
  for (std::size_t j = 0; j < px.size(); ++j) diff += (px[j] - x[j]) * (px[j] - x[j]);
  const double scale = std::max(norm(x), std::numeric_limits<double>::min());
  return std::sqrt(diff) / scale;
}

std::vector<MetricsRow> mean_rows(const std::vector<SolveReport>& runs) {
  if (runs.empty()) return {};
  const std::size_t n = runs.front().rows.size();
  for (const auto& r : runs) {
    if (r.rows.size() != n) throw ConfigError("mean_rows: runs recorded different row counts");
  }
  std::vector<MetricsRow> out(n);
  const double inv = 1.0 / static_cast<double>(runs.size());
  for (std::size_t i = 0; i < n; ++i) {
    MetricsRow m;
    m.k = runs.front().rows[i].k;
    m.level = runs.front().rows[i].level;
    for (const auto& r : runs) {
      const MetricsRow& row = r.rows[i];
      if (row.level != m.level) m.level = 0;
      m.cost += row.cost * inv;
      m.rel_dist += row.rel_dist * inv;
      m.psnr += row.psnr * inv;
      m.seconds += row.seconds * inv;
    }
    out[i] = m;
  }
  return out;
}

ExperimentResult run_experiment(const RunConfig& cfg) {
  const Setup setup = build_setup(cfg);
  PdhgOptions popt;
  popt.iters = cfg.reference_iters;
  popt.tol = cfg.reference_tol;
  const PdhgResult ref = pdhg_solve(setup.problem, setup.mu, popt);
  ExperimentResult res = run_experiment(cfg, setup, ref.x);
  res.reference_iterations = ref.iterations;
  if (!cfg.output_dir.empty()) write_bundle(res, setup, cfg.output_dir);
  return res;
}

ExperimentResult run_experiment(const RunConfig& cfg, const Setup& setup, const Vec& reference) {
  cfg.validate();
  if (reference.size() != setup.problem.x_dim())
    throw DimensionError("run_experiment: reference", setup.problem.x_dim(), reference.size());
  ExperimentResult res;
  res.config = cfg;
  res.reference = reference;
  res.reference_gap = optimality_gap(setup.problem, reference, setup.mu);

  RunOptions opts;
  opts.algorithm = cfg.algorithm;
  opts.mu = setup.mu;
  opts.iters = cfg.iters;
  opts.record_every = cfg.record_every;
  opts.theta_extrap = cfg.theta_extrap;
  opts.reference = reference;
  opts.truth = setup.truth;
  opts.wall_time = cfg.record_wall_time;
  opts.snapshot_costs = cfg.snapshot_costs;
  if (cfg.algorithm == Algorithm::pdhg) {
    opts.norm_K = power_method(setup.problem.K, PowerOptions{1e-10, 2000, 0}).norm;
  } else {
    res.step = choose_step(cfg, setup);
    opts.sigma = res.step.sigma;
  }

  for (std::size_t s = 0; s < cfg.n_seeds; ++s) {
    opts.seed = cfg.seed + s;
    res.seeds.push_back(opts.seed);
    res.runs.push_back(run(setup.problem, opts));
  }
  res.mean = mean_rows(res.runs);
  return res;
}

// ---------------------------------------------------------------------------
// Bundle I/O

std::string fingerprint(ConstSpan x) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : x) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof v);
    for (unsigned char c : bytes) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

void write_rows(const fs::path& path, const std::vector<MetricsRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  write_csv(out, rows);
}

std::string budget_tag(double b) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", b);
  return buf;
}

}  // namespace

void write_bundle(const ExperimentResult& res, const Setup& setup, const fs::path& dir) {
  fs::create_directories(dir);
  write_text(dir / "config.txt", serialize(res.config));

  std::ostringstream k;
  const RateConstants& c = res.step.constants;
  k << "reference_id = " << fingerprint(res.reference) << '\n'
    << "reference_iterations = " << res.reference_iterations << '\n'
    << "reference_gap = " << format_number(res.reference_gap) << '\n'
    << "mu = " << format_number(setup.mu) << '\n';
  if (res.config.algorithm != Algorithm::pdhg) {
    k << "L = " << format_number(c.L) << '\n'
      << "Lbar = " << format_number(c.Lbar) << '\n'
      << "Lbar_p = " << format_number(c.Lbar_p) << '\n'
      << "min_p = " << format_number(c.min_p) << '\n'
      << "power_converged = " << (c.converged ? "true" : "false") << '\n'
      << "sigma_baseline = " << format_number(res.step.sigma_B) << '\n';
    if (res.step.plan) {
      const StepPlan& p = *res.step.plan;
      k << "c = " << format_number(p.c) << '\n'
        << "c_bar = " << format_number(p.c_bar) << '\n'
        << "rho = " << format_number(p.rho) << '\n'
        << "a = " << format_number(p.a) << '\n'
        << "b = " << format_number(p.b) << '\n'
        << "eta_star = " << format_number(p.eta_star) << '\n'
        << "sigma_star = " << format_number(p.sigma_star) << '\n'
        << "theta_star = " << format_number(p.theta_star) << '\n';
    }
    k << "sigma = " << format_number(res.step.sigma) << '\n';
  }
  write_text(dir / "constants.txt", k.str());

  const std::size_t side = setup.geom.side;
  write_pgm(dir / "truth.pgm", setup.truth, side, side);
  write_pgm(dir / "reference.pgm", res.reference, side, side);
  write_pgm(dir / "sinogram.pgm", setup.problem.b, setup.geom.n_detectors, setup.geom.n_angles);

  for (std::size_t s = 0; s < res.runs.size(); ++s) {
    const std::string tag = "seed" + std::to_string(res.seeds[s]);
    write_rows(dir / ("run_" + tag + ".csv"), res.runs[s].rows);
    for (const auto& snap : res.runs[s].snapshots)
      write_pgm(dir / ("x_" + tag + "_cost" + budget_tag(snap.budget) + ".pgm"), snap.x, side, side);
    write_pgm(dir / ("x_" + tag + "_final.pgm"), res.runs[s].x, side, side);
  }
  write_rows(dir / "mean.csv", res.mean);
}

Bundle load_bundle(const fs::path& dir) {
  Bundle b;
  b.label = dir.filename().string();
  if (b.label.empty()) b.label = dir.parent_path().filename().string();
  std::ifstream kin(dir / "constants.txt");
  if (!kin) throw ConfigError("bundle " + dir.string() + " has no constants.txt");
  std::string line;
  while (std::getline(kin, line)) {
    if (line.rfind("reference_id = ", 0) == 0) b.reference_id = line.substr(15);
  }
  std::ifstream rin(dir / "mean.csv");
  if (!rin) throw ConfigError("bundle " + dir.string() + " has no mean.csv");
  b.rows = read_csv(rin);
  return b;
}

// ---------------------------------------------------------------------------
// Comparison

double decay_slope(const std::vector<MetricsRow>& rows, double cost_max, double floor) {
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& r : rows) {
    if (r.k == 0 || r.cost > cost_max) continue;
    if (!(r.rel_dist > floor) || !std::isfinite(r.rel_dist)) continue;
    const double y = std::log(r.rel_dist);
    n += 1;
    sx += r.cost;
    sy += y;
    sxx += r.cost * r.cost;
    sxy += r.cost * y;
  }
  const double den = n * sxx - sx * sx;
  if (n < 2 || den <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (n * sxy - sx * sy) / den;
}

double cost_to_reach(const std::vector<MetricsRow>& rows, double threshold) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].rel_dist <= threshold) {
      if (i == 0) return rows[i].cost;
      const MetricsRow& a = rows[i - 1];
      const MetricsRow& b = rows[i];
      if (!(a.rel_dist > 0.0) || !(b.rel_dist > 0.0)) return b.cost;
      const double la = std::log(a.rel_dist);
      const double lb = std::log(b.rel_dist);
      if (la == lb) return b.cost;
      const double t = (la - std::log(threshold)) / (la - lb);
      return a.cost + t * (b.cost - a.cost);
    }
  }
  return std::numeric_limits<double>::infinity();
}

double value_at_cost(const std::vector<MetricsRow>& rows, double cost, bool psnr_column) {
  auto val = [&](const MetricsRow& r) { return psnr_column ? r.psnr : r.rel_dist; };
  if (rows.empty() || cost < rows.front().cost || cost > rows.back().cost)
    return std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].cost >= cost) {
      const MetricsRow& a = rows[i - 1];
      const MetricsRow& b = rows[i];
      if (b.cost == a.cost) return val(b);
      const double t = (cost - a.cost) / (b.cost - a.cost);
      return val(a) + t * (val(b) - val(a));
    }
  }
  return val(rows.back());
}

Comparison compare_runs(const std::vector<Bundle>& bundles, const CompareOptions& opts) {
  if (bundles.empty()) throw ConfigError("compare_runs: no bundles");
  for (const auto& b : bundles) {
    if (b.rows.empty()) throw ConfigError("compare_runs: bundle " + b.label + " has no rows");
    if (b.reference_id != bundles.front().reference_id)
      throw ConfigError("compare_runs: bundle " + b.label + " uses a different reference (" +
                        b.reference_id + " vs " + bundles.front().reference_id + ")");
  }
  double cost_max = opts.cost_max;
  if (cost_max <= 0.0) {
    cost_max = std::numeric_limits<double>::infinity();
    for (const auto& b : bundles) cost_max = std::min(cost_max, b.rows.back().cost);
  }

  Comparison c;
  for (const auto& b : bundles) {
    CompareRow r;
    r.label = b.label;
    r.final_cost = b.rows.back().cost;
    r.final_rel_dist = b.rows.back().rel_dist;
    r.final_psnr = b.rows.back().psnr;
    r.slope = decay_slope(b.rows, cost_max, opts.rel_dist_floor);
    r.cost_to_threshold = cost_to_reach(b.rows, opts.threshold);
    c.summary.push_back(r);
  }
  const std::size_t n = std::max<std::size_t>(opts.grid_points, 2);
  for (std::size_t j = 0; j < n; ++j)
    c.cost_grid.push_back(cost_max * static_cast<double>(j) / static_cast<double>(n - 1));
  for (const auto& b : bundles) {
    std::vector<double> rd;
    std::vector<double> ps;
    for (double cost : c.cost_grid) {
      rd.push_back(value_at_cost(b.rows, cost, false));
      ps.push_back(value_at_cost(b.rows, cost, true));
    }
    c.rel_dist_at.push_back(std::move(rd));
    c.psnr_at.push_back(std::move(ps));
  }
  return c;
}

void write_comparison(std::ostream& summary, std::ostream& aligned, const Comparison& c) {
  summary << "label,final_cost,final_rel_dist,final_psnr,slope,cost_to_threshold\n";
  for (const auto& r : c.summary) {
    summary << r.label << ',' << format_number(r.final_cost) << ',' << format_number(r.final_rel_dist)
            << ',' << format_number(r.final_psnr) << ',' << format_number(r.slope) << ','
            << format_number(r.cost_to_threshold) << '\n';
  }
  aligned << "cost";
  for (const auto& r : c.summary) aligned << ',' << r.label << ":rel_dist," << r.label << ":psnr";
  aligned << '\n';
  for (std::size_t j = 0; j < c.cost_grid.size(); ++j) {
    aligned << format_number(c.cost_grid[j]);
    for (std::size_t b = 0; b < c.summary.size(); ++b)
      aligned << ',' << format_number(c.rel_dist_at[b][j]) << ',' << format_number(c.psnr_at[b][j]);
    aligned << '\n';
  }
}

// ---------------------------------------------------------------------------
// Graymap images

void write_pgm(const fs::path& path, ConstSpan values, std::size_t width, std::size_t height) {
  if (values.size() != width * height)
    throw DimensionError("write_pgm " + path.string(), width * height, values.size());
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericalError("write_pgm: non-finite pixel in " + path.string());
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (values.empty()) lo = hi = 0.0;
  const double span = hi - lo;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "P5\n" << width << ' ' << height << "\n65535\n";
  std::vector<unsigned char> buf(2 * values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double t = span > 0.0 ? (values[i] - lo) / span : 0.0;
    const auto q = static_cast<unsigned>(std::lround(std::clamp(t, 0.0, 1.0) * 65535.0));
    buf[2 * i] = static_cast<unsigned char>(q >> 8);
    buf[2 * i + 1] = static_cast<unsigned char>(q & 0xFF);
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));

  fs::path side = path;
  side += ".range";
  write_text(side, exact(lo) + " " + exact(hi) + "\n");
}

namespace {

std::string pgm_token(std::istream& in) {
  std::string tok;
  char ch = 0;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok += ch;
  }
  return tok;
}

}  // namespace

GrayImage read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  if (pgm_token(in) != "P5") throw ConfigError(path.string() + " is not a binary graymap");
  GrayImage img;
  img.width = to_uint("width", pgm_token(in));
  img.height = to_uint("height", pgm_token(in));
  const std::uint64_t maxval = to_uint("maxval", pgm_token(in));
  if (maxval == 0 || maxval > 65535) throw ConfigError(path.string() + ": bad maxval");
  const std::size_t n = img.width * img.height;
  const std::size_t bpp = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> buf(bpp * n);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size())
    throw ConfigError(path.string() + ": truncated pixel data");

  double lo = 0.0;
  double hi = 1.0;
  fs::path side = path;
  side += ".range";
  if (std::ifstream rin(side); rin) {
    std::string a, b;
    rin >> a >> b;
    lo = to_double("range", a);
    hi = to_double("range", b);
  }
  img.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned q = bpp == 2 ? (unsigned{buf[2 * i]} << 8) | buf[2 * i + 1] : buf[i];
    img.values[i] = lo + (hi - lo) * (static_cast<double>(q) / static_cast<double>(maxval));
  }
  return img;
}

}  // namespace imask
