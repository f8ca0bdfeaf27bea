#include "imask/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "imask/errors.hpp"
#include "imask/metrics.hpp"

namespace imask {

// ---------------------------------------------------------------------------
// Problem

Problem Problem::make(LinOp K, Vec b, SketchFamily family, ProxFn g,
                      const CoarseProjectorFactory& coarse) {
  std::vector<LinOp> sk = sketch_forward_all(family, K, coarse);
  ProxFn f_conj = make_quadratic_conjugate(b);
  Problem p{std::move(K), std::move(b), std::move(family), std::move(sk), std::move(g),
            std::move(f_conj)};
  p.validate();
  return p;
}

void Problem::validate() const {
  if (b.size() != K.range_dim()) throw DimensionError("Problem: sinogram", K.range_dim(), b.size());
  if (family.dim() != K.domain_dim())
    throw DimensionError("Problem: sketch family image", K.domain_dim(), family.dim());
  if (sketched.size() != family.levels())
    throw DimensionError("Problem: sketched operators", family.levels(), sketched.size());
  for (const auto& op : sketched) {
    if (op.domain_dim() != K.domain_dim() || op.range_dim() != K.range_dim())
      throw ConfigError("Problem: sketched operator " + op.name() + " has mismatched shape");
  }
  if (!g.prox) throw ConfigError("Problem: g has no prox");
  if (!f_conj.prox) throw ConfigError("Problem: f_conj has no prox");
}

// ---------------------------------------------------------------------------
// Sampling

namespace {

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

double counter_uniform(std::uint64_t seed, std::uint64_t k) {
  const std::uint64_t h = splitmix(splitmix(seed) ^ (k * 0xD1B54A32D192ED03ULL));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

std::size_t sample_level(ConstSpan probs, double u) {
  if (probs.empty()) throw ConfigError("sample_level: empty distribution");
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i + 1;
  }
  // u landed in the rounding gap above the last partial sum.
  for (std::size_t i = probs.size(); i > 0; --i) {
    if (probs[i - 1] > 0.0) return i;
  }
  return probs.size();
}

std::size_t draw_level(std::uint64_t seed, std::uint64_t k, ConstSpan probs) {
  return sample_level(probs, counter_uniform(seed, k));
}

// ---------------------------------------------------------------------------
// State

SaddleState SaddleState::zeros(std::size_t x_dim, std::size_t y_dim, std::size_t blocks,
                               std::uint64_t seed) {
  SaddleState s;
  s.x.assign(x_dim, 0.0);
  s.y.assign(y_dim, 0.0);
  s.x_bar.assign(x_dim, 0.0);
  s.phi.assign(blocks, Vec(x_dim, 0.0));
  s.psi.assign(blocks, Vec(y_dim, 0.0));
  s.phi_sum.assign(x_dim, 0.0);
  s.psi_sum.assign(y_dim, 0.0);
  s.seed = seed;
  return s;
}

SaddleState SaddleState::zeros(const Problem& prob, std::uint64_t seed) {
  return zeros(prob.x_dim(), prob.y_dim(), prob.family.levels(), seed);
}

SaddleState SaddleState::consistent(const std::vector<LinOp>& blocks, ConstSpan weights, Vec x,
                                    Vec y, std::uint64_t seed) {
  if (blocks.empty()) throw ConfigError("SaddleState::consistent: no blocks");
  if (weights.size() != blocks.size())
    throw DimensionError("SaddleState::consistent: weights", blocks.size(), weights.size());
  SaddleState s = zeros(blocks.front().domain_dim(), blocks.front().range_dim(), blocks.size(), seed);
  if (x.size() != s.x.size()) throw DimensionError("SaddleState::consistent: x", s.x.size(), x.size());
  if (y.size() != s.y.size()) throw DimensionError("SaddleState::consistent: y", s.y.size(), y.size());
  s.x = std::move(x);
  s.y = std::move(y);
  s.x_bar = s.x;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    blocks[i].adjoint_apply(s.y, s.phi[i]);
    blocks[i].apply(s.x, s.psi[i]);
  }
  s.resum(weights);
  return s;
}

void SaddleState::resum(ConstSpan weights) {
  std::fill(phi_sum.begin(), phi_sum.end(), 0.0);
  std::fill(psi_sum.begin(), psi_sum.end(), 0.0);
  for (std::size_t i = 0; i < phi.size(); ++i) {
    axpy(weights[i], phi[i], phi_sum);
    axpy(weights[i], psi[i], psi_sum);
  }
}

namespace {

void check_state(const SaddleState& s, std::size_t x_dim, std::size_t y_dim, std::size_t blocks) {
  if (s.x.size() != x_dim) throw DimensionError("state x", x_dim, s.x.size());
  if (s.y.size() != y_dim) throw DimensionError("state y", y_dim, s.y.size());
  if (s.phi.size() != blocks || s.psi.size() != blocks)
    throw DimensionError("state memory rows", blocks, s.phi.size());
}

Vec unit_weights(std::size_t n) { return Vec(n, 1.0); }

}  // namespace

// ---------------------------------------------------------------------------
// ImaSk

void imask_step(SaddleState& s, const Problem& prob, double sigma, double mu) {
  if (!(sigma > 0.0) || !(mu > 0.0)) throw ConfigError("imask_step: sigma and mu must be positive");
  const std::size_t r = prob.family.levels();
  check_state(s, prob.x_dim(), prob.y_dim(), r);

  const std::size_t level = draw_level(s.seed, s.k, prob.family.probs());
  const std::size_t i = level - 1;
  const double p = prob.family.prob(level);
  const LinOp& Ki = prob.sketched[i];

  Vec phi_new(prob.x_dim());
  Vec psi_new(prob.y_dim());
  Ki.adjoint_apply(s.y, phi_new);
  Ki.apply(s.x, psi_new);

  // xi = phi_new - phi_i + sum_j p_j phi_j, and the same for zeta.
  Vec xi(prob.x_dim());
  Vec zeta(prob.y_dim());
  for (std::size_t j = 0; j < xi.size(); ++j) {
    const double delta = phi_new[j] - s.phi[i][j];
    xi[j] = delta + s.phi_sum[j];
    s.phi_sum[j] += p * delta;
  }
  for (std::size_t j = 0; j < zeta.size(); ++j) {
    const double delta = psi_new[j] - s.psi[i][j];
    zeta[j] = delta + s.psi_sum[j];
    s.psi_sum[j] += p * delta;
  }
  s.phi[i].swap(phi_new);
  s.psi[i].swap(psi_new);

  const double tau = sigma / mu;
  for (std::size_t j = 0; j < xi.size(); ++j) xi[j] = s.x[j] - tau * xi[j];
  prob.g.prox(xi, tau, s.x);
  for (std::size_t j = 0; j < zeta.size(); ++j) zeta[j] = s.y[j] + sigma * zeta[j];
  prob.f_conj.prox(zeta, sigma, s.y);

  s.cost += 2.0 * prob.family.cost_fraction(level);
  s.last_level = level;
  ++s.k;
  if (s.k % kResumPeriod == 0) s.resum(prob.family.probs());
}

// ---------------------------------------------------------------------------
// Saddle-point SAGA

SaddleBlocks SaddleBlocks::from_problem(const Problem& prob) {
  SaddleBlocks sb;
  const Vec& p = prob.family.probs();
  for (std::size_t i = 0; i < prob.sketched.size(); ++i) sb.A.push_back(scaled(prob.sketched[i], p[i]));
  sb.probs = p;
  sb.g = prob.g;
  sb.f_conj = prob.f_conj;
  return sb;
}

double SaddleBlocks::sum_gap(const LinOp& total, std::size_t trials, std::uint64_t seed) const {
  double worst = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const Vec x = standard_normal(total.domain_dim(), seed + t);
    const Vec ref = total.apply(x);
    Vec acc(total.range_dim(), 0.0);
    for (const auto& a : A) axpy(1.0, a.apply(x), acc);
    axpy(-1.0, ref, acc);
    worst = std::max(worst, norm(acc) / std::max(norm(ref), std::numeric_limits<double>::min()));
  }
  return worst;
}

void saga_saddle_step(SaddleState& s, const SaddleBlocks& blocks, double sigma_x,
                      double sigma_y) {
  if (!(sigma_x > 0.0) || !(sigma_y > 0.0))
    throw ConfigError("saga_saddle_step: step sizes must be positive");
  if (blocks.A.empty() || blocks.A.size() != blocks.probs.size())
    throw ConfigError("saga_saddle_step: need one probability per block");
  const std::size_t x_dim = blocks.A.front().domain_dim();
  const std::size_t y_dim = blocks.A.front().range_dim();
  check_state(s, x_dim, y_dim, blocks.A.size());

  const std::size_t level = draw_level(s.seed, s.k, blocks.probs);
  const std::size_t i = level - 1;
  const double inv_p = 1.0 / blocks.probs[i];

  Vec phi_new(x_dim);
  Vec psi_new(y_dim);
  blocks.A[i].adjoint_apply(s.y, phi_new);
  blocks.A[i].apply(s.x, psi_new);

  Vec vx(x_dim);
  Vec vy(y_dim);
  for (std::size_t j = 0; j < x_dim; ++j) {
    vx[j] = inv_p * (phi_new[j] - s.phi[i][j]) + s.phi_sum[j];
    s.phi_sum[j] += phi_new[j] - s.phi[i][j];
  }
  for (std::size_t j = 0; j < y_dim; ++j) {
    vy[j] = inv_p * (psi_new[j] - s.psi[i][j]) + s.psi_sum[j];
    s.psi_sum[j] += psi_new[j] - s.psi[i][j];
  }
  s.phi[i].swap(phi_new);
  s.psi[i].swap(psi_new);

  for (std::size_t j = 0; j < x_dim; ++j) vx[j] = s.x[j] - sigma_x * vx[j];
  blocks.g.prox(vx, sigma_x, s.x);
  for (std::size_t j = 0; j < y_dim; ++j) vy[j] = s.y[j] + sigma_y * vy[j];
  blocks.f_conj.prox(vy, sigma_y, s.y);

  s.last_level = level;
  ++s.k;
  if (s.k % kResumPeriod == 0) s.resum(unit_weights(blocks.A.size()));
}

// ---------------------------------------------------------------------------
// ImaSk-Seq

void imask_seq_step(SaddleState& s, const Problem& prob, double sigma, double mu,
                    double theta_extrap) {
  if (!(sigma > 0.0) || !(mu > 0.0)) throw ConfigError("imask_seq_step: sigma and mu must be positive");
  if (!(theta_extrap >= 0.0 && theta_extrap <= 1.0))
    throw ConfigError("imask_seq_step: theta_extrap must lie in [0, 1]");
  const std::size_t r = prob.family.levels();
  check_state(s, prob.x_dim(), prob.y_dim(), r);
  if (s.x_bar.size() != s.x.size()) throw DimensionError("state x_bar", s.x.size(), s.x_bar.size());

  const std::size_t level = draw_level(s.seed, s.k, prob.family.probs());
  const std::size_t i = level - 1;
  const double p = prob.family.prob(level);
  const LinOp& Ki = prob.sketched[i];

  Vec psi_new(prob.y_dim());
  Ki.apply(s.x_bar, psi_new);
  Vec zeta(prob.y_dim());
  for (std::size_t j = 0; j < zeta.size(); ++j) {
    const double delta = psi_new[j] - s.psi[i][j];
    zeta[j] = s.y[j] + sigma * (delta + s.psi_sum[j]);
    s.psi_sum[j] += p * delta;
  }
  s.psi[i].swap(psi_new);
  prob.f_conj.prox(zeta, sigma, s.y);

  Vec phi_new(prob.x_dim());
  Ki.adjoint_apply(s.y, phi_new);
  const double tau = sigma / mu;
  Vec xi(prob.x_dim());
  for (std::size_t j = 0; j < xi.size(); ++j) {
    const double delta = phi_new[j] - s.phi[i][j];
    xi[j] = s.x[j] - tau * (delta + s.phi_sum[j]);
    s.phi_sum[j] += p * delta;
  }
  s.phi[i].swap(phi_new);

  Vec x_new(prob.x_dim());
  prob.g.prox(xi, tau, x_new);
  if (theta_extrap == 0.0) {
    s.x_bar = x_new;
  } else {
    for (std::size_t j = 0; j < x_new.size(); ++j)
      s.x_bar[j] = x_new[j] + theta_extrap * (x_new[j] - s.x[j]);
  }
  s.x.swap(x_new);

  s.cost += 2.0 * prob.family.cost_fraction(level);
  s.last_level = level;
  ++s.k;
  if (s.k % kResumPeriod == 0) s.resum(prob.family.probs());
}

// ---------------------------------------------------------------------------
// PDHG

PdhgParams pdhg_params(double norm_K, double mu, double rho) {
  if (!(mu > 0.0)) throw ConfigError("pdhg_params: mu must be positive");
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("pdhg_params: rho must lie in (0, 1)");
  if (!(norm_K > 0.0) || !std::isfinite(norm_K))
    throw NumericalError("pdhg_params: operator norm must be positive and finite (kappa = 1 leaves sigma undefined)");
  PdhgParams prm;
  prm.kappa = std::sqrt(1.0 + norm_K * norm_K / (mu * rho * rho));
  prm.sigma = 1.0 / (prm.kappa - 1.0);
  prm.tau = 1.0 / ((prm.kappa - 1.0) * mu);
  prm.theta = 1.0 - 2.0 / (1.0 + prm.kappa);
  if (!std::isfinite(prm.sigma)) throw NumericalError("pdhg_params: step size overflow");
  return prm;
}

void pdhg_step(SaddleState& s, const LinOp& K, const ProxFn& g, const ProxFn& f_conj,
               const PdhgParams& prm) {
  Vec v(K.range_dim());
  K.apply(s.x_bar, v);
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = s.y[j] + prm.sigma * v[j];
  f_conj.prox(v, prm.sigma, s.y);

  Vec u(K.domain_dim());
  K.adjoint_apply(s.y, u);
  for (std::size_t j = 0; j < u.size(); ++j) u[j] = s.x[j] - prm.tau * u[j];
  Vec x_new(K.domain_dim());
  g.prox(u, prm.tau, x_new);
  for (std::size_t j = 0; j < x_new.size(); ++j)
    s.x_bar[j] = x_new[j] + prm.theta * (x_new[j] - s.x[j]);
  s.x.swap(x_new);
  s.cost += 2.0;
  s.last_level = 0;
  ++s.k;
}

PdhgResult pdhg_solve(const LinOp& K, const ProxFn& g, const ProxFn& f_conj, double mu,
                      const PdhgOptions& opts) {
  double nk = opts.norm_K;
  if (nk == 0.0) {
    const PowerResult pr = power_method(K, PowerOptions{1e-10, 2000, 0});
    nk = pr.norm;
  }
  PdhgResult res;
  res.params = pdhg_params(nk, mu, opts.rho);
  SaddleState s = SaddleState::zeros(K.domain_dim(), K.range_dim(), 0, 0);
  for (std::size_t it = 0; it < opts.iters; ++it) {
    const Vec x_old = opts.tol > 0.0 ? s.x : Vec{};
    pdhg_step(s, K, g, f_conj, res.params);
    res.iterations = it + 1;
    if (opts.tol > 0.0) {
      double diff = 0.0;
      for (std::size_t j = 0; j < s.x.size(); ++j) diff += (s.x[j] - x_old[j]) * (s.x[j] - x_old[j]);
      if (std::sqrt(diff) <= opts.tol * norm(s.x)) break;
    }
  }
  for (double v : s.x) {
    if (!std::isfinite(v)) throw NumericalError("pdhg_solve: iterates diverged");
  }
  res.x = std::move(s.x);
  res.y = std::move(s.y);
  return res;
}

PdhgResult pdhg_solve(const Problem& prob, double mu, const PdhgOptions& opts) {
  return pdhg_solve(prob.K, prob.g, prob.f_conj, mu, opts);
}

// ---------------------------------------------------------------------------
// Driver

Algorithm parse_algorithm(std::string_view name) {
  if (name == "imask") return Algorithm::imask;
  if (name == "imask-seq") return Algorithm::imask_seq;
  if (name == "pdhg") return Algorithm::pdhg;
  if (name == "saga-saddle") return Algorithm::saga_saddle;
  throw ConfigError("unknown algorithm '" + std::string(name) +
                    "' (expected imask, imask-seq, pdhg or saga-saddle)");
}

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::imask: return "imask";
    case Algorithm::imask_seq: return "imask-seq";
    case Algorithm::pdhg: return "pdhg";
    case Algorithm::saga_saddle: return "saga-saddle";
  }
  return "imask";
}

SolveReport run(const Problem& prob, const RunOptions& opts) {
  prob.validate();
  if (opts.record_every == 0) throw ConfigError("run: record_every must be positive");
  if (opts.algorithm != Algorithm::pdhg && !(opts.sigma > 0.0))
    throw ConfigError("run: sigma must be positive");
  if (!(opts.mu > 0.0)) throw ConfigError("run: mu must be positive");
  if (opts.reference && opts.reference->size() != prob.x_dim())
    throw DimensionError("run: reference image", prob.x_dim(), opts.reference->size());
  if (opts.truth && opts.truth->size() != prob.x_dim())
    throw DimensionError("run: truth image", prob.x_dim(), opts.truth->size());

  SaddleState s = SaddleState::zeros(prob, opts.seed);
  SaddleBlocks blocks;
  PdhgParams prm;
  if (opts.algorithm == Algorithm::saga_saddle) blocks = SaddleBlocks::from_problem(prob);
  if (opts.algorithm == Algorithm::pdhg) {
    const double nk = opts.norm_K > 0.0 ? opts.norm_K
                                        : power_method(prob.K, PowerOptions{1e-10, 2000, 0}).norm;
    prm = pdhg_params(nk, opts.mu, opts.pdhg_rho);
  }

  std::vector<double> budgets = opts.snapshot_costs;
  std::sort(budgets.begin(), budgets.end());
  std::size_t next_budget = 0;

  SolveReport rep;
  const auto t0 = std::chrono::steady_clock::now();
  auto record = [&]() {
    MetricsRow row;
    row.k = s.k;
    row.cost = s.cost;
    row.level = s.k == 0 ? 0 : s.last_level;
    row.rel_dist = opts.reference ? rel_dist(s.x, *opts.reference)
                                  : std::numeric_limits<double>::quiet_NaN();
    row.psnr = opts.truth ? psnr(s.x, *opts.truth, opts.psnr_peak)
                          : std::numeric_limits<double>::quiet_NaN();
    if (opts.wall_time)
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.rows.push_back(row);
  };

  record();
  for (std::size_t it = 0; it < opts.iters; ++it) {
    switch (opts.algorithm) {
      case Algorithm::imask: imask_step(s, prob, opts.sigma, opts.mu); break;
      case Algorithm::imask_seq:
        imask_seq_step(s, prob, opts.sigma, opts.mu, opts.theta_extrap);
        break;
      case Algorithm::saga_saddle:
        saga_saddle_step(s, blocks, opts.sigma / opts.mu, opts.sigma);
        s.cost += 2.0 * prob.family.cost_fraction(s.last_level);
        break;
      case Algorithm::pdhg: pdhg_step(s, prob.K, prob.g, prob.f_conj, prm); break;
    }
    while (next_budget < budgets.size() && s.cost >= budgets[next_budget]) {
      rep.snapshots.push_back(Snapshot{budgets[next_budget], s.k, s.cost, s.x});
      ++next_budget;
    }
    if (s.k % opts.record_every == 0 || it + 1 == opts.iters) record();
  }
  for (double v : s.x) {
    if (!std::isfinite(v)) throw NumericalError("run: iterates diverged (non-finite x)");
  }
  rep.x = std::move(s.x);
  rep.y = std::move(s.y);
  return rep;
}

// ---------------------------------------------------------------------------
// CSV

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void write_csv(std::ostream& os, const std::vector<MetricsRow>& rows) {
  os << kCsvHeader << '\n';
  for (const auto& r : rows) {
    os << r.k << ',' << format_number(r.cost) << ',' << r.level << ',' << format_number(r.rel_dist)
       << ',' << format_number(r.psnr) << ',' << format_number(r.seconds) << '\n';
  }
}

std::vector<MetricsRow> read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader)
    throw ConfigError("read_csv: missing header '" + std::string(kCsvHeader) + "'");
  std::vector<MetricsRow> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f[6];
    for (auto& field : f) {
      if (!std::getline(ss, field, ','))
        throw ConfigError("read_csv: line " + std::to_string(lineno) + " has fewer than 6 fields");
    }
    try {
      MetricsRow r;
      r.k = std::stoull(f[0]);
      r.cost = std::stod(f[1]);
      r.level = std::stoul(f[2]);
      r.rel_dist = std::stod(f[3]);
      r.psnr = std::stod(f[4]);
      r.seconds = std::stod(f[5]);
      rows.push_back(r);
    } catch (const std::logic_error&) {
      throw ConfigError("read_csv: malformed number on line " + std::to_string(lineno));
    }
  }
  return rows;
}

}  // namespace imask
