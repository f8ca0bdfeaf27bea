#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "imask/ctmodel.hpp"
#include "imask/errors.hpp"
#include "imask/rates.hpp"
#include "imask/solvers.hpp"
#include "oracles.hpp"

using namespace imask;
using imask::testing::dense;
using imask::testing::rel_err;
using imask::testing::ridge_solution;
using imask::testing::to_eigen;
using imask::testing::to_vec;

namespace {

Problem scalar_problem() {
  DenseMatrix m{1, 1, Vec{1.0}};
  return Problem::make(dense_op(m), Vec{1.0}, SketchFamily::uniform(1, 1), make_ridge(1.0));
}

struct CtCase {
  Geometry geom;
  Problem prob;
  Eigen::VectorXd oracle;
};

CtCase ct_case(std::size_t levels, double mu_g = 1.0, SketchMode mode = SketchMode::coarse_projector) {
  const Geometry g = Geometry::make(16, 24, 1.0 / 16);
  const LinOp K = projector(g);
  const Vec b = project(g, make_phantom(PhantomKind::shepp_logan, 16).values);
  const CoarseProjectorFactory coarse = [g](std::size_t f) { return coarse_projector(g, f); };
  Problem p = Problem::make(K, b, SketchFamily::uniform(levels, 16, mode), make_ridge(mu_g), coarse);
  const Eigen::VectorXd x = ridge_solution(dense(K), to_eigen(b), mu_g);
  return {g, std::move(p), x};
}

double optimal_sigma(const Problem& p, double mu) {
  std::vector<LinOp> blocks;
  for (std::size_t i = 0; i < p.sketched.size(); ++i)
    blocks.push_back(scaled(p.sketched[i], p.family.probs()[i]));
  const RateConstants k = estimate_constants(blocks, p.family.probs(), mu, 1.0, {1e-10, 5000, 0});
  return search_plane(k.inflated(1.01)).best.sigma_star;
}

Vec dual_solution(const Problem& p, const Vec& x) {
  Vec y = p.K.apply(x);
  axpy(-1.0, p.b, y);
  return y;
}

}  // namespace

TEST(Sampling, CounterStreamIsStatelessAndInRange) {
  EXPECT_EQ(counter_uniform(3, 17), counter_uniform(3, 17));
  EXPECT_NE(counter_uniform(3, 17), counter_uniform(4, 17));
  const Vec p{0.3, 0.3, 0.2, 0.2};
  std::vector<double> hits(4, 0.0);
  for (std::uint64_t k = 0; k < 20000; ++k) {
    const double u = counter_uniform(5, k);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    hits[draw_level(5, k, p) - 1] += 1.0 / 20000;
  }
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(hits[i], p[i], 0.015);
  EXPECT_EQ(sample_level(p, 0.0), 1u);
  EXPECT_EQ(sample_level(p, 0.3), 2u);
  EXPECT_EQ(sample_level(p, 0.999999), 4u);
}

TEST(Problem, RejectsMismatchedFamily) {
  EXPECT_THROW(Problem::make(LinOp::zero(5, 3), Vec(3, 0.0), SketchFamily::uniform(1, 1), make_ridge(2.0)),
               DimensionError);
  EXPECT_THROW(Problem::make(LinOp::zero(16, 3), Vec(2, 0.0), SketchFamily::uniform(1, 4), make_ridge(2.0)),
               DimensionError);
}

TEST(Imask, NullOperatorFixedPoint) {
  Problem p = Problem::make(LinOp::zero(16, 3), Vec(3, 0.0), SketchFamily::uniform(1, 4), make_ridge(2.0));
  SaddleState s = SaddleState::zeros(p, 0);
  s.x = Vec(16, 1.0);
  const double sigma = 0.5, mu = 2.0;
  for (int k = 0; k < 200; ++k) {
    const double before = s.x[0];
    imask_step(s, p, sigma, mu);
    EXPECT_DOUBLE_EQ(s.x[0], before / (1.0 + sigma / mu * 2.0));
    for (double v : s.y) EXPECT_EQ(v, 0.0);
  }
  EXPECT_LE(norm(s.x), 1e-30);
}

TEST(Imask, ScalarProblemConvergesToHalf) {
  const Problem p = scalar_problem();
  const double sigma = optimal_sigma(p, 1.0);
  SaddleState s = SaddleState::zeros(p, 1);
  for (int k = 0; k < 2000; ++k) imask_step(s, p, sigma, 1.0);
  EXPECT_NEAR(s.x[0], 0.5, 1e-6);
  EXPECT_NEAR(s.y[0], -0.5, 1e-6);
  EXPECT_DOUBLE_EQ(s.cost, 4000.0);
}

TEST(Imask, CtRidgeMatchesDenseOracleForEachLevelCount) {
  for (std::size_t r : {1u, 2u, 4u}) {
    const CtCase c = ct_case(r);
    const double sigma = optimal_sigma(c.prob, 1.0);
    SaddleState s = SaddleState::zeros(c.prob, 7);
    for (int k = 0; k < 4000; ++k) imask_step(s, c.prob, sigma, 1.0);
    EXPECT_LE(rel_err(s.x, c.oracle), 1e-5) << "r = " << r;
  }
}

TEST(Imask, AllLevelCountsShareTheFixedPoint) {
  std::vector<Vec> finals;
  for (std::size_t r : {1u, 2u, 4u}) {
    const CtCase c = ct_case(r);
    RunOptions o;
    o.sigma = optimal_sigma(c.prob, 1.0);
    o.mu = 1.0;
    o.iters = 4000;
    o.record_every = 4000;
    finals.push_back(run(c.prob, o).x);
  }
  for (std::size_t i = 0; i < finals.size(); ++i)
    for (std::size_t j = i + 1; j < finals.size(); ++j)
      EXPECT_LE(rel_err(finals[i], to_eigen(finals[j])), 1e-5);
}

TEST(Imask, MemorySumsTrackTables) {
  const CtCase c = ct_case(4);
  SaddleState s = SaddleState::zeros(c.prob, 3);
  for (int k = 0; k < 300; ++k) imask_step(s, c.prob, 0.05, 1.0);
  Vec phi(s.phi_sum.size(), 0.0), psi(s.psi_sum.size(), 0.0);
  for (std::size_t i = 0; i < 4; ++i) {
    axpy(c.prob.family.probs()[i], s.phi[i], phi);
    axpy(c.prob.family.probs()[i], s.psi[i], psi);
  }
  axpy(-1.0, s.phi_sum, phi);
  axpy(-1.0, s.psi_sum, psi);
  EXPECT_LE(norm(phi), 1e-10);
  EXPECT_LE(norm(psi), 1e-10);
}

TEST(Imask, ExactMemoryGivesDrawIndependentStep) {
  // At a consistent state every draw forms the same estimator K^T y, so the
  // next iterate does not depend on which level is sampled.
  const CtCase c = ct_case(4, 1.0, SketchMode::exact);
  const Vec x = standard_normal(256, 1);
  const Vec y = standard_normal(c.prob.y_dim(), 2);
  std::vector<std::size_t> seen;
  Vec first;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    SaddleState s = SaddleState::consistent(c.prob.sketched, c.prob.family.probs(), x, y, seed);
    imask_step(s, c.prob, 0.1, 1.0);
    seen.push_back(s.last_level);
    if (first.empty()) first = s.x;
    else EXPECT_LE(rel_err(s.x, to_eigen(first)), 1e-12);
  }
  std::sort(seen.begin(), seen.end());
  EXPECT_EQ(std::unique(seen.begin(), seen.end()) - seen.begin(), 4);
}

TEST(Imask, SaddlePointIsFixed) {
  const CtCase c = ct_case(4, 1.0, SketchMode::exact);
  const Vec x = to_vec(c.oracle);
  const Vec y = dual_solution(c.prob, x);
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    SaddleState s = SaddleState::consistent(c.prob.sketched, c.prob.family.probs(), x, y, seed);
    imask_step(s, c.prob, 0.3, 1.0);
    EXPECT_LE(rel_err(s.x, c.oracle), 1e-12);
    EXPECT_LE(rel_err(s.y, to_eigen(y)), 1e-12);
  }
}

TEST(Imask, FrozenPointLeavesMemoryStationary) {
  const CtCase c = ct_case(2);
  const Vec x = standard_normal(256, 4);
  const Vec y = standard_normal(c.prob.y_dim(), 5);
  SaddleState s = SaddleState::consistent(c.prob.sketched, c.prob.family.probs(), x, y, 0);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(s.phi[i], c.prob.sketched[i].adjoint_apply(y));
    EXPECT_EQ(s.psi[i], c.prob.sketched[i].apply(x));
  }
  // A zero step keeps x, y and therefore refreshes each row to the same value.
  const auto phi = s.phi;
  const auto psi = s.psi;
  for (int k = 0; k < 20; ++k) {
    s.x = x;
    s.y = y;
    imask_step(s, c.prob, 1e-300, 1.0);
  }
  EXPECT_EQ(s.phi, phi);
  EXPECT_EQ(s.psi, psi);
}

TEST(SagaSaddle, MatchesImaskBitForBitWithUniformDyadicProbabilities) {
  const CtCase c = ct_case(4);
  const SaddleBlocks blocks = SaddleBlocks::from_problem(c.prob);
  EXPECT_LE(blocks.sum_gap(c.prob.K, 3, 9), 1e-12);
  const double sigma = 0.07, mu = 1.0;
  SaddleState a = SaddleState::zeros(c.prob, 11);
  SaddleState b = SaddleState::zeros(c.prob, 11);
  for (int k = 0; k < 50; ++k) {
    imask_step(a, c.prob, sigma, mu);
    saga_saddle_step(b, blocks, sigma / mu, sigma);
    ASSERT_EQ(a.last_level, b.last_level);
  }
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.y, b.y);
}

TEST(SagaSaddle, MatchesImaskWithSkewedProbabilities) {
  const Geometry g = Geometry::make(16, 24, 1.0 / 16);
  const CoarseProjectorFactory coarse = [g](std::size_t f) { return coarse_projector(g, f); };
  const Vec b = project(g, make_phantom(PhantomKind::shepp_logan, 16).values);
  const Problem p = Problem::make(projector(g), b,
                                  SketchFamily(4, 16, Vec{0.3, 0.3, 0.2, 0.2}, SketchMode::coarse_projector),
                                  make_ridge(1.0), coarse);
  const SaddleBlocks blocks = SaddleBlocks::from_problem(p);
  SaddleState a = SaddleState::zeros(p, 2);
  SaddleState s = SaddleState::zeros(p, 2);
  for (int k = 0; k < 50; ++k) {
    imask_step(a, p, 0.05, 1.0);
    saga_saddle_step(s, blocks, 0.05, 0.05);
  }
  EXPECT_LE(rel_err(s.x, to_eigen(a.x)), 1e-12);
  EXPECT_LE(rel_err(s.y, to_eigen(a.y)), 1e-12);
}

TEST(SagaSaddle, SingleBlockIsDeterministicPrimalDual) {
  const Problem p = scalar_problem();
  const SaddleBlocks blocks = SaddleBlocks::from_problem(p);
  SaddleState s = SaddleState::zeros(p, 0);
  double x = 0.0, y = 0.0;
  const double sx = 0.4, sy = 0.4;
  for (int k = 0; k < 30; ++k) {
    saga_saddle_step(s, blocks, sx, sy);
    const double xn = (x - sx * y) / (1.0 + sx);
    const double yn = (y + sy * x - sy * 1.0) / (1.0 + sy);
    x = xn;
    y = yn;
    EXPECT_NEAR(s.x[0], x, 1e-15);
    EXPECT_NEAR(s.y[0], y, 1e-15);
  }
}

TEST(ImaskSeq, NoExtrapolationKeepsBarEqualToIterate) {
  const CtCase c = ct_case(2);
  SaddleState s = SaddleState::zeros(c.prob, 4);
  for (int k = 0; k < 30; ++k) {
    imask_seq_step(s, c.prob, 0.05, 1.0, 0.0);
    ASSERT_EQ(s.x_bar, s.x);
  }
}

TEST(ImaskSeq, ScalarProblemConvergesToHalf) {
  const Problem p = scalar_problem();
  SaddleState s = SaddleState::zeros(p, 1);
  for (int k = 0; k < 2000; ++k) imask_seq_step(s, p, 0.05, 1.0, 1.0);
  EXPECT_NEAR(s.x[0], 0.5, 1e-6);
}

TEST(ImaskSeq, CtRidgeSharesImaskFixedPoint) {
  const CtCase c = ct_case(4);
  const double sigma = optimal_sigma(c.prob, 1.0);
  SaddleState s = SaddleState::zeros(c.prob, 6);
  for (int k = 0; k < 4000; ++k) imask_seq_step(s, c.prob, sigma, 1.0, 1.0);
  EXPECT_LE(rel_err(s.x, c.oracle), 1e-5);
}

TEST(ImaskSeq, SaddlePointIsFixed) {
  const CtCase c = ct_case(4, 1.0, SketchMode::exact);
  const Vec x = to_vec(c.oracle);
  const Vec y = dual_solution(c.prob, x);
  SaddleState s = SaddleState::consistent(c.prob.sketched, c.prob.family.probs(), x, y, 3);
  s.x_bar = x;
  for (int k = 0; k < 5; ++k) imask_seq_step(s, c.prob, 0.3, 1.0, 1.0);
  EXPECT_LE(rel_err(s.x, c.oracle), 1e-12);
}

TEST(Pdhg, ParameterFormula) {
  const double mu = 0.7, rho = 0.9;
  const PdhgParams p = pdhg_params(std::sqrt(3.0 * mu * rho * rho), mu, rho);
  EXPECT_NEAR(p.kappa, 2.0, 1e-14);
  EXPECT_NEAR(p.sigma, 1.0, 1e-13);
  EXPECT_NEAR(p.tau, 1.0 / mu, 1e-13);
  EXPECT_NEAR(p.theta, 1.0 / 3.0, 1e-14);
  EXPECT_THROW(pdhg_params(0.0, 1.0), NumericalError);
}

TEST(Pdhg, ScalarAndCtRidge) {
  const PdhgResult s = pdhg_solve(scalar_problem(), 1.0);
  EXPECT_NEAR(s.x[0], 0.5, 1e-10);
  const CtCase c = ct_case(1);
  const PdhgResult r = pdhg_solve(c.prob, 1.0);
  EXPECT_LE(rel_err(r.x, c.oracle), 1e-8);
  const PdhgResult early = pdhg_solve(c.prob, 1.0, PdhgOptions{5000, 0.99, 0.0, 1e-12});
  EXPECT_LT(early.iterations, 5000u);
  EXPECT_LE(rel_err(early.x, c.oracle), 1e-8);
}

TEST(Run, DeterministicRowsAndCostLedger) {
  const CtCase c = ct_case(4);
  RunOptions o;
  o.sigma = 0.05;
  o.iters = 100;
  o.record_every = 10;
  o.seed = 21;
  o.reference = to_vec(c.oracle);
  o.truth = make_phantom(PhantomKind::shepp_logan, 16).values;
  const SolveReport a = run(c.prob, o);
  const SolveReport b = run(c.prob, o);
  ASSERT_EQ(a.rows.size(), 11u);
  std::ostringstream sa, sb;
  write_csv(sa, a.rows);
  write_csv(sb, b.rows);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(a.x, b.x);

  // Cost equals the sum of 2 cost_fraction over the drawn levels.
  double cost = 0.0;
  for (std::uint64_t k = 0; k < 100; ++k)
    cost += 2.0 * c.prob.family.cost_fraction(draw_level(21, k, c.prob.family.probs()));
  EXPECT_DOUBLE_EQ(a.rows.back().cost, cost);
  for (std::size_t i = 1; i < a.rows.size(); ++i) EXPECT_GE(a.rows[i].cost, a.rows[i - 1].cost);
  EXPECT_EQ(a.rows.front().rel_dist, 1.0);
}

TEST(Run, FullResolutionCostIsTwoPerIteration) {
  const CtCase c = ct_case(1);
  RunOptions o;
  o.sigma = 0.05;
  o.iters = 35;
  o.record_every = 10;
  const SolveReport r = run(c.prob, o);
  ASSERT_EQ(r.rows.size(), 5u);  // 0, 10, 20, 30, 35
  for (const MetricsRow& row : r.rows) EXPECT_DOUBLE_EQ(row.cost, 2.0 * static_cast<double>(row.k));
  o.algorithm = Algorithm::pdhg;
  for (const MetricsRow& row : run(c.prob, o).rows) EXPECT_DOUBLE_EQ(row.cost, 2.0 * static_cast<double>(row.k));
}

TEST(Run, SnapshotsAndAlgorithms) {
  const CtCase c = ct_case(2);
  RunOptions o;
  o.sigma = 0.05;
  o.iters = 200;
  o.snapshot_costs = {50.0, 100.0};
  const SolveReport r = run(c.prob, o);
  ASSERT_EQ(r.snapshots.size(), 2u);
  EXPECT_GE(r.snapshots[0].cost, 50.0);
  EXPECT_LT(r.snapshots[0].cost, 52.0);
  for (const char* name : {"imask", "imask-seq", "pdhg", "saga-saddle"}) {
    EXPECT_EQ(to_string(parse_algorithm(name)), name);
    o.algorithm = parse_algorithm(name);
    EXPECT_NO_THROW(run(c.prob, o));
  }
  EXPECT_THROW(parse_algorithm("sgd"), ConfigError);
}

TEST(Csv, RoundTripAndFormat) {
  std::vector<MetricsRow> rows{{0, 0.0, 0, 1.0, 12.5, 0.0},
                               {10, 7.25, 3, 0.0123456789012345, 300.0, 0.5}};
  std::ostringstream os;
  write_csv(os, rows);
  const std::string text = os.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), kCsvHeader);
  EXPECT_NE(text.find("0.0123456789012"), std::string::npos);
  EXPECT_EQ(text.find("0.01234567890123"), std::string::npos);
  std::istringstream is(text);
  const auto back = read_csv(is);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].k, 10u);
  EXPECT_EQ(back[1].level, 3u);
  EXPECT_DOUBLE_EQ(back[1].cost, 7.25);
  EXPECT_EQ(format_number(std::nan("")), "nan");
}
