#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "imask/ctmodel.hpp"
#include "imask/errors.hpp"
#include "imask/mrsketch.hpp"
#include "oracles.hpp"

using namespace imask;
using imask::testing::dense;
using imask::testing::oracle_matrix;

TEST(Geometry, DetectorCountCoversDiagonal) {
  const Geometry g = Geometry::make(64);
  EXPECT_EQ(g.n_detectors, 91u);  // ceil(sqrt(8192)) = 91
  EXPECT_EQ(g.n_angles, 100u);
  EXPECT_EQ(Geometry::make(8).n_detectors, 12u);
  EXPECT_EQ(g.sinogram_dim(), 9100u);
  EXPECT_DOUBLE_EQ(g.angle(50), std::numbers::pi / 2);
  EXPECT_THROW(Geometry::make(0), ConfigError);
  EXPECT_THROW(Geometry::make(8, 0), ConfigError);
  EXPECT_THROW(Geometry::make(8, 4, -1.0), ConfigError);
}

TEST(Geometry, DetectorsHitPixelCentresAtAngleZero) {
  for (std::size_t side : {8u, 16u, 64u}) {
    const Geometry g = Geometry::make(side);
    for (std::size_t j = 0; j < g.n_detectors; ++j) {
      const double t = g.detector_offset(j) + 0.5 * static_cast<double>(side);
      EXPECT_DOUBLE_EQ(t - std::floor(t), 0.5) << "side " << side << " detector " << j;
    }
  }
}

TEST(Projector, MatchesChordOracle) {
  const Geometry g = Geometry::make(8, 7, 0.125);
  const Eigen::MatrixXd k = dense(projector(g));
  const Eigen::MatrixXd o = oracle_matrix(g);
  EXPECT_LE((k - o).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Projector, AdjointAndCacheAgree) {
  const Geometry g = Geometry::make(32, 20);
  const Projector cached(g);
  const Projector retrace(g, 1, 0);
  ASSERT_TRUE(cached.cached());
  ASSERT_FALSE(retrace.cached());
  const Vec x = standard_normal(g.image_dim(), 5);
  Vec a(g.sinogram_dim());
  Vec b(g.sinogram_dim());
  cached.forward(x, a);
  retrace.forward(x, b);
  EXPECT_EQ(a, b);
  EXPECT_LE(adjoint_test(cached.as_linop(), 5, 1), 1e-12);
  EXPECT_LE(adjoint_test(retrace.as_linop(), 5, 2), 1e-12);
  EXPECT_EQ(project(g, x), a);
}

TEST(Projector, ConstantImageAtAngleZeroGivesColumnLengths) {
  const Geometry g = Geometry::make(16, 4, 0.5);
  const Vec ones(g.image_dim(), 1.0);
  const Vec s = project(g, ones);
  for (std::size_t j = 0; j < g.n_detectors; ++j) {
    const double t = g.detector_offset(j);
    const double expect = std::abs(t) < 8.0 ? 16.0 * 0.5 : 0.0;
    EXPECT_NEAR(s[j], expect, 1e-12) << "detector " << j;
  }
}

TEST(Projector, CoarseEqualsFullOnBlockImages) {
  const Geometry g = Geometry::make(16, 10);
  for (std::size_t f : {2u, 4u}) {
    const Eigen::MatrixXd r = dense(coarse_projector(g, f));
    const Eigen::MatrixXd ku = dense(compose(projector(g), upsampler(16 / f, f)));
    EXPECT_LE((r - ku).cwiseAbs().maxCoeff(), 1e-12) << "factor " << f;
  }
  EXPECT_THROW(coarse_projector(g, 3), ConfigError);
}

TEST(Projector, BackprojectIsAdjoint) {
  const Geometry g = Geometry::make(16, 9);
  const Vec x = standard_normal(g.image_dim(), 1);
  const Vec y = standard_normal(g.sinogram_dim(), 2);
  EXPECT_NEAR(dot(project(g, x), y), dot(x, backproject(g, y)), 1e-10);
  EXPECT_THROW(project(g, Vec(3, 0.0)), DimensionError);
}

TEST(Phantom, KindsParseAndRange) {
  for (const char* name : {"shepp-logan", "square-insert", "flat"}) {
    const PhantomKind k = parse_phantom_kind(name);
    EXPECT_EQ(to_string(k), name);
    const Phantom p = make_phantom(k, 32);
    ASSERT_EQ(p.values.size(), 1024u);
    for (double v : p.values) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_THROW(parse_phantom_kind("xcat"), ConfigError);
  EXPECT_THROW(make_phantom(PhantomKind::flat, 24), ConfigError);
}

TEST(Phantom, SheppLoganShape) {
  const Phantom p = make_phantom(PhantomKind::shepp_logan, 64);
  // Outside the outer ellipse is empty; the skull rim is bright.
  EXPECT_EQ(p.values[0], 0.0);
  EXPECT_DOUBLE_EQ(*std::max_element(p.values.begin(), p.values.end()), 1.0);
  // Left-right mirror symmetry fails only where the tilted ellipses sit.
  EXPECT_EQ(p.values[32 * 64 + 32] > 0.0, true);
  EXPECT_EQ(make_phantom(PhantomKind::shepp_logan, 64).values, p.values);
}

TEST(Phantom, SquareInsertEdgesOnAlignmentGrid) {
  const Phantom p = make_phantom(PhantomKind::square_insert, 256, 128);
  // The square is [128, 256) in both directions.
  EXPECT_EQ(p.values[127 * 256 + 200], 0.0);
  EXPECT_EQ(p.values[128 * 256 + 128], 1.0);
  EXPECT_EQ(p.values[255 * 256 + 255], 1.0);
  EXPECT_EQ(p.values[200 * 256 + 127], 0.0);
  const Phantom q = make_phantom(PhantomKind::square_insert, 64);  // alignment 16
  EXPECT_EQ(q.values[16 * 64 + 16], 1.0);
  EXPECT_EQ(q.values[15 * 64 + 16], 0.0);
  EXPECT_EQ(q.values[47 * 64 + 47], 1.0);
  EXPECT_EQ(q.values[48 * 64 + 47], 0.0);
  EXPECT_THROW(make_phantom(PhantomKind::square_insert, 64, 24), ConfigError);
}

TEST(Noise, ModelsAndValidation) {
  const Vec b(2000, 1.0);
  EXPECT_EQ(add_noise(b, NoiseModel::none, 1e4, 1), b);
  const Vec g1 = add_noise(b, NoiseModel::gaussian, 1e4, 1);
  EXPECT_EQ(g1, add_noise(b, NoiseModel::gaussian, 1e4, 1));
  EXPECT_NE(g1, add_noise(b, NoiseModel::gaussian, 1e4, 2));
  double mean = 0.0, var = 0.0;
  for (double v : g1) mean += v / 2000.0;
  for (double v : g1) var += (v - mean) * (v - mean) / 1999.0;
  EXPECT_NEAR(mean, 1.0, 0.01);
  EXPECT_NEAR(var, std::exp(1.0) / 1e4, 0.15 * std::exp(1.0) / 1e4);

  const Vec p1 = add_noise(b, NoiseModel::poisson, 1e5, 3);
  double pm = 0.0;
  for (double v : p1) pm += v / 2000.0;
  EXPECT_NEAR(pm, 1.0, 0.01);
  EXPECT_THROW(add_noise(b, NoiseModel::poisson, 0.0, 1), ConfigError);
  EXPECT_THROW(add_noise(Vec{-1.0}, NoiseModel::poisson, 10.0, 1), ConfigError);
  EXPECT_EQ(parse_noise_model("poisson"), NoiseModel::poisson);
  EXPECT_THROW(parse_noise_model("speckle"), ConfigError);
}
