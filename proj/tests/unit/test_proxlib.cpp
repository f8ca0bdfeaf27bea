#include <gtest/gtest.h>

#include <cmath>

#include "imask/errors.hpp"
#include "imask/proxlib.hpp"
#include "oracles.hpp"

using namespace imask;

namespace {

// Independent reference for the TV + nonnegativity prox: primal-dual iterations on
// min_u 1/2 |u - x|^2 + lambda sum_k |(Du)_k| + indicator(u >= 0), with its own
// difference operator.
Vec tv_oracle(const Vec& x, std::size_t n, double lambda, int iters) {
  const std::size_t d = n * n;
  auto D = [&](const Vec& u, Vec& gx, Vec& gy) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t k = i * n + j;
        gx[k] = j + 1 < n ? u[k + 1] - u[k] : 0.0;
        gy[k] = i + 1 < n ? u[k + n] - u[k] : 0.0;
      }
  };
  auto Dt = [&](const Vec& gx, const Vec& gy, Vec& out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t k = i * n + j;
        if (j + 1 < n) {
          out[k + 1] += gx[k];
          out[k] -= gx[k];
        }
        if (i + 1 < n) {
          out[k + n] += gy[k];
          out[k] -= gy[k];
        }
      }
  };
  const double tau = 0.25;
  const double sigma = 0.45;  // tau * sigma * 8 < 1
  Vec u(x), ubar(x), px(d, 0.0), py(d, 0.0), gx(d), gy(d), t(d);
  for (int it = 0; it < iters; ++it) {
    D(ubar, gx, gy);
    for (std::size_t k = 0; k < d; ++k) {
      const double a = px[k] + sigma * gx[k];
      const double b = py[k] + sigma * gy[k];
      const double m = std::max(1.0, std::hypot(a, b) / lambda);
      px[k] = a / m;
      py[k] = b / m;
    }
    Dt(px, py, t);
    for (std::size_t k = 0; k < d; ++k) {
      const double v = u[k] - tau * t[k];
      const double un = std::max(0.0, (v + tau * x[k]) / (1.0 + tau));
      ubar[k] = 2.0 * un - u[k];
      u[k] = un;
    }
  }
  return u;
}

double max_abs_diff(const Vec& a, const Vec& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST(QuadraticConjugate, FormulaAndFixedPoint) {
  EXPECT_EQ(prox_quadratic_conjugate(Vec{2.0}, 1.0, Vec{0.0}), (Vec{1.0}));
  const Vec b = standard_normal(20, 1);
  Vec minus_b(b);
  for (auto& v : minus_b) v = -v;
  const Vec out = prox_quadratic_conjugate(minus_b, 0.7, b);
  EXPECT_LE(max_abs_diff(out, minus_b), 1e-15);
  EXPECT_THROW(prox_quadratic_conjugate(Vec{1.0}, 0.0, Vec{0.0}), ConfigError);
  EXPECT_THROW(prox_quadratic_conjugate(Vec{1.0}, 1.0, Vec{0.0, 1.0}), DimensionError);
}

TEST(QuadraticConjugate, FirstOrderOptimality) {
  // Gradient of 1/2|y - p|^2 + sigma (<b, y> + |y|^2 / 2) vanishes at the output.
  const Vec p = standard_normal(50, 2);
  const Vec b = standard_normal(50, 3);
  const double s = 0.5;
  const Vec y = prox_quadratic_conjugate(p, s, b);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i] - p[i] + s * (b[i] + y[i]), 0.0, 1e-10);
  // The ProxFn form agrees.
  EXPECT_EQ(make_quadratic_conjugate(b)(p, s), y);
}

TEST(QuadraticConjugate, MoreauIdentity) {
  const Vec p = standard_normal(30, 4);
  const Vec b = standard_normal(30, 5);
  const double s = 1.7;
  const Vec y = prox_quadratic_conjugate(p, s, b);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double primal = (s * (p[i] / s) + b[i]) / (s + 1.0);  // prox of f / s at p / s
    EXPECT_NEAR(y[i] + s * primal, p[i], 1e-13);
  }
}

TEST(Ridge, Formula) {
  EXPECT_EQ(prox_ridge(Vec{2.0}, 1.0, 1.0), (Vec{1.0}));
  const Vec x = standard_normal(10, 6);
  const Vec out = prox_ridge(x, 0.3, 2.0);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(out[i] + 0.3 * 2.0 * out[i] - x[i], 0.0, 1e-15);
  const Vec tiny = prox_ridge(x, 1.0, 1e-300);
  EXPECT_EQ(tiny, x);
  EXPECT_THROW(prox_ridge(x, 1.0, 0.0), ConfigError);
  EXPECT_THROW(make_ridge(-1.0), ConfigError);
}

TEST(Gradient, AdjointNormAndConstants) {
  const LinOp g = gradient_op(16);
  EXPECT_EQ(g.range_dim(), 512u);
  EXPECT_LE(adjoint_test(g, 10, 1), 1e-12);
  const Vec c(256, 3.0);
  for (double v : g.apply(c)) EXPECT_EQ(v, 0.0);
  EXPECT_LE(power_method(g, PowerOptions{1e-10, 5000, 0}).norm, std::sqrt(8.0) + 1e-3);
  const Eigen::MatrixXd dg = imask::testing::dense(gradient_op(4));
  EXPECT_EQ(dg(0, 0), -1.0);
  EXPECT_EQ(dg(0, 1), 1.0);
  EXPECT_EQ(dg(3, 3), 0.0);       // right boundary
  EXPECT_EQ(dg(16 + 0, 4), 1.0);  // vertical difference
}

TEST(TotalVariation, StepImage) {
  Vec x(16, 0.0);
  for (std::size_t i = 0; i < 4; ++i) x[i * 4 + 2] = x[i * 4 + 3] = 1.0;
  EXPECT_DOUBLE_EQ(total_variation(x, 4), 4.0);
}

TEST(TvProx, ConstantImages) {
  const Vec c(64, 0.4);
  const TvProxResult r = prox_tv_nonneg(c, 8, 1.0, 0.5);
  EXPECT_LE(max_abs_diff(r.image, c), 1e-15);
  const Vec neg(64, -1.0);
  for (double v : prox_tv_nonneg(neg, 8, 1.0, 0.5).image) EXPECT_EQ(v, 0.0);
}

TEST(TvProx, MatchesPrimalDualOracleOnStepImage) {
  Vec x(16, 0.0);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 2; j < 4; ++j) x[i * 4 + j] = 1.0;
  x[5] = -0.3;
  const double sigma = 0.5;
  const double mu_g = 0.4;
  const TvProxResult r = prox_tv_nonneg(x, 4, sigma, mu_g, TvProxOptions{20000, 1e-15});
  const Vec ref = tv_oracle(x, 4, sigma * mu_g, 200000);
  EXPECT_LE(max_abs_diff(r.image, ref), 1e-6);
  for (double v : r.image) EXPECT_GE(v, 0.0);
}

TEST(TvProx, MatchesOracleOnRandomImage) {
  const Vec x = standard_normal(256, 8);
  const TvProxResult r = prox_tv_nonneg(x, 16, 0.2, 1.0, TvProxOptions{20000, 1e-14});
  const Vec ref = tv_oracle(x, 16, 0.2, 100000);
  EXPECT_LE(max_abs_diff(r.image, ref), 1e-5);
}

TEST(TvProx, DualityGapBound) {
  const Vec x = standard_normal(1024, 9);
  const TvProxOptions opts{500, 1e-8};
  const TvProxResult r = prox_tv_nonneg(x, 32, 0.3, 0.5, opts);
  EXPECT_GE(r.duality_gap, -1e-12);
  EXPECT_LE(r.duality_gap, 10.0 * opts.inner_tol * dot(x, x));
  for (double v : r.image) EXPECT_GE(v, 0.0);
}

TEST(TvProx, ProxFnRejectsNegativeInputsInEval) {
  const ProxFn f = make_tv_nonneg(4, 1.0);
  EXPECT_TRUE(std::isinf(f.eval(Vec(16, -1.0))));
  EXPECT_DOUBLE_EQ(f.eval(Vec(16, 1.0)), 0.0);
  EXPECT_EQ(f.strong_convexity, 0.0);
}

TEST(Rescale, UnitIsIdentityAndRidgeExample) {
  const ProxFn ridge = make_ridge(4.0);
  const Vec p = standard_normal(8, 10);
  const ProxFn same = rescale_prox(make_ridge(1.0), 1.0);
  EXPECT_EQ(same(p, 0.7), make_ridge(1.0)(p, 0.7));

  const ProxFn r = rescale_prox(ridge, 4.0);
  EXPECT_DOUBLE_EQ(r.strong_convexity, 1.0);
  EXPECT_DOUBLE_EQ(r(Vec{2.0}, 1.0)[0], 1.0);
  EXPECT_DOUBLE_EQ(std::sqrt(4.0) * 2.0 / 2.0 / (1.0 + 1.0), 1.0);
  EXPECT_THROW(rescale_prox(ridge, 0.0), ConfigError);
}

TEST(Prox, NonexpansiveAndContractive) {
  const Vec b = standard_normal(40, 11);
  const std::vector<std::pair<ProxFn, double>> fns = {
      {make_quadratic_conjugate(b), 1.0},
      {make_ridge(3.0), 3.0},
      {rescale_prox(make_ridge(3.0), 3.0), 1.0},
  };
  const double s = 0.8;
  for (const auto& [f, mu] : fns) {
    for (std::uint64_t t = 0; t < 100; ++t) {
      const Vec a = standard_normal(40, 100 + 2 * t);
      const Vec c = standard_normal(40, 101 + 2 * t);
      Vec diff_in(a), diff_out = f(a, s);
      axpy(-1.0, c, diff_in);
      axpy(-1.0, f(c, s), diff_out);
      EXPECT_LE(norm(diff_out), norm(diff_in) / (1.0 + s * mu) + 1e-9) << f.name;
    }
  }
  // TV is only nonexpansive.
  const ProxFn tv = make_tv_nonneg(8, 0.5, TvProxOptions{3000, 1e-13});
  for (std::uint64_t t = 0; t < 20; ++t) {
    const Vec a = standard_normal(64, 300 + 2 * t);
    const Vec c = standard_normal(64, 301 + 2 * t);
    Vec diff_in(a), diff_out = tv(a, s);
    axpy(-1.0, c, diff_in);
    axpy(-1.0, tv(c, s), diff_out);
    EXPECT_LE(norm(diff_out), norm(diff_in) + 1e-6);
  }
}
