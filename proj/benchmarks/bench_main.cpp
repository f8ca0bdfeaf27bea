// Microbenchmarks for the hot paths: projection, norm estimation, one
// ImaSk iteration and the TV prox.

#include <benchmark/benchmark.h>

#include "imask/ctmodel.hpp"
#include "imask/experiment.hpp"
#include "imask/linops.hpp"
#include "imask/proxlib.hpp"
#include "imask/solvers.hpp"

namespace {

imask::Geometry geometry(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  return imask::Geometry::make(side, 100, 1.0 / static_cast<double>(side));
}

void BM_Project(benchmark::State& state) {
  const imask::Geometry g = geometry(state);
  const imask::LinOp k = imask::projector(g);
  const imask::Vec x = imask::standard_normal(k.domain_dim(), 1);
  imask::Vec y(k.range_dim());
  for (auto _ : state) {
    k.apply(x, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(k.domain_dim()));
}
BENCHMARK(BM_Project)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Backproject(benchmark::State& state) {
  const imask::Geometry g = geometry(state);
  const imask::LinOp k = imask::projector(g);
  const imask::Vec y = imask::standard_normal(k.range_dim(), 2);
  imask::Vec x(k.domain_dim());
  for (auto _ : state) {
    k.adjoint_apply(y, x);
    benchmark::DoNotOptimize(x.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(k.domain_dim()));
}
BENCHMARK(BM_Backproject)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_CoarseProject(benchmark::State& state) {
  const imask::Geometry g = imask::Geometry::make(256, 100, 1.0 / 256);
  const imask::LinOp k = imask::coarse_projector(g, static_cast<std::size_t>(state.range(0)));
  const imask::Vec x = imask::standard_normal(k.domain_dim(), 3);
  for (auto _ : state) benchmark::DoNotOptimize(k.apply(x));
}
BENCHMARK(BM_CoarseProject)->RangeMultiplier(2)->Range(1, 8)->Unit(benchmark::kMillisecond);

void BM_PowerMethod(benchmark::State& state) {
  const imask::Geometry g = geometry(state);
  const imask::LinOp k = imask::projector(g);
  for (auto _ : state) benchmark::DoNotOptimize(imask::power_method(k, {1e-6, 1000, 0}).norm);
}
BENCHMARK(BM_PowerMethod)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_ImaskStep(benchmark::State& state) {
  imask::RunConfig cfg;
  cfg.side = 128;
  cfg.mu_g = 0.125;
  cfg.levels = static_cast<std::size_t>(state.range(0));
  const imask::Setup s = imask::build_setup(cfg);
  const double sigma = imask::choose_step(cfg, s).sigma;
  imask::SaddleState st = imask::SaddleState::zeros(s.problem, 0);
  for (auto _ : state) imask::imask_step(st, s.problem, sigma, s.mu);
  state.counters["cost_per_iter"] = st.cost / static_cast<double>(st.k);
}
BENCHMARK(BM_ImaskStep)->Arg(1)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_TvProx(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const imask::Vec x = imask::standard_normal(side * side, 4);
  for (auto _ : state)
    benchmark::DoNotOptimize(imask::prox_tv_nonneg(x, side, 0.1, 0.01, {50, 0.0}).image);
}
BENCHMARK(BM_TvProx)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
