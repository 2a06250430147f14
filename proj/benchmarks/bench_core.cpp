#include <benchmark/benchmark.h>

#include "tvb/arithmetic.hpp"
#include "tvb/bases.hpp"
#include "tvb/vecstore.hpp"

namespace {

tvb::TaskVectorMatrix collection(std::size_t d, std::size_t t, std::uint64_t seed) {
  tvb::Rng rng(seed);
  tvb::Matrix cols = tvb::random_gaussian(d, t, rng);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < t; ++i) names.push_back("task_" + std::to_string(i));
  return tvb::TaskVectorMatrix::make(std::move(cols), std::move(names));
}

void BM_Gram(benchmark::State& state) {
  auto m = collection(4096, static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(tvb::gram(m));
  }
}
BENCHMARK(BM_Gram)->Arg(8)->Arg(16)->Arg(32);

void BM_JacobiEigensym(benchmark::State& state) {
  auto t = static_cast<std::size_t>(state.range(0));
  auto m = collection(2 * t, t, 2);
  tvb::GramMatrix g = tvb::gram(m);
  for (auto _ : state) {
    benchmark::DoNotOptimize(tvb::jacobi_eigensym(g.entries()));
  }
}
BENCHMARK(BM_JacobiEigensym)->Arg(16)->Arg(64)->Arg(128);

void BM_AeTrainingSteps(benchmark::State& state) {
  auto m = collection(1024, 16, 3);
  tvb::AeConfig cfg;
  cfg.basis_count = 4;
  cfg.steps = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(tvb::fit_ae(m, cfg));
  }
}
BENCHMARK(BM_AeTrainingSteps)->Arg(500)->Arg(2000);

void BM_PowerIteration(benchmark::State& state) {
  auto d = static_cast<std::size_t>(state.range(0));
  std::vector<double> diag(d);
  tvb::Rng rng(4);
  for (double& v : diag) v = rng.uniform(0.1, 2.0);
  diag[0] = 2.5;  // clear top gap so iteration count stays bounded
  auto apply = [&diag](std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = diag[i] * x[i];
  };
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        tvb::power_iteration_top_eigenvalue(apply, d, 1e-8, 100000, 5));
  }
}
BENCHMARK(BM_PowerIteration)->Arg(4096)->Arg(65536);

void BM_TrimElectMerge(benchmark::State& state) {
  auto d = static_cast<std::size_t>(state.range(0));
  auto m = collection(d, 8, 6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(tvb::trim_elect_merge(m.columns, 0.2));
  }
}
BENCHMARK(BM_TrimElectMerge)->Arg(10000)->Arg(100000);

void BM_Reconstruct(benchmark::State& state) {
  auto d = static_cast<std::size_t>(state.range(0));
  auto m = collection(d, 16, 7);
  tvb::BasisModel model = tvb::fit_rand_proj(m, 8, 7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(tvb::reconstruct(model));
  }
}
BENCHMARK(BM_Reconstruct)->Arg(10000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
