#include "ibr/ibr.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

ibr::Dataset make_data(Eigen::Index n, Eigen::Index d, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd X(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) X(i, j) = u(rng);
  Eigen::VectorXd Y(n);
  for (Eigen::Index i = 0; i < n; ++i) Y(i) = std::sin(6.0 * X(i, 0)) + X.row(i).sum() + 0.1 * u(rng);
  return ibr::Dataset::make(std::move(X), std::move(Y));
}

void BM_KernelSmoother(benchmark::State& state) {
  const auto data = make_data(state.range(0), 3);
  const ibr::Bandwidth h(Eigen::VectorXd::Constant(3, 0.3));
  for (auto _ : state) {
    auto sm = ibr::build_kernel_smoother(data, ibr::KernelFamily::gaussian, h);
    benchmark::DoNotOptimize(sm.spectrum.values.data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KernelSmoother)->RangeMultiplier(2)->Range(64, 512)->Complexity(benchmark::oNCubed);

void BM_BandwidthCalibration(benchmark::State& state) {
  const auto data = make_data(state.range(0), 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ibr::default_bandwidths(data, ibr::KernelFamily::gaussian));
  }
}
BENCHMARK(BM_BandwidthCalibration)->Arg(100)->Arg(400);

// Whole GCV path from a precomputed spectrum: O(n^2) per grid point.
void BM_RunPath(benchmark::State& state) {
  const auto data = make_data(state.range(0), 3);
  const auto spec = ibr::BaseSpectrum::from_kernel(ibr::build_kernel_smoother(
      data, ibr::KernelFamily::gaussian, ibr::default_bandwidths(data, ibr::KernelFamily::gaussian)));
  const auto grid = ibr::default_grid(100000);
  for (auto _ : state) {
    auto p = ibr::run_path(spec, data.Y(), grid);
    benchmark::DoNotOptimize(p.gcv.data());
  }
  state.counters["grid"] = static_cast<double>(grid.size());
}
BENCHMARK(BM_RunPath)->Arg(100)->Arg(400);

void BM_TpsBasis(benchmark::State& state) {
  const auto data = make_data(state.range(0), 2);
  for (auto _ : state) {
    auto b = ibr::TpsBasis::build(data.X(), 2);
    benchmark::DoNotOptimize(b.get());
  }
}
BENCHMARK(BM_TpsBasis)->Arg(100)->Arg(400);

void BM_FitIbrKernel(benchmark::State& state) {
  const auto data = make_data(state.range(0), 3);
  for (auto _ : state) {
    auto fit = ibr::fit_ibr(data, ibr::KernelRequest{});
    benchmark::DoNotOptimize(fit.k_hat);
  }
}
BENCHMARK(BM_FitIbrKernel)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
