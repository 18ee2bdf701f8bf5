#include <benchmark/benchmark.h>

#include "sbt/eigen.hpp"
#include "sbt/rng.hpp"
#include "sbt/stochastic.hpp"
#include "sbt/systems.hpp"
#include "sbt/todachain.hpp"
#include "sbt/verify.hpp"

namespace {

sbt::SystemSpec spec_for(int k) {
  switch (k) {
    case 0:
      return sbt::SystemSpec::toda();
    case 1:
      return sbt::SystemSpec::rational();
    case 2:
      return sbt::SystemSpec::hyperbolic1(1.0, 2.0);
    default:
      return sbt::SystemSpec::hyperbolic2(1.0, 2.0);
  }
}

void BM_Philox(benchmark::State& state) {
  sbt::Philox4x32::Counter ctr{0, 0, 0, 0};
  const sbt::Philox4x32::Key key{0x12345678u, 0x9abcdef0u};
  for (auto _ : state) {
    ctr = sbt::Philox4x32::block(ctr, key);
    benchmark::DoNotOptimize(ctr);
  }
  state.SetItemsProcessed(state.iterations() * 4);
}
BENCHMARK(BM_Philox);

void BM_Normal(benchmark::State& state) {
  sbt::RngStream rng(7, 0);
  for (auto _ : state) benchmark::DoNotOptimize(rng.normal());
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Normal);

void BM_LogKernel(benchmark::State& state) {
  const auto spec = spec_for(static_cast<int>(state.range(0)));
  const sbt::PhasePoint p{1.1, 0.2};
  for (auto _ : state) benchmark::DoNotOptimize(sbt::log_kernel(spec, 0.3, p));
  state.SetLabel(std::string(sbt::to_string(spec.kind())));
}
BENCHMARK(BM_LogKernel)->DenseRange(0, 3);

// Quadrature for psi at one point, fresh rule each call.
void BM_Psi(benchmark::State& state) {
  const auto spec = spec_for(static_cast<int>(state.range(0)));
  double x = 1.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sbt::log_psi(spec, 0.3, x));
    x = x == 1.0 ? 1.0 + 1e-9 : 1.0;
  }
  state.SetLabel(std::string(sbt::to_string(spec.kind())));
}
BENCHMARK(BM_Psi)->DenseRange(0, 3)->Unit(benchmark::kMicrosecond);

void BM_BacklundEnsemble(benchmark::State& state) {
  const auto spec = spec_for(static_cast<int>(state.range(0)));
  sbt::McConfig mc;
  mc.n_paths = 256;
  mc.dt = 1e-3;
  mc.horizon = 0.25;
  mc.workers = 1;
  mc.save_every = mc.n_steps();
  for (auto _ : state) {
    auto e = sbt::simulate_backlund(spec, {1.0, std::nullopt}, mc);
    benchmark::DoNotOptimize(e.xs.data());
  }
  state.SetItemsProcessed(state.iterations() * mc.n_paths * mc.n_steps());
  state.SetLabel(std::string(sbt::to_string(spec.kind())));
}
BENCHMARK(BM_BacklundEnsemble)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

void BM_KsTwoSample(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> a(n), b(n);
  sbt::RngStream rng(3, 0);
  for (auto& v : a) v = rng.normal();
  for (auto& v : b) v = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(sbt::ks_two_sample(a, b).p_value);
}
BENCHMARK(BM_KsTwoSample)->Arg(1000)->Arg(20000)->Unit(benchmark::kMicrosecond);

void BM_ChainResidual(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(sbt::chain_residual(5, 0.5, 0.3, -0.2, 1e-3));
}
BENCHMARK(BM_ChainResidual);

}  // namespace

BENCHMARK_MAIN();
