#include "gridswitch/estimator.hpp"
#include "gridswitch/resilience.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace gridswitch;

namespace {

Arborescence path(std::size_t n) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    edges.push_back({i, i + 1});
  }
  return Arborescence(n, 0, edges);
}

void BM_Rk4Step(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const GridConfig cfg = GridConfig::ring(n);
  const ConsensusLoop loop(CommGraph::complete(n), path(n), ControllerGains{}, cfg.droop);
  const RateProvider rates = [&loop](const GridState& s) { return loop(s); };
  GridState s = GridState::cold_start(cfg);
  for (auto _ : state) {
    s = step_rk4(s, cfg, rates);
    benchmark::DoNotOptimize(s.omega.data());
  }
}
BENCHMARK(BM_Rk4Step)->Arg(4)->Arg(10);

void BM_EnumerateComplete(benchmark::State& state) {
  const CommGraph g = CommGraph::complete(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(enumerate_arborescences(g, 0).size());
  }
}
BENCHMARK(BM_EnumerateComplete)->Arg(4)->Arg(6)->Arg(7);

void BM_MatrixTreeCount(benchmark::State& state) {
  const CommGraph g = CommGraph::complete(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(count_arborescences(g, 0));
  }
}
BENCHMARK(BM_MatrixTreeCount)->Arg(7)->Arg(20);

void BM_Route(benchmark::State& state) {
  const std::size_t n = 10;
  const GridConfig cfg = GridConfig::ring(n);
  const auto truth = synchronized_measurements(cfg);
  AttackSpec a;
  a.node = 3;
  a.magnitude = {0.5, 1000.0, 100.0};
  const std::vector<AttackSpec> attacks{a};
  const CommGraph g = CommGraph::complete(n);
  const Arborescence tree = path(n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(route(g, truth, tree, attacks, 1.0, 50.0).omega.data());
  }
}
BENCHMARK(BM_Route);

void BM_Forward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  const MLPParams p = MLPParams::initialize(feature_width(n), MLPConfig{}, rng);
  std::vector<double> x(feature_width(n), 0.5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(p, x));
  }
}
BENCHMARK(BM_Forward)->Arg(4)->Arg(10);

} // namespace
BENCHMARK_MAIN();
