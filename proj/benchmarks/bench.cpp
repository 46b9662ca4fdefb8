// Microbenchmarks for the hot paths: instance generation, BP sweeps, operator
// matvecs, and overlap scoring.

#include <benchmark/benchmark.h>

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "dsbm/bp.hpp"
#include "dsbm/metrics.hpp"
#include "dsbm/model.hpp"
#include "dsbm/network.hpp"
#include "dsbm/nb_spectral.hpp"
#include "dsbm/philox.hpp"

using namespace dsbm;

namespace {

ModelParams bench_params(int n, int T) { return ModelParams::make(n, T, 2, 0.5, 16.0, 0.3); }

void BM_generate(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const ModelParams params = bench_params(n, 10);
  std::uint64_t seed = 1;
  for (auto _ : state) {
    const DynamicNetwork net = generate_network(params, seed++);
    benchmark::DoNotOptimize(net.total_edges());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n) * 10);
}
BENCHMARK(BM_generate)->Arg(512)->Arg(2048)->Unit(benchmark::kMillisecond);

void BM_bp_sweep(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const ModelParams params = bench_params(n, 10);
  const DynamicNetwork net = generate_network(params, 3);
  const SpatioTemporalGraph graph = build_spatiotemporal_graph(net);
  BpEngine engine(graph, params, BpOptions{});
  engine.init_messages(7);
  for (auto _ : state) {
    engine.refresh_fields();
    benchmark::DoNotOptimize(engine.sweep());
  }
  state.SetItemsProcessed(state.iterations() * graph.spatial_directed());
}
BENCHMARK(BM_bp_sweep)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_bp_run(benchmark::State& state) {
  const ModelParams params = bench_params(256, 10);
  const DynamicNetwork net = generate_network(params, 5);
  const SpatioTemporalGraph graph = build_spatiotemporal_graph(net);
  BpOptions opt;
  opt.max_iters = 200;
  opt.tol = 1e-5;
  std::uint64_t seed = 11;
  for (auto _ : state) {
    const BpResult res = run_bp(graph, params, opt, seed++);
    benchmark::DoNotOptimize(res.iterations);
  }
}
BENCHMARK(BM_bp_run)->Unit(benchmark::kMillisecond);

void BM_operator_apply(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const ModelParams params = bench_params(n, 10);
  const SpatioTemporalGraph graph = build_spatiotemporal_graph(generate_network(params, 3));
  const NonBacktrackingOperator op = build_operator(graph, params);
  Eigen::VectorXd x = Eigen::VectorXd::Random(op.dim());
  for (auto _ : state) {
    x = op.apply(x);
    x /= x.norm();
    benchmark::DoNotOptimize(x.data());
  }
  state.SetItemsProcessed(state.iterations() * op.matrix.nonZeros());
}
BENCHMARK(BM_operator_apply)->Arg(512)->Arg(2048);

void BM_overlap_score(benchmark::State& state) {
  const std::size_t count = 512 * 40;
  Philox rng(99, 0);
  std::vector<std::int32_t> truth(count), guess(count);
  for (std::size_t i = 0; i < count; ++i) {
    truth[i] = static_cast<std::int32_t>(rng.uniform_below(4));
    guess[i] = static_cast<std::int32_t>(rng.uniform_below(4));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(overlap_score(truth, guess, 4).overlap);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(count));
}
BENCHMARK(BM_overlap_score);

}  // namespace

BENCHMARK_MAIN();
