#include <benchmark/benchmark.h>

#include <vector>

#include "alphameta/feature_maps.hpp"
#include "alphameta/gradient_meta.hpp"
#include "alphameta/kernel_distance.hpp"
#include "alphameta/linear_meta.hpp"
#include "alphameta/task_data.hpp"
#include "alphameta/weight_solver.hpp"

using namespace alphameta;

namespace {

TaskCollection sine_pool(int sources) {
  SyntheticSpec spec;
  spec.family = SyntheticFamily::sine;
  spec.num_sources = sources;
  spec.target_size = 10;
  spec.seed = 1;
  return generate_sine(spec);
}

}  // namespace

static void BM_TaskGramRff(benchmark::State& state) {
  const auto tasks = sine_pool(static_cast<int>(state.range(0)));
  const LossEmbedding emb(LossKind::square, BasisFn::random_fourier(1, 50, 1.0, 3));
  for (auto _ : state) benchmark::DoNotOptimize(build_task_gram(tasks, emb));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TaskGramRff)->Arg(10)->Arg(100)->Arg(1000);

static void BM_SimplexQp(benchmark::State& state) {
  const auto tasks = sine_pool(static_cast<int>(state.range(0)));
  const TaskGram g = build_task_gram(tasks, LossEmbedding(LossKind::square, BasisFn::identity_with_bias(1)));
  QpOptions opt;
  opt.algorithm = state.range(1) == 0 ? QpAlgorithm::projected_gradient : QpAlgorithm::frank_wolfe;
  for (auto _ : state) benchmark::DoNotOptimize(solve_alpha_qp(g, opt));
}
BENCHMARK(BM_SimplexQp)->Args({10, 0})->Args({100, 0})->Args({300, 0})->Args({100, 1});

static void BM_MetaGradient(benchmark::State& state) {
  const auto tasks = sine_pool(static_cast<int>(state.range(0)));
  std::vector<const Task*> batch;
  for (const auto& t : tasks.sources()) batch.push_back(&t);
  const std::vector<double> w(batch.size(), 1.0 / static_cast<double>(batch.size()));
  const auto params = MlpParams::initialize({}, 2);
  const auto order = state.range(1) == 0 ? MamlOrder::first : MamlOrder::second;
  for (auto _ : state) benchmark::DoNotOptimize(weighted_maml_gradient(params.shape, params.theta, batch, w, 0.01, order));
}
BENCHMARK(BM_MetaGradient)->Args({10, 0})->Args({10, 1})->Args({100, 1});

static void BM_ClosedFormLinear(benchmark::State& state) {
  SyntheticSpec spec;
  spec.num_sources = static_cast<int>(state.range(0));
  const auto tasks = generate_linear1d(spec);
  const auto basis = BasisFn::identity_with_bias(1);
  const auto alpha = uniform_weights(tasks.num_sources());
  for (auto _ : state) benchmark::DoNotOptimize(fit_weighted_linear(tasks, basis, alpha, {}));
}
BENCHMARK(BM_ClosedFormLinear)->Arg(9)->Arg(300);
BENCHMARK_MAIN();
