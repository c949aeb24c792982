#include <benchmark/benchmark.h>

#include "vecfl/mlgra.hpp"
#include "vecfl/rng.hpp"

using namespace vecfl;

namespace {

std::vector<mlgra::TaskSpec> tasks_of(int count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<mlgra::TaskSpec> tasks;
  for (int i = 0; i < count; ++i) {
    mlgra::TaskSpec task;
    task.task_id = i;
    task.training_weight = rng.uniform(0.5, 2.0);
    task.signature = {"m" + std::to_string(i % 3), "k" + std::to_string(i)};
    task.sample_size_mb = rng.uniform(0.5, 2.0);
    task.dnn_size_mb = rng.uniform(0.5, 2.0);
    task.predictors.stage1 = {rng.uniform(60.0, 85.0), rng.uniform(20.0, 40.0),
                              rng.uniform(0.5, 1.2),
                              predictor::ResourceKind::kSamples, 0.0};
    task.predictors.stage2 = {rng.uniform(80.0, 92.0), rng.uniform(8.0, 20.0),
                              rng.uniform(0.4, 0.9),
                              predictor::ResourceKind::kRounds, 0.0};
    task.predictors.stage3 = {rng.uniform(88.0, 96.0), rng.uniform(4.0, 10.0),
                              rng.uniform(0.4, 0.9),
                              predictor::ResourceKind::kRounds, 0.0};
    tasks.push_back(task);
  }
  return tasks;
}

}  // namespace

static void BM_Allocate(benchmark::State& state) {
  const auto tasks = tasks_of(static_cast<int>(state.range(0)), 11);
  const auto graph = mlgra::build_graph(tasks);
  std::map<int, netmodel::CostCard> cards;
  for (const auto& dnn : graph.dnns) {
    const auto& edge = graph.edge_of_dnn(dnn.dnn_id);
    cards[dnn.dnn_id] = {edge.sample_size_mb, edge.dnn_size_mb, 3, 2, 1.0};
  }
  const netmodel::ResourceBudget budget{600.0, 1400.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(mlgra::allocate(graph, budget, cards));
  }
}
BENCHMARK(BM_Allocate)->DenseRange(1, 9, 2);

BENCHMARK_MAIN();
