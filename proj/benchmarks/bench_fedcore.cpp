#include <benchmark/benchmark.h>

#include "vecfl/fedcore.hpp"
#include "vecfl/synthetic.hpp"

using namespace vecfl;
using namespace vecfl::fedcore;

static void BM_LocalUpdate(benchmark::State& state) {
  BoxPoseLearner learner;
  const auto data = synthetic::make_regression_data(
      static_cast<std::size_t>(state.range(0)), {{0.0, 0.0}, {200.0, 80.0}},
      synthetic::DistortionField{}, 0.25, 7);
  ClientState client{0, data, learner.init_params(), 0.0};
  for (auto _ : state) {
    client.params = learner.init_params();
    benchmark::DoNotOptimize(local_update(learner, client, 2, 0.25));
  }
}
BENCHMARK(BM_LocalUpdate)->RangeMultiplier(4)->Range(64, 4096);

static void BM_FedAvg(benchmark::State& state) {
  BoxPoseLearner learner;
  std::vector<ModelParams> models;
  std::vector<double> weights;
  for (int i = 0; i < state.range(0); ++i) {
    ModelParams params = learner.init_params();
    for (std::size_t j = 0; j < params.values.size(); ++j) {
      params.values[j] = 0.01 * static_cast<double>(i + j);
    }
    models.push_back(std::move(params));
    weights.push_back(1.0 + i);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(fedavg(models, weights));
  }
}
BENCHMARK(BM_FedAvg)->RangeMultiplier(2)->Range(2, 64);

static void BM_RoadAverageOutput(benchmark::State& state) {
  std::vector<world::DetectionReport> reports;
  for (int agent = 0; agent < state.range(0); ++agent) {
    world::DetectionReport report;
    report.agent_id = agent;
    for (int obj = 0; obj < 24; ++obj) {
      report.detected.push_back(
          {obj, {10.0 * obj + 0.05 * agent, 5.0 + 0.03 * agent}, 0.3});
    }
    reports.push_back(std::move(report));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(road_average_output(reports));
  }
}
BENCHMARK(BM_RoadAverageOutput)->RangeMultiplier(2)->Range(2, 16);

BENCHMARK_MAIN();
