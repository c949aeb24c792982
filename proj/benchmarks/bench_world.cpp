#include <benchmark/benchmark.h>

#include "vecfl/world.hpp"

using namespace vecfl;
using namespace vecfl::world;

namespace {

Scenario scenario_with(double density) {
  ScenarioSpec spec;
  spec.layout = Layout::kCrossRoad;
  spec.zone = {{0.0, 0.0}, {400.0, 400.0}};
  spec.odd.traffic_density = density;
  spec.seed = 7;
  return generate_scenario(spec);
}

}  // namespace

static void BM_VisibleObjects(benchmark::State& state) {
  const Scenario scenario = scenario_with(static_cast<double>(state.range(0)));
  SensorPose sensor;
  sensor.position = {200.0, 200.0};
  sensor.fov_angle = 2.0 * M_PI;
  sensor.range = 300.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(visible_objects(sensor, scenario));
  }
  state.SetComplexityN(static_cast<std::int64_t>(scenario.objects.size()));
}
BENCHMARK(BM_VisibleObjects)->RangeMultiplier(2)->Range(4, 64)->Complexity();

static void BM_SimulateDetections(benchmark::State& state) {
  const Scenario scenario = scenario_with(16.0);
  SensorPose sensor;
  sensor.position = {200.0, 200.0};
  sensor.fov_angle = M_PI / 2.0;
  sensor.range = 200.0;
  const DetectorQuality quality{0.1, 0.05, 0.3};
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        simulate_detections(sensor, scenario, quality, seed++));
  }
}
BENCHMARK(BM_SimulateDetections);

BENCHMARK_MAIN();
