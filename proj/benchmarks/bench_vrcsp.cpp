#include <benchmark/benchmark.h>

#include "vecfl/rng.hpp"
#include "vecfl/vrcsp.hpp"

using namespace vecfl;

namespace {

world::ErrorRegistry registry_of(int items, std::uint64_t seed) {
  Rng rng(seed);
  world::ErrorRegistry registry;
  registry.source_runs = 1;
  for (int i = 0; i < items; ++i) {
    registry.items.push_back({{rng.uniform(0.0, 200.0), rng.uniform(0.0, 200.0), 0.0},
                              world::ErrorKind::kMiss,
                              "bench"});
  }
  return registry;
}

std::vector<world::CandidateSite> sites_of(int count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<world::CandidateSite> sites;
  for (int i = 0; i < count; ++i) {
    sites.push_back({i, {rng.uniform(0.0, 200.0), rng.uniform(0.0, 200.0)}});
  }
  return sites;
}

}  // namespace

static void BM_PlaceSensors(benchmark::State& state) {
  const auto registry = registry_of(static_cast<int>(state.range(0)), 3);
  const auto sites = sites_of(24, 4);
  const std::vector<vrcsp::SensorTier> tiers = {{"low", 1.0, 25.0},
                                                {"high", 2.0, 45.0}};
  for (auto _ : state) {
    benchmark::DoNotOptimize(vrcsp::place_sensors(registry, sites, tiers, 6.0));
  }
}
BENCHMARK(BM_PlaceSensors)->RangeMultiplier(4)->Range(64, 4096);

static void BM_Coverage(benchmark::State& state) {
  const auto registry = registry_of(static_cast<int>(state.range(0)), 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(vrcsp::coverage({100.0, 100.0}, 60.0, registry));
  }
}
BENCHMARK(BM_Coverage)->RangeMultiplier(8)->Range(64, 32768);

BENCHMARK_MAIN();
