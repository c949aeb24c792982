#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "vecfl/rng.hpp"
#include "vecfl/vrcsp.hpp"

using namespace vecfl;
using namespace vecfl::vrcsp;
using vecfl::world::CandidateSite;
using vecfl::world::ErrorItem;
using vecfl::world::ErrorKind;
using vecfl::world::ErrorRegistry;

namespace {

ErrorRegistry registry_at(const std::vector<Vec2>& positions) {
  ErrorRegistry registry;
  registry.source_runs = 1;
  for (const auto& p : positions) {
    registry.items.push_back({{p.x, p.y, 0.0}, ErrorKind::kMiss, "test"});
  }
  return registry;
}

ErrorRegistry random_registry(std::uint64_t seed, int count, double extent) {
  Rng rng(seed);
  ErrorRegistry registry;
  registry.source_runs = 1;
  for (int i = 0; i < count; ++i) {
    registry.items.push_back({{rng.uniform(0.0, extent), rng.uniform(0.0, extent), 0.0},
                              ErrorKind::kMiss,
                              "test"});
  }
  return registry;
}

std::vector<CandidateSite> random_sites(std::uint64_t seed, int count,
                                        double extent) {
  Rng rng(seed);
  std::vector<CandidateSite> sites;
  for (int i = 0; i < count; ++i) {
    sites.push_back({i, {rng.uniform(0.0, extent), rng.uniform(0.0, extent)}});
  }
  return sites;
}

}  // namespace

TEST_CASE("coverage: closed-ball cardinality") {
  const auto registry = registry_at({{0.0, 0.0}, {3.0, 4.0}, {10.0, 0.0}});
  CHECK(coverage({0.0, 0.0}, 5.0, registry) == 2);  // distances 0, 5, 10
  CHECK(coverage({0.0, 0.0}, 5.0, ErrorRegistry{}) == 0);
  CHECK(coverage({3.0, 4.0}, 0.0, registry) == 1);  // point coverage
}

TEST_CASE("coverage: monotone in range") {
  const auto registry = random_registry(3, 200, 100.0);
  long long last = -1;
  for (double r : {0.0, 5.0, 10.0, 20.0, 40.0, 80.0, 200.0}) {
    const long long c = coverage({50.0, 50.0}, r, registry);
    CHECK(c >= last);
    last = c;
  }
  CHECK(last == 200);
}

TEST_CASE("validate_tiers: range must increase strictly with cost") {
  validate_tiers({{"low", 1.0, 10.0}, {"high", 2.0, 20.0}});
  CHECK_THROWS_AS(validate_tiers({}), std::invalid_argument);
  CHECK_THROWS_AS(validate_tiers({{"a", 1.0, 10.0}, {"b", 2.0, 10.0}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_tiers({{"a", 1.0, 10.0}, {"b", 2.0, 5.0}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_tiers({{"a", -1.0, 10.0}}), std::invalid_argument);
}

TEST_CASE("place_sensors: classic overlap instance covers 3 of 4 with 2 sensors") {
  // A covers {e1,e2}; B covers {e2,e3}; C covers {e4}. Every affordable pair
  // covers exactly 3 errors.
  const auto registry =
      registry_at({{0.0, 1.0}, {4.0, 0.0}, {12.0, 0.0}, {30.0, 2.0}});
  const std::vector<CandidateSite> sites = {
      {0, {0.0, 0.0}}, {1, {8.0, 0.0}}, {2, {30.0, 0.0}}};
  const std::vector<SensorTier> tiers = {{"t", 1.0, 5.0}};
  const auto placement = place_sensors(registry, sites, tiers, 2.0);
  CHECK(placement.covered == 3);
  CHECK(placement.sensors.size() == 2);
  CHECK(placement.total_cost == doctest::Approx(2.0));

  const auto exact = exact_placement(registry, sites, tiers, 2.0);
  CHECK(exact.covered == 3);
}

TEST_CASE("place_sensors: zero budget places nothing") {
  const auto registry = registry_at({{0.0, 0.0}});
  const auto placement = place_sensors(
      registry, {{0, {0.0, 0.0}}}, {{"t", 1.0, 5.0}}, 0.0);
  CHECK(placement.sensors.empty());
  CHECK(placement.covered == 0);
}

TEST_CASE("place_sensors: saturated budget covers the whole union") {
  const auto registry = random_registry(9, 120, 80.0);
  const auto sites = random_sites(10, 6, 80.0);
  const std::vector<SensorTier> tiers = {{"low", 1.0, 15.0}, {"high", 3.0, 30.0}};
  const auto placement = place_sensors(registry, sites, tiers, 100.0);

  std::set<int> in_union;
  for (std::size_t e = 0; e < registry.items.size(); ++e) {
    for (const auto& site : sites) {
      if (distance(registry.items[e].position.xy(), site.position) <= 30.0) {
        in_union.insert(static_cast<int>(e));
        break;
      }
    }
  }
  CHECK(placement.covered == static_cast<long long>(in_union.size()));
}

TEST_CASE("place_sensors: objective monotone in budget") {
  const auto registry = random_registry(17, 150, 100.0);
  const auto sites = random_sites(18, 8, 100.0);
  const std::vector<SensorTier> tiers = {{"low", 1.0, 12.0}, {"high", 2.5, 25.0}};
  long long last = 0;
  for (double budget : {0.0, 1.0, 2.0, 3.5, 5.0, 8.0, 20.0}) {
    const auto placement = place_sensors(registry, sites, tiers, budget);
    CHECK(placement.covered >= last);
    CHECK(placement.total_cost <= budget + 1e-12);
    last = placement.covered;
  }
}

TEST_CASE("place_sensors: deterministic tie-break by lowest site id") {
  const auto registry = registry_at({{0.0, 0.0}, {20.0, 0.0}});
  // two sites with identical unit gain -> lowest id wins first
  const std::vector<CandidateSite> sites = {{7, {20.0, 0.0}}, {3, {0.0, 0.0}}};
  const auto placement = place_sensors(registry, sites, {{"t", 1.0, 2.0}}, 1.0);
  REQUIRE(placement.sensors.size() == 1);
  CHECK(placement.sensors[0].site_id == 3);
}

TEST_CASE("place_sensors and exact_placement: greedy within (1 - 1/e) of optimum") {
  const double guarantee = 1.0 - 1.0 / std::exp(1.0);
  for (std::uint64_t trial = 0; trial < 60; ++trial) {
    const auto registry = random_registry(mix_seed(1000, trial), 60, 60.0);
    const auto sites =
        random_sites(mix_seed(2000, trial), 10, 60.0);
    const std::vector<SensorTier> tiers = {{"t", 1.0, 14.0}};
    const auto greedy = place_sensors(registry, sites, tiers, 3.0);
    const auto exact = exact_placement(registry, sites, tiers, 3.0);
    CHECK(exact.covered >= greedy.covered);
    CHECK(static_cast<double>(greedy.covered) >=
          guarantee * static_cast<double>(exact.covered));
  }
}

TEST_CASE("exact_placement: guard rejects large instances") {
  const auto registry = registry_at({{0.0, 0.0}});
  const auto sites = random_sites(5, 11, 50.0);
  const std::vector<SensorTier> tiers = {{"a", 1.0, 5.0}, {"b", 2.0, 10.0}};
  CHECK_THROWS_WITH_AS(exact_placement(registry, sites, tiers, 3.0),
                       doctest::Contains("oracle limit"), std::runtime_error);
}

TEST_CASE("exact_placement: empty registry") {
  const auto sites = random_sites(6, 4, 50.0);
  const std::vector<SensorTier> tiers = {{"t", 1.0, 10.0}};
  CHECK(exact_placement(ErrorRegistry{}, sites, tiers, 2.0).covered == 0);
  CHECK(place_sensors(ErrorRegistry{}, sites, tiers, 2.0).covered == 0);
}

TEST_CASE("union coverage is submodular: marginal gains shrink") {
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    const auto registry = random_registry(mix_seed(3000, trial), 80, 70.0);
    const auto sites = random_sites(mix_seed(4000, trial), 7, 70.0);
    const double r = 16.0;

    const auto covered_by = [&](const std::set<int>& subset) {
      std::set<int> covered;
      for (int s : subset) {
        for (std::size_t e = 0; e < registry.items.size(); ++e) {
          if (distance(registry.items[e].position.xy(), sites[s].position) <= r) {
            covered.insert(static_cast<int>(e));
          }
        }
      }
      return static_cast<long long>(covered.size());
    };

    // S subset of T; adding x gains at least as much on S as on T.
    const std::set<int> small = {0, 1};
    const std::set<int> large = {0, 1, 2, 3, 4};
    for (int x : {5, 6}) {
      std::set<int> small_x = small;
      small_x.insert(x);
      std::set<int> large_x = large;
      large_x.insert(x);
      CHECK(covered_by(small_x) - covered_by(small) >=
            covered_by(large_x) - covered_by(large));
    }
  }
}

TEST_CASE("removing an error item never increases coverage of a placement") {
  auto registry = random_registry(77, 100, 90.0);
  const auto sites = random_sites(78, 9, 90.0);
  const std::vector<SensorTier> tiers = {{"t", 1.0, 18.0}};
  const auto placement = place_sensors(registry, sites, tiers, 4.0);

  const auto covered_by_placement = [&](const ErrorRegistry& reg) {
    std::set<std::size_t> covered;
    for (std::size_t e = 0; e < reg.items.size(); ++e) {
      for (const auto& sensor : placement.sensors) {
        if (distance(reg.items[e].position.xy(), sensor.position) <=
            sensor.range) {
          covered.insert(e);
          break;
        }
      }
    }
    return static_cast<long long>(covered.size());
  };

  const long long before = covered_by_placement(registry);
  registry.items.pop_back();
  CHECK(covered_by_placement(registry) <= before);
}

TEST_CASE("baseline_density_placement: single candidate, both methods pick it") {
  world::Scenario scenario;
  scenario.zone = {{0.0, 0.0}, {100.0, 100.0}};
  scenario.lanes = {{{0.0, 50.0}, {100.0, 50.0}}};
  scenario.objects = {{0, {50.0, 50.0}, 1.0, world::ObjectClass::kCar}};
  const std::vector<CandidateSite> sites = {{0, {52.0, 55.0}}};
  const std::vector<SensorTier> tiers = {{"t", 1.0, 20.0}};
  const auto registry = registry_at({{50.0, 50.0}});

  const auto density = baseline_density_placement(scenario, sites, tiers, 1.0);
  const auto errors = place_sensors(registry, sites, tiers, 1.0);
  REQUIRE(density.sensors.size() == 1);
  REQUIRE(errors.sensors.size() == 1);
  CHECK(density.sensors[0].site_id == errors.sensors[0].site_id);
}

TEST_CASE("baseline_density_placement: zero traffic still deploys one sensor") {
  world::Scenario scenario;
  scenario.zone = {{0.0, 0.0}, {100.0, 100.0}};
  scenario.lanes = {{{0.0, 50.0}, {100.0, 50.0}}};
  const std::vector<CandidateSite> sites = {{4, {10.0, 50.0}}, {9, {90.0, 50.0}}};
  const std::vector<SensorTier> tiers = {{"cheap", 1.0, 15.0}, {"dear", 2.0, 30.0}};
  const auto placement = baseline_density_placement(scenario, sites, tiers, 5.0);
  REQUIRE(placement.sensors.size() == 1);
  CHECK(placement.sensors[0].site_id == 4);   // first index
  CHECK(placement.sensors[0].tier == "cheap");
  CHECK(placement.covered == 0);
}

TEST_CASE("baseline ignores errors, VRCSP ignores traffic") {
  // Traffic cluster near site 8, occlusion misses near site 3.
  world::Scenario scenario;
  scenario.zone = {{0.0, 0.0}, {200.0, 100.0}};
  scenario.lanes = {{{0.0, 50.0}, {200.0, 50.0}}};
  for (int i = 0; i < 8; ++i) {
    scenario.objects.push_back(
        {i, {176.0 + 3.0 * (i % 4), 46.0 + 3.0 * (i / 4)}, 0.6,
         world::ObjectClass::kCar});
  }
  std::vector<CandidateSite> sites;
  for (int i = 0; i < 9; ++i) {
    sites.push_back({i, {20.0 * (i + 1), 55.0}});
  }
  const std::vector<SensorTier> tiers = {{"t", 1.0, 22.0}};
  const auto registry = registry_at({{58.0, 48.0}, {60.0, 50.0}, {62.0, 47.0}});

  const auto density = baseline_density_placement(scenario, sites, tiers, 1.0);
  const auto errors = place_sensors(registry, sites, tiers, 1.0);
  REQUIRE(density.sensors.size() == 1);
  REQUIRE(errors.sensors.size() == 1);
  CHECK(density.sensors[0].site_id == 8);  // near the traffic cluster
  CHECK(errors.sensors[0].site_id == 2);   // near the misses (site at x=60)
}

TEST_CASE("pose_dissimilarity: zero when CAV boxes sit on the errors") {
  const auto registry = registry_at({{10.0, 0.0}, {20.0, 0.0}});
  Placement placement;
  placement.sensors.push_back({0, "t", {15.0, 0.0}, 1.0, 10.0});
  world::DetectionReport report;
  report.agent_id = 0;
  report.detected = {{0, {10.0, 0.0}, 0.5}, {1, {20.0, 0.0}, 0.5}};
  CHECK(pose_dissimilarity(registry, placement, {report}) ==
        doctest::Approx(0.0));
  // no detections at all -> capped distance
  CHECK(pose_dissimilarity(registry, placement, {}, 6.0) == doctest::Approx(6.0));
}

TEST_CASE("road_sensor_poses: 360-degree suites at placed positions") {
  Placement placement;
  placement.sensors.push_back({3, "t", {1.0, 2.0}, 1.0, 25.0});
  const auto poses = road_sensor_poses(placement);
  REQUIRE(poses.size() == 1);
  CHECK(poses[0].position.x == doctest::Approx(1.0));
  CHECK(poses[0].fov_angle == doctest::Approx(2.0 * M_PI));
  CHECK(poses[0].range == doctest::Approx(25.0));
}

TEST_CASE("placement JSON round trip") {
  const auto registry = random_registry(5, 40, 50.0);
  const auto sites = random_sites(6, 5, 50.0);
  const std::vector<SensorTier> tiers = {{"low", 1.0, 10.0}, {"high", 2.0, 20.0}};
  const auto placement = place_sensors(registry, sites, tiers, 3.0);
  const auto back = placement_from_json(
      to_json(placement, static_cast<long long>(registry.items.size()), 3.0,
              "vrcsp", "feed"));
  CHECK(back.sensors.size() == placement.sensors.size());
  CHECK(back.covered == placement.covered);
  CHECK(back.total_cost == doctest::Approx(placement.total_cost));
}
