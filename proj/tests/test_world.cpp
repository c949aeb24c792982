#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "vecfl/world.hpp"

using namespace vecfl;
using namespace vecfl::world;

namespace {

Scenario two_object_scenario() {
  Scenario s;
  s.layout = Layout::kStraightRoad;
  s.zone = {{-50.0, -50.0}, {50.0, 50.0}};
  s.lanes = {{{-50.0, 0.0}, {50.0, 0.0}}};
  s.objects = {{0, {5.0, 0.0}, 1.0, ObjectClass::kCar},
               {1, {10.0, 0.0}, 1.0, ObjectClass::kCar}};
  return s;
}

SensorPose forward_sensor() {
  SensorPose pose;
  pose.position = {0.0, 0.0};
  pose.yaw = 0.0;
  pose.fov_angle = M_PI / 2.0;
  pose.range = 20.0;
  return pose;
}

ScenarioSpec straight_spec(double density, std::uint64_t seed = 11) {
  ScenarioSpec spec;
  spec.layout = Layout::kStraightRoad;
  spec.zone = {{0.0, 0.0}, {200.0, 80.0}};
  spec.odd.traffic_density = density;
  spec.seed = seed;
  return spec;
}

}  // namespace

TEST_CASE("generate_scenario: zero density yields zero objects") {
  ScenarioSpec spec = straight_spec(0.0);
  spec.layout = Layout::kCrossRoad;
  const Scenario s = generate_scenario(spec);
  CHECK(s.objects.empty());
  CHECK(!s.candidate_sites.empty());
}

TEST_CASE("generate_scenario: object count follows density times lane length") {
  // straight road spanning a 200 m zone, density 5 per 100 m -> 10 objects
  const Scenario s = generate_scenario(straight_spec(5.0));
  CHECK(s.total_lane_length() == doctest::Approx(200.0));
  CHECK(s.objects.size() == 10);
  for (const auto& obj : s.objects) {
    CHECK(s.zone.contains(obj.center, obj.footprint_radius));
  }
}

TEST_CASE("generate_scenario: deterministic in the spec") {
  const ScenarioSpec spec = straight_spec(4.0, 99);
  const std::string a = to_json(generate_scenario(spec));
  const std::string b = to_json(generate_scenario(spec));
  CHECK(a == b);
}

TEST_CASE("generate_scenario: different seeds differ") {
  const Scenario a = generate_scenario(straight_spec(4.0, 1));
  const Scenario b = generate_scenario(straight_spec(4.0, 2));
  REQUIRE(a.objects.size() == b.objects.size());
  bool any_differs = false;
  for (std::size_t i = 0; i < a.objects.size(); ++i) {
    any_differs |= distance(a.objects[i].center, b.objects[i].center) > 1e-9;
  }
  CHECK(any_differs);
}

TEST_CASE("generate_scenario: degenerate zone") {
  ScenarioSpec spec = straight_spec(1.0);
  spec.zone = {{0.0, 0.0}, {0.5, 0.5}};
  CHECK_THROWS_WITH_AS(generate_scenario(spec),
                       doctest::Contains("degenerate zone"),
                       std::runtime_error);
}

TEST_CASE("generate_scenario: candidate sites distinct and spaced along lanes") {
  const Scenario s = generate_scenario(straight_spec(0.0));
  REQUIRE(s.candidate_sites.size() >= 2);
  for (std::size_t i = 0; i < s.candidate_sites.size(); ++i) {
    for (std::size_t j = i + 1; j < s.candidate_sites.size(); ++j) {
      CHECK(distance(s.candidate_sites[i].position,
                     s.candidate_sites[j].position) > 1.0);
    }
  }
}

TEST_CASE("generate_scenario: all four layouts produce lanes") {
  for (Layout layout : {Layout::kStraightRoad, Layout::kCrossRoad,
                        Layout::kTRoad, Layout::kRoundabout}) {
    ScenarioSpec spec = straight_spec(2.0);
    spec.layout = layout;
    const Scenario s = generate_scenario(spec);
    CHECK(s.total_lane_length() > 10.0);
  }
}

TEST_CASE("visible_objects: occlusion along the sight line") {
  const Scenario s = two_object_scenario();
  const auto visible = visible_objects(forward_sensor(), s);
  CHECK(visible == std::vector<int>{0});  // B occluded by A
}

TEST_CASE("visible_objects: object behind the sensor is not visible") {
  Scenario s;
  s.zone = {{-50.0, -50.0}, {50.0, 50.0}};
  s.lanes = {{{-50.0, 0.0}, {50.0, 0.0}}};
  s.objects = {{0, {-5.0, 0.0}, 1.0, ObjectClass::kCar}};
  CHECK(visible_objects(forward_sensor(), s).empty());
}

TEST_CASE("visible_objects: 360-degree road sensor sees both") {
  const Scenario s = two_object_scenario();
  SensorPose road;
  road.position = {7.0, 5.0};
  road.fov_angle = 2.0 * M_PI;
  road.range = 20.0;
  CHECK(visible_objects(road, s) == std::vector<int>{0, 1});
}

TEST_CASE("visible_objects: anti-monotone in obstacles") {
  // Adding an object never makes a previously invisible object visible.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Scenario s = generate_scenario(straight_spec(6.0, seed));
    SensorPose sensor;
    sensor.position = {100.0, 35.0};
    sensor.fov_angle = 2.0 * M_PI;
    sensor.range = 120.0;
    const auto before = visible_objects(sensor, s);
    const std::set<int> before_set(before.begin(), before.end());
    TrafficObject extra;
    extra.id = 1000;
    extra.center = {110.0, 38.0};
    extra.footprint_radius = 1.2;
    s.objects.push_back(extra);
    const auto after = visible_objects(sensor, s);
    for (int id : after) {
      if (id == 1000) continue;
      CHECK(before_set.count(id) == 1);
    }
  }
}

TEST_CASE("visible_objects: full wedge and large range sees isolated objects") {
  Scenario s;
  s.zone = {{-500.0, -500.0}, {500.0, 500.0}};
  s.lanes = {{{-500.0, 0.0}, {500.0, 0.0}}};
  s.objects = {{0, {100.0, 3.0}, 0.5, ObjectClass::kCar},
               {1, {-200.0, -40.0}, 0.5, ObjectClass::kCar},
               {2, {5.0, 250.0}, 0.5, ObjectClass::kCar}};
  SensorPose sensor;
  sensor.position = {0.0, 1.0};
  sensor.fov_angle = 2.0 * M_PI;
  sensor.range = 1e6;
  CHECK(visible_objects(sensor, s).size() == 3);
}

TEST_CASE("simulate_detections: perfect detector") {
  const Scenario s = two_object_scenario();
  DetectorQuality q;  // all zeros
  const auto report = simulate_detections(forward_sensor(), s, q, 5);
  REQUIRE(report.detected.size() == 1);
  CHECK(report.detected[0].object_id == 0);
  CHECK(report.detected[0].detected_center.x == doctest::Approx(5.0));
  CHECK(report.detected[0].uncertainty > 0.0);  // floored above zero
  CHECK(report.misses == std::vector<int>{1});  // occlusion always misses
  CHECK(report.false_positives.empty());
}

TEST_CASE("simulate_detections: miss_rate one misses every visible object") {
  const Scenario s = two_object_scenario();
  DetectorQuality q;
  q.miss_rate = 1.0;
  const auto report = simulate_detections(forward_sensor(), s, q, 5);
  CHECK(report.detected.empty());
  CHECK(report.misses == std::vector<int>{0, 1});
}

TEST_CASE("simulate_detections: occluded object missed regardless of miss_rate") {
  const Scenario s = two_object_scenario();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    DetectorQuality q;
    q.miss_rate = 0.0;
    const auto report = simulate_detections(forward_sensor(), s, q, seed);
    CHECK(std::find(report.misses.begin(), report.misses.end(), 1) !=
          report.misses.end());
  }
}

TEST_CASE("simulate_detections: bit-identical for the same seed") {
  const Scenario s = generate_scenario(straight_spec(5.0));
  DetectorQuality q{0.2, 0.2, 0.5};
  SensorPose sensor;
  sensor.position = {100.0, 40.0};
  sensor.fov_angle = 2.0 * M_PI;
  sensor.range = 80.0;
  const auto a = simulate_detections(sensor, s, q, 1234);
  const auto b = simulate_detections(sensor, s, q, 1234);
  REQUIRE(a.detected.size() == b.detected.size());
  for (std::size_t i = 0; i < a.detected.size(); ++i) {
    CHECK(a.detected[i].detected_center.x == b.detected[i].detected_center.x);
    CHECK(a.detected[i].detected_center.y == b.detected[i].detected_center.y);
  }
  CHECK(a.misses == b.misses);
  REQUIRE(a.false_positives.size() == b.false_positives.size());
  for (std::size_t i = 0; i < a.false_positives.size(); ++i) {
    CHECK(a.false_positives[i].x == b.false_positives[i].x);
  }
}

TEST_CASE("simulate_detections: false positives stay inside the FoV wedge") {
  const Scenario s = two_object_scenario();
  DetectorQuality q;
  q.fp_rate = 0.8;
  const SensorPose sensor = forward_sensor();
  int total = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto report = simulate_detections(sensor, s, q, seed);
    for (const auto& fp : report.false_positives) {
      ++total;
      CHECK(sensor.wedge_contains(fp));
    }
  }
  CHECK(total > 0);
}

TEST_CASE("collect_error_registry: perfect world yields an empty registry") {
  Scenario s;
  s.zone = {{-50.0, -50.0}, {50.0, 50.0}};
  s.lanes = {{{-50.0, 0.0}, {50.0, 0.0}}};
  s.objects = {{0, {5.0, 0.0}, 1.0, ObjectClass::kCar}};
  const auto registry =
      collect_error_registry(s, {{forward_sensor()}}, DetectorQuality{}, 5, 1);
  CHECK(registry.items.empty());
  CHECK(registry.source_runs == 5);
}

TEST_CASE("collect_error_registry: persistent occlusion registers per episode") {
  const Scenario s = two_object_scenario();
  const auto registry =
      collect_error_registry(s, {{forward_sensor()}}, DetectorQuality{}, 10, 1);
  int at_b = 0;
  for (const auto& item : registry.items) {
    CHECK(item.position.z == 0.0);
    if (item.kind == ErrorKind::kMiss &&
        distance(item.position.xy(), {10.0, 0.0}) < 1e-9) {
      ++at_b;
    }
  }
  CHECK(at_b >= 10);
}

TEST_CASE("collect_error_registry: size non-decreasing in episodes") {
  const Scenario s = two_object_scenario();
  DetectorQuality q{0.3, 0.1, 0.2};
  std::size_t last = 0;
  for (int episodes : {1, 2, 4, 8}) {
    const auto registry =
        collect_error_registry(s, {{forward_sensor()}}, q, episodes, 7);
    CHECK(registry.items.size() >= last);
    last = registry.items.size();
  }
}

TEST_CASE("collect_error_registry: empty routes rejected") {
  const Scenario s = two_object_scenario();
  CHECK_THROWS_WITH_AS(
      collect_error_registry(s, {}, DetectorQuality{}, 1, 1),
      doctest::Contains("no CAV trace"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      collect_error_registry(s, {{}, {}}, DetectorQuality{}, 1, 1),
      doctest::Contains("no CAV trace"), std::runtime_error);
}

TEST_CASE("collect_error_registry: miss items sit on object centers, FPs in wedge") {
  const Scenario s = generate_scenario(straight_spec(5.0));
  SensorPose sensor;
  sensor.position = {40.0, 40.0};
  sensor.yaw = 0.0;
  sensor.fov_angle = M_PI;
  sensor.range = 60.0;
  DetectorQuality q{0.4, 0.3, 0.2};
  const auto registry = collect_error_registry(s, {{sensor}}, q, 4, 3);
  REQUIRE(!registry.items.empty());
  for (const auto& item : registry.items) {
    if (item.kind == ErrorKind::kMiss) {
      bool on_center = false;
      for (const auto& obj : s.objects) {
        on_center |= distance(item.position.xy(), obj.center) < 1e-9;
      }
      CHECK(on_center);
    } else {
      CHECK(sensor.wedge_contains(item.position.xy()));
    }
    CHECK(item.zone == "straight_road");
  }
}

TEST_CASE("world JSON round trips") {
  const Scenario s = generate_scenario(straight_spec(3.0, 42));
  const Scenario back = scenario_from_json(to_json(s, "abc"));
  CHECK(to_json(back) == to_json(s));

  const auto registry = collect_error_registry(
      s, {{forward_sensor()}}, DetectorQuality{0.5, 0.2, 0.3}, 2, 5);
  const auto round = registry_from_json(to_json(registry, "abc"));
  CHECK(to_json(round) == to_json(registry));
}
