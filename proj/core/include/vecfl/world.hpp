#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vecfl/geometry.hpp"

namespace vecfl::world {

enum class OddKind { kUrban, kRural, kCampus, kParkingLot };
enum class Layout { kStraightRoad, kCrossRoad, kTRoad, kRoundabout };
enum class ObjectClass { kCar, kTruck, kPedestrian };
enum class ErrorKind { kMiss, kFalsePositive };

std::string to_string(OddKind kind);
std::string to_string(Layout layout);
std::string to_string(ObjectClass cls);
std::string to_string(ErrorKind kind);
OddKind odd_kind_from_string(const std::string& s);
Layout layout_from_string(const std::string& s);
ObjectClass object_class_from_string(const std::string& s);
ErrorKind error_kind_from_string(const std::string& s);

// Operational design domain envelope a scenario is sampled from.
struct OddSpec {
  OddKind kind = OddKind::kUrban;
  double traffic_density = 0.0;   // objects per 100 m of lane
  double speed_limit = 13.9;      // m/s
  double fov_requirement = 40.0;  // minimum sensing range, m
  void validate() const;
};

struct ScenarioSpec {
  Layout layout = Layout::kStraightRoad;
  Rect zone;  // m
  OddSpec odd;
  std::uint64_t seed = 0;
  void validate() const;
};

// Disc-footprint traffic participant.
struct TrafficObject {
  int id = 0;
  Vec2 center;
  double footprint_radius = 1.0;  // m, > 0
  ObjectClass object_class = ObjectClass::kCar;
};

// Utility-pole position a road sensor may be mounted on.
struct CandidateSite {
  int site_id = 0;
  Vec2 position;
};

struct Scenario {
  Layout layout = Layout::kStraightRoad;
  Rect zone;
  std::vector<Polyline> lanes;
  std::vector<TrafficObject> objects;
  std::vector<CandidateSite> candidate_sites;

  double total_lane_length() const;
  const TrafficObject* find_object(int id) const;
};

// 2D sensor pose; roll/pitch are collapsed, road suites use fov_angle = 2*pi.
struct SensorPose {
  Vec2 position;
  double yaw = 0.0;              // rad
  double fov_angle = 2.0 * M_PI; // rad, (0, 2*pi]
  double range = 50.0;           // m, > 0
  void validate() const;
  // Range + angular wedge test; occlusion is not considered here.
  bool wedge_contains(const Vec2& p) const;
};

struct DetectorQuality {
  double miss_rate = 0.0;    // [0, 1]
  double fp_rate = 0.0;      // [0, 1], false positives per 100 m^2 of FoV
  double noise_sigma = 0.0;  // m, >= 0
  void validate() const;
};

struct Detection {
  int object_id = 0;
  Vec2 detected_center;
  double uncertainty = 0.0;  // standard deviation, m, always > 0
};

struct DetectionReport {
  int agent_id = 0;
  std::vector<Detection> detected;
  std::vector<int> misses;
  std::vector<Vec2> false_positives;
  bool has_errors() const {
    return !misses.empty() || !false_positives.empty();
  }
};

// A registered false detection; z = 0 in this 2.5D world. `zone` is the
// layout name of the scenario the item fell in.
struct ErrorItem {
  Vec3 position;
  ErrorKind kind = ErrorKind::kMiss;
  std::string zone;
};

struct ErrorRegistry {
  std::vector<ErrorItem> items;
  int source_runs = 0;
};

// Deterministic function of the spec (seed included). Object count is
// round(traffic_density * total lane length / 100); candidate sites sit on a
// fixed 25 m grid along lane edges, offset 4 m to the left of travel.
// Throws "degenerate zone" when the zone cannot hold a lane.
Scenario generate_scenario(const ScenarioSpec& spec);

// Object ids visible from the pose: within range, inside the angular wedge,
// and with the open sight segment clear of every other object's disc.
// Returned sorted ascending.
std::vector<int> visible_objects(const SensorPose& sensor,
                                 const Scenario& scenario);

// One simulated perception frame. Visible objects are missed independently
// with probability miss_rate; occluded in-range in-wedge objects are always
// missed; detected centers get isotropic Gaussian noise; false positives are
// Poisson(fp_rate * wedge_area / 100) uniform over the wedge. Reported
// uncertainty is max(noise_sigma, 1e-6) so downstream inverse-variance
// fusion stays defined.
DetectionReport simulate_detections(const SensorPose& agent_sensor,
                                    const Scenario& scenario,
                                    const DetectorQuality& quality,
                                    std::uint64_t rng_seed, int agent_id = 0);

// Runs simulate_detections at every pose of every route for `episodes`
// repetitions and registers every miss (at the object's true center) and
// false positive (at its reported position). Throws "no CAV trace" when the
// routes are empty.
ErrorRegistry collect_error_registry(
    const Scenario& scenario,
    const std::vector<std::vector<SensorPose>>& cav_routes,
    const DetectorQuality& quality, int episodes, std::uint64_t rng_seed);

std::string to_json(const Scenario& scenario, const std::string& config_hash = "");
Scenario scenario_from_json(const std::string& text);
std::string to_json(const ErrorRegistry& registry, const std::string& config_hash = "");
ErrorRegistry registry_from_json(const std::string& text);

}  // namespace vecfl::world
