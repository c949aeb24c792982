#include "vecfl/world.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "json.hpp"
#include "vecfl/rng.hpp"

namespace vecfl::world {

namespace {

constexpr double kSitePitchM = 25.0;       // pole spacing along lanes
constexpr double kSiteLateralOffsetM = 4.0;
constexpr double kLaneJitterM = 1.5;       // lateral object spread
constexpr double kMinLaneLengthM = 1.0;
constexpr double kUncertaintyFloor = 1e-6;

double radius_for(ObjectClass cls) {
  switch (cls) {
    case ObjectClass::kCar: return 0.9;
    case ObjectClass::kTruck: return 1.4;
    case ObjectClass::kPedestrian: return 0.35;
  }
  return 0.9;
}

std::vector<Polyline> make_lanes(Layout layout, const Rect& zone) {
  const Vec2 c = zone.center();
  switch (layout) {
    case Layout::kStraightRoad:
      return {{{zone.min.x, c.y}, {zone.max.x, c.y}}};
    case Layout::kCrossRoad:
      return {{{zone.min.x, c.y}, {zone.max.x, c.y}},
              {{c.x, zone.min.y}, {c.x, zone.max.y}}};
    case Layout::kTRoad:
      return {{{zone.min.x, c.y}, {zone.max.x, c.y}},
              {{c.x, zone.min.y}, {c.x, c.y}}};
    case Layout::kRoundabout: {
      const double r = 0.25 * std::min(zone.width(), zone.height());
      Polyline ring;
      constexpr int kSegments = 32;
      for (int i = 0; i <= kSegments; ++i) {
        const double a = 2.0 * M_PI * i / kSegments;
        ring.push_back({c.x + r * std::cos(a), c.y + r * std::sin(a)});
      }
      return {ring};
    }
  }
  return {};
}

}  // namespace

std::string to_string(OddKind kind) {
  switch (kind) {
    case OddKind::kUrban: return "urban";
    case OddKind::kRural: return "rural";
    case OddKind::kCampus: return "campus";
    case OddKind::kParkingLot: return "parking_lot";
  }
  return "urban";
}

std::string to_string(Layout layout) {
  switch (layout) {
    case Layout::kStraightRoad: return "straight_road";
    case Layout::kCrossRoad: return "cross_road";
    case Layout::kTRoad: return "t_road";
    case Layout::kRoundabout: return "roundabout";
  }
  return "straight_road";
}

std::string to_string(ObjectClass cls) {
  switch (cls) {
    case ObjectClass::kCar: return "car";
    case ObjectClass::kTruck: return "truck";
    case ObjectClass::kPedestrian: return "pedestrian";
  }
  return "car";
}

std::string to_string(ErrorKind kind) {
  return kind == ErrorKind::kMiss ? "miss" : "false_positive";
}

OddKind odd_kind_from_string(const std::string& s) {
  if (s == "urban") return OddKind::kUrban;
  if (s == "rural") return OddKind::kRural;
  if (s == "campus") return OddKind::kCampus;
  if (s == "parking_lot") return OddKind::kParkingLot;
  throw std::invalid_argument("unknown ODD kind: " + s);
}

Layout layout_from_string(const std::string& s) {
  if (s == "straight_road") return Layout::kStraightRoad;
  if (s == "cross_road") return Layout::kCrossRoad;
  if (s == "t_road") return Layout::kTRoad;
  if (s == "roundabout") return Layout::kRoundabout;
  throw std::invalid_argument("unknown layout: " + s);
}

ObjectClass object_class_from_string(const std::string& s) {
  if (s == "car") return ObjectClass::kCar;
  if (s == "truck") return ObjectClass::kTruck;
  if (s == "pedestrian") return ObjectClass::kPedestrian;
  throw std::invalid_argument("unknown object class: " + s);
}

ErrorKind error_kind_from_string(const std::string& s) {
  if (s == "miss") return ErrorKind::kMiss;
  if (s == "false_positive") return ErrorKind::kFalsePositive;
  throw std::invalid_argument("unknown error kind: " + s);
}

void OddSpec::validate() const {
  if (traffic_density < 0.0 || !std::isfinite(traffic_density)) {
    throw std::invalid_argument("OddSpec: traffic_density must be >= 0");
  }
  if (fov_requirement <= 0.0) {
    throw std::invalid_argument("OddSpec: fov_requirement must be > 0");
  }
}

void ScenarioSpec::validate() const {
  odd.validate();
  if (zone.width() <= 0.0 || zone.height() <= 0.0) {
    throw std::invalid_argument("ScenarioSpec: zone must have positive area");
  }
}

double Scenario::total_lane_length() const {
  double total = 0.0;
  for (const auto& lane : lanes) total += polyline_length(lane);
  return total;
}

const TrafficObject* Scenario::find_object(int id) const {
  for (const auto& o : objects) {
    if (o.id == id) return &o;
  }
  return nullptr;
}

void SensorPose::validate() const {
  if (range <= 0.0) throw std::invalid_argument("SensorPose: range must be > 0");
  if (fov_angle <= 0.0 || fov_angle > 2.0 * M_PI + 1e-12) {
    throw std::invalid_argument("SensorPose: fov_angle must be in (0, 2*pi]");
  }
}

bool SensorPose::wedge_contains(const Vec2& p) const {
  const Vec2 d = p - position;
  const double dist = d.norm();
  if (dist > range) return false;
  if (dist < 1e-12) return true;
  const double bearing = std::atan2(d.y, d.x);
  return std::abs(wrap_angle(bearing - yaw)) <= fov_angle / 2.0 + 1e-12;
}

void DetectorQuality::validate() const {
  if (miss_rate < 0.0 || miss_rate > 1.0) {
    throw std::invalid_argument("DetectorQuality: miss_rate must be in [0,1]");
  }
  if (fp_rate < 0.0 || fp_rate > 1.0) {
    throw std::invalid_argument("DetectorQuality: fp_rate must be in [0,1]");
  }
  if (noise_sigma < 0.0) {
    throw std::invalid_argument("DetectorQuality: noise_sigma must be >= 0");
  }
}

Scenario generate_scenario(const ScenarioSpec& spec) {
  spec.validate();
  Scenario scenario;
  scenario.layout = spec.layout;
  scenario.zone = spec.zone;
  scenario.lanes = make_lanes(spec.layout, spec.zone);

  const double total_length = scenario.total_lane_length();
  if (total_length < kMinLaneLengthM) {
    throw std::runtime_error("degenerate zone: cannot hold any lane");
  }

  const long count =
      std::lround(spec.odd.traffic_density * total_length / 100.0);

  Rng rng(mix_seed(spec.seed, seed_stream::kScenario));
  for (long i = 0; i < count; ++i) {
    // Pick an arc position over the concatenated lanes, then jitter laterally.
    double u = rng.uniform(0.0, total_length);
    const Polyline* lane = &scenario.lanes.front();
    for (const auto& l : scenario.lanes) {
      const double len = polyline_length(l);
      if (u <= len) {
        lane = &l;
        break;
      }
      u -= len;
    }
    const Vec2 base = point_at_arclength(*lane, u);
    const Vec2 tangent = direction_at_arclength(*lane, u);
    const Vec2 normal{-tangent.y, tangent.x};
    const double lateral = rng.uniform(-kLaneJitterM, kLaneJitterM);

    TrafficObject obj;
    obj.id = static_cast<int>(i);
    const double cls = rng.uniform();
    obj.object_class = cls < 0.6   ? ObjectClass::kCar
                       : cls < 0.8 ? ObjectClass::kTruck
                                   : ObjectClass::kPedestrian;
    obj.footprint_radius = radius_for(obj.object_class);
    obj.center = spec.zone.clamp(base + normal * lateral, obj.footprint_radius);
    scenario.objects.push_back(obj);
  }

  // Utility poles every 25 m along each lane, 4 m left of travel direction.
  int site_id = 0;
  for (const auto& lane : scenario.lanes) {
    const double len = polyline_length(lane);
    for (double s = kSitePitchM / 2.0; s < len; s += kSitePitchM) {
      const Vec2 p = point_at_arclength(lane, s);
      const Vec2 t = direction_at_arclength(lane, s);
      const Vec2 left{-t.y, t.x};
      const Vec2 pos = spec.zone.clamp(p + left * kSiteLateralOffsetM);
      bool duplicate = false;
      for (const auto& existing : scenario.candidate_sites) {
        if (distance(existing.position, pos) < 1e-6) {
          duplicate = true;
          break;
        }
      }
      if (!duplicate) {
        scenario.candidate_sites.push_back({site_id++, pos});
      }
    }
  }
  return scenario;
}

std::vector<int> visible_objects(const SensorPose& sensor,
                                 const Scenario& scenario) {
  sensor.validate();
  std::vector<int> visible;
  for (const auto& target : scenario.objects) {
    if (!sensor.wedge_contains(target.center)) continue;
    bool occluded = false;
    for (const auto& other : scenario.objects) {
      if (other.id == target.id) continue;
      const double d = point_segment_distance(other.center, sensor.position,
                                              target.center);
      if (d <= other.footprint_radius) {
        occluded = true;
        break;
      }
    }
    if (!occluded) visible.push_back(target.id);
  }
  std::sort(visible.begin(), visible.end());
  return visible;
}

DetectionReport simulate_detections(const SensorPose& agent_sensor,
                                    const Scenario& scenario,
                                    const DetectorQuality& quality,
                                    std::uint64_t rng_seed, int agent_id) {
  agent_sensor.validate();
  quality.validate();

  const std::vector<int> visible = visible_objects(agent_sensor, scenario);
  DetectionReport report;
  report.agent_id = agent_id;
  Rng rng(mix_seed(rng_seed, seed_stream::kDetection));

  const double uncertainty = std::max(quality.noise_sigma, kUncertaintyFloor);
  for (const auto& obj : scenario.objects) {
    if (!agent_sensor.wedge_contains(obj.center)) continue;
    const bool is_visible =
        std::binary_search(visible.begin(), visible.end(), obj.id);
    if (!is_visible) {
      report.misses.push_back(obj.id);  // occlusion always misses
      continue;
    }
    if (quality.miss_rate > 0.0 && rng.uniform() < quality.miss_rate) {
      report.misses.push_back(obj.id);
      continue;
    }
    Vec2 center = obj.center;
    if (quality.noise_sigma > 0.0) {
      center.x += rng.normal(0.0, quality.noise_sigma);
      center.y += rng.normal(0.0, quality.noise_sigma);
    }
    report.detected.push_back({obj.id, center, uncertainty});
  }

  // False positives over the FoV wedge, 100 m^2 of wedge area as exposure.
  const double wedge_area =
      0.5 * agent_sensor.fov_angle * agent_sensor.range * agent_sensor.range;
  const int fp_count = rng.poisson(quality.fp_rate * wedge_area / 100.0);
  for (int i = 0; i < fp_count; ++i) {
    const double r = agent_sensor.range * std::sqrt(rng.uniform());
    const double theta =
        agent_sensor.yaw +
        (rng.uniform() - 0.5) * agent_sensor.fov_angle;
    report.false_positives.push_back(
        {agent_sensor.position.x + r * std::cos(theta),
         agent_sensor.position.y + r * std::sin(theta)});
  }
  return report;
}

ErrorRegistry collect_error_registry(
    const Scenario& scenario,
    const std::vector<std::vector<SensorPose>>& cav_routes,
    const DetectorQuality& quality, int episodes, std::uint64_t rng_seed) {
  if (episodes < 1) {
    throw std::invalid_argument("collect_error_registry: episodes must be >= 1");
  }
  bool has_pose = false;
  for (const auto& route : cav_routes) {
    if (!route.empty()) has_pose = true;
  }
  if (!has_pose) throw std::runtime_error("no CAV trace");

  const std::string zone = to_string(scenario.layout);
  ErrorRegistry registry;
  registry.source_runs = episodes;
  for (int ep = 0; ep < episodes; ++ep) {
    for (std::size_t ri = 0; ri < cav_routes.size(); ++ri) {
      const auto& route = cav_routes[ri];
      for (std::size_t pi = 0; pi < route.size(); ++pi) {
        const std::uint64_t sub =
            mix_seed(mix_seed(mix_seed(rng_seed, ep), ri), pi);
        const DetectionReport report =
            simulate_detections(route[pi], scenario, quality, sub);
        for (int miss_id : report.misses) {
          const TrafficObject* obj = scenario.find_object(miss_id);
          if (obj == nullptr) continue;
          registry.items.push_back(
              {{obj->center.x, obj->center.y, 0.0}, ErrorKind::kMiss, zone});
        }
        for (const Vec2& fp : report.false_positives) {
          registry.items.push_back(
              {{fp.x, fp.y, 0.0}, ErrorKind::kFalsePositive, zone});
        }
      }
    }
  }
  return registry;
}

namespace {
using nlohmann::json;

json vec2_json(const Vec2& v) { return json::array({v.x, v.y}); }
Vec2 vec2_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }
}  // namespace

std::string to_json(const Scenario& scenario, const std::string& config_hash) {
  json j;
  if (!config_hash.empty()) j["config_hash"] = config_hash;
  j["layout"] = to_string(scenario.layout);
  j["zone"] = json::array({vec2_json(scenario.zone.min), vec2_json(scenario.zone.max)});
  j["lanes"] = json::array();
  for (const auto& lane : scenario.lanes) {
    json jl = json::array();
    for (const auto& p : lane) jl.push_back(vec2_json(p));
    j["lanes"].push_back(std::move(jl));
  }
  j["objects"] = json::array();
  for (const auto& o : scenario.objects) {
    j["objects"].push_back({{"id", o.id},
                            {"center", vec2_json(o.center)},
                            {"footprint_radius", o.footprint_radius},
                            {"object_class", to_string(o.object_class)}});
  }
  j["candidate_sites"] = json::array();
  for (const auto& s : scenario.candidate_sites) {
    j["candidate_sites"].push_back(
        {{"site_id", s.site_id}, {"position", vec2_json(s.position)}});
  }
  return j.dump(2) + "\n";
}

Scenario scenario_from_json(const std::string& text) {
  const json j = json::parse(text);
  Scenario s;
  s.layout = layout_from_string(j.at("layout").get<std::string>());
  s.zone.min = vec2_from(j.at("zone").at(0));
  s.zone.max = vec2_from(j.at("zone").at(1));
  for (const auto& jl : j.at("lanes")) {
    Polyline lane;
    for (const auto& jp : jl) lane.push_back(vec2_from(jp));
    s.lanes.push_back(std::move(lane));
  }
  for (const auto& jo : j.at("objects")) {
    TrafficObject o;
    o.id = jo.at("id").get<int>();
    o.center = vec2_from(jo.at("center"));
    o.footprint_radius = jo.at("footprint_radius").get<double>();
    o.object_class = object_class_from_string(jo.at("object_class").get<std::string>());
    s.objects.push_back(o);
  }
  for (const auto& js : j.at("candidate_sites")) {
    s.candidate_sites.push_back(
        {js.at("site_id").get<int>(), vec2_from(js.at("position"))});
  }
  return s;
}

std::string to_json(const ErrorRegistry& registry, const std::string& config_hash) {
  json j;
  if (!config_hash.empty()) j["config_hash"] = config_hash;
  j["source_runs"] = registry.source_runs;
  j["items"] = json::array();
  for (const auto& item : registry.items) {
    j["items"].push_back(
        {{"position", json::array({item.position.x, item.position.y, item.position.z})},
         {"kind", to_string(item.kind)},
         {"zone", item.zone}});
  }
  return j.dump(2) + "\n";
}

ErrorRegistry registry_from_json(const std::string& text) {
  const json j = json::parse(text);
  ErrorRegistry r;
  r.source_runs = j.at("source_runs").get<int>();
  for (const auto& ji : j.at("items")) {
    ErrorItem item;
    item.position = {ji.at("position").at(0).get<double>(),
                     ji.at("position").at(1).get<double>(),
                     ji.at("position").at(2).get<double>()};
    item.kind = error_kind_from_string(ji.at("kind").get<std::string>());
    item.zone = ji.at("zone").get<std::string>();
    r.items.push_back(std::move(item));
  }
  return r;
}

}  // namespace vecfl::world
