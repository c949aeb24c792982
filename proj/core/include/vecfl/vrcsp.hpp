#pragma once

#include <string>
#include <vector>

#include "vecfl/geometry.hpp"
#include "vecfl/world.hpp"

namespace vecfl::vrcsp {

// A purchasable road-sensor class; detection range grows strictly with cost.
struct SensorTier {
  std::string name;
  double cost = 1.0;
  double range = 20.0;
};

void validate_tiers(const std::vector<SensorTier>& tiers);

struct PlacedSensor {
  int site_id = 0;
  std::string tier;
  Vec2 position;
  double cost = 0.0;
  double range = 0.0;
};

struct Placement {
  std::vector<PlacedSensor> sensors;
  double total_cost = 0.0;
  long long covered = 0;
};

// |{e in E : ||e - x|| <= r}| with the closed Euclidean ball; 3D error
// items are compared by their xy projection (z = 0 world).
long long coverage(const Vec2& x, double r, const world::ErrorRegistry& registry);

// Budgeted greedy max-coverage over (site, tier) pairs: one pass maximizes
// new-errors-per-cost, one pass maximizes raw gain, and the better placement
// wins. Union semantics; ties break by lowest site id, then cheapest tier.
// When nothing covers anything but the budget affords a sensor, one cheapest
// sensor lands on the lowest-id site.
Placement place_sensors(const world::ErrorRegistry& registry,
                        const std::vector<world::CandidateSite>& candidates,
                        const std::vector<SensorTier>& tiers,
                        double cost_budget);

// Same greedy machinery, but the covered universe is visible objects
// (occlusion-aware 360-degree sightings) instead of registered errors.
Placement baseline_density_placement(
    const world::Scenario& scenario,
    const std::vector<world::CandidateSite>& candidates,
    const std::vector<SensorTier>& tiers, double cost_budget);

// Exhaustive enumeration oracle; guarded to |candidates| * |tiers| <= 20,
// throws "oracle limit" beyond that.
Placement exact_placement(const world::ErrorRegistry& registry,
                          const std::vector<world::CandidateSite>& candidates,
                          const std::vector<SensorTier>& tiers,
                          double cost_budget);

// Diagnostic only (not optimized): mean distance from each covered error
// item to the nearest CAV-reported detection, capped at cap_m. Large values
// mean the road view disagrees strongly with the vehicles' own output.
double pose_dissimilarity(const world::ErrorRegistry& registry,
                          const Placement& placement,
                          const std::vector<world::DetectionReport>& cav_reports,
                          double cap_m = 6.0);

std::vector<world::SensorPose> road_sensor_poses(const Placement& placement);

std::string to_json(const Placement& placement, long long total_errors,
                    double budget, const std::string& method,
                    const std::string& config_hash = "");
Placement placement_from_json(const std::string& text);

}  // namespace vecfl::vrcsp
