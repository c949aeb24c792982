#include "vecfl/vrcsp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace vecfl::vrcsp {

namespace {

// One selectable (site, tier) pair with the element indices it covers.
struct Option {
  int site_index;
  int tier_index;
  double cost;
  std::vector<int> covers;
};

long long union_gain(const Option& option, const std::vector<bool>& covered) {
  long long gain = 0;
  for (int e : option.covers) {
    if (!covered[e]) ++gain;
  }
  return gain;
}

Placement run_greedy(const std::vector<Option>& options,
                     const std::vector<world::CandidateSite>& candidates,
                     const std::vector<SensorTier>& tiers, double cost_budget,
                     std::size_t universe_size, bool ratio_mode) {
  Placement placement;
  std::vector<bool> covered(universe_size, false);
  std::vector<bool> site_used(candidates.size(), false);
  double remaining = cost_budget;

  while (true) {
    int best = -1;
    double best_score = 0.0;
    long long best_gain = 0;
    for (std::size_t i = 0; i < options.size(); ++i) {
      const Option& opt = options[i];
      if (site_used[opt.site_index] || opt.cost > remaining + 1e-12) continue;
      const long long gain = union_gain(opt, covered);
      if (gain <= 0) continue;
      const double score =
          ratio_mode ? static_cast<double>(gain) / opt.cost
                     : static_cast<double>(gain);
      // Strictly-better wins; options are pre-sorted by (site id, cost) so
      // ties keep the earlier option.
      if (best < 0 || score > best_score + 1e-12) {
        best = static_cast<int>(i);
        best_score = score;
        best_gain = gain;
      }
    }
    if (best < 0) break;
    const Option& opt = options[best];
    placement.sensors.push_back({candidates[opt.site_index].site_id,
                                 tiers[opt.tier_index].name,
                                 candidates[opt.site_index].position, opt.cost,
                                 tiers[opt.tier_index].range});
    placement.total_cost += opt.cost;
    placement.covered += best_gain;
    remaining -= opt.cost;
    site_used[opt.site_index] = true;
    for (int e : opt.covers) covered[e] = true;
  }

  // Zero-gain fallback: a budget that affords a sensor still deploys one.
  if (placement.sensors.empty()) {
    for (const auto& opt : options) {
      if (opt.cost <= cost_budget + 1e-12) {
        placement.sensors.push_back({candidates[opt.site_index].site_id,
                                     tiers[opt.tier_index].name,
                                     candidates[opt.site_index].position,
                                     opt.cost, tiers[opt.tier_index].range});
        placement.total_cost = opt.cost;
        break;
      }
    }
  }
  return placement;
}

std::vector<Option> build_options(
    const std::vector<world::CandidateSite>& candidates,
    const std::vector<SensorTier>& tiers,
    const std::vector<std::vector<int>>& covers_by_pair) {
  std::vector<Option> options;
  options.reserve(candidates.size() * tiers.size());
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    for (std::size_t t = 0; t < tiers.size(); ++t) {
      options.push_back({static_cast<int>(s), static_cast<int>(t),
                         tiers[t].cost, covers_by_pair[s * tiers.size() + t]});
    }
  }
  std::sort(options.begin(), options.end(), [&](const Option& a, const Option& b) {
    const int sa = candidates[a.site_index].site_id;
    const int sb = candidates[b.site_index].site_id;
    if (sa != sb) return sa < sb;
    return a.cost < b.cost;
  });
  return options;
}

Placement best_of_two_passes(const std::vector<Option>& options,
                             const std::vector<world::CandidateSite>& candidates,
                             const std::vector<SensorTier>& tiers,
                             double cost_budget, std::size_t universe_size) {
  Placement ratio = run_greedy(options, candidates, tiers, cost_budget,
                               universe_size, /*ratio_mode=*/true);
  Placement gain = run_greedy(options, candidates, tiers, cost_budget,
                              universe_size, /*ratio_mode=*/false);
  return gain.covered > ratio.covered ? gain : ratio;
}

void validate_candidates(const std::vector<world::CandidateSite>& candidates) {
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!candidates[i].position.finite()) {
      throw std::invalid_argument("candidate site with non-finite position");
    }
    for (std::size_t j = i + 1; j < candidates.size(); ++j) {
      if (distance(candidates[i].position, candidates[j].position) < 1e-9) {
        throw std::invalid_argument("candidate sites must be distinct");
      }
    }
  }
}

}  // namespace

void validate_tiers(const std::vector<SensorTier>& tiers) {
  if (tiers.empty()) throw std::invalid_argument("no sensor tiers");
  std::vector<SensorTier> by_cost = tiers;
  std::sort(by_cost.begin(), by_cost.end(),
            [](const SensorTier& a, const SensorTier& b) { return a.cost < b.cost; });
  for (std::size_t i = 0; i < by_cost.size(); ++i) {
    if (by_cost[i].cost <= 0.0 || by_cost[i].range <= 0.0) {
      throw std::invalid_argument("sensor tier cost and range must be > 0");
    }
    if (i > 0 && by_cost[i].range <= by_cost[i - 1].range) {
      throw std::invalid_argument(
          "sensor tier range must increase strictly with cost");
    }
  }
}

long long coverage(const Vec2& x, double r, const world::ErrorRegistry& registry) {
  if (r < 0.0) throw std::invalid_argument("coverage: range must be >= 0");
  long long count = 0;
  for (const auto& item : registry.items) {
    if (distance(item.position.xy(), x) <= r) ++count;
  }
  return count;
}

Placement place_sensors(const world::ErrorRegistry& registry,
                        const std::vector<world::CandidateSite>& candidates,
                        const std::vector<SensorTier>& tiers,
                        double cost_budget) {
  validate_tiers(tiers);
  validate_candidates(candidates);
  if (cost_budget < 0.0) {
    throw std::invalid_argument("place_sensors: budget must be >= 0");
  }

  std::vector<std::vector<int>> covers(candidates.size() * tiers.size());
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    for (std::size_t t = 0; t < tiers.size(); ++t) {
      auto& list = covers[s * tiers.size() + t];
      for (std::size_t e = 0; e < registry.items.size(); ++e) {
        if (distance(registry.items[e].position.xy(),
                     candidates[s].position) <= tiers[t].range) {
          list.push_back(static_cast<int>(e));
        }
      }
    }
  }
  const auto options = build_options(candidates, tiers, covers);
  return best_of_two_passes(options, candidates, tiers, cost_budget,
                            registry.items.size());
}

Placement baseline_density_placement(
    const world::Scenario& scenario,
    const std::vector<world::CandidateSite>& candidates,
    const std::vector<SensorTier>& tiers, double cost_budget) {
  validate_tiers(tiers);
  validate_candidates(candidates);
  if (cost_budget < 0.0) {
    throw std::invalid_argument("baseline placement: budget must be >= 0");
  }

  // Sightings universe: object ids visible from a 360-degree suite.
  std::vector<std::vector<int>> covers(candidates.size() * tiers.size());
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    for (std::size_t t = 0; t < tiers.size(); ++t) {
      world::SensorPose pose;
      pose.position = candidates[s].position;
      pose.fov_angle = 2.0 * M_PI;
      pose.range = tiers[t].range;
      covers[s * tiers.size() + t] = world::visible_objects(pose, scenario);
    }
  }
  std::size_t universe = 0;
  for (const auto& o : scenario.objects) {
    universe = std::max(universe, static_cast<std::size_t>(o.id) + 1);
  }
  const auto options = build_options(candidates, tiers, covers);
  return best_of_two_passes(options, candidates, tiers, cost_budget, universe);
}

Placement exact_placement(const world::ErrorRegistry& registry,
                          const std::vector<world::CandidateSite>& candidates,
                          const std::vector<SensorTier>& tiers,
                          double cost_budget) {
  validate_tiers(tiers);
  validate_candidates(candidates);
  if (candidates.size() * tiers.size() > 20) {
    throw std::runtime_error("oracle limit");
  }

  std::vector<std::vector<std::vector<int>>> covers(candidates.size());
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    covers[s].resize(tiers.size());
    for (std::size_t t = 0; t < tiers.size(); ++t) {
      for (std::size_t e = 0; e < registry.items.size(); ++e) {
        if (distance(registry.items[e].position.xy(),
                     candidates[s].position) <= tiers[t].range) {
          covers[s][t].push_back(static_cast<int>(e));
        }
      }
    }
  }

  // choice[s] = -1 (unused) or tier index.
  std::vector<int> choice(candidates.size(), -1);
  std::vector<int> best_choice(candidates.size(), -1);
  long long best_covered = -1;
  double best_cost = 0.0;
  std::vector<int> counts(registry.items.size(), 0);
  long long covered_now = 0;
  double cost_now = 0.0;

  const auto evaluate_leaf = [&]() {
    if (covered_now > best_covered ||
        (covered_now == best_covered && cost_now < best_cost - 1e-12)) {
      best_covered = covered_now;
      best_cost = cost_now;
      best_choice = choice;
    }
  };

  const std::function<void(std::size_t)> recurse = [&](std::size_t s) {
    if (s == candidates.size()) {
      evaluate_leaf();
      return;
    }
    choice[s] = -1;
    recurse(s + 1);
    for (std::size_t t = 0; t < tiers.size(); ++t) {
      if (cost_now + tiers[t].cost > cost_budget + 1e-12) continue;
      choice[s] = static_cast<int>(t);
      cost_now += tiers[t].cost;
      for (int e : covers[s][t]) {
        if (counts[e]++ == 0) ++covered_now;
      }
      recurse(s + 1);
      for (int e : covers[s][t]) {
        if (--counts[e] == 0) --covered_now;
      }
      cost_now -= tiers[t].cost;
      choice[s] = -1;
    }
  };
  recurse(0);

  Placement placement;
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    if (best_choice[s] < 0) continue;
    const SensorTier& tier = tiers[best_choice[s]];
    placement.sensors.push_back({candidates[s].site_id, tier.name,
                                 candidates[s].position, tier.cost, tier.range});
    placement.total_cost += tier.cost;
  }
  placement.covered = std::max(best_covered, 0LL);
  return placement;
}

double pose_dissimilarity(const world::ErrorRegistry& registry,
                          const Placement& placement,
                          const std::vector<world::DetectionReport>& cav_reports,
                          double cap_m) {
  double total = 0.0;
  long long covered_items = 0;
  for (const auto& item : registry.items) {
    bool covered = false;
    for (const auto& sensor : placement.sensors) {
      if (distance(item.position.xy(), sensor.position) <= sensor.range) {
        covered = true;
        break;
      }
    }
    if (!covered) continue;
    ++covered_items;
    double nearest = cap_m;
    for (const auto& report : cav_reports) {
      for (const auto& det : report.detected) {
        nearest = std::min(nearest,
                           distance(det.detected_center, item.position.xy()));
      }
    }
    total += nearest;
  }
  return covered_items == 0 ? 0.0 : total / static_cast<double>(covered_items);
}

std::vector<world::SensorPose> road_sensor_poses(const Placement& placement) {
  std::vector<world::SensorPose> poses;
  for (const auto& sensor : placement.sensors) {
    world::SensorPose pose;
    pose.position = sensor.position;
    pose.yaw = 0.0;
    pose.fov_angle = 2.0 * M_PI;
    pose.range = sensor.range;
    poses.push_back(pose);
  }
  return poses;
}

std::string to_json(const Placement& placement, long long total_errors,
                    double budget, const std::string& method,
                    const std::string& config_hash) {
  nlohmann::json j;
  if (!config_hash.empty()) j["config_hash"] = config_hash;
  j["method"] = method;
  j["placements"] = nlohmann::json::array();
  for (const auto& s : placement.sensors) {
    j["placements"].push_back({{"site_id", s.site_id},
                               {"tier", s.tier},
                               {"position", {s.position.x, s.position.y}},
                               {"cost", s.cost},
                               {"range", s.range}});
  }
  j["summary"] = {{"covered", placement.covered},
                  {"total_errors", total_errors},
                  {"budget_used", placement.total_cost},
                  {"budget", budget}};
  return j.dump(2) + "\n";
}

Placement placement_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  Placement placement;
  for (const auto& js : j.at("placements")) {
    PlacedSensor s;
    s.site_id = js.at("site_id").get<int>();
    s.tier = js.at("tier").get<std::string>();
    s.position = {js.at("position").at(0).get<double>(),
                  js.at("position").at(1).get<double>()};
    s.cost = js.at("cost").get<double>();
    s.range = js.at("range").get<double>();
    placement.sensors.push_back(std::move(s));
    placement.total_cost += placement.sensors.back().cost;
  }
  placement.covered = j.at("summary").at("covered").get<long long>();
  return placement;
}

}  // namespace vecfl::vrcsp
