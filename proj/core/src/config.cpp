#include "vecfl/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "vecfl/errors.hpp"

namespace vecfl::cli {

namespace {

using nlohmann::json;

void require_keys(const json& j, const std::string& where,
                  const std::set<std::string>& known) {
  if (!j.is_object()) {
    throw ConfigError("config: " + where + " must be an object");
  }
  for (const auto& [key, value] : j.items()) {
    if (known.count(key) == 0) {
      throw ConfigError("config: unknown key '" + key + "' in " + where);
    }
  }
}

double get_number(const json& j, const std::string& where, const std::string& key,
                  double fallback, bool required = false) {
  if (!j.contains(key)) {
    if (required) throw ConfigError("config: missing '" + key + "' in " + where);
    return fallback;
  }
  if (!j.at(key).is_number()) {
    throw ConfigError("config: '" + key + "' in " + where + " must be a number");
  }
  return j.at(key).get<double>();
}

Rect get_rect(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j.at(0).is_array() ||
      !j.at(1).is_array() || j.at(0).size() != 2 || j.at(1).size() != 2) {
    throw ConfigError("config: " + where + " must be [[x0,y0],[x1,y1]]");
  }
  return {{j.at(0).at(0).get<double>(), j.at(0).at(1).get<double>()},
          {j.at(1).at(0).get<double>(), j.at(1).at(1).get<double>()}};
}

predictor::PowerLawPredictor parse_predictor(const json& j,
                                             const std::string& where,
                                             predictor::ResourceKind kind) {
  require_keys(j, where, {"a", "b", "c", "zero_floor"});
  predictor::PowerLawPredictor p;
  p.a = get_number(j, where, "a", 0.0, true);
  p.b = get_number(j, where, "b", 0.0, true);
  p.c = get_number(j, where, "c", 0.0, true);
  p.zero_floor = get_number(j, where, "zero_floor", 0.0);
  p.resource_kind = kind;
  try {
    p.validate();
  } catch (const std::exception& e) {
    throw ConfigError("config: " + where + ": " + e.what());
  }
  return p;
}

world::DetectorQuality parse_quality(const json& j, const std::string& where) {
  require_keys(j, where, {"miss_rate", "fp_rate", "noise_sigma"});
  world::DetectorQuality q;
  q.miss_rate = get_number(j, where, "miss_rate", 0.0);
  q.fp_rate = get_number(j, where, "fp_rate", 0.0);
  q.noise_sigma = get_number(j, where, "noise_sigma", 0.0);
  try {
    q.validate();
  } catch (const std::exception& e) {
    throw ConfigError("config: " + where + ": " + e.what());
  }
  return q;
}

std::vector<int> parse_int_list(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError("config: " + where + " must be a list");
  std::vector<int> out;
  for (const auto& v : j) out.push_back(v.get<int>());
  return out;
}

}  // namespace

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(hash));
  return buf;
}

RunConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  require_keys(root, "top level",
               {"seed", "scenario", "detector", "road_detector", "cav_sensor",
                "topology", "budget", "cost", "tasks", "fl", "data", "sensors",
                "collection", "deployment_edge", "fusion_gate_m",
                "similarity_threshold"});

  RunConfig config;
  pipeline::Experiment& exp = config.experiment;

  if (!root.contains("seed") || !root.at("seed").is_number_unsigned()) {
    throw ConfigError("config: missing or non-integer 'seed'");
  }
  exp.seed = root.at("seed").get<std::uint64_t>();

  // scenario
  {
    const json& j = root.at("scenario");
    require_keys(j, "scenario", {"layout", "zone", "odd"});
    exp.scenario_spec.layout =
        world::layout_from_string(j.at("layout").get<std::string>());
    exp.scenario_spec.zone = get_rect(j.at("zone"), "scenario.zone");
    const json& odd = j.at("odd");
    require_keys(odd, "scenario.odd",
                 {"kind", "traffic_density", "speed_limit", "fov_requirement"});
    exp.scenario_spec.odd.kind =
        world::odd_kind_from_string(odd.at("kind").get<std::string>());
    exp.scenario_spec.odd.traffic_density =
        get_number(odd, "scenario.odd", "traffic_density", 0.0, true);
    exp.scenario_spec.odd.speed_limit =
        get_number(odd, "scenario.odd", "speed_limit", 13.9);
    exp.scenario_spec.odd.fov_requirement =
        get_number(odd, "scenario.odd", "fov_requirement", 40.0);
  }

  exp.quality = parse_quality(root.at("detector"), "detector");
  if (root.contains("road_detector")) {
    exp.road_quality = parse_quality(root.at("road_detector"), "road_detector");
  }

  if (root.contains("cav_sensor")) {
    const json& j = root.at("cav_sensor");
    require_keys(j, "cav_sensor", {"fov_deg", "range"});
    exp.cav_sensor.fov_angle =
        get_number(j, "cav_sensor", "fov_deg", 120.0) * M_PI / 180.0;
    exp.cav_sensor.range = get_number(j, "cav_sensor", "range", 45.0);
  }

  // topology
  {
    const json& j = root.at("topology");
    require_keys(j, "topology", {"edges", "vehicles"});
    for (const auto& e : j.at("edges")) {
      exp.topology.edges.push_back({e.get<int>()});
    }
    for (const auto& v : j.at("vehicles")) {
      require_keys(v, "topology.vehicles[]", {"id", "edge", "data_quality"});
      netmodel::VehicleNode node;
      node.id = v.at("id").get<int>();
      node.home_edge_id = v.at("edge").get<int>();
      node.data_quality = get_number(v, "topology.vehicles[]", "data_quality", 1.0);
      exp.topology.vehicles.push_back(node);
    }
    try {
      exp.topology.validate();
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config: topology: ") + e.what());
    }
  }

  // budget + cost
  {
    const json& j = root.at("budget");
    require_keys(j, "budget", {"wireless_mb", "wireline_mb"});
    exp.budget.wireless_total_mb = get_number(j, "budget", "wireless_mb", 0.0, true);
    exp.budget.wireline_total_mb = get_number(j, "budget", "wireline_mb", 0.0, true);
    const json& c = root.at("cost");
    require_keys(c, "cost", {"group_size", "num_edges"});
    exp.group_size = static_cast<int>(get_number(c, "cost", "group_size", 3));
    const int num_edges = static_cast<int>(get_number(c, "cost", "num_edges", 1));
    if (num_edges != static_cast<int>(exp.topology.edges.size())) {
      throw ConfigError("config: cost.num_edges must match topology.edges");
    }
  }

  // tasks
  {
    const json& j = root.at("tasks");
    if (!j.is_array() || j.empty()) {
      throw ConfigError("config: tasks must be a nonempty list");
    }
    for (const auto& t : j) {
      require_keys(t, "tasks[]",
                   {"id", "name", "kind", "weight", "modality", "output",
                    "sample_size_mb", "dnn_size_mb", "predictors"});
      mlgra::TaskSpec task;
      task.task_id = t.at("id").get<int>();
      task.name = t.value("name", "task_" + std::to_string(task.task_id));
      task.learner_kind =
          fedcore::task_kind_from_string(t.at("kind").get<std::string>());
      task.training_weight = get_number(t, "tasks[]", "weight", 1.0);
      task.signature.modality = t.at("modality").get<std::string>();
      task.signature.output_kind = t.at("output").get<std::string>();
      task.sample_size_mb = get_number(t, "tasks[]", "sample_size_mb", 1.0, true);
      task.dnn_size_mb = get_number(t, "tasks[]", "dnn_size_mb", 1.0, true);

      const json& preds = t.at("predictors");
      require_keys(preds, "tasks[].predictors", {"I", "II", "III"});
      const auto parse_stage = [&](const std::string& key,
                                   netmodel::Stage stage,
                                   predictor::ResourceKind kind)
          -> std::optional<predictor::PowerLawPredictor> {
        if (!preds.contains(key)) return std::nullopt;
        const json& p = preds.at(key);
        if (p.contains("calibration_csv")) {
          require_keys(p, "tasks[].predictors." + key, {"calibration_csv"});
          config.calibration_sources[task.task_id][stage] =
              p.at("calibration_csv").get<std::string>();
          return std::nullopt;  // resolved by fit-predictor
        }
        return parse_predictor(p, "tasks[].predictors." + key, kind);
      };
      task.predictors.stage1 = parse_stage("I", netmodel::Stage::kPretrain,
                                           predictor::ResourceKind::kSamples);
      task.predictors.stage2 = parse_stage("II", netmodel::Stage::kEdgeFl,
                                           predictor::ResourceKind::kRounds);
      task.predictors.stage3 = parse_stage("III", netmodel::Stage::kCloudFl,
                                           predictor::ResourceKind::kRounds);
      exp.tasks.push_back(std::move(task));
    }
  }

  // fl flags + recipe
  {
    const json& j = root.at("fl");
    require_keys(j, "fl",
                 {"device_selection", "selection_k", "noisy_sigma",
                  "freeze_segments", "personalization", "shared_segments",
                  "distillation", "local_epochs", "learning_rate",
                  "pretrain_epochs", "distill_steps", "distill_lr"});
    exp.flags.device_selection = j.value("device_selection", false);
    exp.flags.selection_k = j.value("selection_k", 0);
    exp.flags.noisy_sigma = get_number(j, "fl", "noisy_sigma", 0.0);
    if (j.contains("freeze_segments")) {
      for (const auto& s : j.at("freeze_segments")) {
        exp.flags.freeze_segments.insert(s.get<std::string>());
      }
    }
    exp.flags.personalization = j.value("personalization", false);
    if (j.contains("shared_segments")) {
      for (const auto& s : j.at("shared_segments")) {
        exp.flags.shared_segments.insert(s.get<std::string>());
      }
    }
    exp.flags.distillation = j.value("distillation", false);
    exp.recipe.local_epochs =
        static_cast<int>(get_number(j, "fl", "local_epochs", 2));
    exp.recipe.learning_rate = get_number(j, "fl", "learning_rate", 0.3);
    exp.recipe.pretrain_epochs =
        static_cast<int>(get_number(j, "fl", "pretrain_epochs", 200));
    exp.recipe.distill_steps =
        static_cast<int>(get_number(j, "fl", "distill_steps", 12));
    exp.recipe.distill_lr = get_number(j, "fl", "distill_lr", 0.08);
  }

  // data
  {
    const json& j = root.at("data");
    require_keys(j, "data",
                 {"noise_sigma", "pool_n", "vehicle_n", "test_n",
                  "pool_domain_gap", "deploy_shift", "error_scale_m",
                  "pool_region", "test_region", "edge_regions", "classes",
                  "class_dim", "class_spread", "pool_classes", "edge_classes"});
    exp.data.noise_sigma = get_number(j, "data", "noise_sigma", 0.25);
    exp.data.pool_n = static_cast<std::size_t>(get_number(j, "data", "pool_n", 700));
    exp.data.vehicle_n =
        static_cast<std::size_t>(get_number(j, "data", "vehicle_n", 300));
    exp.data.test_n = static_cast<std::size_t>(get_number(j, "data", "test_n", 500));
    exp.data.pool_domain_gap = get_number(j, "data", "pool_domain_gap", 0.5);
    if (j.contains("deploy_shift")) {
      const json& shift = j.at("deploy_shift");
      if (!shift.is_array() || shift.size() != 2) {
        throw ConfigError("config: data.deploy_shift must be [x, y]");
      }
      exp.data.deploy_shift_x = shift.at(0).get<double>();
      exp.data.deploy_shift_y = shift.at(1).get<double>();
    }
    exp.data.error_scale_m = get_number(j, "data", "error_scale_m", 5.0);
    if (j.contains("pool_region")) {
      exp.data.pool_region = get_rect(j.at("pool_region"), "data.pool_region");
    }
    if (j.contains("test_region")) {
      exp.data.test_region = get_rect(j.at("test_region"), "data.test_region");
    }
    if (j.contains("edge_regions")) {
      for (const auto& [key, value] : j.at("edge_regions").items()) {
        exp.data.edge_regions[std::stoi(key)] =
            get_rect(value, "data.edge_regions." + key);
      }
    }
    exp.data.class_count = static_cast<int>(get_number(j, "data", "classes", 4));
    exp.data.class_dim = static_cast<int>(get_number(j, "data", "class_dim", 3));
    exp.data.class_spread = get_number(j, "data", "class_spread", 0.6);
    if (j.contains("pool_classes")) {
      exp.data.pool_classes = parse_int_list(j.at("pool_classes"), "data.pool_classes");
    }
    if (j.contains("edge_classes")) {
      for (const auto& [key, value] : j.at("edge_classes").items()) {
        exp.data.edge_classes[std::stoi(key)] =
            parse_int_list(value, "data.edge_classes." + key);
      }
    }
    // The regression field spans the canonical map = the scenario zone.
    exp.data.field.x_scale = exp.scenario_spec.zone.width() / 2.0;
    exp.data.field.y_scale = exp.scenario_spec.zone.height() / 2.0;
  }

  // sensors
  if (root.contains("sensors")) {
    const json& j = root.at("sensors");
    require_keys(j, "sensors", {"tiers", "cost_budget", "authority"});
    for (const auto& t : j.at("tiers")) {
      require_keys(t, "sensors.tiers[]", {"name", "cost", "range"});
      exp.tiers.push_back({t.at("name").get<std::string>(),
                           get_number(t, "sensors.tiers[]", "cost", 1.0, true),
                           get_number(t, "sensors.tiers[]", "range", 20.0, true)});
    }
    exp.sensor_budget = get_number(j, "sensors", "cost_budget", 0.0);
    exp.road_authority = get_number(j, "sensors", "authority", 1.0);
    try {
      vrcsp::validate_tiers(exp.tiers);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config: sensors.tiers: ") + e.what());
    }
  }

  if (root.contains("collection")) {
    const json& j = root.at("collection");
    require_keys(j, "collection", {"episodes", "route_poses"});
    exp.registry_episodes = static_cast<int>(get_number(j, "collection", "episodes", 3));
    exp.route_poses = static_cast<int>(get_number(j, "collection", "route_poses", 6));
  }

  if (root.contains("deployment_edge")) {
    exp.deployment_edge = root.at("deployment_edge").get<int>();
  }
  if (root.contains("fusion_gate_m")) {
    exp.fusion_gate_m = get_number(root, "top level", "fusion_gate_m", 3.0);
  }
  if (root.contains("similarity_threshold")) {
    exp.similarity_threshold =
        get_number(root, "top level", "similarity_threshold", 1.0);
  }

  try {
    exp.scenario_spec.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: scenario: ") + e.what());
  }

  config.canonical = root.dump();
  config.hash_hex = fnv1a_hex(config.canonical);
  return config;
}

RunConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw MissingArtifactError("config file not found: " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

}  // namespace vecfl::cli
