#include "vecfl/commands.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "vecfl/config.hpp"
#include "vecfl/errors.hpp"
#include "vecfl/format.hpp"
#include "vecfl/predictor.hpp"
#include "vecfl/rng.hpp"
#include "vecfl/schemes.hpp"

namespace vecfl::cli {

namespace {

using nlohmann::json;

RunConfig load(const CommandIo& io) {
  RunConfig config = load_config_file(io.config_path);
  if (io.seed_override.has_value()) {
    config.experiment.seed = *io.seed_override;
  }
  return config;
}

std::filesystem::path artifact_path(const CommandIo& io, const char* name) {
  return io.out_dir / name;
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << body;
}

std::string read_artifact(const CommandIo& io, const char* name) {
  const auto path = artifact_path(io, name);
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw MissingArtifactError("missing artifact: " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Patches calibration-sourced predictors from the fitted artifact. Literal
// triples pass through untouched.
void resolve_predictors(const CommandIo& io, RunConfig& config) {
  if (config.calibration_sources.empty()) return;
  const json fitted = json::parse(read_artifact(io, artifact::kPredictors));
  for (auto& task : config.experiment.tasks) {
    auto sources = config.calibration_sources.find(task.task_id);
    if (sources == config.calibration_sources.end()) continue;
    for (const auto& [stage, csv] : sources->second) {
      const std::string task_key = std::to_string(task.task_id);
      const std::string stage_key = netmodel::to_string(stage);
      if (!fitted.contains(task_key) || !fitted.at(task_key).contains(stage_key)) {
        throw MissingArtifactError("predictors.json lacks task " + task_key +
                                   " stage " + stage_key +
                                   " (run fit-predictor)");
      }
      const auto p =
          predictor::predictor_from_json(fitted.at(task_key).at(stage_key).dump());
      switch (stage) {
        case netmodel::Stage::kPretrain: task.predictors.stage1 = p; break;
        case netmodel::Stage::kEdgeFl: task.predictors.stage2 = p; break;
        case netmodel::Stage::kCloudFl: task.predictors.stage3 = p; break;
      }
    }
  }
}

world::Scenario load_scenario(const CommandIo& io) {
  return world::scenario_from_json(read_artifact(io, artifact::kScenario));
}

mlgra::AllocationPlan load_plan(const CommandIo& io) {
  const json j = json::parse(read_artifact(io, artifact::kAllocation));
  mlgra::AllocationPlan plan;
  plan.objective = j.value("objective", 0.0);
  for (const auto& row : j.at("rows")) {
    mlgra::PlanCell cell;
    cell.dnn_id = row.at("dnn").get<int>();
    cell.stage = netmodel::stage_from_string(row.at("stage").get<std::string>());
    cell.units = row.at("units").get<long long>();
    cell.wireless_bytes = netmodel::mb_to_bytes(row.at("wireless_mb").get<double>());
    cell.wireline_bytes = netmodel::mb_to_bytes(row.at("wireline_mb").get<double>());
    plan.allocation.add_bytes(cell.dnn_id, cell.stage, cell.wireless_bytes,
                              cell.wireline_bytes);
    if (row.contains("predicted_accuracy")) {
      plan.predicted_accuracy[cell.dnn_id] =
          row.at("predicted_accuracy").get<double>();
    }
    plan.cells.push_back(cell);
  }
  return plan;
}

}  // namespace

void cmd_gen_scenario(const CommandIo& io) {
  const RunConfig config = load(io);
  world::ScenarioSpec spec = config.experiment.scenario_spec;
  spec.seed = mix_seed(config.experiment.seed, seed_stream::kScenario);
  const world::Scenario scenario = world::generate_scenario(spec);
  write_file(artifact_path(io, artifact::kScenario),
             world::to_json(scenario, config.hash_hex));
}

void cmd_collect_errors(const CommandIo& io) {
  const RunConfig config = load(io);
  const world::Scenario scenario = load_scenario(io);
  const auto routes = pipeline::make_cav_routes(
      scenario, config.experiment.route_poses, config.experiment.cav_sensor);
  const auto registry = world::collect_error_registry(
      scenario, routes, config.experiment.quality,
      config.experiment.registry_episodes,
      mix_seed(config.experiment.seed, seed_stream::kRegistry));
  write_file(artifact_path(io, artifact::kRegistry),
             world::to_json(registry, config.hash_hex));
}

void cmd_place_sensors(const CommandIo& io) {
  const RunConfig config = load(io);
  if (config.experiment.tiers.empty()) {
    throw ConfigError("config: place-sensors requires sensors.tiers");
  }
  const world::Scenario scenario = load_scenario(io);
  const auto registry =
      world::registry_from_json(read_artifact(io, artifact::kRegistry));

  const auto placement =
      vrcsp::place_sensors(registry, scenario.candidate_sites,
                           config.experiment.tiers, config.experiment.sensor_budget);
  write_file(artifact_path(io, artifact::kPlacement),
             vrcsp::to_json(placement, static_cast<long long>(registry.items.size()),
                            config.experiment.sensor_budget, "vrcsp",
                            config.hash_hex));

  const auto baseline = vrcsp::baseline_density_placement(
      scenario, scenario.candidate_sites, config.experiment.tiers,
      config.experiment.sensor_budget);
  write_file(artifact_path(io, artifact::kPlacementBaseline),
             vrcsp::to_json(baseline, static_cast<long long>(scenario.objects.size()),
                            config.experiment.sensor_budget, "density_baseline",
                            config.hash_hex));
}

void cmd_fit_predictor(const CommandIo& io) {
  RunConfig config = load(io);
  json out;
  out["config_hash"] = config.hash_hex;
  for (const auto& [task_id, stages] : config.calibration_sources) {
    for (const auto& [stage, csv_rel] : stages) {
      const auto csv_path = io.config_path.parent_path() / csv_rel;
      std::ifstream in(csv_path);
      if (!in) {
        throw MissingArtifactError("calibration CSV not found: " +
                                   csv_path.string());
      }
      std::ostringstream buffer;
      buffer << in.rdbuf();
      const auto points = predictor::calibration_from_csv(buffer.str());
      const auto kind = stage == netmodel::Stage::kPretrain
                            ? predictor::ResourceKind::kSamples
                            : predictor::ResourceKind::kRounds;
      const auto result = predictor::fit(points, kind);
      out[std::to_string(task_id)][netmodel::to_string(stage)] =
          json::parse(predictor::to_json(result.predictor, result.rmse));
      auto& task = *std::find_if(
          config.experiment.tasks.begin(), config.experiment.tasks.end(),
          [id = task_id](const auto& t) { return t.task_id == id; });
      switch (stage) {
        case netmodel::Stage::kPretrain: task.predictors.stage1 = result.predictor; break;
        case netmodel::Stage::kEdgeFl: task.predictors.stage2 = result.predictor; break;
        case netmodel::Stage::kCloudFl: task.predictors.stage3 = result.predictor; break;
      }
    }
  }
  write_file(artifact_path(io, artifact::kPredictors), out.dump(2) + "\n");

  // Plot-ready accuracy-vs-resource curves for every resolved stage curve.
  std::ostringstream curves;
  curves << "# config_hash=" << config.hash_hex << "\n";
  curves << "task,stage,resource,accuracy\n";
  for (const auto& task : config.experiment.tasks) {
    for (netmodel::Stage stage : netmodel::kAllStages) {
      const auto& p = task.predictors.for_stage(stage);
      if (!p.has_value()) continue;
      for (long long n = 1; n <= 1024; n *= 2) {
        curves << task.task_id << ',' << netmodel::to_string(stage) << ',' << n
               << ',' << fmt_double(p->predict(n)) << '\n';
      }
    }
  }
  write_file(artifact_path(io, artifact::kPredictorCurves), curves.str());
}

void cmd_allocate(const CommandIo& io) {
  RunConfig config = load(io);
  resolve_predictors(io, config);
  const auto graph = config.experiment.build_graph();
  const auto cards = pipeline::effective_cards(
      graph, config.experiment.base_cards(graph), config.experiment.flags,
      config.experiment.data);

  mlgra::AllocationPlan plan;
  if (io.allocate_mode == "equal") {
    plan = mlgra::equal_allocation(graph, config.experiment.budget, cards);
  } else if (io.allocate_mode == "optimize") {
    plan = mlgra::allocate(graph, config.experiment.budget, cards);
  } else {
    throw ConfigError("allocate: unknown mode '" + io.allocate_mode + "'");
  }

  const auto check =
      netmodel::validate_allocation(plan.allocation, config.experiment.budget);
  if (!check.ok) {
    std::string message = "allocation infeasible:";
    for (const auto& v : check.violations) {
      message += " " + netmodel::to_string(v.medium) + " exceeds budget by " +
                 fmt_double(v.excess_mb) + " MB";
    }
    throw InfeasibleError(message);
  }

  write_file(artifact_path(io, artifact::kAllocation),
             mlgra::to_json(plan, graph, config.hash_hex));
  std::string csv = "# config_hash=" + config.hash_hex + "\n";
  csv += mlgra::to_csv(plan, graph);
  write_file(artifact_path(io, artifact::kAllocationCsv), csv);
}

void cmd_run_pipeline(const CommandIo& io) {
  RunConfig config = load(io);
  resolve_predictors(io, config);
  const auto& exp = config.experiment;

  pipeline::PipelineConfig pipe;
  pipe.graph = exp.build_graph();
  pipe.topology = exp.topology;
  pipe.budget = exp.budget;
  pipe.scenario = load_scenario(io);
  pipe.cav_sensor = exp.cav_sensor;
  pipe.base_quality = exp.quality;
  pipe.road_quality = exp.road_quality;
  pipe.road_authority = exp.road_authority;
  pipe.fusion_gate_m = exp.fusion_gate_m;
  pipe.flags = exp.flags;
  pipe.recipe = exp.recipe;
  pipe.data = exp.data;
  pipe.deployment_edge = exp.deployment_edge;
  pipe.seed = exp.seed;
  pipe.cards = pipeline::effective_cards(pipe.graph, exp.base_cards(pipe.graph),
                                         pipe.flags, pipe.data);
  pipe.plan = load_plan(io);
  if (exp.flags.distillation) {
    const auto placement =
        vrcsp::placement_from_json(read_artifact(io, artifact::kPlacement));
    pipe.road_sensors = vrcsp::road_sensor_poses(placement);
  }

  const auto check =
      netmodel::validate_allocation(pipe.plan.allocation, exp.budget);
  if (!check.ok) {
    std::string message = "allocation infeasible:";
    for (const auto& v : check.violations) {
      message += " " + netmodel::to_string(v.medium) + " exceeds budget by " +
                 fmt_double(v.excess_mb) + " MB";
    }
    throw InfeasibleError(message);
  }

  pipeline::PipelineRunner runner(std::move(pipe));
  const auto result = runner.run_all();

  json manifest;
  manifest["config_hash"] = config.hash_hex;
  manifest["seed"] = exp.seed;
  manifest["plan"] = json::parse(read_artifact(io, artifact::kAllocation));
  manifest["weighted_metric"] = result.weighted_metric;
  write_file(artifact_path(io, artifact::kManifest), manifest.dump(2) + "\n");

  std::ostringstream metrics;
  metrics << "# config_hash=" << config.hash_hex << "\n";
  metrics << "stage,task,metric_before,metric_after,mb_wireless,mb_wireline\n";
  for (const auto& stage : result.stages) {
    for (const auto& task : runner.config().graph.tasks) {
      const int dnn = runner.config().graph.dnn_of_task(task.task_id).dnn_id;
      double wireless = 0.0, wireline = 0.0;
      for (const auto& row : stage.ledger_rows) {
        if (row.task_id == dnn && row.stage == stage.stage) {
          wireless = row.wireless_mb;
          wireline = row.wireline_mb;
        }
      }
      metrics << netmodel::to_string(stage.stage) << ',' << task.task_id << ','
              << fmt_double(stage.metric_before.at(task.task_id)) << ','
              << fmt_double(stage.metric_after.at(task.task_id)) << ','
              << fmt_double(wireless) << ',' << fmt_double(wireline) << '\n';
    }
  }
  write_file(artifact_path(io, artifact::kStageMetrics), metrics.str());

  std::ostringstream rounds;
  rounds << "# config_hash=" << config.hash_hex << "\n";
  rounds << "round,client_id,loss,grad_norm,selected,dnn,edge\n";
  for (const auto& row : result.rounds) {
    rounds << row.round << ',' << row.client_id << ',' << fmt_double(row.loss)
           << ',' << fmt_double(row.grad_norm) << ',' << (row.selected ? 1 : 0)
           << ',' << row.dnn_id << ',' << row.edge_id << '\n';
  }
  write_file(artifact_path(io, artifact::kRounds), rounds.str());

  std::ostringstream ledger;
  ledger << "# config_hash=" << config.hash_hex << "\n";
  ledger << "task,stage,wireless_mb,wireline_mb\n";
  for (const auto& row : result.ledger_rows) {
    ledger << row.task_id << ',' << netmodel::to_string(row.stage) << ','
           << fmt_double(row.wireless_mb) << ',' << fmt_double(row.wireline_mb)
           << '\n';
  }
  write_file(artifact_path(io, artifact::kLedger), ledger.str());
}

void cmd_report(const CommandIo& io) {
  RunConfig config = load(io);
  resolve_predictors(io, config);
  const auto outcomes = pipeline::run_all_schemes(config.experiment);

  std::ostringstream schemes;
  schemes << "# config_hash=" << config.hash_hex << "\n";
  schemes << "scheme,task,metric\n";
  for (const auto& outcome : outcomes) {
    for (const auto& task : config.experiment.tasks) {
      schemes << to_string(outcome.scheme) << ',' << task.task_id << ','
              << fmt_double(outcome.task_metrics.at(task.task_id)) << '\n';
    }
  }
  write_file(artifact_path(io, artifact::kSchemes), schemes.str());

  std::ostringstream radar;
  radar << "# config_hash=" << config.hash_hex << "\n";
  radar << "task";
  for (const auto& outcome : outcomes) radar << ',' << to_string(outcome.scheme);
  radar << '\n';
  for (const auto& task : config.experiment.tasks) {
    radar << task.task_id;
    for (const auto& outcome : outcomes) {
      radar << ',' << fmt_double(outcome.task_metrics.at(task.task_id));
    }
    radar << '\n';
  }
  write_file(artifact_path(io, artifact::kRadar), radar.str());
}

int run_command(const std::string& name, const CommandIo& io) {
  try {
    if (name == "gen-scenario") {
      cmd_gen_scenario(io);
    } else if (name == "collect-errors") {
      cmd_collect_errors(io);
    } else if (name == "place-sensors") {
      cmd_place_sensors(io);
    } else if (name == "fit-predictor") {
      cmd_fit_predictor(io);
    } else if (name == "allocate") {
      cmd_allocate(io);
    } else if (name == "run-pipeline") {
      cmd_run_pipeline(io);
    } else if (name == "report") {
      cmd_report(io);
    } else {
      std::cerr << "unknown command: " << name << "\n";
      return 2;
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const InfeasibleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace vecfl::cli
