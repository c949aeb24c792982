#include "vecfl/schemes.hpp"

#include <algorithm>
#include <stdexcept>

#include "vecfl/rng.hpp"

namespace vecfl::pipeline {

using netmodel::Stage;

std::string to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::kCentralized: return "centralized";
    case Scheme::kEdgeFl: return "edge_fl";
    case Scheme::kCloudFl: return "cloud_fl";
    case Scheme::kVrcspDistill: return "vrcsp_distill";
    case Scheme::kMlgra: return "mlgra";
    case Scheme::kDeviceSelection: return "device_selection";
  }
  return "centralized";
}

std::vector<Scheme> all_schemes() {
  return {Scheme::kCentralized,  Scheme::kEdgeFl, Scheme::kCloudFl,
          Scheme::kVrcspDistill, Scheme::kMlgra,  Scheme::kDeviceSelection};
}

mlgra::MultiLayerGraph Experiment::build_graph() const {
  std::vector<mlgra::VehicleLink> links;
  std::vector<std::string> modalities;
  for (const auto& task : tasks) {
    if (std::find(modalities.begin(), modalities.end(),
                  task.signature.modality) == modalities.end()) {
      modalities.push_back(task.signature.modality);
    }
  }
  const double nominal =
      topology.vehicles.empty()
          ? 0.0
          : budget.wireless_total_mb / static_cast<double>(topology.vehicles.size());
  for (const auto& modality : modalities) {
    for (const auto& vehicle : topology.vehicles) {
      links.push_back({modality, vehicle.id, nominal, vehicle.data_quality});
    }
  }
  return mlgra::build_graph(tasks, links, similarity_threshold);
}

std::map<int, netmodel::CostCard> Experiment::base_cards(
    const mlgra::MultiLayerGraph& graph) const {
  std::map<int, netmodel::CostCard> cards;
  for (const auto& dnn : graph.dnns) {
    const auto& edge = graph.edge_of_dnn(dnn.dnn_id);
    netmodel::CostCard card;
    card.sample_size_mb = edge.sample_size_mb;
    card.dnn_size_mb = edge.dnn_size_mb;
    card.group_size = group_size;
    card.num_edges = static_cast<int>(topology.edges.size());
    cards[dnn.dnn_id] = card;
  }
  return cards;
}

mlgra::AllocationPlan staged_plan(const mlgra::MultiLayerGraph& graph,
                                  const netmodel::ResourceBudget& budget,
                                  const std::map<int, netmodel::CostCard>& cards,
                                  const std::array<double, 3>& stage_shares) {
  double total_share = 0.0;
  for (double s : stage_shares) {
    if (s < 0.0) throw std::invalid_argument("staged_plan: negative share");
    total_share += s;
  }
  if (total_share > 1.0 + 1e-9) {
    throw std::invalid_argument("staged_plan: shares exceed the budget");
  }

  const double n_tasks = static_cast<double>(graph.tasks.size());
  mlgra::AllocationPlan plan;
  std::map<int, std::array<long long, 3>> units;
  for (const auto& dnn : graph.dnns) {
    const netmodel::CostCard& card = cards.at(dnn.dnn_id);
    const double task_share = static_cast<double>(dnn.task_ids.size()) / n_tasks;
    std::array<long long, 3> u{0, 0, 0};
    for (int s = 0; s < 3; ++s) {
      const std::int64_t w = netmodel::mb_to_bytes(
          budget.wireless_total_mb * stage_shares[s] * task_share);
      const std::int64_t l = netmodel::mb_to_bytes(
          budget.wireline_total_mb * stage_shares[s] * task_share);
      if (s == 0) {
        u[0] = std::min(w, l) <= 0
                   ? 0
                   : std::min(w, l) / netmodel::sample_cost_bytes(card);
      } else if (s == 1) {
        u[1] = w <= 0 ? 0 : w / netmodel::stage2_round_cost_bytes(card);
      } else {
        u[2] = l <= 0 ? 0 : l / netmodel::stage3_round_cost_bytes(card);
      }
    }
    units[dnn.dnn_id] = u;
  }

  double objective = 0.0;
  for (const auto& dnn : graph.dnns) {
    const netmodel::CostCard& card = cards.at(dnn.dnn_id);
    const auto& u = units.at(dnn.dnn_id);
    const auto& predictors = graph.edge_of_dnn(dnn.dnn_id).predictors;
    const std::array<Stage, 3> stages{Stage::kPretrain, Stage::kEdgeFl,
                                      Stage::kCloudFl};
    for (int s = 0; s < 3; ++s) {
      if (u[s] == 0) continue;
      mlgra::PlanCell cell;
      cell.dnn_id = dnn.dnn_id;
      cell.stage = stages[s];
      cell.units = u[s];
      if (s == 0) {
        cell.wireless_bytes = u[s] * netmodel::sample_cost_bytes(card);
        cell.wireline_bytes = cell.wireless_bytes;
      } else if (s == 1) {
        cell.wireless_bytes = u[s] * netmodel::stage2_round_cost_bytes(card);
      } else {
        cell.wireline_bytes = u[s] * netmodel::stage3_round_cost_bytes(card);
      }
      plan.cells.push_back(cell);
      plan.allocation.add_bytes(dnn.dnn_id, stages[s], cell.wireless_bytes,
                                cell.wireline_bytes);
    }
    const double accuracy =
        mlgra::composed_accuracy(predictors, u[0], u[1], u[2]);
    plan.predicted_accuracy[dnn.dnn_id] = accuracy;
    objective += dnn.weight_sum * accuracy;
  }
  plan.objective = objective;
  return plan;
}

DeploymentArtifacts build_deployment(const Experiment& experiment,
                                     bool place_road_sensors) {
  DeploymentArtifacts artifacts;
  world::ScenarioSpec spec = experiment.scenario_spec;
  spec.seed = mix_seed(experiment.seed, seed_stream::kScenario);
  artifacts.scenario = world::generate_scenario(spec);
  if (!place_road_sensors) return artifacts;

  const auto routes = make_cav_routes(artifacts.scenario,
                                      experiment.route_poses,
                                      experiment.cav_sensor);
  artifacts.registry = world::collect_error_registry(
      artifacts.scenario, routes, experiment.quality,
      experiment.registry_episodes,
      mix_seed(experiment.seed, seed_stream::kRegistry));
  artifacts.placement =
      vrcsp::place_sensors(artifacts.registry, artifacts.scenario.candidate_sites,
                           experiment.tiers, experiment.sensor_budget);
  return artifacts;
}

PipelineConfig make_pipeline_config(const Experiment& experiment, Scheme scheme) {
  const bool wants_sensors = scheme == Scheme::kVrcspDistill ||
                             scheme == Scheme::kMlgra ||
                             scheme == Scheme::kDeviceSelection;

  PipelineConfig config;
  config.graph = experiment.build_graph();
  config.topology = experiment.topology;
  config.budget = experiment.budget;
  config.scenario = build_deployment(experiment, false).scenario;
  config.cav_sensor = experiment.cav_sensor;
  config.base_quality = experiment.quality;
  config.road_quality = experiment.road_quality;
  config.road_authority = experiment.road_authority;
  config.fusion_gate_m = experiment.fusion_gate_m;
  config.flags = experiment.flags;
  config.recipe = experiment.recipe;
  config.data = experiment.data;
  config.deployment_edge = experiment.deployment_edge;
  config.seed = experiment.seed;

  config.flags.device_selection = scheme == Scheme::kDeviceSelection;
  if (config.flags.device_selection && config.flags.selection_k == 0) {
    config.flags.selection_k = std::max(1, experiment.group_size - 1);
  }
  config.flags.distillation = false;

  if (wants_sensors && !experiment.tiers.empty()) {
    const auto deployment = build_deployment(experiment, true);
    config.road_sensors = vrcsp::road_sensor_poses(deployment.placement);
    config.flags.distillation = !config.road_sensors.empty();
  }

  config.cards = effective_cards(config.graph,
                                 experiment.base_cards(config.graph),
                                 config.flags, config.data);

  switch (scheme) {
    case Scheme::kCentralized:
      config.plan = staged_plan(config.graph, config.budget, config.cards,
                                {1.0, 0.0, 0.0});
      break;
    case Scheme::kEdgeFl:
      // Same stage-I/II shares as the equal three-way split, no cloud stage:
      // the next ladder step differs only by adding stage III.
      config.plan = staged_plan(config.graph, config.budget, config.cards,
                                {1.0 / 3.0, 1.0 / 3.0, 0.0});
      break;
    case Scheme::kCloudFl:
    case Scheme::kVrcspDistill:
      config.plan =
          mlgra::equal_allocation(config.graph, config.budget, config.cards);
      break;
    case Scheme::kMlgra:
    case Scheme::kDeviceSelection:
      config.plan = mlgra::allocate(config.graph, config.budget, config.cards);
      break;
  }
  return config;
}

SchemeOutcome run_scheme(const Experiment& experiment, Scheme scheme) {
  SchemeOutcome outcome;
  outcome.scheme = scheme;
  PipelineConfig config = make_pipeline_config(experiment, scheme);
  outcome.plan = config.plan;
  PipelineRunner runner(std::move(config));
  const PipelineResult result = runner.run_all();
  outcome.task_metrics = result.final_metrics;
  outcome.weighted_metric = result.weighted_metric;
  return outcome;
}

std::vector<SchemeOutcome> run_all_schemes(const Experiment& experiment) {
  std::vector<SchemeOutcome> outcomes;
  for (Scheme scheme : all_schemes()) {
    outcomes.push_back(run_scheme(experiment, scheme));
  }
  return outcomes;
}

std::map<int, TaskImportance> evaluate_task_importance(
    const Experiment& experiment, double priority_floor) {
  if (experiment.tasks.empty()) {
    throw std::invalid_argument("evaluate_task_importance: no tasks");
  }
  std::map<int, TaskImportance> importance;
  if (experiment.tasks.size() == 1) {
    const auto outcome = run_scheme(experiment, Scheme::kMlgra);
    const int id = experiment.tasks.front().task_id;
    importance[id] = {outcome.task_metrics.at(id),
                      outcome.task_metrics.at(id) >= priority_floor};
    return importance;
  }

  const auto full = run_scheme(experiment, Scheme::kMlgra);
  double objective_all = 0.0;
  for (const auto& task : experiment.tasks) {
    objective_all += task.training_weight * full.task_metrics.at(task.task_id);
  }

  for (const auto& task : experiment.tasks) {
    Experiment reduced = experiment;
    reduced.tasks.clear();
    for (const auto& other : experiment.tasks) {
      if (other.task_id != task.task_id) reduced.tasks.push_back(other);
    }
    const auto outcome = run_scheme(reduced, Scheme::kMlgra);
    double objective_reduced = 0.0;
    for (const auto& other : reduced.tasks) {
      objective_reduced +=
          other.training_weight * outcome.task_metrics.at(other.task_id);
    }
    const double score = std::max(0.0, objective_all - objective_reduced);
    importance[task.task_id] = {score, score >= priority_floor};
  }
  return importance;
}

}  // namespace vecfl::pipeline
