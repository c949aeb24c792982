#include "vecfl/mlgra.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "vecfl/format.hpp"

namespace vecfl::mlgra {

using netmodel::Medium;
using netmodel::Stage;

double TaskSignature::similarity(const TaskSignature& other) const {
  double score = 0.0;
  if (modality == other.modality) score += 0.5;
  if (output_kind == other.output_kind) score += 0.5;
  return score;
}

const std::optional<predictor::PowerLawPredictor>& StagePredictorSet::for_stage(
    Stage stage) const {
  switch (stage) {
    case Stage::kPretrain: return stage1;
    case Stage::kEdgeFl: return stage2;
    case Stage::kCloudFl: return stage3;
  }
  return stage1;
}

double StagePredictorSet::ceiling() const {
  if (stage3.has_value()) return stage3->a;
  if (stage2.has_value()) return stage2->a;
  if (stage1.has_value()) return stage1->a;
  throw std::invalid_argument("StagePredictorSet: no stage predictor configured");
}

void MultiLayerGraph::validate() const {
  if (tasks.empty()) throw std::invalid_argument("graph: no tasks");
  std::set<int> covered_tasks;
  for (const auto& dnn : dnns) {
    if (dnn.task_ids.empty()) {
      throw std::invalid_argument("graph: DNN without tasks");
    }
    for (int t : dnn.task_ids) {
      if (!covered_tasks.insert(t).second) {
        throw std::invalid_argument("graph: task mapped to several DNNs");
      }
    }
    bool has_modality = false;
    for (const auto& edge : dnn_modality) {
      if (edge.dnn_id == dnn.dnn_id) has_modality = true;
    }
    if (!has_modality) {
      throw std::invalid_argument("graph: DNN without a modality edge");
    }
  }
  for (const auto& task : tasks) {
    if (covered_tasks.count(task.task_id) == 0) {
      throw std::invalid_argument("graph: task without a DNN");
    }
  }
  if (!modality_vehicles.empty()) {
    for (const auto& edge : dnn_modality) {
      bool has_vehicle = false;
      for (const auto& link : modality_vehicles) {
        if (link.modality == edge.modality) has_vehicle = true;
      }
      if (!has_vehicle) {
        throw std::invalid_argument("graph: modality without vehicles: " +
                                    edge.modality);
      }
    }
  }
}

const DnnNode& MultiLayerGraph::dnn_of_task(int task_id) const {
  for (const auto& dnn : dnns) {
    for (int t : dnn.task_ids) {
      if (t == task_id) return dnn;
    }
  }
  throw std::invalid_argument("graph: unknown task " + std::to_string(task_id));
}

const Layer2Edge& MultiLayerGraph::edge_of_dnn(int dnn_id) const {
  for (const auto& edge : dnn_modality) {
    if (edge.dnn_id == dnn_id) return edge;
  }
  throw std::invalid_argument("graph: unknown DNN " + std::to_string(dnn_id));
}

const TaskSpec& MultiLayerGraph::task(int task_id) const {
  for (const auto& t : tasks) {
    if (t.task_id == task_id) return t;
  }
  throw std::invalid_argument("graph: unknown task " + std::to_string(task_id));
}

MultiLayerGraph build_graph(const std::vector<TaskSpec>& tasks,
                            const std::vector<VehicleLink>& vehicles,
                            double similarity_threshold) {
  if (tasks.empty()) throw std::invalid_argument("build_graph: no tasks");
  MultiLayerGraph graph;
  graph.tasks = tasks;
  graph.modality_vehicles = vehicles;

  for (const auto& task : tasks) {
    if (task.signature.modality.empty()) {
      throw std::invalid_argument("build_graph: task " +
                                  std::to_string(task.task_id) +
                                  " has no modality");
    }
    if (!(task.training_weight > 0.0)) {
      throw std::invalid_argument("build_graph: training weight must be > 0");
    }
    int target = -1;
    for (std::size_t d = 0; d < graph.dnns.size(); ++d) {
      if (task.signature.similarity(graph.dnns[d].signature) >=
          similarity_threshold - 1e-12) {
        target = static_cast<int>(d);
        break;
      }
    }
    if (target < 0) {
      DnnNode dnn;
      dnn.dnn_id = static_cast<int>(graph.dnns.size());
      dnn.signature = task.signature;
      dnn.task_ids.push_back(task.task_id);
      dnn.weight_sum = task.training_weight;
      graph.dnns.push_back(dnn);

      Layer2Edge edge;
      edge.dnn_id = dnn.dnn_id;
      edge.modality = task.signature.modality;
      edge.sample_size_mb = task.sample_size_mb;
      edge.dnn_size_mb = task.dnn_size_mb;
      edge.predictors = task.predictors;
      graph.dnn_modality.push_back(edge);
    } else {
      DnnNode& dnn = graph.dnns[target];
      const Layer2Edge& edge = graph.edge_of_dnn(dnn.dnn_id);
      if (std::abs(edge.sample_size_mb - task.sample_size_mb) > 1e-9 ||
          std::abs(edge.dnn_size_mb - task.dnn_size_mb) > 1e-9) {
        throw std::invalid_argument(
            "build_graph: tasks sharing a DNN disagree on exchange sizes");
      }
      dnn.task_ids.push_back(task.task_id);
      dnn.weight_sum += task.training_weight;
    }
  }
  graph.validate();
  return graph;
}

long long AllocationPlan::units(int dnn_id, Stage stage) const {
  for (const auto& cell : cells) {
    if (cell.dnn_id == dnn_id && cell.stage == stage) return cell.units;
  }
  return 0;
}

double composed_accuracy(const StagePredictorSet& predictors, long long n1,
                         long long r2, long long r3) {
  double value = 0.0;
  if (predictors.stage1.has_value()) {
    value = predictors.stage1->value_at(n1);
  }
  if (predictors.stage2.has_value() && r2 > 0) {
    const auto& p = *predictors.stage2;
    value += p.b * (1.0 - std::pow(static_cast<double>(r2 + 1), -p.c));
  }
  if (predictors.stage3.has_value() && r3 > 0) {
    const auto& p = *predictors.stage3;
    value += p.b * (1.0 - std::pow(static_cast<double>(r3 + 1), -p.c));
  }
  return std::min(value, predictors.ceiling());
}

namespace {

struct UnitCost {
  std::int64_t wireless = 0;
  std::int64_t wireline = 0;
  // Denominator for the gain-per-MB score: the binding medium's cost.
  double binding_mb = 0.0;
};

UnitCost unit_cost(const netmodel::CostCard& card, Stage stage) {
  UnitCost cost;
  switch (stage) {
    case Stage::kPretrain:
      cost.wireless = netmodel::sample_cost_bytes(card);
      cost.wireline = cost.wireless;  // samples relay vehicle -> edge -> cloud
      break;
    case Stage::kEdgeFl:
      cost.wireless = netmodel::stage2_round_cost_bytes(card);
      break;
    case Stage::kCloudFl:
      cost.wireline = netmodel::stage3_round_cost_bytes(card);
      break;
  }
  cost.binding_mb = netmodel::bytes_to_mb(std::max(cost.wireless, cost.wireline));
  return cost;
}

struct Units {
  long long n1 = 0, r2 = 0, r3 = 0;
  long long& for_stage(Stage stage) {
    switch (stage) {
      case Stage::kPretrain: return n1;
      case Stage::kEdgeFl: return r2;
      case Stage::kCloudFl: return r3;
    }
    return n1;
  }
};

const netmodel::CostCard& card_of(const std::map<int, netmodel::CostCard>& cards,
                                  int dnn_id) {
  auto it = cards.find(dnn_id);
  if (it == cards.end()) {
    throw std::invalid_argument("allocate: missing cost card for DNN " +
                                std::to_string(dnn_id));
  }
  return it->second;
}

double plan_objective(const MultiLayerGraph& graph,
                      const std::map<int, Units>& units) {
  double objective = 0.0;
  for (const auto& dnn : graph.dnns) {
    const auto& u = units.at(dnn.dnn_id);
    objective += dnn.weight_sum *
                 composed_accuracy(graph.edge_of_dnn(dnn.dnn_id).predictors,
                                   u.n1, u.r2, u.r3);
  }
  return objective;
}

AllocationPlan finish_plan(const MultiLayerGraph& graph,
                           const std::map<int, netmodel::CostCard>& cards,
                           const std::map<int, Units>& units) {
  AllocationPlan plan;
  for (const auto& dnn : graph.dnns) {
    const netmodel::CostCard& card = card_of(cards, dnn.dnn_id);
    Units u = units.at(dnn.dnn_id);
    for (Stage stage : netmodel::kAllStages) {
      const long long granted = u.for_stage(stage);
      if (granted == 0) continue;
      const UnitCost cost = unit_cost(card, stage);
      PlanCell cell;
      cell.dnn_id = dnn.dnn_id;
      cell.stage = stage;
      cell.units = granted;
      cell.wireless_bytes = granted * cost.wireless;
      cell.wireline_bytes = granted * cost.wireline;
      plan.cells.push_back(cell);
      plan.allocation.add_bytes(dnn.dnn_id, stage, cell.wireless_bytes,
                                cell.wireline_bytes);
    }
    plan.predicted_accuracy[dnn.dnn_id] = composed_accuracy(
        graph.edge_of_dnn(dnn.dnn_id).predictors, u.n1, u.r2, u.r3);
  }
  plan.objective = plan_objective(graph, units);
  std::sort(plan.cells.begin(), plan.cells.end(),
            [](const PlanCell& a, const PlanCell& b) {
              if (a.dnn_id != b.dnn_id) return a.dnn_id < b.dnn_id;
              return static_cast<int>(a.stage) < static_cast<int>(b.stage);
            });
  return plan;
}

}  // namespace

AllocationPlan allocate(const MultiLayerGraph& graph,
                        const netmodel::ResourceBudget& budget,
                        const std::map<int, netmodel::CostCard>& cards) {
  graph.validate();
  budget.validate();
  for (const auto& [id, card] : cards) card.validate();

  std::int64_t wireless_left = netmodel::mb_to_bytes(budget.wireless_total_mb);
  std::int64_t wireline_left = netmodel::mb_to_bytes(budget.wireline_total_mb);

  std::map<int, Units> units;
  for (const auto& dnn : graph.dnns) units[dnn.dnn_id] = Units{};

  const auto cell_gain = [&](const DnnNode& dnn, Stage stage) {
    const auto& predictors = graph.edge_of_dnn(dnn.dnn_id).predictors;
    Units u = units.at(dnn.dnn_id);
    const double before = composed_accuracy(predictors, u.n1, u.r2, u.r3);
    u.for_stage(stage) += 1;
    const double after = composed_accuracy(predictors, u.n1, u.r2, u.r3);
    return dnn.weight_sum * (after - before);
  };

  // Greedy phase: grant one unit per step to the best gain-per-binding-MB
  // cell until no unit is affordable.
  while (true) {
    bool found = false;
    int best_dnn = 0;
    Stage best_stage = Stage::kPretrain;
    double best_score = -1.0;
    for (const auto& dnn : graph.dnns) {
      const netmodel::CostCard& card = card_of(cards, dnn.dnn_id);
      const auto& predictors = graph.edge_of_dnn(dnn.dnn_id).predictors;
      for (Stage stage : netmodel::kAllStages) {
        if (!predictors.for_stage(stage).has_value()) continue;
        const UnitCost cost = unit_cost(card, stage);
        if (cost.wireless > wireless_left || cost.wireline > wireline_left) {
          continue;
        }
        const double score = cell_gain(dnn, stage) / cost.binding_mb;
        if (!found || score > best_score + 1e-15) {
          found = true;
          best_score = score;
          best_dnn = dnn.dnn_id;
          best_stage = stage;
        }
      }
    }
    if (!found) break;
    const UnitCost cost = unit_cost(card_of(cards, best_dnn), best_stage);
    units[best_dnn].for_stage(best_stage) += 1;
    wireless_left -= cost.wireless;
    wireline_left -= cost.wireline;
  }

  // 1-swap polish: move one unit between cells while it improves the
  // objective (helps mixed-cost instances where gain-per-MB misranks).
  for (int pass = 0; pass < 200; ++pass) {
    double base = plan_objective(graph, units);
    double best_improvement = 1e-12;
    int from_dnn = -1, to_dnn = -1;
    Stage from_stage = Stage::kPretrain, to_stage = Stage::kPretrain;
    for (const auto& dnn_from : graph.dnns) {
      const netmodel::CostCard& card_from = card_of(cards, dnn_from.dnn_id);
      for (Stage stage_from : netmodel::kAllStages) {
        if (units[dnn_from.dnn_id].for_stage(stage_from) <= 0) continue;
        const UnitCost freed = unit_cost(card_from, stage_from);
        for (const auto& dnn_to : graph.dnns) {
          const netmodel::CostCard& card_to = card_of(cards, dnn_to.dnn_id);
          const auto& predictors_to =
              graph.edge_of_dnn(dnn_to.dnn_id).predictors;
          for (Stage stage_to : netmodel::kAllStages) {
            if (dnn_from.dnn_id == dnn_to.dnn_id && stage_from == stage_to) {
              continue;
            }
            if (!predictors_to.for_stage(stage_to).has_value()) continue;
            const UnitCost added = unit_cost(card_to, stage_to);
            if (added.wireless - freed.wireless > wireless_left ||
                added.wireline - freed.wireline > wireline_left) {
              continue;
            }
            units[dnn_from.dnn_id].for_stage(stage_from) -= 1;
            units[dnn_to.dnn_id].for_stage(stage_to) += 1;
            const double candidate = plan_objective(graph, units);
            units[dnn_from.dnn_id].for_stage(stage_from) += 1;
            units[dnn_to.dnn_id].for_stage(stage_to) -= 1;
            if (candidate - base > best_improvement) {
              best_improvement = candidate - base;
              from_dnn = dnn_from.dnn_id;
              from_stage = stage_from;
              to_dnn = dnn_to.dnn_id;
              to_stage = stage_to;
            }
          }
        }
      }
    }
    if (from_dnn < 0) break;
    const UnitCost freed = unit_cost(card_of(cards, from_dnn), from_stage);
    const UnitCost added = unit_cost(card_of(cards, to_dnn), to_stage);
    units[from_dnn].for_stage(from_stage) -= 1;
    units[to_dnn].for_stage(to_stage) += 1;
    wireless_left += freed.wireless - added.wireless;
    wireline_left += freed.wireline - added.wireline;
  }

  return finish_plan(graph, cards, units);
}

AllocationPlan equal_allocation(const MultiLayerGraph& graph,
                                const netmodel::ResourceBudget& budget,
                                const std::map<int, netmodel::CostCard>& cards) {
  graph.validate();
  budget.validate();

  // Uniform split over the active (task, stage) cells: a stage without a
  // configured predictor cannot train and receives no share, so a single
  // task with one active stage reduces to allocate's single-task result.
  long long active_cells = 0;
  for (const auto& task : graph.tasks) {
    const auto& predictors =
        graph.edge_of_dnn(graph.dnn_of_task(task.task_id).dnn_id).predictors;
    for (Stage stage : netmodel::kAllStages) {
      if (predictors.for_stage(stage).has_value()) ++active_cells;
    }
  }
  if (active_cells == 0) {
    throw std::invalid_argument("equal_allocation: no stage predictors");
  }
  const double n_cells = static_cast<double>(active_cells);
  const std::int64_t wireless_share =
      netmodel::mb_to_bytes(budget.wireless_total_mb / n_cells);
  const std::int64_t wireline_share =
      netmodel::mb_to_bytes(budget.wireline_total_mb / n_cells);

  std::map<int, Units> units;
  for (const auto& dnn : graph.dnns) {
    const netmodel::CostCard& card = card_of(cards, dnn.dnn_id);
    card.validate();
    const auto& predictors = graph.edge_of_dnn(dnn.dnn_id).predictors;
    // Each of the DNN's tasks contributes its per-(task, stage) share.
    const auto n_tasks = static_cast<std::int64_t>(dnn.task_ids.size());
    const std::int64_t w = wireless_share * n_tasks;
    const std::int64_t l = wireline_share * n_tasks;
    Units u;
    if (predictors.stage1.has_value()) {
      u.n1 = std::min(w, l) <= 0
                 ? 0
                 : std::min(w, l) / netmodel::sample_cost_bytes(card);
    }
    if (predictors.stage2.has_value()) {
      u.r2 = w <= 0 ? 0 : w / netmodel::stage2_round_cost_bytes(card);
    }
    if (predictors.stage3.has_value()) {
      u.r3 = l <= 0 ? 0 : l / netmodel::stage3_round_cost_bytes(card);
    }
    units[dnn.dnn_id] = u;
  }
  return finish_plan(graph, cards, units);
}

ScoreResult score_vehicles(const std::string& modality,
                           const std::vector<VehicleShard>& vehicles,
                           const fedcore::Learner& learner,
                           const fedcore::Dataset& probe_train,
                           const std::optional<fedcore::Dataset>& validation,
                           const ProbeRecipe& recipe) {
  if (vehicles.empty()) {
    throw std::invalid_argument("score_vehicles: no vehicles for " + modality);
  }
  ScoreResult result;
  if (!validation.has_value()) {
    result.uniform_fallback = true;
    for (const auto& v : vehicles) {
      result.scores[v.vehicle_id] = 1.0 / static_cast<double>(vehicles.size());
    }
    return result;
  }

  const auto train_metric = [&](const fedcore::Dataset& data) {
    fedcore::ModelParams params = learner.init_params();
    for (int e = 0; e < recipe.epochs; ++e) {
      const auto grad = learner.gradient(params, data);
      for (std::size_t i = 0; i < grad.size(); ++i) {
        params.values[i] -= recipe.learning_rate * grad[i];
      }
    }
    return learner.metric(params, *validation);
  };

  const double base = train_metric(probe_train);
  double total = 0.0;
  for (const auto& v : vehicles) {
    double gain = 0.0;
    if (fedcore::dataset_size(v.shard) > 0) {
      gain = std::max(0.0, train_metric(fedcore::concat(probe_train, v.shard)) -
                               base);
    }
    result.scores[v.vehicle_id] = gain;
    total += gain;
  }
  if (total <= 0.0) {
    for (auto& [id, score] : result.scores) {
      score = 1.0 / static_cast<double>(vehicles.size());
    }
  } else {
    for (auto& [id, score] : result.scores) score /= total;
  }
  return result;
}

std::string to_json(const AllocationPlan& plan, const MultiLayerGraph& graph,
                    const std::string& config_hash) {
  nlohmann::json j;
  if (!config_hash.empty()) j["config_hash"] = config_hash;
  j["objective"] = plan.objective;
  j["rows"] = nlohmann::json::array();
  for (const auto& cell : plan.cells) {
    j["rows"].push_back(
        {{"dnn", cell.dnn_id},
         {"stage", netmodel::to_string(cell.stage)},
         {"units", cell.units},
         {"wireless_mb", netmodel::bytes_to_mb(cell.wireless_bytes)},
         {"wireline_mb", netmodel::bytes_to_mb(cell.wireline_bytes)},
         {"predicted_accuracy", plan.predicted_accuracy.at(cell.dnn_id)}});
  }
  j["per_task"] = nlohmann::json::array();
  for (const auto& task : graph.tasks) {
    const DnnNode& dnn = graph.dnn_of_task(task.task_id);
    j["per_task"].push_back(
        {{"task", task.task_id},
         {"dnn", dnn.dnn_id},
         {"weight", task.training_weight},
         {"predicted_accuracy", plan.predicted_accuracy.at(dnn.dnn_id)}});
  }
  return j.dump(2) + "\n";
}

std::string to_csv(const AllocationPlan& plan, const MultiLayerGraph& graph) {
  std::ostringstream out;
  out << "task,dnn,weight,predicted_accuracy\n";
  for (const auto& task : graph.tasks) {
    const DnnNode& dnn = graph.dnn_of_task(task.task_id);
    out << task.task_id << ',' << dnn.dnn_id << ','
        << fmt_double(task.training_weight) << ','
        << fmt_double(plan.predicted_accuracy.at(dnn.dnn_id)) << '\n';
  }
  return out.str();
}

}  // namespace vecfl::mlgra
