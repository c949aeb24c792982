#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vecfl/mlgra.hpp"
#include "vecfl/netmodel.hpp"
#include "vecfl/pipeline.hpp"
#include "vecfl/vrcsp.hpp"
#include "vecfl/world.hpp"

namespace vecfl::pipeline {

// Comparison ladder: each scheme adds one mechanism on top of the previous.
enum class Scheme {
  kCentralized,      // all budget into cloud pretraining
  kEdgeFl,           // + edge FL (half the budget per medium)
  kCloudFl,          // + cloud FL (equal three-way split)
  kVrcspDistill,     // + road sensors placed by error coverage + distillation
  kMlgra,            // + joint greedy allocation
  kDeviceSelection,  // + gradient-norm device selection
};

std::string to_string(Scheme scheme);
std::vector<Scheme> all_schemes();

// Everything a full experiment needs, cooked from the run config.
struct Experiment {
  std::vector<mlgra::TaskSpec> tasks;
  double similarity_threshold = 1.0;
  netmodel::NetworkTopology topology;
  netmodel::ResourceBudget budget;
  int group_size = 3;
  world::ScenarioSpec scenario_spec;
  world::SensorPose cav_sensor{{0.0, 0.0}, 0.0, 2.0 * M_PI / 3.0, 45.0};
  world::DetectorQuality quality{0.15, 0.05, 0.3};
  world::DetectorQuality road_quality{0.02, 0.0, 0.12};
  double road_authority = 1.0;
  double fusion_gate_m = 3.0;
  std::vector<vrcsp::SensorTier> tiers;
  double sensor_budget = 0.0;
  int registry_episodes = 3;
  int route_poses = 6;
  FlFlags flags;
  TrainRecipe recipe;
  DataConfig data;
  int deployment_edge = -1;
  std::uint64_t seed = 0;

  mlgra::MultiLayerGraph build_graph() const;
  std::map<int, netmodel::CostCard> base_cards(
      const mlgra::MultiLayerGraph& graph) const;
};

// Manual plan with fixed per-stage budget shares (split per task first, the
// way the equal baseline does); shares must sum to <= 1 per medium.
mlgra::AllocationPlan staged_plan(const mlgra::MultiLayerGraph& graph,
                                  const netmodel::ResourceBudget& budget,
                                  const std::map<int, netmodel::CostCard>& cards,
                                  const std::array<double, 3>& stage_shares);

// Scenario, registry and VRCSP placement derived from the experiment seed.
struct DeploymentArtifacts {
  world::Scenario scenario;
  world::ErrorRegistry registry;
  vrcsp::Placement placement;
};
DeploymentArtifacts build_deployment(const Experiment& experiment,
                                     bool place_road_sensors);

PipelineConfig make_pipeline_config(const Experiment& experiment, Scheme scheme);

struct SchemeOutcome {
  Scheme scheme = Scheme::kCentralized;
  std::map<int, double> task_metrics;
  double weighted_metric = 0.0;
  mlgra::AllocationPlan plan;
};

SchemeOutcome run_scheme(const Experiment& experiment, Scheme scheme);
std::vector<SchemeOutcome> run_all_schemes(const Experiment& experiment);

struct TaskImportance {
  double score = 0.0;
  bool high_priority = false;
};

// Leave-one-task-out importance: objective(all) - objective(all minus task)
// with the joint allocator re-run on the reduced list, clipped at zero.
// With one task its importance is its own metric.
std::map<int, TaskImportance> evaluate_task_importance(
    const Experiment& experiment, double priority_floor = 0.0);

}  // namespace vecfl::pipeline
