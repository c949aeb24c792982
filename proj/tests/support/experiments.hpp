#pragma once

// Shared experiment builders for the pipeline-level tests.

#include "vecfl/schemes.hpp"

namespace testbed {

using namespace vecfl;

// Two-edge, four-vehicle experiment with the left/right regional gap. One
// regression task; optionally a classification task with corner classes at
// edge 1.
inline pipeline::Experiment mini_experiment(std::uint64_t seed,
                                            bool with_classification = false) {
  pipeline::Experiment exp;
  exp.seed = seed;

  mlgra::TaskSpec box;
  box.task_id = 0;
  box.name = "box_pose";
  box.training_weight = 1.0;
  box.signature = {"point_cloud", "boxes"};
  box.learner_kind = fedcore::TaskKind::kRegression;
  box.sample_size_mb = 1.0;
  box.dnn_size_mb = 1.0;
  box.predictors.stage1 = {82.0, 40.0, 1.1, predictor::ResourceKind::kSamples, 0.0};
  box.predictors.stage2 = {91.0, 10.0, 0.55, predictor::ResourceKind::kRounds, 0.0};
  box.predictors.stage3 = {94.5, 4.0, 0.7, predictor::ResourceKind::kRounds, 0.0};
  exp.tasks.push_back(box);

  if (with_classification) {
    mlgra::TaskSpec sign;
    sign.task_id = 1;
    sign.name = "sign";
    sign.training_weight = 0.8;
    sign.signature = {"image", "labels"};
    sign.learner_kind = fedcore::TaskKind::kClassification;
    sign.sample_size_mb = 0.4;
    sign.dnn_size_mb = 1.0;
    sign.predictors.stage1 = {70.0, 35.0, 0.6, predictor::ResourceKind::kSamples, 0.0};
    sign.predictors.stage2 = {86.0, 10.0, 0.7, predictor::ResourceKind::kRounds, 0.0};
    sign.predictors.stage3 = {90.0, 5.0, 0.8, predictor::ResourceKind::kRounds, 0.0};
    exp.tasks.push_back(sign);
  }

  exp.topology.edges = {{0}, {1}};
  exp.topology.vehicles = {{0, 0, 1.0}, {1, 0, 1.0}, {2, 1, 1.0}, {3, 1, 1.0}};
  exp.budget = {200.0, 600.0};
  exp.group_size = 2;

  exp.scenario_spec.layout = world::Layout::kCrossRoad;
  exp.scenario_spec.zone = {{0.0, 0.0}, {200.0, 80.0}};
  exp.scenario_spec.odd.traffic_density = 4.0;

  exp.cav_sensor.fov_angle = 2.0 * M_PI / 3.0;
  exp.cav_sensor.range = 45.0;
  exp.quality = {0.15, 0.05, 0.3};
  exp.road_quality = {0.02, 0.0, 0.08};
  exp.road_authority = 6.0;
  exp.tiers = {{"standard", 1.0, 25.0}, {"long_range", 2.0, 40.0}};
  exp.sensor_budget = 3.0;
  exp.registry_episodes = 2;
  exp.route_poses = 5;

  exp.data.deploy_shift_x = 0.0;
  exp.data.deploy_shift_y = -0.5;
  exp.data.pool_n = 500;
  exp.data.vehicle_n = 200;
  exp.data.test_n = 400;
  exp.data.pool_domain_gap = 1.3;
  exp.data.pool_region = {{0.0, 0.0}, {100.0, 80.0}};
  exp.data.test_region = {{0.0, 0.0}, {200.0, 80.0}};
  exp.data.edge_regions[0] = {{0.0, 0.0}, {100.0, 80.0}};
  exp.data.edge_regions[1] = {{100.0, 0.0}, {200.0, 80.0}};
  exp.data.pool_classes = {0, 1};
  exp.data.edge_classes[0] = {0, 1, 2};
  exp.data.edge_classes[1] = {0, 1, 2, 3};
  exp.recipe.pretrain_epochs = 150;
  exp.recipe.local_epochs = 2;
  exp.recipe.learning_rate = 0.25;
  exp.deployment_edge = 0;
  return exp;
}

}  // namespace testbed
