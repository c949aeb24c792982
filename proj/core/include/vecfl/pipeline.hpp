#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vecfl/fedcore.hpp"
#include "vecfl/mlgra.hpp"
#include "vecfl/netmodel.hpp"
#include "vecfl/synthetic.hpp"
#include "vecfl/vrcsp.hpp"
#include "vecfl/world.hpp"

namespace vecfl::pipeline {

struct FlFlags {
  bool device_selection = false;
  int selection_k = 0;  // 0 means group size
  double noisy_sigma = 0.0;
  std::set<std::string> freeze_segments;
  bool personalization = false;
  std::set<std::string> shared_segments;  // used when personalization is on
  bool distillation = false;
};

struct TrainRecipe {
  int pretrain_epochs = 200;
  int local_epochs = 2;
  double learning_rate = 0.3;
  int distill_steps = 12;
  double distill_lr = 0.08;
};

// Synthetic dataset shapes per training job. Regions are map rectangles;
// the per-edge regions and class subsets are what make vehicle data
// regional (and cloud FL worthwhile).
struct DataConfig {
  synthetic::DistortionField field;
  double pool_domain_gap = 0.5;
  // Fresh calibration offset of the deployment domain: present in the test
  // set and in scenario detections, absent from all historical training
  // data. Road-supervised distillation is the only mechanism that sees it.
  double deploy_shift_x = 0.0;
  double deploy_shift_y = 0.0;
  double noise_sigma = 0.25;
  double error_scale_m = 5.0;
  double ridge = 1e-3;
  std::size_t pool_n = 700;
  std::size_t vehicle_n = 300;
  std::size_t test_n = 500;
  Rect pool_region{{0.0, 0.0}, {100.0, 80.0}};
  Rect test_region{{0.0, 0.0}, {200.0, 80.0}};
  std::map<int, Rect> edge_regions;  // by edge id; default test_region
  int class_count = 4;
  int class_dim = 3;
  double class_spread = 0.6;
  std::vector<int> pool_classes;              // default: all classes
  std::map<int, std::vector<int>> edge_classes;
  std::vector<int> test_classes;              // default: all classes

  Rect region_for_edge(int edge_id) const;
  std::vector<int> classes_for_edge(int edge_id) const;
};

struct PipelineConfig {
  mlgra::MultiLayerGraph graph;
  mlgra::AllocationPlan plan;
  netmodel::ResourceBudget budget;
  netmodel::NetworkTopology topology;
  std::map<int, netmodel::CostCard> cards;
  world::Scenario scenario;
  world::SensorPose cav_sensor{{0.0, 0.0}, 0.0, M_PI / 2.0, 40.0};
  world::DetectorQuality base_quality{0.15, 0.05, 0.3};
  world::DetectorQuality road_quality{0.02, 0.0, 0.12};
  double road_authority = 1.0;
  double fusion_gate_m = 3.0;
  std::vector<world::SensorPose> road_sensors;
  FlFlags flags;
  TrainRecipe recipe;
  DataConfig data;
  int deployment_edge = -1;  // -1: lowest edge id
  std::uint64_t seed = 0;

  void validate() const;
  int resolved_deployment_edge() const;
};

struct StageReport {
  netmodel::Stage stage = netmodel::Stage::kPretrain;
  std::map<int, long long> units_consumed;            // per dnn
  std::map<int, double> metric_before;                // per task
  std::map<int, double> metric_after;                 // per task
  std::vector<netmodel::LedgerRow> ledger_rows;
  std::vector<std::string> warnings;
};

struct RoundRow {
  int round = 0;
  int dnn_id = 0;
  int edge_id = 0;
  int client_id = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  bool selected = false;
};

struct FlRequest {
  int vehicle_id = 0;
  world::ErrorItem trigger;
  int edge_id = 0;
  std::vector<int> group;
};

struct PipelineResult {
  std::vector<StageReport> stages;
  std::map<int, fedcore::ModelParams> final_models;                 // per dnn
  std::map<int, std::map<int, fedcore::ModelParams>> edge_models;   // dnn -> edge
  std::map<int, std::map<int, fedcore::ModelParams>> personalized;  // dnn -> edge
  std::map<int, double> final_metrics;  // per task
  double weighted_metric = 0.0;
  std::vector<RoundRow> rounds;
  std::vector<FlRequest> requests;
  std::vector<netmodel::LedgerRow> ledger_rows;
  std::int64_t used_wireless_bytes = 0;
  std::int64_t used_wireline_bytes = 0;
};

// Effective detector quality of a vehicle whose current model scores
// `metric`: training directly lowers miss/false-positive rates, which is
// the feedback loop road-assisted distillation closes.
world::DetectorQuality quality_for_metric(const world::DetectorQuality& base,
                                          double metric);

// Fraction of parameters still transmitted when `frozen` segments are fixed.
double freeze_fraction(const fedcore::ParamLayout& layout,
                       const std::set<std::string>& frozen);

// Scales each card's stage-II exchange size by the freeze fraction of its
// DNN's layout. Run before planning so the plan and the meter agree.
std::map<int, netmodel::CostCard> effective_cards(
    const mlgra::MultiLayerGraph& graph,
    const std::map<int, netmodel::CostCard>& cards, const FlFlags& flags,
    const DataConfig& data);

// Deterministic vehicle poses along the scenario lanes (ascending vehicle id).
std::map<int, world::SensorPose> assign_vehicle_poses(
    const world::Scenario& scenario, const netmodel::NetworkTopology& topology,
    const world::SensorPose& sensor_template);

// One route per lane, marching `poses_per_route` sensor poses along it.
std::vector<std::vector<world::SensorPose>> make_cav_routes(
    const world::Scenario& scenario, int poses_per_route,
    const world::SensorPose& sensor_template);

// FL request when the report contains at least one miss or false positive;
// group = requester plus the nearest (group_size - 1) vehicles at the edge.
std::optional<FlRequest> trigger_fl_request(
    const world::DetectionReport& report, int vehicle_id, int edge_id,
    const std::map<int, Vec2>& vehicle_positions, const world::Scenario& scenario,
    int group_size);

// Orchestrates cloud pretraining -> edge FL -> cloud FL with exact
// throughput metering against the plan's allocation. FL variants run in the
// fixed order select -> local_update -> freeze -> (noisy) aggregate ->
// distill; every component draws from its own seed stream, so toggling a
// disabled variant never perturbs the others.
class PipelineRunner {
 public:
  explicit PipelineRunner(PipelineConfig config);
  ~PipelineRunner();
  PipelineRunner(const PipelineRunner&) = delete;
  PipelineRunner& operator=(const PipelineRunner&) = delete;

  StageReport run_stage1();
  StageReport run_stage2();
  StageReport run_stage3();
  PipelineResult run_all();

  const PipelineConfig& config() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace vecfl::pipeline
