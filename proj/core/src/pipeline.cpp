#include "vecfl/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vecfl/errors.hpp"
#include "vecfl/rng.hpp"

namespace vecfl::pipeline {

using fedcore::ClientState;
using fedcore::Dataset;
using fedcore::Learner;
using fedcore::ModelParams;
using netmodel::Stage;

namespace {

constexpr int kRoadAgentBase = 100000;

std::vector<int> all_class_ids(int count) {
  std::vector<int> ids(count);
  for (int i = 0; i < count; ++i) ids[i] = i;
  return ids;
}

world::DetectionReport distorted(const world::DetectionReport& report,
                                 const synthetic::DistortionField& field) {
  world::DetectionReport out = report;
  for (auto& det : out.detected) {
    det.detected_center = det.detected_center + field.bias(det.detected_center);
  }
  return out;
}

}  // namespace

Rect DataConfig::region_for_edge(int edge_id) const {
  auto it = edge_regions.find(edge_id);
  return it == edge_regions.end() ? test_region : it->second;
}

std::vector<int> DataConfig::classes_for_edge(int edge_id) const {
  auto it = edge_classes.find(edge_id);
  if (it != edge_classes.end()) return it->second;
  return all_class_ids(class_count);
}

world::DetectorQuality quality_for_metric(const world::DetectorQuality& base,
                                          double metric) {
  const double f = 1.0 - std::clamp(metric, 0.0, 100.0) / 100.0;
  world::DetectorQuality q;
  q.miss_rate = base.miss_rate * f;
  q.fp_rate = base.fp_rate * f;
  q.noise_sigma = base.noise_sigma;
  return q;
}

double freeze_fraction(const fedcore::ParamLayout& layout,
                       const std::set<std::string>& frozen) {
  std::size_t frozen_length = 0;
  for (const auto& name : frozen) {
    frozen_length += layout.segment(name).length();
  }
  if (frozen_length >= layout.total()) {
    throw std::runtime_error("nothing trainable");
  }
  return static_cast<double>(layout.total() - frozen_length) /
         static_cast<double>(layout.total());
}

namespace {

std::unique_ptr<Learner> make_dnn_learner(const mlgra::MultiLayerGraph& graph,
                                          int dnn_id, const DataConfig& data) {
  const mlgra::DnnNode* dnn = nullptr;
  for (const auto& d : graph.dnns) {
    if (d.dnn_id == dnn_id) dnn = &d;
  }
  if (dnn == nullptr) {
    throw std::invalid_argument("unknown DNN " + std::to_string(dnn_id));
  }
  const fedcore::TaskKind kind = graph.task(dnn->task_ids.front()).learner_kind;
  for (int t : dnn->task_ids) {
    if (graph.task(t).learner_kind != kind) {
      throw std::invalid_argument("tasks sharing a DNN disagree on learner kind");
    }
  }
  if (kind == fedcore::TaskKind::kRegression) {
    fedcore::BoxPoseLearner::Options options;
    options.x_scale = data.field.x_scale;
    options.y_scale = data.field.y_scale;
    options.error_scale_m = data.error_scale_m;
    options.ridge = data.ridge;
    return std::make_unique<fedcore::BoxPoseLearner>(options);
  }
  fedcore::ClusterClassLearner::Options options;
  options.classes = data.class_count;
  options.feature_dim = data.class_dim;
  options.ridge = data.ridge;
  return std::make_unique<fedcore::ClusterClassLearner>(options);
}

}  // namespace

std::map<int, netmodel::CostCard> effective_cards(
    const mlgra::MultiLayerGraph& graph,
    const std::map<int, netmodel::CostCard>& cards, const FlFlags& flags,
    const DataConfig& data) {
  std::map<int, netmodel::CostCard> out = cards;
  if (flags.freeze_segments.empty()) return out;
  for (auto& [dnn_id, card] : out) {
    const auto learner = make_dnn_learner(graph, dnn_id, data);
    card.stage2_size_fraction =
        freeze_fraction(learner->init_params().layout, flags.freeze_segments);
  }
  return out;
}

std::map<int, world::SensorPose> assign_vehicle_poses(
    const world::Scenario& scenario, const netmodel::NetworkTopology& topology,
    const world::SensorPose& sensor_template) {
  std::vector<int> ids;
  for (const auto& v : topology.vehicles) ids.push_back(v.id);
  std::sort(ids.begin(), ids.end());

  const double total = scenario.total_lane_length();
  std::map<int, world::SensorPose> poses;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    double s = total * static_cast<double>(i + 1) /
               static_cast<double>(ids.size() + 1);
    const Polyline* lane = &scenario.lanes.front();
    for (const auto& l : scenario.lanes) {
      const double len = polyline_length(l);
      if (s <= len) {
        lane = &l;
        break;
      }
      s -= len;
    }
    world::SensorPose pose = sensor_template;
    pose.position = point_at_arclength(*lane, s);
    const Vec2 t = direction_at_arclength(*lane, s);
    pose.yaw = std::atan2(t.y, t.x);
    poses[ids[i]] = pose;
  }
  return poses;
}

std::vector<std::vector<world::SensorPose>> make_cav_routes(
    const world::Scenario& scenario, int poses_per_route,
    const world::SensorPose& sensor_template) {
  if (poses_per_route < 1) {
    throw std::invalid_argument("make_cav_routes: poses_per_route must be >= 1");
  }
  std::vector<std::vector<world::SensorPose>> routes;
  for (const auto& lane : scenario.lanes) {
    const double len = polyline_length(lane);
    if (len <= 0.0) continue;
    std::vector<world::SensorPose> route;
    for (int j = 0; j < poses_per_route; ++j) {
      const double s = len * static_cast<double>(j + 1) /
                       static_cast<double>(poses_per_route + 1);
      world::SensorPose pose = sensor_template;
      pose.position = point_at_arclength(lane, s);
      const Vec2 t = direction_at_arclength(lane, s);
      pose.yaw = std::atan2(t.y, t.x);
      route.push_back(pose);
    }
    routes.push_back(std::move(route));
  }
  return routes;
}

std::optional<FlRequest> trigger_fl_request(
    const world::DetectionReport& report, int vehicle_id, int edge_id,
    const std::map<int, Vec2>& vehicle_positions, const world::Scenario& scenario,
    int group_size) {
  if (group_size < 1) {
    throw std::invalid_argument("trigger_fl_request: group_size must be >= 1");
  }
  if (!report.has_errors()) return std::nullopt;

  FlRequest request;
  request.vehicle_id = vehicle_id;
  request.edge_id = edge_id;
  const std::string zone = world::to_string(scenario.layout);
  if (!report.misses.empty()) {
    const world::TrafficObject* obj = scenario.find_object(report.misses.front());
    const Vec2 at = obj != nullptr ? obj->center : Vec2{};
    request.trigger = {{at.x, at.y, 0.0}, world::ErrorKind::kMiss, zone};
  } else {
    const Vec2& fp = report.false_positives.front();
    request.trigger = {{fp.x, fp.y, 0.0}, world::ErrorKind::kFalsePositive, zone};
  }

  auto self = vehicle_positions.find(vehicle_id);
  if (self == vehicle_positions.end()) {
    throw std::invalid_argument("trigger_fl_request: requester has no position");
  }
  std::vector<std::pair<double, int>> others;
  for (const auto& [id, pos] : vehicle_positions) {
    if (id == vehicle_id) continue;
    others.push_back({distance(pos, self->second), id});
  }
  std::sort(others.begin(), others.end());

  request.group.push_back(vehicle_id);
  for (const auto& [dist, id] : others) {
    if (static_cast<int>(request.group.size()) >= group_size) break;
    request.group.push_back(id);
  }
  return request;
}

void PipelineConfig::validate() const {
  graph.validate();
  topology.validate();
  budget.validate();
  for (const auto& dnn : graph.dnns) {
    if (cards.find(dnn.dnn_id) == cards.end()) {
      throw std::invalid_argument("pipeline: missing cost card for DNN " +
                                  std::to_string(dnn.dnn_id));
    }
    cards.at(dnn.dnn_id).validate();
    if (cards.at(dnn.dnn_id).num_edges !=
        static_cast<int>(topology.edges.size())) {
      throw std::invalid_argument(
          "pipeline: cost card num_edges must match the topology");
    }
  }
  const auto check = netmodel::validate_allocation(plan.allocation, budget);
  if (!check.ok) {
    std::string message = "plan exceeds budget:";
    for (const auto& v : check.violations) {
      message += " " + netmodel::to_string(v.medium) + " by " +
                 std::to_string(v.excess_mb) + " MB";
    }
    throw InfeasibleError(message);
  }
  if (flags.distillation && road_sensors.empty()) {
    throw std::invalid_argument(
        "pipeline: distillation requires road sensors placed");
  }
  if (deployment_edge >= 0) {
    bool found = false;
    for (const auto& e : topology.edges) found |= e.id == deployment_edge;
    if (!found) {
      throw std::invalid_argument("pipeline: unknown deployment edge");
    }
  }
  cav_sensor.validate();
  base_quality.validate();
  road_quality.validate();
}

int PipelineConfig::resolved_deployment_edge() const {
  if (deployment_edge >= 0) return deployment_edge;
  int lowest = topology.edges.front().id;
  for (const auto& e : topology.edges) lowest = std::min(lowest, e.id);
  return lowest;
}

struct PipelineRunner::Impl {
  PipelineConfig config;
  std::map<int, std::unique_ptr<Learner>> learners;    // per dnn
  std::map<int, Dataset> pools;                        // per dnn
  std::map<int, Dataset> tests;                        // per dnn
  std::map<std::pair<int, int>, Dataset> vehicle_data; // (dnn, vehicle)
  std::map<int, world::SensorPose> vehicle_poses;
  netmodel::UsageLedger ledger;
  std::map<int, ModelParams> pretrained;
  std::map<int, std::map<int, ModelParams>> edge_models;
  std::map<int, std::map<int, ModelParams>> personalized;
  std::map<int, ModelParams> final_models;
  std::vector<RoundRow> rounds;
  std::vector<FlRequest> requests;
  std::map<int, std::vector<int>> edge_requesters;  // edge -> requester ids
  std::vector<StageReport> stage_reports;
  // Road-side accumulation across distillation rounds: the server fuses a
  // sequence of frames, vehicles keep their matching observations. Bounded
  // to the most recent window.
  std::map<std::pair<int, int>, fedcore::FusedOutput> fused_history;
  std::map<std::pair<int, int>, std::map<int, world::DetectionReport>> local_history;
  static constexpr std::size_t kDistillWindow = 360;
  int round_counter = 0;
  bool stage1_done = false;
  bool stage2_done = false;
  bool stage3_done = false;

  explicit Impl(PipelineConfig cfg)
      : config(std::move(cfg)), ledger(config.plan.allocation) {
    config.validate();
    build_learners();
    build_datasets();
    vehicle_poses = assign_vehicle_poses(config.scenario, config.topology,
                                         config.cav_sensor);
  }

  void build_learners() {
    for (const auto& dnn : config.graph.dnns) {
      learners[dnn.dnn_id] =
          make_dnn_learner(config.graph, dnn.dnn_id, config.data);
    }
  }

  Dataset make_dataset(int dnn_id, const Rect& region,
                       const std::vector<int>& classes, std::size_t n,
                       const synthetic::DistortionField& field,
                       std::uint64_t seed) const {
    if (learners.at(dnn_id)->kind() == fedcore::TaskKind::kRegression) {
      return synthetic::make_regression_data(n, region, field,
                                             config.data.noise_sigma, seed);
    }
    return synthetic::make_classification_data(
        n, classes, config.data.class_count, config.data.class_dim,
        config.data.class_spread, seed);
  }

  void build_datasets() {
    const auto& data = config.data;
    const auto pool_field = data.field.offset(data.pool_domain_gap, 0.0);
    const auto pool_classes =
        data.pool_classes.empty() ? all_class_ids(data.class_count)
                                  : data.pool_classes;
    const auto test_classes =
        data.test_classes.empty() ? all_class_ids(data.class_count)
                                  : data.test_classes;
    for (const auto& dnn : config.graph.dnns) {
      const std::uint64_t pool_seed =
          mix_seed(mix_seed(config.seed, seed_stream::kDataPool), dnn.dnn_id);
      pools[dnn.dnn_id] = make_dataset(dnn.dnn_id, data.pool_region,
                                       pool_classes, data.pool_n, pool_field,
                                       pool_seed);
      const std::uint64_t test_seed =
          mix_seed(mix_seed(config.seed, seed_stream::kDataTest), dnn.dnn_id);
      tests[dnn.dnn_id] = make_dataset(
          dnn.dnn_id, data.test_region, test_classes, data.test_n,
          data.field.offset(data.deploy_shift_x, data.deploy_shift_y),
          test_seed);
      for (const auto& vehicle : config.topology.vehicles) {
        const std::uint64_t seed = mix_seed(
            mix_seed(mix_seed(config.seed, seed_stream::kDataVehicle),
                     dnn.dnn_id),
            static_cast<std::uint64_t>(vehicle.id));
        vehicle_data[{dnn.dnn_id, vehicle.id}] = make_dataset(
            dnn.dnn_id, data.region_for_edge(vehicle.home_edge_id),
            data.classes_for_edge(vehicle.home_edge_id), data.vehicle_n,
            data.field, seed);
      }
    }
  }

  // ---- shared helpers -------------------------------------------------

  double dnn_metric(int dnn_id, const ModelParams& params) const {
    return learners.at(dnn_id)->metric(params, tests.at(dnn_id));
  }

  void train_centralized(const Learner& learner, ModelParams& params,
                         const Dataset& data, int epochs) const {
    for (int e = 0; e < epochs; ++e) {
      const auto grad = learner.gradient(params, data);
      for (std::size_t i = 0; i < grad.size(); ++i) {
        params.values[i] -= config.recipe.learning_rate * grad[i];
      }
    }
  }

  int regression_dnn() const {
    for (const auto& dnn : config.graph.dnns) {
      if (learners.at(dnn.dnn_id)->kind() == fedcore::TaskKind::kRegression) {
        return dnn.dnn_id;
      }
    }
    return -1;
  }

  std::vector<int> active_edges() const {
    std::vector<int> out;
    for (const auto& edge : config.topology.edges) {
      if (!config.topology.vehicles_at_edge(edge.id).empty()) {
        out.push_back(edge.id);
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  // Group membership: requesters first (request order), then nearest
  // vehicles to the first requester; without requests, lowest-id vehicles.
  std::vector<int> group_for(int edge_id, int group_size) const {
    std::vector<int> vehicles = config.topology.vehicles_at_edge(edge_id);
    std::sort(vehicles.begin(), vehicles.end());
    std::vector<int> group;
    auto it = edge_requesters.find(edge_id);
    if (it != edge_requesters.end()) {
      for (int requester : it->second) {
        if (static_cast<int>(group.size()) >= group_size) break;
        if (std::find(group.begin(), group.end(), requester) == group.end()) {
          group.push_back(requester);
        }
      }
    }
    if (!group.empty()) {
      const Vec2 anchor = vehicle_poses.at(group.front()).position;
      std::vector<std::pair<double, int>> rest;
      for (int v : vehicles) {
        if (std::find(group.begin(), group.end(), v) == group.end()) {
          rest.push_back({distance(vehicle_poses.at(v).position, anchor), v});
        }
      }
      std::sort(rest.begin(), rest.end());
      for (const auto& [d, v] : rest) {
        if (static_cast<int>(group.size()) >= group_size) break;
        group.push_back(v);
      }
    } else {
      for (int v : vehicles) {
        if (static_cast<int>(group.size()) >= group_size) break;
        group.push_back(v);
      }
    }
    return group;
  }

  // ---- stages ----------------------------------------------------------

  StageReport run_stage1() {
    if (stage1_done) throw std::logic_error("stage I already ran");
    StageReport report;
    report.stage = Stage::kPretrain;

    for (const auto& dnn : config.graph.dnns) {
      const Learner& learner = *learners.at(dnn.dnn_id);
      const netmodel::CostCard& card = config.cards.at(dnn.dnn_id);
      ModelParams params = learner.init_params();

      for (int task_id : dnn.task_ids) {
        report.metric_before[task_id] = dnn_metric(dnn.dnn_id, params);
      }

      const long long planned = config.plan.units(dnn.dnn_id, Stage::kPretrain);
      const std::size_t available = fedcore::dataset_size(pools.at(dnn.dnn_id));
      long long used = planned;
      if (planned > static_cast<long long>(available)) {
        used = static_cast<long long>(available);
        report.warnings.push_back("dnn " + std::to_string(dnn.dnn_id) +
                                  ": dataset smaller than stage-I capacity, using " +
                                  std::to_string(used) + " samples");
      }
      if (used > 0) {
        const Dataset train = fedcore::take_prefix(pools.at(dnn.dnn_id),
                                                   static_cast<std::size_t>(used));
        train_centralized(learner, params, train, config.recipe.pretrain_epochs);
        const std::int64_t bytes = used * netmodel::sample_cost_bytes(card);
        ledger.record_bytes(dnn.dnn_id, Stage::kPretrain,
                            netmodel::Medium::kWireless, bytes);
        ledger.record_bytes(dnn.dnn_id, Stage::kPretrain,
                            netmodel::Medium::kWireline, bytes);
      }
      report.units_consumed[dnn.dnn_id] = used;
      pretrained[dnn.dnn_id] = params;
      for (int task_id : dnn.task_ids) {
        report.metric_after[task_id] = dnn_metric(dnn.dnn_id, params);
      }
    }

    report.ledger_rows = ledger.rows();
    stage1_done = true;
    stage_reports.push_back(report);
    return report;
  }

  void collect_requests(int group_size) {
    const int request_dnn = regression_dnn();
    std::vector<int> vehicle_ids;
    for (const auto& v : config.topology.vehicles) vehicle_ids.push_back(v.id);
    std::sort(vehicle_ids.begin(), vehicle_ids.end());

    for (int v : vehicle_ids) {
      const int edge = config.topology.find_vehicle(v)->home_edge_id;
      world::DetectorQuality quality = config.base_quality;
      if (request_dnn >= 0) {
        quality = quality_for_metric(
            config.base_quality, dnn_metric(request_dnn, pretrained.at(request_dnn)));
      }
      const auto report = world::simulate_detections(
          vehicle_poses.at(v), config.scenario, quality,
          mix_seed(mix_seed(config.seed, seed_stream::kDetection),
                   static_cast<std::uint64_t>(v)),
          v);
      std::map<int, Vec2> positions;
      for (int other : config.topology.vehicles_at_edge(edge)) {
        positions[other] = vehicle_poses.at(other).position;
      }
      const auto request = trigger_fl_request(report, v, edge, positions,
                                              config.scenario, group_size);
      if (request.has_value()) {
        requests.push_back(*request);
        edge_requesters[edge].push_back(v);
      }
    }
  }

  // One distillation pass: fuse the round's road + vehicle reports, append
  // them to the edge's accumulated fused pool, distill each group member
  // against the pool from the aggregated model, then average the distilled
  // copies. Accumulation mirrors the road server fusing frame sequences and
  // keeps the supervision target stable across rounds.
  void distill_round(int dnn_id, int edge_id, const std::vector<int>& group,
                     ModelParams& edge_params, int counter) {
    const auto* learner =
        dynamic_cast<const fedcore::BoxPoseLearner*>(learners.at(dnn_id).get());
    if (learner == nullptr) return;

    fedcore::FusionConfig fusion;
    fusion.gate_m = config.fusion_gate_m;
    fusion.road_authority = config.road_authority;

    std::vector<world::DetectionReport> reports;
    for (std::size_t i = 0; i < config.road_sensors.size(); ++i) {
      const int agent = kRoadAgentBase + static_cast<int>(i);
      fusion.road_agents.insert(agent);
      reports.push_back(world::simulate_detections(
          config.road_sensors[i], config.scenario, config.road_quality,
          mix_seed(mix_seed(mix_seed(config.seed, seed_stream::kDistill),
                            static_cast<std::uint64_t>(counter)),
                   static_cast<std::uint64_t>(agent)),
          agent));
    }

    const double metric_now = dnn_metric(dnn_id, edge_params);
    const world::DetectorQuality cav_quality =
        quality_for_metric(config.base_quality, metric_now);
    std::vector<world::DetectionReport> cav_reports;
    std::vector<world::DetectionReport> all_reports = reports;
    for (int v : group) {
      auto report = world::simulate_detections(
          vehicle_poses.at(v), config.scenario, cav_quality,
          mix_seed(mix_seed(mix_seed(config.seed, seed_stream::kDistill),
                            static_cast<std::uint64_t>(counter)),
                   static_cast<std::uint64_t>(v)),
          v);
      // The vehicle's raw observation is miscalibrated; what it uploads for
      // fusion is its perception output, the model-corrected box.
      cav_reports.push_back(distorted(
          report, config.data.field.offset(config.data.deploy_shift_x,
                                           config.data.deploy_shift_y)));
      world::DetectionReport uploaded = cav_reports.back();
      for (auto& det : uploaded.detected) {
        det.detected_center = learner->predict(edge_params, det.detected_center);
      }
      all_reports.push_back(std::move(uploaded));
    }

    const auto fused = fedcore::road_average_output(all_reports, fusion);
    if (fused.empty()) return;

    auto& pool = fused_history[{dnn_id, edge_id}];
    pool.boxes.insert(pool.boxes.end(), fused.boxes.begin(), fused.boxes.end());
    if (pool.boxes.size() > kDistillWindow) {
      pool.boxes.erase(pool.boxes.begin(),
                       pool.boxes.end() - static_cast<long>(kDistillWindow));
    }
    double pool_weight = 0.0;
    for (const auto& box : pool.boxes) pool_weight += box.weight;
    for (auto& box : pool.boxes) box.weight /= pool_weight;
    auto& locals = local_history[{dnn_id, edge_id}];
    for (std::size_t i = 0; i < group.size(); ++i) {
      auto& mine = locals[group[i]];
      mine.agent_id = group[i];
      mine.detected.insert(mine.detected.end(), cav_reports[i].detected.begin(),
                           cav_reports[i].detected.end());
      if (mine.detected.size() > kDistillWindow) {
        mine.detected.erase(mine.detected.begin(),
                            mine.detected.end() - static_cast<long>(kDistillWindow));
      }
    }

    std::vector<ModelParams> distilled;
    for (std::size_t i = 0; i < group.size(); ++i) {
      ClientState state;
      state.client_id = group[i];
      state.params = edge_params;
      const auto result = fedcore::distill_update(
          *learner, state, locals.at(group[i]), pool,
          config.recipe.distill_steps, config.recipe.distill_lr,
          config.fusion_gate_m);
      distilled.push_back(result.params);
    }
    edge_params = fedcore::fedavg(
        distilled, std::vector<double>(distilled.size(), 1.0));
  }

  StageReport run_stage2() {
    if (!stage1_done) throw std::logic_error("stage II requires stage I");
    if (stage2_done) throw std::logic_error("stage II already ran");
    StageReport report;
    report.stage = Stage::kEdgeFl;

    // Group formation is shared across DNNs; use the widest group size.
    int max_group = 1;
    for (const auto& [id, card] : config.cards) {
      max_group = std::max(max_group, card.group_size);
    }
    collect_requests(max_group);

    const std::vector<int> active = active_edges();
    const int deployment = config.resolved_deployment_edge();

    for (const auto& dnn : config.graph.dnns) {
      const Learner& learner = *learners.at(dnn.dnn_id);
      const netmodel::CostCard& card = config.cards.at(dnn.dnn_id);
      for (int task_id : dnn.task_ids) {
        report.metric_before[task_id] =
            dnn_metric(dnn.dnn_id, pretrained.at(dnn.dnn_id));
      }
      for (const auto& edge : config.topology.edges) {
        edge_models[dnn.dnn_id][edge.id] = pretrained.at(dnn.dnn_id);
        if (config.topology.vehicles_at_edge(edge.id).empty()) {
          report.warnings.push_back("edge " + std::to_string(edge.id) +
                                    " has no vehicles, keeps the pretrained model");
        }
      }

      const long long total_rounds = config.plan.units(dnn.dnn_id, Stage::kEdgeFl);
      long long consumed = 0;
      if (total_rounds > 0 && !active.empty()) {
        const long long base = total_rounds / static_cast<long long>(active.size());
        const long long remainder =
            total_rounds % static_cast<long long>(active.size());
        for (std::size_t edge_index = 0; edge_index < active.size(); ++edge_index) {
          const int edge_id = active[edge_index];
          const long long rounds_here =
              base + (static_cast<long long>(edge_index) < remainder ? 1 : 0);
          if (rounds_here == 0) continue;

          const std::vector<int> group = group_for(edge_id, card.group_size);
          std::vector<ClientState> clients;
          for (int v : group) {
            ClientState client;
            client.client_id = v;
            client.data = vehicle_data.at({dnn.dnn_id, v});
            client.params = pretrained.at(dnn.dnn_id);
            clients.push_back(std::move(client));
          }

          ModelParams edge_params = pretrained.at(dnn.dnn_id);
          for (long long r = 0; r < rounds_here; ++r) {
            ++round_counter;
            for (auto& client : clients) client.params = edge_params;

            std::vector<int> selected_ids;
            if (config.flags.device_selection) {
              int k = config.flags.selection_k > 0 ? config.flags.selection_k
                                                   : static_cast<int>(clients.size());
              k = std::min(k, static_cast<int>(clients.size()));
              const auto selection = fedcore::select_devices(
                  clients, k,
                  mix_seed(mix_seed(config.seed, seed_stream::kSelection),
                           static_cast<std::uint64_t>(round_counter)));
              selected_ids = selection.selected;
            } else {
              for (const auto& client : clients) {
                selected_ids.push_back(client.client_id);
              }
            }

            std::vector<ModelParams> deltas;
            std::vector<double> weights;
            for (auto& client : clients) {
              const bool selected =
                  std::find(selected_ids.begin(), selected_ids.end(),
                            client.client_id) != selected_ids.end();
              const double loss_now = learner.loss(edge_params, client.data);
              if (selected) {
                auto update = fedcore::local_update(learner, client,
                                                    config.recipe.local_epochs,
                                                    config.recipe.learning_rate);
                ModelParams masked = std::move(update.delta);
                if (!config.flags.freeze_segments.empty()) {
                  masked = fedcore::apply_freeze(masked,
                                                 config.flags.freeze_segments)
                               .masked;
                }
                deltas.push_back(std::move(masked));
                weights.push_back(
                    static_cast<double>(fedcore::dataset_size(client.data)));
              }
              rounds.push_back({round_counter, dnn.dnn_id, edge_id,
                                client.client_id, loss_now,
                                client.last_grad_norm, selected});
            }

            ModelParams aggregated =
                config.flags.noisy_sigma > 0.0
                    ? fedcore::noisy_aggregate(
                          deltas, weights, config.flags.noisy_sigma,
                          mix_seed(mix_seed(config.seed, seed_stream::kNoise),
                                   static_cast<std::uint64_t>(round_counter)))
                    : fedcore::fedavg(deltas, weights);
            for (std::size_t i = 0; i < edge_params.values.size(); ++i) {
              edge_params.values[i] += aggregated.values[i];
            }

            if (config.flags.distillation && !config.road_sensors.empty()) {
              distill_round(dnn.dnn_id, edge_id, group, edge_params, round_counter);
            }

            ledger.record_bytes(dnn.dnn_id, Stage::kEdgeFl,
                                netmodel::Medium::kWireless,
                                netmodel::stage2_round_cost_bytes(card));
            ++consumed;
          }
          edge_models[dnn.dnn_id][edge_id] = edge_params;
        }
      }
      report.units_consumed[dnn.dnn_id] = consumed;
      for (int task_id : dnn.task_ids) {
        report.metric_after[task_id] =
            dnn_metric(dnn.dnn_id, edge_models.at(dnn.dnn_id).at(deployment));
      }
    }

    report.ledger_rows = ledger.rows();
    stage2_done = true;
    stage_reports.push_back(report);
    return report;
  }

  StageReport run_stage3() {
    if (!stage2_done) throw std::logic_error("stage III requires stage II");
    if (stage3_done) throw std::logic_error("stage III already ran");
    StageReport report;
    report.stage = Stage::kCloudFl;
    const int deployment = config.resolved_deployment_edge();

    for (const auto& dnn : config.graph.dnns) {
      const netmodel::CostCard& card = config.cards.at(dnn.dnn_id);
      for (int task_id : dnn.task_ids) {
        report.metric_before[task_id] =
            dnn_metric(dnn.dnn_id, edge_models.at(dnn.dnn_id).at(deployment));
      }

      std::vector<int> edge_ids;
      for (const auto& edge : config.topology.edges) edge_ids.push_back(edge.id);
      std::sort(edge_ids.begin(), edge_ids.end());

      std::vector<ModelParams> models;
      std::vector<double> weights;
      for (int e : edge_ids) {
        models.push_back(edge_models.at(dnn.dnn_id).at(e));
        double size = 0.0;
        for (int v : config.topology.vehicles_at_edge(e)) {
          size += static_cast<double>(
              fedcore::dataset_size(vehicle_data.at({dnn.dnn_id, v})));
        }
        weights.push_back(size);
      }
      double weight_total = 0.0;
      for (double w : weights) weight_total += w;
      if (weight_total <= 0.0) {
        std::fill(weights.begin(), weights.end(), 1.0);
      }

      const long long total_rounds = config.plan.units(dnn.dnn_id, Stage::kCloudFl);
      ModelParams final_params = edge_models.at(dnn.dnn_id).at(deployment);
      for (long long r = 0; r < total_rounds; ++r) {
        final_params = fedcore::fedavg(models, weights);
        ledger.record_bytes(dnn.dnn_id, Stage::kCloudFl,
                            netmodel::Medium::kWireline,
                            netmodel::stage3_round_cost_bytes(card));
      }
      report.units_consumed[dnn.dnn_id] = total_rounds;
      final_models[dnn.dnn_id] = final_params;

      ModelParams metric_model = final_params;
      if (config.flags.personalization && total_rounds > 0) {
        std::set<std::string> personal;
        for (const auto& seg : final_params.layout.segments()) {
          if (config.flags.shared_segments.count(seg.name) == 0) {
            personal.insert(seg.name);
          }
        }
        std::vector<ModelParams> deltas;
        for (std::size_t i = 0; i < edge_ids.size(); ++i) {
          ModelParams delta = fedcore::zeros_like(models[i]);
          for (std::size_t k = 0; k < delta.values.size(); ++k) {
            delta.values[k] = models[i].values[k] -
                              pretrained.at(dnn.dnn_id).values[k];
          }
          deltas.push_back(std::move(delta));
        }
        const auto result = fedcore::personalize(
            pretrained.at(dnn.dnn_id), deltas, config.flags.shared_segments,
            personal);
        for (std::size_t i = 0; i < edge_ids.size(); ++i) {
          personalized[dnn.dnn_id][edge_ids[i]] = result.per_client[i];
        }
        metric_model = personalized.at(dnn.dnn_id).at(deployment);
      }

      for (int task_id : dnn.task_ids) {
        report.metric_after[task_id] = dnn_metric(dnn.dnn_id, metric_model);
      }
    }

    report.ledger_rows = ledger.rows();
    stage3_done = true;
    stage_reports.push_back(report);
    return report;
  }

  PipelineResult collect_result() const {
    PipelineResult result;
    result.stages = stage_reports;
    result.final_models = final_models;
    result.edge_models = edge_models;
    result.personalized = personalized;
    result.rounds = rounds;
    result.requests = requests;
    result.ledger_rows = ledger.rows();
    result.used_wireless_bytes = ledger.total_used_bytes(netmodel::Medium::kWireless);
    result.used_wireline_bytes = ledger.total_used_bytes(netmodel::Medium::kWireline);
    if (!stage_reports.empty()) {
      const StageReport& last = stage_reports.back();
      result.final_metrics = last.metric_after;
    }
    for (const auto& task : config.graph.tasks) {
      auto it = result.final_metrics.find(task.task_id);
      if (it != result.final_metrics.end()) {
        result.weighted_metric += task.training_weight * it->second;
      }
    }
    return result;
  }
};

PipelineRunner::PipelineRunner(PipelineConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

PipelineRunner::~PipelineRunner() = default;

StageReport PipelineRunner::run_stage1() { return impl_->run_stage1(); }
StageReport PipelineRunner::run_stage2() { return impl_->run_stage2(); }
StageReport PipelineRunner::run_stage3() { return impl_->run_stage3(); }

PipelineResult PipelineRunner::run_all() {
  impl_->run_stage1();
  impl_->run_stage2();
  impl_->run_stage3();
  return impl_->collect_result();
}

const PipelineConfig& PipelineRunner::config() const { return impl_->config; }

}  // namespace vecfl::pipeline
