#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vecfl/learners.hpp"
#include "vecfl/netmodel.hpp"
#include "vecfl/predictor.hpp"

namespace vecfl::mlgra {

// Clustering key: tasks with matching signatures share a DNN (one trunk,
// one header per task).
struct TaskSignature {
  std::string modality;
  std::string output_kind;

  bool operator==(const TaskSignature&) const = default;
  // Fraction of matching fields in [0, 1].
  double similarity(const TaskSignature& other) const;
};

struct StagePredictorSet {
  std::optional<predictor::PowerLawPredictor> stage1;  // samples
  std::optional<predictor::PowerLawPredictor> stage2;  // rounds
  std::optional<predictor::PowerLawPredictor> stage3;  // rounds

  const std::optional<predictor::PowerLawPredictor>& for_stage(
      netmodel::Stage stage) const;
  // Accuracy ceiling: asymptote of the last configured stage.
  double ceiling() const;
};

struct TaskSpec {
  int task_id = 0;
  std::string name;
  double training_weight = 1.0;  // > 0, layer-1 edge weight
  TaskSignature signature;
  fedcore::TaskKind learner_kind = fedcore::TaskKind::kRegression;
  double sample_size_mb = 1.0;
  double dnn_size_mb = 1.0;
  StagePredictorSet predictors;
};

struct DnnNode {
  int dnn_id = 0;
  TaskSignature signature;
  std::vector<int> task_ids;
  double weight_sum = 0.0;
};

// Layer-2 edge: DNN -> data modality, carrying the training parameters.
struct Layer2Edge {
  int dnn_id = 0;
  std::string modality;
  double sample_size_mb = 1.0;
  double dnn_size_mb = 1.0;
  StagePredictorSet predictors;
};

// Layer-3 edge: modality -> vehicle, carrying throughput and data quality.
struct VehicleLink {
  std::string modality;
  int vehicle_id = 0;
  double throughput_mb = 0.0;
  double data_quality = 1.0;
};

struct MultiLayerGraph {
  std::vector<TaskSpec> tasks;
  std::vector<DnnNode> dnns;
  std::vector<Layer2Edge> dnn_modality;
  std::vector<VehicleLink> modality_vehicles;

  void validate() const;
  const DnnNode& dnn_of_task(int task_id) const;
  const Layer2Edge& edge_of_dnn(int dnn_id) const;
  const TaskSpec& task(int task_id) const;
};

// Tasks with signature similarity >= threshold against a cluster's
// representative share that cluster's DNN; threshold 1 means identical
// signatures only. Throws when a task declares no modality.
MultiLayerGraph build_graph(const std::vector<TaskSpec>& tasks,
                            const std::vector<VehicleLink>& vehicles = {},
                            double similarity_threshold = 1.0);

struct PlanCell {
  int dnn_id = 0;
  netmodel::Stage stage = netmodel::Stage::kPretrain;
  long long units = 0;
  std::int64_t wireless_bytes = 0;
  std::int64_t wireline_bytes = 0;
};

struct AllocationPlan {
  std::vector<PlanCell> cells;  // sorted by (dnn, stage)
  netmodel::Allocation allocation;
  double objective = 0.0;
  std::map<int, double> predicted_accuracy;  // per dnn

  long long units(int dnn_id, netmodel::Stage stage) const;
};

// Accuracy composition across stages: stage-I value plus stage-II/III
// power-law increments, capped at the ceiling. Separable and concave in the
// three unit counts, which is what makes greedy allocation near-optimal.
double composed_accuracy(const StagePredictorSet& predictors, long long n1,
                         long long r2, long long r3);

// Greedy marginal-gain allocation: repeatedly grant one resource unit to
// the (dnn, stage) with the best weight-scaled accuracy gain per MB of its
// binding medium, until no unit fits any remaining budget; a 1-swap polish
// pass follows. Ties break by (dnn id, stage order I < II < III).
AllocationPlan allocate(const MultiLayerGraph& graph,
                        const netmodel::ResourceBudget& budget,
                        const std::map<int, netmodel::CostCard>& cards);

// Budget split uniformly across (task, stage, medium) cells regardless of
// whether the stage can use the medium; the implied allocation keeps only
// what the granted units consume.
AllocationPlan equal_allocation(const MultiLayerGraph& graph,
                                const netmodel::ResourceBudget& budget,
                                const std::map<int, netmodel::CostCard>& cards);

struct VehicleShard {
  int vehicle_id = 0;
  fedcore::Dataset shard;
};

struct ScoreResult {
  std::map<int, double> scores;  // normalized, sum 1
  bool uniform_fallback = false; // no validation set available
};

struct ProbeRecipe {
  int epochs = 120;
  double learning_rate = 0.3;
};

// Data-quality scores: metric gain of adding each vehicle's shard to a fixed
// probe training set, clipped at zero and normalized.
ScoreResult score_vehicles(const std::string& modality,
                           const std::vector<VehicleShard>& vehicles,
                           const fedcore::Learner& learner,
                           const fedcore::Dataset& probe_train,
                           const std::optional<fedcore::Dataset>& validation,
                           const ProbeRecipe& recipe = {});

std::string to_json(const AllocationPlan& plan, const MultiLayerGraph& graph,
                    const std::string& config_hash = "");
std::string to_csv(const AllocationPlan& plan, const MultiLayerGraph& graph);

}  // namespace vecfl::mlgra
