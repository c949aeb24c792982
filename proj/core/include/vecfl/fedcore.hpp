#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vecfl/learners.hpp"
#include "vecfl/model_params.hpp"
#include "vecfl/world.hpp"

namespace vecfl::fedcore {

struct ClientState {
  int client_id = 0;
  Dataset data;
  ModelParams params;
  double last_grad_norm = 0.0;
};

struct LocalUpdateResult {
  ModelParams delta;  // params_after - params_before
  double gradient_norm = 0.0;
};

// Full-batch gradient descent for `epochs` steps. Mutates the client's
// params and records the norm of the first full-batch gradient. Throws
// "diverged" on non-finite loss or gradient.
LocalUpdateResult local_update(const Learner& learner, ClientState& client,
                               int epochs, double learning_rate);

// Component-wise weighted mean with normalized weights.
ModelParams fedavg(const std::vector<ModelParams>& models,
                   const std::vector<double>& weights);

struct SelectionResult {
  std::vector<int> selected;               // client ids in draw order
  std::vector<double> draw_probabilities;  // per-draw conditional probability
  bool uniform_fallback = false;           // all norms were zero
};

// Weighted sampling without replacement, per-draw probability proportional
// to the client's last gradient norm among the remaining pool. The returned
// probabilities are the per-draw conditional probabilities (for k = 1 this
// equals the exact inclusion probability); exact joint inclusion
// probabilities of successive sampling are intractable in general.
SelectionResult select_devices(const std::vector<ClientState>& clients, int k,
                               std::uint64_t rng_seed);

// Perturbs every delta with i.i.d. zero-mean Gaussian noise per coordinate
// before weighted averaging. sigma = 0 is bit-identical to fedavg.
ModelParams noisy_aggregate(const std::vector<ModelParams>& deltas,
                            const std::vector<double>& weights,
                            double noise_sigma, std::uint64_t rng_seed);

struct FreezeResult {
  ModelParams masked;
  double transmitted_fraction = 1.0;  // (unfrozen length) / (total length)
};

// Zeroes frozen segments; the transmitted fraction scales dnn_size_mb in
// throughput accounting. Throws "nothing trainable" if every segment is
// frozen.
FreezeResult apply_freeze(const ModelParams& delta,
                          const std::set<std::string>& frozen_segments);

struct FusedBox {
  Vec2 center;
  double uncertainty = 0.0;  // (sum sigma^-2)^(-1/2) over the matched group
  double weight = 0.0;       // group precision share, sums to 1 over boxes
  int support = 0;           // number of fused detections
  int object_id = -1;        // lowest member object id
};

struct FusedOutput {
  std::vector<FusedBox> boxes;
  bool empty() const { return boxes.empty(); }
};

struct FusionConfig {
  double gate_m = 3.0;           // matching gate distance
  double road_authority = 1.0;   // precision multiplier for road agents
  std::set<int> road_agents;     // agent ids treated as road sensors
};

// Matches detections across reports greedily by nearest center within the
// gate (one detection per agent per group, ties by lowest object id) and
// fuses each group with inverse-variance weights.
FusedOutput road_average_output(const std::vector<world::DetectionReport>& reports,
                                const FusionConfig& config = {});

struct DistillResult {
  ModelParams params;
  double loss_before = 0.0;
  double loss_after = 0.0;
  int matched = 0;
  bool no_supervision = false;  // no local box matched a fused box
};

// Gradient descent on the weighted squared distance between the client's
// corrected boxes and the matched fused boxes. Matches are fixed at entry
// (targets are static during the descent).
DistillResult distill_update(const BoxPoseLearner& learner,
                             const ClientState& client,
                             const world::DetectionReport& local_report,
                             const FusedOutput& fused, int steps,
                             double learning_rate, double gate_m = 3.0);

struct PersonalizeResult {
  std::vector<ModelParams> per_client;
  ModelParams shared;
};

// Shared segments aggregate by (uniform) fedavg across clients; personal
// segments keep each client's own values. shared and personal must
// partition the layout's segments.
PersonalizeResult personalize(const ModelParams& global,
                              const std::vector<ModelParams>& client_deltas,
                              const std::set<std::string>& shared_segments,
                              const std::set<std::string>& personal_segments);

}  // namespace vecfl::fedcore
