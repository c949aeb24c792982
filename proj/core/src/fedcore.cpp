#include "vecfl/fedcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "vecfl/rng.hpp"

namespace vecfl::fedcore {

namespace {

double l2_norm(const std::vector<double>& v) {
  double total = 0.0;
  for (double x : v) total += x * x;
  return std::sqrt(total);
}

bool all_finite(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

LocalUpdateResult local_update(const Learner& learner, ClientState& client,
                               int epochs, double learning_rate) {
  if (epochs < 1) throw std::invalid_argument("local_update: epochs must be >= 1");
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("local_update: learning_rate must be > 0");
  }
  const ModelParams before = client.params;
  double first_norm = 0.0;
  for (int e = 0; e < epochs; ++e) {
    const std::vector<double> grad = learner.gradient(client.params, client.data);
    if (!all_finite(grad) ||
        !std::isfinite(learner.loss(client.params, client.data))) {
      throw std::runtime_error("diverged");
    }
    if (e == 0) first_norm = l2_norm(grad);
    for (std::size_t i = 0; i < grad.size(); ++i) {
      client.params.values[i] -= learning_rate * grad[i];
    }
  }
  client.last_grad_norm = first_norm;

  LocalUpdateResult result;
  result.delta = zeros_like(before);
  for (std::size_t i = 0; i < before.values.size(); ++i) {
    result.delta.values[i] = client.params.values[i] - before.values[i];
  }
  result.gradient_norm = first_norm;
  return result;
}

ModelParams fedavg(const std::vector<ModelParams>& models,
                   const std::vector<double>& weights) {
  if (models.empty()) throw std::invalid_argument("fedavg: no models");
  if (models.size() != weights.size()) {
    throw std::invalid_argument("fedavg: weight count mismatch");
  }
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("fedavg: negative weight");
    total += w;
  }
  if (!(total > 0.0)) throw std::invalid_argument("fedavg: weights sum to zero");
  for (const auto& m : models) {
    if (!m.same_layout(models.front())) {
      throw std::invalid_argument("fedavg: layout mismatch");
    }
  }
  ModelParams out = zeros_like(models.front());
  for (std::size_t m = 0; m < models.size(); ++m) {
    const double w = weights[m] / total;
    for (std::size_t i = 0; i < out.values.size(); ++i) {
      out.values[i] += w * models[m].values[i];
    }
  }
  return out;
}

SelectionResult select_devices(const std::vector<ClientState>& clients, int k,
                               std::uint64_t rng_seed) {
  const int n = static_cast<int>(clients.size());
  if (k < 1 || k > n) {
    throw std::invalid_argument("select_devices: need 1 <= k <= |clients|");
  }
  SelectionResult result;
  std::vector<double> weights(clients.size());
  double total = 0.0;
  for (std::size_t i = 0; i < clients.size(); ++i) {
    if (clients[i].last_grad_norm < 0.0) {
      throw std::invalid_argument("select_devices: negative gradient norm");
    }
    weights[i] = clients[i].last_grad_norm;
    total += weights[i];
  }
  if (total <= 0.0) {
    result.uniform_fallback = true;
    std::fill(weights.begin(), weights.end(), 1.0);
  }

  Rng rng(rng_seed);
  std::vector<std::size_t> pool(clients.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  std::vector<double> pool_weights = weights;
  for (int draw = 0; draw < k; ++draw) {
    const std::size_t pick = rng.weighted_index(pool_weights);
    double remaining = 0.0;
    for (double w : pool_weights) remaining += w;
    result.selected.push_back(clients[pool[pick]].client_id);
    result.draw_probabilities.push_back(pool_weights[pick] / remaining);
    pool.erase(pool.begin() + pick);
    pool_weights.erase(pool_weights.begin() + pick);
  }
  return result;
}

ModelParams noisy_aggregate(const std::vector<ModelParams>& deltas,
                            const std::vector<double>& weights,
                            double noise_sigma, std::uint64_t rng_seed) {
  if (noise_sigma < 0.0) {
    throw std::invalid_argument("noisy_aggregate: noise_sigma must be >= 0");
  }
  if (noise_sigma == 0.0) return fedavg(deltas, weights);
  std::vector<ModelParams> noisy = deltas;
  Rng rng(rng_seed);
  for (auto& delta : noisy) {
    for (double& v : delta.values) {
      v += rng.normal(0.0, noise_sigma);
    }
  }
  return fedavg(noisy, weights);
}

FreezeResult apply_freeze(const ModelParams& delta,
                          const std::set<std::string>& frozen_segments) {
  for (const auto& name : frozen_segments) {
    if (!delta.layout.has_segment(name)) {
      throw std::invalid_argument("apply_freeze: unknown segment " + name);
    }
  }
  std::size_t frozen_length = 0;
  FreezeResult result;
  result.masked = delta;
  for (const auto& seg : delta.layout.segments()) {
    if (frozen_segments.count(seg.name) == 0) continue;
    frozen_length += seg.length();
    for (std::size_t i = seg.begin; i < seg.end; ++i) {
      result.masked.values[i] = 0.0;
    }
  }
  const std::size_t total = delta.layout.total();
  if (frozen_length >= total) throw std::runtime_error("nothing trainable");
  result.transmitted_fraction =
      static_cast<double>(total - frozen_length) / static_cast<double>(total);
  return result;
}

FusedOutput road_average_output(const std::vector<world::DetectionReport>& reports,
                                const FusionConfig& config) {
  if (reports.empty()) {
    throw std::invalid_argument("road_average_output: need >= 1 report");
  }

  struct Member {
    Vec2 center;
    double sigma;
    double precision;  // possibly authority-boosted
    int object_id;
  };
  struct Group {
    Vec2 seed_center;
    int min_object_id = std::numeric_limits<int>::max();
    std::vector<Member> members;
    std::set<int> agents;
  };

  std::vector<Group> groups;
  for (const auto& report : reports) {
    const bool is_road = config.road_agents.count(report.agent_id) > 0;
    for (const auto& det : report.detected) {
      if (!(det.uncertainty > 0.0)) {
        throw std::invalid_argument("road_average_output: uncertainty must be > 0");
      }
      Member member;
      member.center = det.detected_center;
      member.sigma = det.uncertainty;
      member.precision = 1.0 / (det.uncertainty * det.uncertainty);
      if (is_road) member.precision *= config.road_authority;
      member.object_id = det.object_id;

      int best = -1;
      double best_dist = config.gate_m;
      int best_obj = std::numeric_limits<int>::max();
      for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].agents.count(report.agent_id) > 0) continue;
        const double d = distance(det.detected_center, groups[g].seed_center);
        if (d > config.gate_m) continue;
        if (d < best_dist - 1e-12 ||
            (std::abs(d - best_dist) <= 1e-12 &&
             groups[g].min_object_id < best_obj)) {
          best = static_cast<int>(g);
          best_dist = d;
          best_obj = groups[g].min_object_id;
        }
      }
      if (best < 0) {
        Group group;
        group.seed_center = det.detected_center;
        group.min_object_id = det.object_id;
        group.members.push_back(member);
        group.agents.insert(report.agent_id);
        groups.push_back(std::move(group));
      } else {
        groups[best].members.push_back(member);
        groups[best].agents.insert(report.agent_id);
        groups[best].min_object_id =
            std::min(groups[best].min_object_id, det.object_id);
      }
    }
  }

  FusedOutput output;
  double total_precision = 0.0;
  for (const auto& group : groups) {
    FusedBox box;
    double precision_sum = 0.0;       // authority-weighted, for the center
    double raw_precision_sum = 0.0;   // physical, for the fused uncertainty
    Vec2 weighted;
    for (const auto& m : group.members) {
      precision_sum += m.precision;
      raw_precision_sum += 1.0 / (m.sigma * m.sigma);
      weighted = weighted + m.center * m.precision;
    }
    box.center = weighted * (1.0 / precision_sum);
    box.uncertainty = 1.0 / std::sqrt(raw_precision_sum);
    box.weight = precision_sum;
    box.support = static_cast<int>(group.members.size());
    box.object_id = group.min_object_id;
    total_precision += precision_sum;
    output.boxes.push_back(box);
  }
  for (auto& box : output.boxes) box.weight /= total_precision;
  std::sort(output.boxes.begin(), output.boxes.end(),
            [](const FusedBox& a, const FusedBox& b) {
              if (a.object_id != b.object_id) return a.object_id < b.object_id;
              if (a.center.x != b.center.x) return a.center.x < b.center.x;
              return a.center.y < b.center.y;
            });
  return output;
}

DistillResult distill_update(const BoxPoseLearner& learner,
                             const ClientState& client,
                             const world::DetectionReport& local_report,
                             const FusedOutput& fused, int steps,
                             double learning_rate, double gate_m) {
  if (fused.empty()) {
    throw std::invalid_argument("distill_update: fused output is empty");
  }
  if (steps < 0) throw std::invalid_argument("distill_update: steps must be >= 0");

  DistillResult result;
  result.params = client.params;

  // Match local boxes to fused boxes once, with the entry parameters;
  // one fused box per local detection.
  struct Pair {
    Vec2 observed;
    Vec2 target;
    double weight;
  };
  std::vector<Pair> pairs;
  std::vector<bool> used(fused.boxes.size(), false);
  for (const auto& det : local_report.detected) {
    const Vec2 pred = learner.predict(client.params, det.detected_center);
    int best = -1;
    double best_dist = gate_m;
    int best_obj = std::numeric_limits<int>::max();
    for (std::size_t f = 0; f < fused.boxes.size(); ++f) {
      if (used[f]) continue;
      const double d = distance(pred, fused.boxes[f].center);
      if (d > gate_m) continue;
      if (d < best_dist - 1e-12 ||
          (std::abs(d - best_dist) <= 1e-12 &&
           fused.boxes[f].object_id < best_obj)) {
        best = static_cast<int>(f);
        best_dist = d;
        best_obj = fused.boxes[f].object_id;
      }
    }
    if (best >= 0) {
      used[best] = true;
      pairs.push_back({det.detected_center, fused.boxes[best].center,
                       fused.boxes[best].weight});
    }
  }

  if (pairs.empty()) {
    result.no_supervision = true;
    return result;
  }
  result.matched = static_cast<int>(pairs.size());

  const auto distill_loss = [&](const ModelParams& params) {
    double total = 0.0;
    for (const auto& p : pairs) {
      const Vec2 r = learner.predict(params, p.observed) - p.target;
      total += p.weight * r.norm2();
    }
    return total;
  };

  result.loss_before = distill_loss(result.params);
  for (int s = 0; s < steps; ++s) {
    std::vector<double> grad(result.params.values.size(), 0.0);
    for (const auto& p : pairs) {
      const auto phi = learner.basis(p.observed);
      const Vec2 r = learner.predict(result.params, p.observed) - p.target;
      for (std::size_t j = 0; j < BoxPoseLearner::kBasisDim; ++j) {
        grad[2 * j] += 2.0 * p.weight * r.x * phi[j];
        grad[2 * j + 1] += 2.0 * p.weight * r.y * phi[j];
      }
    }
    for (std::size_t i = 0; i < grad.size(); ++i) {
      result.params.values[i] -= learning_rate * grad[i];
    }
  }
  result.loss_after = distill_loss(result.params);
  return result;
}

PersonalizeResult personalize(const ModelParams& global,
                              const std::vector<ModelParams>& client_deltas,
                              const std::set<std::string>& shared_segments,
                              const std::set<std::string>& personal_segments) {
  if (client_deltas.empty()) {
    throw std::invalid_argument("personalize: no clients");
  }
  for (const auto& name : shared_segments) {
    if (personal_segments.count(name) > 0) {
      throw std::invalid_argument("personalize: segment in both sets: " + name);
    }
  }
  for (const auto& seg : global.layout.segments()) {
    const bool in_shared = shared_segments.count(seg.name) > 0;
    const bool in_personal = personal_segments.count(seg.name) > 0;
    if (!in_shared && !in_personal) {
      throw std::invalid_argument("personalize: segment not covered: " + seg.name);
    }
  }
  for (const auto& delta : client_deltas) {
    if (!delta.same_layout(global)) {
      throw std::invalid_argument("personalize: layout mismatch");
    }
  }

  const std::vector<double> uniform(client_deltas.size(), 1.0);
  const ModelParams mean_delta = fedavg(client_deltas, uniform);

  PersonalizeResult result;
  result.shared = global;
  for (const auto& seg : global.layout.segments()) {
    if (shared_segments.count(seg.name) == 0) continue;
    for (std::size_t i = seg.begin; i < seg.end; ++i) {
      result.shared.values[i] += mean_delta.values[i];
    }
  }
  for (const auto& delta : client_deltas) {
    ModelParams client = result.shared;
    for (const auto& seg : global.layout.segments()) {
      if (personal_segments.count(seg.name) == 0) continue;
      for (std::size_t i = seg.begin; i < seg.end; ++i) {
        client.values[i] = global.values[i] + delta.values[i];
      }
    }
    result.per_client.push_back(std::move(client));
  }
  return result;
}

}  // namespace vecfl::fedcore
