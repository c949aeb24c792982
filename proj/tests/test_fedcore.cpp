#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "support/oracles.hpp"
#include "vecfl/fedcore.hpp"
#include "vecfl/rng.hpp"
#include "vecfl/synthetic.hpp"

using namespace vecfl;
using namespace vecfl::fedcore;

namespace {

// Minimal 1D quadratic task for the local_update contract: loss (w - 3)^2.
class QuadLearner : public Learner {
 public:
  TaskKind kind() const override { return TaskKind::kRegression; }
  ModelParams init_params() const override {
    ModelParams p;
    p.layout = ParamLayout::from_segments({{"w", 0, 1}});
    p.values = {0.0};
    return p;
  }
  double loss(const ModelParams& params, const Dataset&) const override {
    const double w = params.values[0];
    return (w - 3.0) * (w - 3.0);
  }
  std::vector<double> gradient(const ModelParams& params,
                               const Dataset&) const override {
    return {2.0 * (params.values[0] - 3.0)};
  }
  double metric(const ModelParams&, const Dataset&) const override { return 0.0; }
};

ModelParams make_params(std::vector<double> values) {
  ModelParams p;
  p.layout = ParamLayout::from_segments({{"all", 0, values.size()}});
  p.values = std::move(values);
  return p;
}

RegressionData canonical_data(std::size_t n, std::uint64_t seed,
                              double noise = 0.25) {
  synthetic::DistortionField field;  // defaults span [0,200] x [0,80]
  return synthetic::make_regression_data(
      n, Rect{{0.0, 0.0}, {200.0, 80.0}}, field, noise, seed);
}

world::DetectionReport report_with(int agent,
                                   std::vector<world::Detection> detections) {
  world::DetectionReport report;
  report.agent_id = agent;
  report.detected = std::move(detections);
  return report;
}

}  // namespace

TEST_CASE("local_update: fixed point at the optimum") {
  BoxPoseLearner learner;
  // truth == observed everywhere -> zero correction is optimal
  RegressionData data;
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const Vec2 p{rng.uniform(0.0, 200.0), rng.uniform(0.0, 80.0)};
    data.observed.push_back(p);
    data.truth.push_back(p);
  }
  ClientState client{0, data, learner.init_params(), 0.0};
  const auto result = local_update(learner, client, 3, 0.1);
  CHECK(result.gradient_norm == doctest::Approx(0.0).epsilon(1e-12));
  for (double v : result.delta.values) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("local_update: 1D quadratic single step") {
  QuadLearner learner;
  ClientState client{0, RegressionData{}, learner.init_params(), 0.0};
  const auto result = local_update(learner, client, 1, 0.25);
  CHECK(result.delta.values[0] == doctest::Approx(1.5));  // -lr * (-6)
  CHECK(result.gradient_norm == doctest::Approx(6.0));
  CHECK(client.params.values[0] == doctest::Approx(1.5));
  CHECK(client.last_grad_norm == doctest::Approx(6.0));
}

TEST_CASE("local_update: diverged on non-finite parameters") {
  BoxPoseLearner learner;
  ClientState client{0, canonical_data(20, 1), learner.init_params(), 0.0};
  client.params.values[0] = 1e300;
  client.params.values[2] = 1e300;
  CHECK_THROWS_WITH_AS(local_update(learner, client, 5, 1e280),
                       doctest::Contains("diverged"), std::runtime_error);
}

TEST_CASE("gradients match central finite differences") {
  BoxPoseLearner regression;
  const Dataset reg_data = canonical_data(40, 7);
  ClusterClassLearner classifier;
  const Dataset cls_data = synthetic::make_classification_data(
      60, {0, 1, 2, 3}, 4, 3, 0.6, 21);

  Rng rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    ModelParams p = regression.init_params();
    for (double& v : p.values) v = rng.uniform(-0.5, 0.5);
    const auto analytic = regression.gradient(p, reg_data);
    const auto numeric = oracles::finite_difference_gradient(
        [&](const std::vector<double>& x) {
          ModelParams q = p;
          q.values = x;
          return regression.loss(q, reg_data);
        },
        p.values);
    CHECK(oracles::max_relative_error(analytic, numeric) < 1e-6);

    ModelParams w = classifier.init_params();
    for (double& v : w.values) v = rng.uniform(-0.5, 0.5);
    const auto analytic_cls = classifier.gradient(w, cls_data);
    const auto numeric_cls = oracles::finite_difference_gradient(
        [&](const std::vector<double>& x) {
          ModelParams q = w;
          q.values = x;
          return classifier.loss(q, cls_data);
        },
        w.values);
    CHECK(oracles::max_relative_error(analytic_cls, numeric_cls) < 1e-6);
  }
}

TEST_CASE("fedavg: identity, symmetry, weighted mean") {
  const ModelParams single = make_params({1.0, -2.0, 3.0});
  const ModelParams out = fedavg({single}, {1.0});
  CHECK(out.values == single.values);

  const auto mid = fedavg({make_params({0.0, 2.0}), make_params({2.0, 0.0})},
                          {1.0, 1.0});
  CHECK(mid.values[0] == doctest::Approx(1.0));
  CHECK(mid.values[1] == doctest::Approx(1.0));

  const auto weighted =
      fedavg({make_params({4.0}), make_params({0.0})}, {0.75, 0.25});
  CHECK(weighted.values[0] == doctest::Approx(3.0));
}

TEST_CASE("fedavg: idempotent on copies and invariant to weight scaling") {
  const ModelParams base = make_params({0.5, -1.5, 2.5, 7.0});
  const auto copies = fedavg({base, base, base}, {1.0, 1.0, 1.0});
  for (std::size_t i = 0; i < base.values.size(); ++i) {
    CHECK(copies.values[i] == doctest::Approx(base.values[i]));
  }
  const auto a = fedavg({make_params({1.0}), make_params({5.0})}, {0.2, 0.6});
  const auto b = fedavg({make_params({1.0}), make_params({5.0})}, {2.0, 6.0});
  CHECK(a.values[0] == doctest::Approx(b.values[0]));
}

TEST_CASE("fedavg: layout mismatch rejected") {
  ModelParams a = make_params({1.0, 2.0});
  ModelParams b;
  b.layout = ParamLayout::from_segments({{"x", 0, 1}, {"y", 1, 2}});
  b.values = {1.0, 2.0};
  CHECK_THROWS_AS(fedavg({a, b}, {1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(fedavg({a, a}, {0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("select_devices: degenerate mass always picks the heavy client") {
  std::vector<ClientState> clients(2);
  clients[0] = {10, RegressionData{}, make_params({0.0}), 0.0};
  clients[1] = {11, RegressionData{}, make_params({0.0}), 5.0};
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto result = select_devices(clients, 1, seed);
    REQUIRE(result.selected.size() == 1);
    CHECK(result.selected[0] == 11);
    CHECK(result.draw_probabilities[0] == doctest::Approx(1.0));
    CHECK(!result.uniform_fallback);
  }
}

TEST_CASE("select_devices: norm-proportional frequency over 1e5 trials") {
  std::vector<ClientState> clients(2);
  clients[0] = {0, RegressionData{}, make_params({0.0}), 3.0};
  clients[1] = {1, RegressionData{}, make_params({0.0}), 1.0};
  int first = 0;
  const int trials = 100000;
  for (int t = 0; t < trials; ++t) {
    const auto result = select_devices(clients, 1, mix_seed(900, t));
    if (result.selected[0] == 0) ++first;
    CHECK(result.draw_probabilities[0] ==
          doctest::Approx(result.selected[0] == 0 ? 0.75 : 0.25));
  }
  CHECK(std::abs(first / static_cast<double>(trials) - 0.75) < 0.01);
}

TEST_CASE("select_devices: equal norms give uniform inclusion, no repeats") {
  std::vector<ClientState> clients(4);
  for (int i = 0; i < 4; ++i) {
    clients[i] = {i, RegressionData{}, make_params({0.0}), 2.0};
  }
  std::map<int, int> inclusion;
  const int trials = 100000;
  for (int t = 0; t < trials; ++t) {
    const auto result = select_devices(clients, 2, mix_seed(901, t));
    REQUIRE(result.selected.size() == 2);
    CHECK(result.selected[0] != result.selected[1]);
    for (int id : result.selected) inclusion[id]++;
  }
  for (const auto& [id, count] : inclusion) {
    CHECK(std::abs(count / static_cast<double>(trials) - 0.5) < 0.01);
  }
}

TEST_CASE("select_devices: all-zero norms fall back to uniform") {
  std::vector<ClientState> clients(3);
  for (int i = 0; i < 3; ++i) {
    clients[i] = {i, RegressionData{}, make_params({0.0}), 0.0};
  }
  const auto result = select_devices(clients, 2, 5);
  CHECK(result.uniform_fallback);
  CHECK(result.selected.size() == 2);
  CHECK_THROWS_AS(select_devices(clients, 0, 5), std::invalid_argument);
  CHECK_THROWS_AS(select_devices(clients, 4, 5), std::invalid_argument);
}

TEST_CASE("noisy_aggregate: sigma zero is bit-identical to fedavg") {
  const std::vector<ModelParams> deltas = {make_params({1.0, 2.0, 3.0}),
                                           make_params({-1.0, 0.5, 9.0})};
  const std::vector<double> weights = {2.0, 1.0};
  const auto plain = fedavg(deltas, weights);
  const auto noisy = noisy_aggregate(deltas, weights, 0.0, 77);
  CHECK(plain.values == noisy.values);
}

TEST_CASE("noisy_aggregate: unbiased with variance sigma^2 / m") {
  const int m = 4;
  const double sigma = 0.8;
  std::vector<ModelParams> deltas;
  std::vector<double> weights;
  for (int i = 0; i < m; ++i) {
    deltas.push_back(make_params({1.0, -2.0, 0.5, 3.0}));
    weights.push_back(1.0);
  }
  const auto clean = fedavg(deltas, weights);

  const int reps = 10000;
  const std::size_t dim = clean.values.size();
  std::vector<double> sum(dim, 0.0), sum_sq(dim, 0.0);
  for (int rep = 0; rep < reps; ++rep) {
    const auto out = noisy_aggregate(deltas, weights, sigma, mix_seed(321, rep));
    for (std::size_t i = 0; i < dim; ++i) {
      const double centered = out.values[i] - clean.values[i];
      sum[i] += centered;
      sum_sq[i] += centered * centered;
    }
  }
  // pooled variance over coordinates within 5% relative of sigma^2 / m
  double pooled = 0.0;
  for (std::size_t i = 0; i < dim; ++i) pooled += sum_sq[i] / reps;
  pooled /= static_cast<double>(dim);
  CHECK(std::abs(pooled - sigma * sigma / m) < 0.05 * sigma * sigma / m);
  // empirical mean within 3 sigma / sqrt(reps * m) per coordinate
  const double tolerance = 3.0 * sigma / std::sqrt(static_cast<double>(reps) * m);
  for (std::size_t i = 0; i < dim; ++i) {
    CHECK(std::abs(sum[i] / reps) < tolerance);
  }
}

TEST_CASE("apply_freeze: fractions and masking") {
  ModelParams delta;
  delta.layout = ParamLayout::from_segments({{"feature", 0, 8}, {"head", 8, 10}});
  delta.values = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};

  const auto none = apply_freeze(delta, {});
  CHECK(none.transmitted_fraction == doctest::Approx(1.0));
  CHECK(none.masked.values == delta.values);

  const auto frozen = apply_freeze(delta, {"feature"});
  CHECK(frozen.transmitted_fraction == doctest::Approx(0.2));
  for (int i = 0; i < 8; ++i) CHECK(frozen.masked.values[i] == 0.0);
  CHECK(frozen.masked.values[8] == doctest::Approx(9.0));

  CHECK_THROWS_WITH_AS(apply_freeze(delta, {"feature", "head"}),
                       doctest::Contains("nothing trainable"),
                       std::runtime_error);
  CHECK_THROWS_AS(apply_freeze(delta, {"bogus"}), std::invalid_argument);
}

TEST_CASE("apply_freeze then fedavg equals fedavg of masked deltas") {
  ModelParams a;
  a.layout = ParamLayout::from_segments({{"feature", 0, 2}, {"head", 2, 4}});
  a.values = {1.0, 2.0, 3.0, 4.0};
  ModelParams b = a;
  b.values = {5.0, -2.0, 1.0, 0.0};
  const std::set<std::string> frozen = {"feature"};
  const auto left = apply_freeze(fedavg({a, b}, {1.0, 3.0}), frozen).masked;
  const auto right = fedavg({apply_freeze(a, frozen).masked,
                             apply_freeze(b, frozen).masked},
                            {1.0, 3.0});
  for (std::size_t i = 0; i < left.values.size(); ++i) {
    CHECK(left.values[i] == doctest::Approx(right.values[i]));
  }
}

TEST_CASE("road_average_output: symmetric fusion of equal uncertainties") {
  FusionConfig config;
  config.gate_m = 20.0;
  const auto fused = road_average_output(
      {report_with(0, {{7, {0.0, 0.0}, 1.0}}),
       report_with(1, {{7, {2.0, 2.0}, 1.0}})},
      config);
  REQUIRE(fused.boxes.size() == 1);
  CHECK(fused.boxes[0].center.x == doctest::Approx(1.0));
  CHECK(fused.boxes[0].center.y == doctest::Approx(1.0));
  CHECK(fused.boxes[0].support == 2);
  CHECK(fused.boxes[0].uncertainty ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("road_average_output: inverse-variance limit") {
  FusionConfig config;
  config.gate_m = 20.0;
  const auto fused = road_average_output(
      {report_with(0, {{3, {0.0, 0.0}, 1.0}}),
       report_with(1, {{3, {9.0, 9.0}, 1000.0}})},
      config);
  REQUIRE(fused.boxes.size() == 1);
  CHECK(std::abs(fused.boxes[0].center.x) < 1e-4);
  CHECK(std::abs(fused.boxes[0].center.y) < 1e-4);
}

TEST_CASE("road_average_output: single report is the identity") {
  const auto fused = road_average_output(
      {report_with(4, {{0, {1.0, 2.0}, 0.5}, {1, {40.0, 2.0}, 0.25}})});
  REQUIRE(fused.boxes.size() == 2);
  CHECK(fused.boxes[0].center.x == doctest::Approx(1.0));
  CHECK(fused.boxes[0].uncertainty == doctest::Approx(0.5));
  CHECK(fused.boxes[1].center.x == doctest::Approx(40.0));
  double weight_sum = 0.0;
  for (const auto& box : fused.boxes) weight_sum += box.weight;
  CHECK(weight_sum == doctest::Approx(1.0));
}

TEST_CASE("road_average_output: fused uncertainty never exceeds the best input") {
  Rng rng(55);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<world::DetectionReport> reports;
    double best_sigma = 1e9;
    for (int agent = 0; agent < 4; ++agent) {
      const double sigma = rng.uniform(0.1, 2.0);
      best_sigma = std::min(best_sigma, sigma);
      reports.push_back(report_with(
          agent, {{0,
                   {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)},
                   sigma}}));
    }
    const auto fused = road_average_output(reports);
    REQUIRE(fused.boxes.size() == 1);
    CHECK(fused.boxes[0].uncertainty <= best_sigma + 1e-12);
  }
}

TEST_CASE("road_average_output: fusion is order-invariant across reports") {
  std::vector<world::DetectionReport> reports = {
      report_with(0, {{0, {0.1, 0.0}, 0.4}, {1, {30.0, 1.0}, 0.3}}),
      report_with(1, {{0, {-0.2, 0.3}, 0.8}}),
      report_with(2, {{1, {30.4, 0.6}, 0.5}})};
  const auto forward = road_average_output(reports);
  std::reverse(reports.begin(), reports.end());
  const auto backward = road_average_output(reports);
  REQUIRE(forward.boxes.size() == backward.boxes.size());
  for (std::size_t i = 0; i < forward.boxes.size(); ++i) {
    CHECK(forward.boxes[i].center.x ==
          doctest::Approx(backward.boxes[i].center.x).epsilon(1e-12));
    CHECK(forward.boxes[i].uncertainty ==
          doctest::Approx(backward.boxes[i].uncertainty).epsilon(1e-12));
  }
}

TEST_CASE("road_average_output: road authority shifts centers toward road boxes") {
  FusionConfig config;
  config.gate_m = 10.0;
  config.road_agents = {100};
  const std::vector<world::DetectionReport> reports = {
      report_with(100, {{0, {0.0, 0.0}, 0.5}}),
      report_with(1, {{0, {2.0, 0.0}, 0.5}})};
  const auto neutral = road_average_output(reports, config);
  config.road_authority = 9.0;
  const auto boosted = road_average_output(reports, config);
  CHECK(neutral.boxes[0].center.x == doctest::Approx(1.0));
  CHECK(boosted.boxes[0].center.x == doctest::Approx(0.2));
  // physical uncertainty is unchanged by the authority multiplier
  CHECK(boosted.boxes[0].uncertainty ==
        doctest::Approx(neutral.boxes[0].uncertainty));
}

TEST_CASE("distill_update: fixed point when local boxes equal fused boxes") {
  BoxPoseLearner learner;
  ClientState client{0, RegressionData{}, learner.init_params(), 0.0};
  world::DetectionReport report =
      report_with(0, {{0, {50.0, 40.0}, 0.5}, {1, {120.0, 30.0}, 0.5}});
  FusedOutput fused;
  // zero-correction model predicts the observed centers exactly
  fused.boxes.push_back({{50.0, 40.0}, 0.3, 0.5, 2, 0});
  fused.boxes.push_back({{120.0, 30.0}, 0.3, 0.5, 2, 1});
  const auto result = distill_update(learner, client, report, fused, 50, 0.05);
  CHECK(result.loss_before == doctest::Approx(0.0));
  CHECK(result.loss_after == doctest::Approx(0.0));
  for (std::size_t i = 0; i < result.params.values.size(); ++i) {
    CHECK(result.params.values[i] == doctest::Approx(client.params.values[i]));
  }
}

TEST_CASE("distill_update: descent on an offset target") {
  BoxPoseLearner learner;
  ClientState client{0, RegressionData{}, learner.init_params(), 0.0};
  world::DetectionReport report =
      report_with(0, {{0, {60.0, 40.0}, 0.5}, {1, {140.0, 44.0}, 0.5}});
  FusedOutput fused;
  fused.boxes.push_back({{58.7, 40.6}, 0.3, 0.5, 3, 0});
  fused.boxes.push_back({{141.2, 43.1}, 0.3, 0.5, 3, 1});
  const auto result = distill_update(learner, client, report, fused, 50, 0.02);
  CHECK(result.matched == 2);
  CHECK(result.loss_before > 0.0);
  CHECK(result.loss_after < result.loss_before);
}

TEST_CASE("distill_update: gradient step matches finite differences") {
  BoxPoseLearner learner;
  ClientState client{0, RegressionData{}, learner.init_params(), 0.0};
  Rng rng(17);
  for (double& v : client.params.values) v = rng.uniform(-0.2, 0.2);
  world::DetectionReport report =
      report_with(0, {{0, {60.0, 40.0}, 0.5}, {1, {140.0, 44.0}, 0.5}});
  FusedOutput fused;
  fused.boxes.push_back({{58.0, 41.0}, 0.3, 0.6, 3, 0});
  fused.boxes.push_back({{142.0, 43.0}, 0.3, 0.4, 3, 1});

  // Reconstruct the matched pairs exactly as distill_update fixes them, then
  // check one descent step against the finite-difference gradient.
  const auto pairs_loss = [&](const std::vector<double>& values) {
    ModelParams p = client.params;
    p.values = values;
    double total = 0.0;
    for (std::size_t i = 0; i < report.detected.size(); ++i) {
      const Vec2 pred = learner.predict(p, report.detected[i].detected_center);
      const Vec2 r = pred - fused.boxes[i].center;
      total += fused.boxes[i].weight * r.norm2();
    }
    return total;
  };
  const double lr = 0.01;
  const auto result = distill_update(learner, client, report, fused, 1, lr);
  const auto numeric = oracles::finite_difference_gradient(pairs_loss,
                                                           client.params.values);
  std::vector<double> analytic(numeric.size());
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    analytic[i] = (client.params.values[i] - result.params.values[i]) / lr;
  }
  CHECK(oracles::max_relative_error(analytic, numeric) < 1e-6);
}

TEST_CASE("distill_update: no matches within the gate") {
  BoxPoseLearner learner;
  ClientState client{0, RegressionData{}, learner.init_params(), 0.0};
  world::DetectionReport report = report_with(0, {{0, {60.0, 40.0}, 0.5}});
  FusedOutput fused;
  fused.boxes.push_back({{120.0, 10.0}, 0.3, 1.0, 2, 5});
  const auto result = distill_update(learner, client, report, fused, 20, 0.05);
  CHECK(result.no_supervision);
  CHECK(result.params.values == client.params.values);
}

TEST_CASE("personalize: empty personal set reduces to fedavg") {
  ModelParams global;
  global.layout = ParamLayout::from_segments({{"feature", 0, 2}, {"head", 2, 3}});
  global.values = {1.0, 1.0, 1.0};
  ModelParams d1 = zeros_like(global);
  d1.values = {1.0, 0.0, 2.0};
  ModelParams d2 = zeros_like(global);
  d2.values = {3.0, 2.0, 0.0};

  const auto result = personalize(global, {d1, d2}, {"feature", "head"}, {});
  const auto expected = fedavg({d1, d2}, {1.0, 1.0});
  for (std::size_t i = 0; i < global.values.size(); ++i) {
    CHECK(result.shared.values[i] ==
          doctest::Approx(global.values[i] + expected.values[i]));
    CHECK(result.per_client[0].values[i] ==
          doctest::Approx(result.shared.values[i]));
    CHECK(result.per_client[1].values[i] ==
          doctest::Approx(result.shared.values[i]));
  }
}

TEST_CASE("personalize: empty shared set keeps every client its own params") {
  ModelParams global;
  global.layout = ParamLayout::from_segments({{"feature", 0, 2}, {"head", 2, 3}});
  global.values = {1.0, 1.0, 1.0};
  ModelParams d1 = zeros_like(global);
  d1.values = {1.0, 0.0, 2.0};
  ModelParams d2 = zeros_like(global);
  d2.values = {3.0, 2.0, 0.0};
  const auto result = personalize(global, {d1, d2}, {}, {"feature", "head"});
  for (std::size_t i = 0; i < global.values.size(); ++i) {
    CHECK(result.per_client[0].values[i] ==
          doctest::Approx(global.values[i] + d1.values[i]));
    CHECK(result.per_client[1].values[i] ==
          doctest::Approx(global.values[i] + d2.values[i]));
    CHECK(result.shared.values[i] == doctest::Approx(global.values[i]));
  }
}

TEST_CASE("personalize: shared feature averaged, heads preserved") {
  ModelParams global;
  global.layout = ParamLayout::from_segments({{"feature", 0, 2}, {"head", 2, 4}});
  global.values = {0.0, 0.0, 0.0, 0.0};
  ModelParams d1 = zeros_like(global);
  d1.values = {2.0, 4.0, 1.0, 1.0};
  ModelParams d2 = zeros_like(global);
  d2.values = {6.0, 0.0, -1.0, 5.0};
  const auto result = personalize(global, {d1, d2}, {"feature"}, {"head"});
  CHECK(result.per_client[0].values[0] == doctest::Approx(4.0));
  CHECK(result.per_client[0].values[1] == doctest::Approx(2.0));
  CHECK(result.per_client[0].values[2] == doctest::Approx(1.0));
  CHECK(result.per_client[0].values[3] == doctest::Approx(1.0));
  CHECK(result.per_client[1].values[2] == doctest::Approx(-1.0));
  CHECK(result.per_client[1].values[3] == doctest::Approx(5.0));
  CHECK_THROWS_AS(personalize(global, {d1}, {"feature"}, {"feature", "head"}),
                  std::invalid_argument);
  CHECK_THROWS_AS(personalize(global, {d1}, {"feature"}, {}),
                  std::invalid_argument);
}

TEST_CASE("iterated local_update + fedavg converges to the centralized minimizer") {
  BoxPoseLearner learner;
  const RegressionData all = canonical_data(400, 93);

  // Independent centralized ridge minimizer by normal equations.
  const std::size_t k = BoxPoseLearner::kBasisDim;
  std::vector<double> gram(k * k, 0.0);
  std::vector<double> rhs_x(k, 0.0), rhs_y(k, 0.0);
  const double n = static_cast<double>(all.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto phi = learner.basis(all.observed[i]);
    const Vec2 target = all.truth[i] - all.observed[i];
    for (std::size_t r = 0; r < k; ++r) {
      for (std::size_t c = 0; c < k; ++c) {
        gram[r * k + c] += phi[r] * phi[c] / n;
      }
      rhs_x[r] += phi[r] * target.x / n;
      rhs_y[r] += phi[r] * target.y / n;
    }
  }
  const double ridge = learner.options().ridge;
  for (std::size_t r = 0; r < k; ++r) gram[r * k + r] += ridge;
  const auto wx = oracles::solve_dense(gram, rhs_x);
  const auto wy = oracles::solve_dense(gram, rhs_y);
  ModelParams optimum = learner.init_params();
  for (std::size_t j = 0; j < k; ++j) {
    optimum.values[2 * j] = wx[j];
    optimum.values[2 * j + 1] = wy[j];
  }
  const double optimal_loss = learner.loss(optimum, all);

  // Four IID clients, one local epoch per round.
  std::vector<ClientState> clients;
  for (int cidx = 0; cidx < 4; ++cidx) {
    RegressionData shard;
    for (std::size_t i = cidx; i < all.size(); i += 4) {
      shard.observed.push_back(all.observed[i]);
      shard.truth.push_back(all.truth[i]);
    }
    clients.push_back({cidx, shard, learner.init_params(), 0.0});
  }

  ModelParams global = learner.init_params();
  int rounds_used = 0;
  for (int round = 0; round < 200; ++round) {
    std::vector<ModelParams> deltas;
    std::vector<double> weights;
    for (auto& client : clients) {
      client.params = global;
      const auto update = local_update(learner, client, 1, 0.3);
      deltas.push_back(update.delta);
      weights.push_back(static_cast<double>(dataset_size(client.data)));
    }
    const auto agg = fedavg(deltas, weights);
    for (std::size_t i = 0; i < global.values.size(); ++i) {
      global.values[i] += agg.values[i];
    }
    rounds_used = round + 1;
    if (learner.loss(global, all) - optimal_loss < 1e-3) break;
  }
  CHECK(rounds_used <= 200);
  CHECK(learner.loss(global, all) - optimal_loss < 1e-3);
}
