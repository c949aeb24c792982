#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "vecfl/geometry.hpp"
#include "vecfl/model_params.hpp"

namespace vecfl::fedcore {

enum class TaskKind { kRegression, kClassification };

std::string to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& s);

// Paired (observed center, true center) samples for the box-pose surrogate.
struct RegressionData {
  std::vector<Vec2> observed;
  std::vector<Vec2> truth;
  std::size_t size() const { return observed.size(); }
};

// Row-major feature matrix plus integer labels for the classification
// surrogate.
struct ClassificationData {
  std::size_t feature_dim = 0;
  std::vector<double> features;  // n x feature_dim
  std::vector<int> labels;
  std::size_t size() const { return labels.size(); }
};

using Dataset = std::variant<RegressionData, ClassificationData>;

std::size_t dataset_size(const Dataset& data);
Dataset concat(const Dataset& a, const Dataset& b);
Dataset take_prefix(const Dataset& data, std::size_t n);

// Task-agnostic learner surface used by every FL mechanism. Losses are
// convex; gradients are exact full-batch expressions.
class Learner {
 public:
  virtual ~Learner() = default;
  virtual TaskKind kind() const = 0;
  virtual ModelParams init_params() const = 0;
  virtual double loss(const ModelParams& params, const Dataset& data) const = 0;
  virtual std::vector<double> gradient(const ModelParams& params,
                                       const Dataset& data) const = 0;
  // Accuracy-like score in [0, 100], deterministic given model + data.
  virtual double metric(const ModelParams& params, const Dataset& data) const = 0;
};

// Box-pose surrogate: predicted center = observed + W * phi(observed).
// phi is a fixed orthogonalized quadratic basis over the canonical map
// region ([0, 2*x_scale] x [0, 2*y_scale] metres), which keeps the Gram
// matrix near identity and full-batch gradient descent fast. Segment
// "feature" holds the five data-dependent basis columns, "head" the
// constant column.
class BoxPoseLearner : public Learner {
 public:
  struct Options {
    double x_scale = 100.0;     // u = x / x_scale - 1
    double y_scale = 40.0;      // v = y / y_scale - 1
    double error_scale_m = 5.0; // metric = 100 * (1 - rmse / error_scale)
    double ridge = 1e-3;
  };

  static constexpr std::size_t kBasisDim = 6;  // 5 features + constant

  BoxPoseLearner();
  explicit BoxPoseLearner(Options options);

  TaskKind kind() const override { return TaskKind::kRegression; }
  ModelParams init_params() const override;
  double loss(const ModelParams& params, const Dataset& data) const override;
  std::vector<double> gradient(const ModelParams& params,
                               const Dataset& data) const override;
  double metric(const ModelParams& params, const Dataset& data) const override;

  Vec2 predict(const ModelParams& params, const Vec2& observed) const;
  std::array<double, kBasisDim> basis(const Vec2& observed) const;
  const Options& options() const { return options_; }

 private:
  Options options_;
};

// Multinomial logistic regression on synthetic feature clusters. Segment
// "feature" holds the class weight matrix, "head" the biases.
class ClusterClassLearner : public Learner {
 public:
  struct Options {
    int classes = 4;
    int feature_dim = 3;
    double ridge = 1e-3;
  };

  ClusterClassLearner();
  explicit ClusterClassLearner(Options options);

  TaskKind kind() const override { return TaskKind::kClassification; }
  ModelParams init_params() const override;
  double loss(const ModelParams& params, const Dataset& data) const override;
  std::vector<double> gradient(const ModelParams& params,
                               const Dataset& data) const override;
  double metric(const ModelParams& params, const Dataset& data) const override;

  int predict_label(const ModelParams& params,
                    const std::vector<double>& features) const;
  const Options& options() const { return options_; }

 private:
  Options options_;
};

std::unique_ptr<Learner> make_learner(TaskKind kind);

}  // namespace vecfl::fedcore
