#include "vecfl/learners.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vecfl::fedcore {

namespace {

// Unit-variance scalings of the Legendre-style basis terms for u, v ~ U[-1, 1].
constexpr double kLinearScale = 1.7320508075688772;   // sqrt(3)
constexpr double kQuadScale = 3.3541019662496847;     // 3 * sqrt(5) / 2
constexpr double kCrossScale = 3.0;

const RegressionData& as_regression(const Dataset& data) {
  const auto* r = std::get_if<RegressionData>(&data);
  if (r == nullptr) {
    throw std::invalid_argument("expected regression dataset");
  }
  if (r->observed.size() != r->truth.size()) {
    throw std::invalid_argument("regression dataset: unpaired samples");
  }
  return *r;
}

const ClassificationData& as_classification(const Dataset& data) {
  const auto* c = std::get_if<ClassificationData>(&data);
  if (c == nullptr) {
    throw std::invalid_argument("expected classification dataset");
  }
  if (c->features.size() != c->labels.size() * c->feature_dim) {
    throw std::invalid_argument("classification dataset: shape mismatch");
  }
  return *c;
}

}  // namespace

std::string to_string(TaskKind kind) {
  return kind == TaskKind::kRegression ? "regression" : "classification";
}

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "regression") return TaskKind::kRegression;
  if (s == "classification") return TaskKind::kClassification;
  throw std::invalid_argument("unknown task kind: " + s);
}

std::size_t dataset_size(const Dataset& data) {
  return std::visit([](const auto& d) { return d.size(); }, data);
}

Dataset concat(const Dataset& a, const Dataset& b) {
  if (a.index() != b.index()) {
    throw std::invalid_argument("concat: dataset kinds differ");
  }
  if (std::holds_alternative<RegressionData>(a)) {
    RegressionData out = std::get<RegressionData>(a);
    const auto& other = std::get<RegressionData>(b);
    out.observed.insert(out.observed.end(), other.observed.begin(),
                        other.observed.end());
    out.truth.insert(out.truth.end(), other.truth.begin(), other.truth.end());
    return out;
  }
  ClassificationData out = std::get<ClassificationData>(a);
  const auto& other = std::get<ClassificationData>(b);
  if (out.feature_dim != other.feature_dim) {
    throw std::invalid_argument("concat: feature dims differ");
  }
  out.features.insert(out.features.end(), other.features.begin(),
                      other.features.end());
  out.labels.insert(out.labels.end(), other.labels.begin(), other.labels.end());
  return out;
}

Dataset take_prefix(const Dataset& data, std::size_t n) {
  if (std::holds_alternative<RegressionData>(data)) {
    const auto& r = std::get<RegressionData>(data);
    const std::size_t k = std::min(n, r.size());
    RegressionData out;
    out.observed.assign(r.observed.begin(), r.observed.begin() + k);
    out.truth.assign(r.truth.begin(), r.truth.begin() + k);
    return out;
  }
  const auto& c = std::get<ClassificationData>(data);
  const std::size_t k = std::min(n, c.size());
  ClassificationData out;
  out.feature_dim = c.feature_dim;
  out.features.assign(c.features.begin(),
                      c.features.begin() + k * c.feature_dim);
  out.labels.assign(c.labels.begin(), c.labels.begin() + k);
  return out;
}

BoxPoseLearner::BoxPoseLearner() : BoxPoseLearner(Options{}) {}

BoxPoseLearner::BoxPoseLearner(Options options) : options_(options) {
  if (options_.x_scale <= 0.0 || options_.y_scale <= 0.0 ||
      options_.error_scale_m <= 0.0 || options_.ridge < 0.0) {
    throw std::invalid_argument("BoxPoseLearner: invalid options");
  }
}

std::array<double, BoxPoseLearner::kBasisDim> BoxPoseLearner::basis(
    const Vec2& observed) const {
  const double u = observed.x / options_.x_scale - 1.0;
  const double v = observed.y / options_.y_scale - 1.0;
  return {u * kLinearScale,
          v * kLinearScale,
          (u * u - 1.0 / 3.0) * kQuadScale,
          (v * v - 1.0 / 3.0) * kQuadScale,
          u * v * kCrossScale,
          1.0};
}

ModelParams BoxPoseLearner::init_params() const {
  ModelParams params;
  params.layout = ParamLayout::from_segments(
      {{"feature", 0, 2 * (kBasisDim - 1)},
       {"head", 2 * (kBasisDim - 1), 2 * kBasisDim}});
  params.values.assign(2 * kBasisDim, 0.0);
  return params;
}

Vec2 BoxPoseLearner::predict(const ModelParams& params,
                             const Vec2& observed) const {
  const auto phi = basis(observed);
  Vec2 correction;
  for (std::size_t j = 0; j < kBasisDim; ++j) {
    correction.x += params.values[2 * j] * phi[j];
    correction.y += params.values[2 * j + 1] * phi[j];
  }
  return observed + correction;
}

double BoxPoseLearner::loss(const ModelParams& params,
                            const Dataset& data) const {
  const auto& d = as_regression(data);
  if (d.size() == 0) return 0.0;
  double sse = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Vec2 r = predict(params, d.observed[i]) - d.truth[i];
    sse += r.norm2();
  }
  double reg = 0.0;
  for (double w : params.values) reg += w * w;
  return sse / static_cast<double>(d.size()) + options_.ridge * reg;
}

std::vector<double> BoxPoseLearner::gradient(const ModelParams& params,
                                             const Dataset& data) const {
  const auto& d = as_regression(data);
  std::vector<double> grad(params.values.size(), 0.0);
  const double n = static_cast<double>(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto phi = basis(d.observed[i]);
    const Vec2 r = predict(params, d.observed[i]) - d.truth[i];
    for (std::size_t j = 0; j < kBasisDim; ++j) {
      grad[2 * j] += 2.0 * r.x * phi[j] / n;
      grad[2 * j + 1] += 2.0 * r.y * phi[j] / n;
    }
  }
  for (std::size_t k = 0; k < grad.size(); ++k) {
    grad[k] += 2.0 * options_.ridge * params.values[k];
  }
  return grad;
}

double BoxPoseLearner::metric(const ModelParams& params,
                              const Dataset& data) const {
  const auto& d = as_regression(data);
  if (d.size() == 0) return 0.0;
  double sse = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Vec2 r = predict(params, d.observed[i]) - d.truth[i];
    sse += r.norm2();
  }
  const double rmse = std::sqrt(sse / static_cast<double>(d.size()));
  const double score = 100.0 * (1.0 - rmse / options_.error_scale_m);
  return std::clamp(score, 0.0, 100.0);
}

ClusterClassLearner::ClusterClassLearner() : ClusterClassLearner(Options{}) {}

ClusterClassLearner::ClusterClassLearner(Options options) : options_(options) {
  if (options_.classes < 2 || options_.feature_dim < 1 || options_.ridge < 0.0) {
    throw std::invalid_argument("ClusterClassLearner: invalid options");
  }
}

ModelParams ClusterClassLearner::init_params() const {
  const std::size_t kd =
      static_cast<std::size_t>(options_.classes) * options_.feature_dim;
  ModelParams params;
  params.layout = ParamLayout::from_segments(
      {{"feature", 0, kd}, {"head", kd, kd + options_.classes}});
  params.values.assign(kd + options_.classes, 0.0);
  return params;
}

namespace {

void softmax_logits(const ModelParams& params, const double* x, int classes,
                    int dim, std::vector<double>& probs) {
  probs.assign(classes, 0.0);
  const std::size_t kd = static_cast<std::size_t>(classes) * dim;
  double max_logit = -1e300;
  for (int k = 0; k < classes; ++k) {
    double logit = params.values[kd + k];
    for (int j = 0; j < dim; ++j) {
      logit += params.values[static_cast<std::size_t>(k) * dim + j] * x[j];
    }
    probs[k] = logit;
    max_logit = std::max(max_logit, logit);
  }
  double total = 0.0;
  for (int k = 0; k < classes; ++k) {
    probs[k] = std::exp(probs[k] - max_logit);
    total += probs[k];
  }
  for (int k = 0; k < classes; ++k) probs[k] /= total;
}

}  // namespace

double ClusterClassLearner::loss(const ModelParams& params,
                                 const Dataset& data) const {
  const auto& d = as_classification(data);
  if (d.size() == 0) return 0.0;
  std::vector<double> probs;
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    softmax_logits(params, &d.features[i * d.feature_dim], options_.classes,
                   options_.feature_dim, probs);
    total -= std::log(std::max(probs[d.labels[i]], 1e-300));
  }
  double reg = 0.0;
  for (double w : params.values) reg += w * w;
  return total / static_cast<double>(d.size()) + options_.ridge * reg;
}

std::vector<double> ClusterClassLearner::gradient(const ModelParams& params,
                                                  const Dataset& data) const {
  const auto& d = as_classification(data);
  std::vector<double> grad(params.values.size(), 0.0);
  const double n = static_cast<double>(d.size());
  const std::size_t kd =
      static_cast<std::size_t>(options_.classes) * options_.feature_dim;
  std::vector<double> probs;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double* x = &d.features[i * d.feature_dim];
    softmax_logits(params, x, options_.classes, options_.feature_dim, probs);
    for (int k = 0; k < options_.classes; ++k) {
      const double g = (probs[k] - (d.labels[i] == k ? 1.0 : 0.0)) / n;
      for (int j = 0; j < options_.feature_dim; ++j) {
        grad[static_cast<std::size_t>(k) * options_.feature_dim + j] +=
            g * x[j];
      }
      grad[kd + k] += g;
    }
  }
  for (std::size_t k = 0; k < grad.size(); ++k) {
    grad[k] += 2.0 * options_.ridge * params.values[k];
  }
  return grad;
}

int ClusterClassLearner::predict_label(const ModelParams& params,
                                       const std::vector<double>& features) const {
  std::vector<double> probs;
  softmax_logits(params, features.data(), options_.classes,
                 options_.feature_dim, probs);
  return static_cast<int>(
      std::max_element(probs.begin(), probs.end()) - probs.begin());
}

double ClusterClassLearner::metric(const ModelParams& params,
                                   const Dataset& data) const {
  const auto& d = as_classification(data);
  if (d.size() == 0) return 0.0;
  std::vector<double> probs;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    softmax_logits(params, &d.features[i * d.feature_dim], options_.classes,
                   options_.feature_dim, probs);
    const int label = static_cast<int>(
        std::max_element(probs.begin(), probs.end()) - probs.begin());
    if (label == d.labels[i]) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(d.size());
}

std::unique_ptr<Learner> make_learner(TaskKind kind) {
  if (kind == TaskKind::kRegression) {
    return std::make_unique<BoxPoseLearner>();
  }
  return std::make_unique<ClusterClassLearner>();
}

}  // namespace vecfl::fedcore
