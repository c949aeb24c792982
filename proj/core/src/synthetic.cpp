#include "vecfl/synthetic.hpp"

#include <cmath>
#include <stdexcept>

#include "vecfl/rng.hpp"

namespace vecfl::synthetic {

Vec2 DistortionField::bias(const Vec2& p) const {
  const double u = p.x / x_scale - 1.0;
  const double v = p.y / y_scale - 1.0;
  const double right = u > 0.0 ? u : 0.0;
  const double left = u < 0.0 ? -u : 0.0;
  return {ax0 + ax1 * u + ax2 * v + ax3 * u * u + hx * right + hxl * left,
          ay0 + ay1 * u + ay2 * v + ay3 * v * v + hy * right + hyl * left};
}

DistortionField DistortionField::offset(double dx, double dy) const {
  DistortionField out = *this;
  out.ax0 += dx;
  out.ay0 += dy;
  return out;
}

DistortionField DistortionField::shifted(double gap) const {
  return offset(gap, -gap);
}

fedcore::RegressionData make_regression_data(std::size_t n, const Rect& region,
                                             const DistortionField& field,
                                             double noise_sigma,
                                             std::uint64_t seed) {
  if (region.width() <= 0.0 || region.height() <= 0.0) {
    throw std::invalid_argument("make_regression_data: empty region");
  }
  Rng rng(seed);
  fedcore::RegressionData data;
  data.observed.reserve(n);
  data.truth.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 observed{rng.uniform(region.min.x, region.max.x),
                        rng.uniform(region.min.y, region.max.y)};
    Vec2 truth = observed - field.bias(observed);
    if (noise_sigma > 0.0) {
      truth.x += rng.normal(0.0, noise_sigma);
      truth.y += rng.normal(0.0, noise_sigma);
    }
    data.observed.push_back(observed);
    data.truth.push_back(truth);
  }
  return data;
}

fedcore::ClassificationData make_classification_data(
    std::size_t n, const std::vector<int>& allowed_classes, int classes,
    int feature_dim, double spread, std::uint64_t seed) {
  if (allowed_classes.empty()) {
    throw std::invalid_argument("make_classification_data: no classes allowed");
  }
  for (int c : allowed_classes) {
    if (c < 0 || c >= classes) {
      throw std::invalid_argument("make_classification_data: class out of range");
    }
  }
  Rng rng(seed);
  fedcore::ClassificationData data;
  data.feature_dim = static_cast<std::size_t>(feature_dim);
  data.features.reserve(n * data.feature_dim);
  data.labels.reserve(n);
  constexpr double kRadius = 2.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = allowed_classes[rng.index_below(allowed_classes.size())];
    const double angle = 2.0 * M_PI * label / classes;
    for (int j = 0; j < feature_dim; ++j) {
      double mean = 0.0;
      if (j == 0) mean = kRadius * std::cos(angle);
      if (j == 1) mean = kRadius * std::sin(angle);
      data.features.push_back(rng.normal(mean, spread));
    }
    data.labels.push_back(label);
  }
  return data;
}

}  // namespace vecfl::synthetic
