#pragma once

#include <cstdint>
#include <vector>

#include "vecfl/geometry.hpp"
#include "vecfl/learners.hpp"

namespace vecfl::synthetic {

// Systematic sensing miscalibration over the map. The polynomial part lies
// inside the BoxPoseLearner basis; the hinge terms (one active on each half
// of the canonical map) do not, so a model trained on one half carries a
// structural error on the other. That gap is what edge/cloud FL and
// road-assisted distillation close.
struct DistortionField {
  double x_scale = 100.0;
  double y_scale = 40.0;
  // bias_x = ax0 + ax1*u + ax2*v + ax3*u^2 + hx*max(0, u) + hxl*max(0, -u)
  double ax0 = 0.5, ax1 = -0.6, ax2 = 0.3, ax3 = 0.5, hx = 1.4, hxl = -1.2;
  // bias_y = ay0 + ay1*u + ay2*v + ay3*v^2 + hy*max(0, u) + hyl*max(0, -u)
  double ay0 = -0.4, ay1 = 0.25, ay2 = -0.3, ay3 = 0.4, hy = -1.1, hyl = -0.9;

  Vec2 bias(const Vec2& p) const;
  // Same field with a constant bias offset added.
  DistortionField offset(double dx, double dy) const;
  // Stale pretraining domain: gap added on x, subtracted on y.
  DistortionField shifted(double gap) const;
};

// Paired (observed, truth) samples: observed uniform over `region`,
// truth = observed - bias(observed) + target noise. The optimal corrector
// within the polynomial basis is exact up to the hinge term.
fedcore::RegressionData make_regression_data(std::size_t n, const Rect& region,
                                             const DistortionField& field,
                                             double noise_sigma,
                                             std::uint64_t seed);

// Gaussian clusters with means on a circle of radius 2 in the first two
// feature dimensions. Labels are drawn uniformly from `allowed_classes`.
fedcore::ClassificationData make_classification_data(
    std::size_t n, const std::vector<int>& allowed_classes, int classes,
    int feature_dim, double spread, std::uint64_t seed);

}  // namespace vecfl::synthetic
