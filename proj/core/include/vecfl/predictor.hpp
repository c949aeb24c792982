#pragma once

#include <string>
#include <vector>

namespace vecfl::predictor {

enum class ResourceKind { kSamples, kRounds };

std::string to_string(ResourceKind kind);
ResourceKind resource_kind_from_string(const std::string& s);

// accuracy(n) = a - b * n^(-c): strictly increasing and concave in n for
// b > 0, c > 0, approaching the asymptote a.
struct PowerLawPredictor {
  double a = 100.0;       // asymptotic accuracy, score units <= 100
  double b = 1.0;         // deficit coefficient, > 0
  double c = 1.0;         // decay exponent, > 0
  ResourceKind resource_kind = ResourceKind::kSamples;
  double zero_floor = 0.0;  // accuracy granted with zero resource

  double predict(long long n) const;
  double value_at(long long n) const;  // predict for n >= 1, zero_floor at 0
  void validate() const;
};

struct CalibrationPoint {
  long long resource = 1;        // >= 1
  double observed_accuracy = 0;  // [0, 100]
};

struct FitResult {
  PowerLawPredictor predictor;
  double rmse = 0.0;
};

// Least-squares fit: grid search over c in {0.05, 0.10, ..., 3.00} with
// closed-form linear LS for (a, b) at each c, then one golden-section
// refinement pass over the best grid cell. Throws "underdetermined" with
// fewer than 3 distinct resources and "non-monotone data" when the best fit
// has b <= 0.
FitResult fit(const std::vector<CalibrationPoint>& points,
              ResourceKind kind = ResourceKind::kSamples);

// Predicted gain of the (n+1)-th resource unit; at n = 0 this is
// predict(1) - zero_floor.
double marginal_gain(const PowerLawPredictor& p, long long n);

std::string to_json(const PowerLawPredictor& p, double rmse = 0.0);
PowerLawPredictor predictor_from_json(const std::string& text);

// CSV with header "resource,accuracy".
std::vector<CalibrationPoint> calibration_from_csv(const std::string& text);

}  // namespace vecfl::predictor
