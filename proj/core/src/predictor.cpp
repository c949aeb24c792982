#include "vecfl/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace vecfl::predictor {

namespace {

constexpr double kGridStart = 0.05;
constexpr double kGridEnd = 3.00;
constexpr double kGridStep = 0.05;

struct LinearFit {
  double a = 0.0;
  double b = 0.0;
  double sse = 0.0;
};

// Closed-form least squares of observed = a - b * resource^(-c).
LinearFit solve_for_c(const std::vector<CalibrationPoint>& points, double c) {
  const std::size_t n = points.size();
  double su = 0.0, sy = 0.0, suu = 0.0, suy = 0.0;
  for (const auto& p : points) {
    const double u = std::pow(static_cast<double>(p.resource), -c);
    su += u;
    sy += p.observed_accuracy;
    suu += u * u;
    suy += u * p.observed_accuracy;
  }
  const double denom = n * suu - su * su;
  LinearFit fit;
  if (std::abs(denom) < 1e-300) {
    fit.a = sy / n;
    fit.b = 0.0;
  } else {
    const double slope = (n * suy - su * sy) / denom;
    fit.b = -slope;
    fit.a = (sy + fit.b * su) / n;
  }
  for (const auto& p : points) {
    const double u = std::pow(static_cast<double>(p.resource), -c);
    const double r = p.observed_accuracy - (fit.a - fit.b * u);
    fit.sse += r * r;
  }
  return fit;
}

}  // namespace

std::string to_string(ResourceKind kind) {
  return kind == ResourceKind::kSamples ? "samples" : "rounds";
}

ResourceKind resource_kind_from_string(const std::string& s) {
  if (s == "samples") return ResourceKind::kSamples;
  if (s == "rounds") return ResourceKind::kRounds;
  throw std::invalid_argument("unknown resource kind: " + s);
}

double PowerLawPredictor::predict(long long n) const {
  if (n < 1) throw std::invalid_argument("predict: resource must be >= 1");
  return a - b * std::pow(static_cast<double>(n), -c);
}

double PowerLawPredictor::value_at(long long n) const {
  return n >= 1 ? predict(n) : zero_floor;
}

void PowerLawPredictor::validate() const {
  if (!(b > 0.0)) throw std::invalid_argument("PowerLawPredictor: b must be > 0");
  if (!(c > 0.0)) throw std::invalid_argument("PowerLawPredictor: c must be > 0");
  if (a > 100.0 + 1e-9) {
    throw std::invalid_argument("PowerLawPredictor: a must be <= 100");
  }
}

FitResult fit(const std::vector<CalibrationPoint>& points, ResourceKind kind) {
  std::set<long long> distinct;
  for (const auto& p : points) {
    if (p.resource < 1) {
      throw std::invalid_argument("fit: resources must be >= 1");
    }
    distinct.insert(p.resource);
  }
  if (distinct.size() < 3) throw std::runtime_error("underdetermined");

  double best_c = kGridStart;
  double best_sse = std::numeric_limits<double>::infinity();
  for (double c = kGridStart; c <= kGridEnd + 1e-12; c += kGridStep) {
    const LinearFit f = solve_for_c(points, c);
    if (f.sse < best_sse) {
      best_sse = f.sse;
      best_c = c;
    }
  }

  // Golden-section refinement over the winning grid cell.
  double lo = std::max(kGridStart, best_c - kGridStep);
  double hi = std::min(kGridEnd, best_c + kGridStep);
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - phi * (hi - lo);
  double x2 = lo + phi * (hi - lo);
  double f1 = solve_for_c(points, x1).sse;
  double f2 = solve_for_c(points, x2).sse;
  for (int iter = 0; iter < 80 && hi - lo > 1e-10; ++iter) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = solve_for_c(points, x1).sse;
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = solve_for_c(points, x2).sse;
    }
  }
  const double refined_c = (lo + hi) / 2.0;
  LinearFit refined = solve_for_c(points, refined_c);
  double final_c = refined_c;
  if (refined.sse > best_sse) {  // keep the grid winner if refinement regressed
    final_c = best_c;
    refined = solve_for_c(points, best_c);
  }

  if (!(refined.b > 1e-12)) throw std::runtime_error("non-monotone data");

  FitResult result;
  result.predictor.a = std::min(refined.a, 100.0);
  result.predictor.b = refined.b;
  result.predictor.c = final_c;
  result.predictor.resource_kind = kind;

  double sse = 0.0;
  for (const auto& p : points) {
    const double r = p.observed_accuracy - result.predictor.predict(p.resource);
    sse += r * r;
  }
  result.rmse = std::sqrt(sse / points.size());
  return result;
}

double marginal_gain(const PowerLawPredictor& p, long long n) {
  if (n < 0) throw std::invalid_argument("marginal_gain: n must be >= 0");
  if (n == 0) return p.predict(1) - p.zero_floor;
  return p.predict(n + 1) - p.predict(n);
}

std::string to_json(const PowerLawPredictor& p, double rmse) {
  nlohmann::json j;
  j["a"] = p.a;
  j["b"] = p.b;
  j["c"] = p.c;
  j["resource_kind"] = to_string(p.resource_kind);
  j["zero_floor"] = p.zero_floor;
  j["rmse"] = rmse;
  return j.dump(2) + "\n";
}

PowerLawPredictor predictor_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  PowerLawPredictor p;
  p.a = j.at("a").get<double>();
  p.b = j.at("b").get<double>();
  p.c = j.at("c").get<double>();
  p.resource_kind =
      resource_kind_from_string(j.at("resource_kind").get<std::string>());
  if (j.contains("zero_floor")) p.zero_floor = j.at("zero_floor").get<double>();
  return p;
}

std::vector<CalibrationPoint> calibration_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<CalibrationPoint> points;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      if (line.find("resource") != std::string::npos) continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw std::invalid_argument("calibration CSV: expected 'resource,accuracy'");
    }
    CalibrationPoint p;
    p.resource = std::stoll(line.substr(0, comma));
    p.observed_accuracy = std::stod(line.substr(comma + 1));
    points.push_back(p);
  }
  return points;
}

}  // namespace vecfl::predictor
