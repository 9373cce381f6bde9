#include "rdif/scaling.hpp"

#include "rdif/error.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

namespace rdif {

namespace {

constexpr double kMinSlope = 1e-12;

void check_slope(double a, const char* name, const ItemCalibration& item) {
  if (!(std::fabs(a) >= kMinSlope)) {
    throw DegenerateSlopeError("item " + std::to_string(item.index) + ": degenerate slope " + name);
  }
}

double checked_variance(double v, const ItemCalibration& item, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw VarianceError("item " + std::to_string(item.index) + ": non-positive " + what);
  }
  return v;
}

void check_taus(std::span<const double> taus) {
  if (taus.empty()) throw std::invalid_argument("empty variance list");
  for (double t : taus) {
    if (!(t > 0.0)) throw VarianceError("variances must be positive");
  }
}

}  // namespace

const char* to_string(ScalingKind kind) {
  switch (kind) {
    case ScalingKind::intercept: return "intercept";
    case ScalingKind::slope: return "slope";
    case ScalingKind::log_slope: return "log_slope";
  }
  return "?";
}

double y_intercept(const ItemCalibration& item) {
  check_slope(item.a1, "a1", item);
  return (item.d1 - item.d0) / item.a1;
}

double z_slope(const ItemCalibration& item, bool log_scale) {
  check_slope(item.a0, "a0", item);
  check_slope(item.a1, "a1", item);
  const double z = item.a1 / item.a0;
  return log_scale ? std::log(z) : z;
}

double tau_intercept(const ItemCalibration& item, double theta) {
  check_slope(item.a1, "a1", item);
  const double q = theta * theta * item.var(kA1) - 2.0 * theta * item.covar(kA1, kD1) +
                   item.var(kD1) + item.var(kD0);
  return checked_variance(q / (item.a1 * item.a1), item, "intercept null variance");
}

double var_slope(const ItemCalibration& item, double sigma, bool log_scale) {
  if (!(sigma > 0.0)) throw std::domain_error("var_slope: sigma must be positive");
  check_slope(item.a0, "a0", item);
  const double v = (sigma * sigma * item.var(kA0) + item.var(kA1)) / (item.a0 * item.a0);
  return checked_variance(log_scale ? v / (sigma * sigma) : v, item, "slope null variance");
}

double cov_yz(const ItemCalibration& item, double theta, double sigma) {
  if (!(sigma > 0.0)) throw std::domain_error("cov_yz: sigma must be positive");
  check_slope(item.a0, "a0", item);
  check_slope(item.a1, "a1", item);
  return (sigma * item.covar(kA0, kD0) + item.covar(kA1, kD1) - theta * item.var(kA1)) /
         (item.a0 * item.a1);
}

std::vector<double> null_weights(std::span<const double> taus) {
  check_taus(taus);
  double total = 0.0;
  for (double t : taus) total += 1.0 / t;
  std::vector<double> w;
  w.reserve(taus.size());
  for (double t : taus) w.push_back((1.0 / t) / total);
  return w;
}

double var_estimator(std::span<const double> taus) {
  check_taus(taus);
  double total = 0.0;
  for (double t : taus) total += 1.0 / t;
  return 1.0 / total;
}

double omega(std::span<const double> taus, std::size_t i) {
  if (i >= taus.size()) throw std::out_of_range("omega: item index out of range");
  if (taus.size() < 2) throw std::invalid_argument("omega: at least two items required");
  const double v = var_estimator(taus);
  const double t = taus[i];
  return (t - v) / (t * t);
}

ScalingProblem make_problem(const CalibrationPair& pair, ScalingKind kind) {
  ScalingProblem problem;
  problem.kind = kind;
  problem.ys.reserve(pair.size());
  // The returned closure owns a copy of the items so it outlives `pair`.
  auto items = std::make_shared<const std::vector<ItemCalibration>>(pair.items);
  switch (kind) {
    case ScalingKind::intercept:
      for (const auto& item : pair.items) problem.ys.push_back(y_intercept(item));
      problem.tau = [items](double theta) {
        std::vector<double> t;
        t.reserve(items->size());
        for (const auto& item : *items) t.push_back(tau_intercept(item, theta));
        return t;
      };
      break;
    case ScalingKind::slope:
      for (const auto& item : pair.items) problem.ys.push_back(z_slope(item, false));
      problem.tau = [items](double sigma) {
        std::vector<double> t;
        t.reserve(items->size());
        for (const auto& item : *items) t.push_back(var_slope(item, sigma, false));
        return t;
      };
      break;
    case ScalingKind::log_slope:
      for (const auto& item : pair.items) problem.ys.push_back(z_slope(item, true));
      problem.tau = [items](double log_sigma) {
        const double sigma = std::exp(log_sigma);
        std::vector<double> t;
        t.reserve(items->size());
        for (const auto& item : *items) t.push_back(var_slope(item, sigma, true));
        return t;
      };
      break;
  }
  return problem;
}

}  // namespace rdif
