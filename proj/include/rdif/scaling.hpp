#pragma once

#include "rdif/calibration.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace rdif {

/// Which scaling parameter a problem targets:
///   intercept -> theta = mu / sigma, from Y_i = (d1 - d0) / a1
///   slope     -> sigma,              from Z_i = a1 / a0
///   log_slope -> log sigma,          from log Z_i
enum class ScalingKind { intercept, slope, log_slope };

const char* to_string(ScalingKind kind);

/// Maps a candidate value of the scaling parameter to the per-item null
/// variances evaluated at that value.
using TauFn = std::function<std::vector<double>(double)>;

double y_intercept(const ItemCalibration& item);
double z_slope(const ItemCalibration& item, bool log_scale);

/// Null variance of Y_i as a function of theta.
double tau_intercept(const ItemCalibration& item, double theta);

/// Null variance of Z_i (or log Z_i) at slope ratio sigma > 0.
double var_slope(const ItemCalibration& item, double sigma, bool log_scale);

/// Null covariance of (Y_i, Z_i) at (theta, sigma).
double cov_yz(const ItemCalibration& item, double theta, double sigma);

/// Inverse-variance weights normalized to sum to one.
std::vector<double> null_weights(std::span<const double> taus);

/// Variance of the efficient estimator, 1 / sum(1 / tau_i).
double var_estimator(std::span<const double> taus);

/// Asymptotic null variance of U_i = (Y_i - theta) / tau_i.
double omega(std::span<const double> taus, std::size_t i);

/// The data points and the null-variance map of one scaling problem.
struct ScalingProblem {
  ScalingKind kind = ScalingKind::intercept;
  std::vector<double> ys;
  TauFn tau;
};

ScalingProblem make_problem(const CalibrationPair& pair, ScalingKind kind);

}  // namespace rdif
