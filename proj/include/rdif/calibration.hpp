#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace rdif {

/// Position of each item parameter in an item's 4x4 covariance block.
enum Param : int { kA0 = 0, kD0 = 1, kA1 = 2, kD1 = 3 };

/// Slope/intercept MLEs of one item in both groups plus the finite-sample
/// covariance block of (a0, d0, a1, d1). Cross-group entries are zero since
/// the two calibrations use independent samples.
struct ItemCalibration {
  int index = 0;
  double a0 = 1.0;
  double d0 = 0.0;
  double a1 = 1.0;
  double d1 = 0.0;
  Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();

  double var(Param p) const { return cov(p, p); }
  double covar(Param p, Param q) const { return cov(p, q); }

  // Difficulty b = -d/a in each group, derived rather than stored.
  double difficulty0() const { return -d0 / a0; }
  double difficulty1() const { return -d1 / a1; }
};

struct CalibrationPair {
  std::vector<ItemCalibration> items;
  int n0 = 0;
  int n1 = 0;

  std::size_t size() const { return items.size(); }
};

/// Throws ValidationError naming the item index and field on failure.
void validate(const ItemCalibration& item);
void validate(const CalibrationPair& pair);

}  // namespace rdif
