#pragma once

#include "rdif/fit.hpp"

#include <vector>

namespace rdif {

/// Per-item test results. Missing statistics are NaN.
struct ItemDifResult {
  int index = 0;
  double y = 0.0;  // Y_i
  double z = 0.0;  // Z_i, or log Z_i when the slope problem is on the log scale
  double t_intercept = 0.0;
  double p_intercept = 1.0;
  bool flag_intercept = false;
  double t_slope = 0.0;
  double p_slope = 1.0;
  bool flag_slope = false;
  double q_joint = 0.0;
  double p_joint = 1.0;
  bool flag_joint = false;
};

struct DifReport {
  double alpha = 0.05;
  bool log_slope = false;
  RdifFit theta_fit;
  RdifFit sigma_fit;
  std::vector<ItemDifResult> items;

  bool populated() const { return !items.empty(); }
};

}  // namespace rdif
