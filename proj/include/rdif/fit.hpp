#pragma once

#include "rdif/scaling.hpp"

#include <vector>

namespace rdif {

/// Result of one robust scaling solve.
struct RdifFit {
  ScalingKind kind = ScalingKind::intercept;
  double theta = 0.0;      // robust estimate of the scaling parameter
  double var_theta = 0.0;  // null variance 1 / sum(1 / tau_i) at theta
  double start = 0.0;      // starting value handed to the solver
  std::vector<double> residuals;  // U_i = (Y_i - theta) / tau_i
  std::vector<double> weights;    // bisquare weight W(U_i) in [0, 1]
  std::vector<bool> flagged;      // |U_i| > k_i at theta
  std::vector<double> taus;       // tau_i used for the final residuals
  std::vector<double> k;          // tuning constants used for the final residuals
  int iterations = 0;
  bool converged = false;
  double objective = 0.0;  // R(theta) = sum rho(U_i)
  double psi_sum = 0.0;    // estimating function Psi(theta) at the final iterate
};

}  // namespace rdif
