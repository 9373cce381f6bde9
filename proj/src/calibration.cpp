#include "rdif/calibration.hpp"

#include "rdif/error.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <set>
#include <string>

namespace rdif {

namespace {

constexpr double kSymmetryTol = 1e-10;
const char* const kParamNames[4] = {"a0", "d0", "a1", "d1"};

[[noreturn]] void fail(const ItemCalibration& item, const std::string& msg) {
  throw ValidationError("item " + std::to_string(item.index) + ": " + msg);
}

}  // namespace

void validate(const ItemCalibration& item) {
  const double values[4] = {item.a0, item.d0, item.a1, item.d1};
  for (int p = 0; p < 4; ++p) {
    if (!std::isfinite(values[p])) fail(item, std::string(kParamNames[p]) + " must be finite");
  }
  if (!(item.a0 > 0.0)) fail(item, "a0 must be positive");
  if (!(item.a1 > 0.0)) fail(item, "a1 must be positive");

  if (!item.cov.allFinite()) fail(item, "cov must be finite");
  for (int r = 0; r < 4; ++r) {
    for (int c = r + 1; c < 4; ++c) {
      if (std::fabs(item.cov(r, c) - item.cov(c, r)) > kSymmetryTol) {
        fail(item, "cov is not symmetric at (" + std::to_string(r) + "," + std::to_string(c) + ")");
      }
    }
  }
  for (int r = 0; r < 2; ++r) {
    for (int c = 2; c < 4; ++c) {
      if (item.cov(r, c) != 0.0 || item.cov(c, r) != 0.0) {
        fail(item, std::string("cross-group covariance cov(") + kParamNames[r] + "," +
                       kParamNames[c] + ") must be 0");
      }
    }
  }
  const Eigen::Matrix4d sym = 0.5 * (item.cov + item.cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(sym, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success || !(eig.eigenvalues().minCoeff() > 0.0)) {
    fail(item, "cov must be positive definite");
  }
}

void validate(const CalibrationPair& pair) {
  if (pair.n0 <= 0) throw ValidationError("n0 must be a positive integer");
  if (pair.n1 <= 0) throw ValidationError("n1 must be a positive integer");
  if (pair.items.size() < 3) {
    throw ValidationError("m >= 3 required (got " + std::to_string(pair.items.size()) + " items)");
  }
  std::set<int> seen;
  for (const auto& item : pair.items) {
    if (!seen.insert(item.index).second) fail(item, "duplicate item index");
    validate(item);
  }
}

}  // namespace rdif
