#pragma once

#include "rdif/calibration.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

namespace rdif {

/// Generating parameters of a 2PL test: logit P(x_i = 1 | eta) = a_i eta + d_i
/// with eta ~ N(mean, sd^2).
struct TwoPlSpec {
  std::vector<double> a;
  std::vector<double> d;
  double mean = 0.0;
  double sd = 1.0;

  std::size_t m() const { return a.size(); }
  void validate() const;
};

/// Binary responses, row-major n x m.
struct ResponseMatrix {
  int n = 0;
  int m = 0;
  std::vector<std::uint8_t> x;
  std::uint64_t seed = 0;
  std::vector<std::string> item_ids;

  std::uint8_t at(int row, int col) const { return x[static_cast<std::size_t>(row) * m + col]; }
};

ResponseMatrix simulate_2pl(const TwoPlSpec& spec, int n, std::uint64_t seed);
ResponseMatrix simulate_2pl(const TwoPlSpec& spec, int n, std::mt19937_64& rng);

/// Rectangular quadrature on [-range, range] with weights proportional to the
/// standard normal density, normalized to sum to one.
struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
};

Quadrature make_quadrature(int points, double range);

struct FitOptions {
  int quad_points = 61;
  double quad_range = 5.0;
  double tol = 1e-5;
  int max_em_iter = 5000;
  double min_slope = 0.05;
  double max_slope = 20.0;
  /// Newton steps on the marginal likelihood after EM.
  int polish_steps = 3;
  bool compute_cov = true;
};

struct Mle2pl {
  std::vector<double> a_hat;
  std::vector<double> d_hat;
  Eigen::MatrixXd cov;  // ordered (a_1, d_1, ..., a_m, d_m)
  double loglik = 0.0;
  std::vector<double> loglik_trace;  // one entry per E-step
  int em_iterations = 0;
  bool converged = false;
  int n = 0;
  int quad_points = 61;
  double quad_range = 5.0;
};

/// Marginal maximum likelihood by EM with N(0, 1) latent density.
/// Throws DegenerateItemError when an item has a single response category.
Mle2pl fit_2pl(const ResponseMatrix& data, const FitOptions& options = {});

double marginal_loglik(const ResponseMatrix& data, const std::vector<double>& a,
                       const std::vector<double>& d, const Quadrature& quad);

/// Analytic gradient of marginal_loglik, ordered (a_1, d_1, ..., a_m, d_m).
Eigen::VectorXd marginal_score(const ResponseMatrix& data, const std::vector<double>& a,
                               const std::vector<double>& d, const Quadrature& quad);

/// Inverse observed information from central differences of the analytic
/// score. Throws SingularMatrixError when the information is not PD.
Eigen::MatrixXd mle_covariance(const Mle2pl& fit, const ResponseMatrix& data);

/// Assembles per-item covariance blocks from two independent calibrations.
CalibrationPair make_pair(const Mle2pl& fit0, const Mle2pl& fit1);

/// Header row of item ids followed by one 0/1 row per respondent.
ResponseMatrix read_responses(std::istream& in);
void write_responses(const ResponseMatrix& data, std::ostream& out);

}  // namespace rdif
