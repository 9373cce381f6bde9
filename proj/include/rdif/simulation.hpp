#pragma once

#include "rdif/irt.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rdif {

enum class DifType { intercept, slope, both };

const char* to_string(DifType t);
std::optional<DifType> parse_dif_type(const std::string& name);

/// Latent distribution of the focal group in the reference metric. Either
/// fixed (mean, sd) or drawn once per replication with mean ~ U(mean_lo,
/// mean_hi) and variance ~ U(var_lo, var_hi).
struct ImpactModel {
  bool sampled = false;
  double mean = 0.5;
  double sd = 1.0;
  double mean_lo = -0.5;
  double mean_hi = 0.5;
  double var_lo = 0.5;
  double var_hi = 2.0;
};

struct SimCondition {
  std::string label;
  int m = 15;
  int n0 = 500;
  int n1 = 500;
  int dif_count = 0;
  DifType dif_type = DifType::intercept;
  double delta = 0.5;  // additive shift of the difficulty
  double gamma = 1.0;  // multiplicative factor on the slope
  ImpactModel impact;
  int reps = 200;
  std::uint64_t seed = 1;
  double alpha = 0.05;

  bool has_intercept_dif() const { return dif_type != DifType::slope && delta != 0.0; }
  bool has_slope_dif() const { return dif_type != DifType::intercept && gamma != 1.0; }
  void validate() const;
};

struct GeneratedData {
  ResponseMatrix data0;
  ResponseMatrix data1;
  std::vector<int> dif_items;  // zero-based, sorted
  TwoPlSpec spec0;
  TwoPlSpec spec1;  // focal parameters in the reference metric
  double mu = 0.0;
  double sigma = 1.0;

  double theta() const { return mu / sigma; }
};

/// Deterministic in (cond.seed, rep).
GeneratedData gen_condition_data(const SimCondition& cond, int rep);

/// Aggregated flags of one method/test within one condition. Items count as
/// positives when they carry DIF in the parameter the test targets.
struct MethodTestRow {
  std::string method;
  std::string test;
  long fp = 0;
  long tn = 0;
  long tp = 0;
  long fn = 0;
  int failures = 0;
  double mean_estimate = 0.0;  // NaN when the method has no estimate
  double sd_estimate = 0.0;

  double fpr() const;
  double power() const;  // NaN when there are no positives
};

struct RepRecord {
  int rep = 0;
  double theta_true = 0.0;
  double theta_hat = 0.0;  // NaN when the analysis failed
  double sigma_true = 1.0;
  double sigma_hat = 0.0;
  bool converged = false;
  std::string error;
};

struct ConditionResult {
  SimCondition cond;
  std::vector<MethodTestRow> rows;
  std::vector<RepRecord> reps;
  int failures = 0;

  double convergence_rate() const;
  const MethodTestRow* find(const std::string& method, const std::string& test) const;
};

struct SimResult {
  std::string design;
  std::vector<ConditionResult> conditions;
};

struct RunOptions {
  unsigned jobs = 0;  // 0 selects the available hardware parallelism
  FitOptions fit;
};

SimResult run_conditions(const std::string& design, const std::vector<SimCondition>& conds,
                         const RunOptions& options = {});

struct Sim1Config {
  int m = 15;
  int n = 500;
  double delta = 0.5;
  std::vector<int> dif_counts;  // empty means 0..ceil(m/2)
  double impact_mean = 0.5;
  double impact_sd = 1.0;
  int reps = 200;
  std::uint64_t seed = 20240601;
  double alpha = 0.05;
};

struct DifArm {
  DifType type = DifType::intercept;
  double delta = 0.0;
  double gamma = 1.0;
};

struct Sim2Config {
  int m = 10;
  std::vector<int> ns{200, 350, 500};
  std::vector<DifArm> arms{{DifType::intercept, 0.5, 1.0},
                           {DifType::slope, 0.0, 2.0},
                           {DifType::both, 0.35, 1.5}};
  int dif_count = 1;
  double mean_lo = -0.5;
  double mean_hi = 0.5;
  double var_lo = 0.5;
  double var_hi = 2.0;
  int reps = 200;
  std::uint64_t seed = 20240602;
  double alpha = 0.05;
};

/// Throw ValidationError on bad fields; unknown keys are rejected.
Sim1Config sim1_config_from_json(const nlohmann::json& j);
Sim2Config sim2_config_from_json(const nlohmann::json& j);

std::vector<SimCondition> sim1_conditions(const Sim1Config& config);
std::vector<SimCondition> sim2_conditions(const Sim2Config& config);

SimResult run_sim1(const Sim1Config& config, const RunOptions& options = {});
SimResult run_sim2(const Sim2Config& config, const RunOptions& options = {});

void write_sim_csv(const SimResult& result, std::ostream& out);
void write_theta_dump(const SimResult& result, std::ostream& out);

}  // namespace rdif
