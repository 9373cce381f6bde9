#include "rdif/simulation.hpp"

#include "rdif/dif_tests.hpp"
#include "rdif/error.hpp"
#include "rdif/io.hpp"
#include "rdif/mantel_haenszel.hpp"
#include "rdif/normal.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <thread>

namespace rdif {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::mt19937_64 stream(std::uint64_t seed, int rep, int id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(rep), static_cast<std::uint32_t>(id)};
  return std::mt19937_64(seq);
}

std::uint64_t derive_seed(std::uint64_t base, int index) {
  std::mt19937_64 rng = stream(base, index, 0x5eed);
  return rng();
}

// Per-item outcome of one replication for one method/test.
struct Flags {
  std::vector<bool> flagged;
  bool failed = false;
};

struct RepOutcome {
  RepRecord record;
  std::vector<int> dif_items;
  Flags rdif_intercept, rdif_slope, rdif_joint, rdif_true, mh;
};

Flags failed_flags(int m) { return {std::vector<bool>(m, false), true}; }

RepOutcome run_rep(const SimCondition& cond, int rep, const FitOptions& fit_options) {
  RepOutcome out;
  const GeneratedData gen = gen_condition_data(cond, rep);
  out.dif_items = gen.dif_items;
  out.record.rep = rep;
  out.record.theta_true = gen.theta();
  out.record.sigma_true = gen.sigma;
  out.record.theta_hat = kNaN;
  out.record.sigma_hat = kNaN;

  try {
    const auto results = mantel_haenszel(gen.data0, gen.data1, cond.alpha);
    out.mh.flagged.resize(cond.m);
    for (int i = 0; i < cond.m; ++i) out.mh.flagged[i] = results[i].flag;
  } catch (const Error&) {
    out.mh = failed_flags(cond.m);
  }

  try {
    const Mle2pl fit0 = fit_2pl(gen.data0, fit_options);
    const Mle2pl fit1 = fit_2pl(gen.data1, fit_options);
    const CalibrationPair pair = make_pair(fit0, fit1);
    const DifReport report = analyze(pair, cond.alpha);

    out.rdif_intercept.flagged = report.theta_fit.flagged;
    out.rdif_slope.flagged = report.sigma_fit.flagged;
    out.rdif_joint.flagged.resize(cond.m);
    for (int i = 0; i < cond.m; ++i) out.rdif_joint.flagged[i] = report.items[i].flag_joint;
    out.record.theta_hat = report.theta_fit.theta;
    out.record.sigma_hat = report.sigma_fit.theta;
    out.record.converged = fit0.converged && fit1.converged && report.theta_fit.converged &&
                           report.sigma_fit.converged;

    // Wald test of the intercept problem at the generating scaling value.
    out.rdif_true.flagged.resize(cond.m);
    const double theta0 = gen.theta();
    for (int i = 0; i < cond.m; ++i) {
      const double t =
          (y_intercept(pair.items[i]) - theta0) / std::sqrt(tau_intercept(pair.items[i], theta0));
      out.rdif_true.flagged[i] = two_sided_p(t) < cond.alpha;
    }
  } catch (const Error& e) {
    out.record.error = e.what();
    out.rdif_intercept = failed_flags(cond.m);
    out.rdif_slope = failed_flags(cond.m);
    out.rdif_joint = failed_flags(cond.m);
    out.rdif_true = failed_flags(cond.m);
  }
  return out;
}

void tally(MethodTestRow& row, const Flags& flags, const std::vector<bool>& positive) {
  if (flags.failed) ++row.failures;
  for (std::size_t i = 0; i < positive.size(); ++i) {
    const bool f = flags.flagged[i];
    if (positive[i]) {
      (f ? row.tp : row.fn) += 1;
    } else {
      (f ? row.fp : row.tn) += 1;
    }
  }
}

void summarize(MethodTestRow& row, const std::vector<double>& values) {
  std::vector<double> v;
  for (double x : values) {
    if (std::isfinite(x)) v.push_back(x);
  }
  if (v.empty()) {
    row.mean_estimate = kNaN;
    row.sd_estimate = kNaN;
    return;
  }
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  row.mean_estimate = mean;
  row.sd_estimate = v.size() > 1 ? std::sqrt(ss / (v.size() - 1)) : kNaN;
}

ConditionResult aggregate(const SimCondition& cond, std::vector<RepOutcome>& outcomes) {
  ConditionResult result;
  result.cond = cond;
  MethodTestRow ri{"rdif", "intercept"}, rs{"rdif", "slope"}, rj{"rdif", "joint"},
      rt{"rdif_true", "intercept"}, mh{"mh", "intercept"};
  std::vector<double> thetas, sigmas;
  for (RepOutcome& o : outcomes) {
    std::vector<bool> any(cond.m, false), icpt(cond.m, false), slope(cond.m, false);
    for (int i : o.dif_items) {
      any[i] = true;
      icpt[i] = cond.has_intercept_dif();
      slope[i] = cond.has_slope_dif();
    }
    tally(ri, o.rdif_intercept, icpt);
    tally(rs, o.rdif_slope, slope);
    tally(rj, o.rdif_joint, any);
    tally(rt, o.rdif_true, icpt);
    tally(mh, o.mh, any);
    if (o.rdif_intercept.failed) ++result.failures;
    thetas.push_back(o.record.theta_hat);
    sigmas.push_back(o.record.sigma_hat);
    result.reps.push_back(std::move(o.record));
  }
  summarize(ri, thetas);
  summarize(rs, sigmas);
  summarize(rj, thetas);
  rt.mean_estimate = rt.sd_estimate = kNaN;
  mh.mean_estimate = mh.sd_estimate = kNaN;
  result.rows = {ri, rs, rj, rt, mh};
  return result;
}

std::string real_text(double x) { return format_real(x); }

// JSON field readers for configs.
template <typename T>
T get(const nlohmann::json& j, const char* key, T fallback) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(std::string("config field \"") + key + "\" has the wrong type");
  }
}

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ValidationError("unknown config field \"" + key + "\"");
  }
}

}  // namespace

const char* to_string(DifType t) {
  switch (t) {
    case DifType::intercept:
      return "intercept";
    case DifType::slope:
      return "slope";
    case DifType::both:
      return "both";
  }
  return "intercept";
}

std::optional<DifType> parse_dif_type(const std::string& name) {
  if (name == "intercept") return DifType::intercept;
  if (name == "slope") return DifType::slope;
  if (name == "both") return DifType::both;
  return std::nullopt;
}

void SimCondition::validate() const {
  if (m < 3) throw ValidationError("m must be at least 3");
  if (n0 < 1 || n1 < 1) throw ValidationError("group sizes must be positive");
  if (dif_count < 0 || dif_count > m) {
    throw ValidationError("dif_count must be between 0 and m (got " + std::to_string(dif_count) +
                          " with m = " + std::to_string(m) + ")");
  }
  if (reps < 1) throw ValidationError("reps must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must be in (0,1)");
  if (!(gamma > 0.0)) throw ValidationError("gamma must be positive");
  if (!std::isfinite(delta)) throw ValidationError("delta must be finite");
  if (impact.sampled) {
    if (!(impact.mean_lo <= impact.mean_hi)) throw ValidationError("impact mean range is empty");
    if (!(impact.var_lo > 0.0 && impact.var_lo <= impact.var_hi)) {
      throw ValidationError("impact variance range must be positive and non-empty");
    }
  } else if (!(impact.sd > 0.0)) {
    throw ValidationError("impact sd must be positive");
  }
}

GeneratedData gen_condition_data(const SimCondition& cond, int rep) {
  cond.validate();
  std::mt19937_64 rng = stream(cond.seed, rep, 0);
  std::uniform_real_distribution<double> slope(0.9, 2.5);
  std::uniform_real_distribution<double> difficulty(-1.5, 1.5);

  GeneratedData gen;
  std::vector<double> b(cond.m);
  for (int i = 0; i < cond.m; ++i) {
    gen.spec0.a.push_back(slope(rng));
    b[i] = difficulty(rng);
    gen.spec0.d.push_back(-gen.spec0.a[i] * b[i]);
  }

  std::vector<int> order(cond.m);
  std::iota(order.begin(), order.end(), 0);
  for (int i = 0; i < cond.dif_count; ++i) {
    std::uniform_int_distribution<int> pick(i, cond.m - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  gen.dif_items.assign(order.begin(), order.begin() + cond.dif_count);
  std::sort(gen.dif_items.begin(), gen.dif_items.end());

  if (cond.impact.sampled) {
    gen.mu = std::uniform_real_distribution<double>(cond.impact.mean_lo, cond.impact.mean_hi)(rng);
    gen.sigma =
        std::sqrt(std::uniform_real_distribution<double>(cond.impact.var_lo, cond.impact.var_hi)(rng));
  } else {
    gen.mu = cond.impact.mean;
    gen.sigma = cond.impact.sd;
  }

  gen.spec1 = gen.spec0;
  for (int i : gen.dif_items) {
    if (cond.dif_type != DifType::intercept) gen.spec1.a[i] = cond.gamma * gen.spec0.a[i];
    if (cond.dif_type != DifType::slope) gen.spec1.d[i] = -gen.spec1.a[i] * (b[i] + cond.delta);
  }
  gen.spec0.mean = 0.0;
  gen.spec0.sd = 1.0;
  gen.spec1.mean = gen.mu;
  gen.spec1.sd = gen.sigma;

  std::mt19937_64 rng0 = stream(cond.seed, rep, 1);
  std::mt19937_64 rng1 = stream(cond.seed, rep, 2);
  gen.data0 = simulate_2pl(gen.spec0, cond.n0, rng0);
  gen.data1 = simulate_2pl(gen.spec1, cond.n1, rng1);
  gen.data0.seed = gen.data1.seed = cond.seed;
  return gen;
}

double MethodTestRow::fpr() const {
  const long neg = fp + tn;
  return neg > 0 ? static_cast<double>(fp) / neg : kNaN;
}

double MethodTestRow::power() const {
  const long pos = tp + fn;
  return pos > 0 ? static_cast<double>(tp) / pos : kNaN;
}

double ConditionResult::convergence_rate() const {
  if (reps.empty()) return kNaN;
  const auto ok = std::count_if(reps.begin(), reps.end(), [](const RepRecord& r) { return r.converged; });
  return static_cast<double>(ok) / reps.size();
}

const MethodTestRow* ConditionResult::find(const std::string& method,
                                           const std::string& test) const {
  for (const auto& row : rows) {
    if (row.method == method && row.test == test) return &row;
  }
  return nullptr;
}

SimResult run_conditions(const std::string& design, const std::vector<SimCondition>& conds,
                         const RunOptions& options) {
  for (const auto& c : conds) c.validate();
  std::vector<std::pair<std::size_t, int>> units;
  std::vector<std::vector<RepOutcome>> outcomes(conds.size());
  for (std::size_t c = 0; c < conds.size(); ++c) {
    outcomes[c].resize(conds[c].reps);
    for (int r = 0; r < conds[c].reps; ++r) units.emplace_back(c, r);
  }

  unsigned jobs = options.jobs ? options.jobs : std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, std::max<std::size_t>(1, units.size()));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t u = next++; u < units.size(); u = next++) {
      const auto [c, r] = units[u];
      outcomes[c][r] = run_rep(conds[c], r, options.fit);
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }

  SimResult result;
  result.design = design;
  for (std::size_t c = 0; c < conds.size(); ++c) {
    result.conditions.push_back(aggregate(conds[c], outcomes[c]));
  }
  return result;
}

Sim1Config sim1_config_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"m", "n", "delta", "dif_counts", "impact_mean", "impact_sd", "reps", "seed",
                     "alpha"});
  Sim1Config c;
  c.m = get(j, "m", c.m);
  c.n = get(j, "n", c.n);
  c.delta = get(j, "delta", c.delta);
  c.dif_counts = get(j, "dif_counts", c.dif_counts);
  c.impact_mean = get(j, "impact_mean", c.impact_mean);
  c.impact_sd = get(j, "impact_sd", c.impact_sd);
  c.reps = get(j, "reps", c.reps);
  c.seed = get(j, "seed", c.seed);
  c.alpha = get(j, "alpha", c.alpha);
  for (const auto& cond : sim1_conditions(c)) cond.validate();
  return c;
}

Sim2Config sim2_config_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"m", "ns", "arms", "dif_count", "mean_range", "var_range", "reps", "seed",
                     "alpha"});
  Sim2Config c;
  c.m = get(j, "m", c.m);
  c.ns = get(j, "ns", c.ns);
  c.dif_count = get(j, "dif_count", c.dif_count);
  c.reps = get(j, "reps", c.reps);
  c.seed = get(j, "seed", c.seed);
  c.alpha = get(j, "alpha", c.alpha);
  auto range = [&](const char* key, double& lo, double& hi) {
    const auto r = get(j, key, std::vector<double>{lo, hi});
    if (r.size() != 2) throw ValidationError(std::string(key) + " must have two entries");
    lo = r[0];
    hi = r[1];
  };
  range("mean_range", c.mean_lo, c.mean_hi);
  range("var_range", c.var_lo, c.var_hi);
  if (j.contains("arms")) {
    if (!j["arms"].is_array()) throw ValidationError("arms must be an array");
    c.arms.clear();
    for (const auto& a : j["arms"]) {
      reject_unknown(a, {"type", "delta", "gamma"});
      DifArm arm;
      const auto type = parse_dif_type(get(a, "type", std::string("intercept")));
      if (!type) throw ValidationError("arm type must be intercept, slope or both");
      arm.type = *type;
      arm.delta = get(a, "delta", 0.0);
      arm.gamma = get(a, "gamma", 1.0);
      c.arms.push_back(arm);
    }
  }
  if (c.ns.empty() || c.arms.empty()) throw ValidationError("ns and arms must be non-empty");
  for (const auto& cond : sim2_conditions(c)) cond.validate();
  return c;
}

std::vector<SimCondition> sim1_conditions(const Sim1Config& config) {
  std::vector<int> counts = config.dif_counts;
  if (counts.empty()) {
    for (int k = 0; k <= (config.m + 1) / 2; ++k) counts.push_back(k);
  }
  std::vector<SimCondition> conds;
  for (std::size_t idx = 0; idx < counts.size(); ++idx) {
    SimCondition c;
    c.label = "dif" + std::to_string(counts[idx]);
    c.m = config.m;
    c.n0 = c.n1 = config.n;
    c.dif_count = counts[idx];
    c.dif_type = DifType::intercept;
    c.delta = config.delta;
    c.gamma = 1.0;
    c.impact.mean = config.impact_mean;
    c.impact.sd = config.impact_sd;
    c.reps = config.reps;
    c.seed = derive_seed(config.seed, static_cast<int>(idx));
    c.alpha = config.alpha;
    conds.push_back(c);
  }
  return conds;
}

std::vector<SimCondition> sim2_conditions(const Sim2Config& config) {
  std::vector<SimCondition> conds;
  int idx = 0;
  for (const DifArm& arm : config.arms) {
    for (int n : config.ns) {
      SimCondition c;
      c.label = std::string(to_string(arm.type)) + "_n" + std::to_string(n);
      c.m = config.m;
      c.n0 = c.n1 = n;
      c.dif_count = config.dif_count;
      c.dif_type = arm.type;
      c.delta = arm.delta;
      c.gamma = arm.gamma;
      c.impact.sampled = true;
      c.impact.mean_lo = config.mean_lo;
      c.impact.mean_hi = config.mean_hi;
      c.impact.var_lo = config.var_lo;
      c.impact.var_hi = config.var_hi;
      c.reps = config.reps;
      c.seed = derive_seed(config.seed, idx++);
      c.alpha = config.alpha;
      conds.push_back(c);
    }
  }
  return conds;
}

SimResult run_sim1(const Sim1Config& config, const RunOptions& options) {
  return run_conditions("sim1", sim1_conditions(config), options);
}

SimResult run_sim2(const Sim2Config& config, const RunOptions& options) {
  return run_conditions("sim2", sim2_conditions(config), options);
}

void write_sim_csv(const SimResult& result, std::ostream& out) {
  out << "design,condition,m,n0,n1,dif_count,dif_type,delta,gamma,method,test,reps,failures,"
         "fp,tn,tp,fn,fpr,power,mean_theta,sd_theta,convergence_rate\n";
  for (const auto& c : result.conditions) {
    for (const auto& row : c.rows) {
      out << result.design << ',' << c.cond.label << ',' << c.cond.m << ',' << c.cond.n0 << ','
          << c.cond.n1 << ',' << c.cond.dif_count << ',' << to_string(c.cond.dif_type) << ','
          << real_text(c.cond.delta) << ',' << real_text(c.cond.gamma) << ',' << row.method
          << ',' << row.test << ',' << c.cond.reps << ',' << row.failures << ',' << row.fp << ','
          << row.tn << ',' << row.tp << ',' << row.fn << ',' << real_text(row.fpr()) << ','
          << real_text(row.power()) << ',' << real_text(row.mean_estimate) << ','
          << real_text(row.sd_estimate) << ',' << real_text(c.convergence_rate()) << '\n';
    }
  }
}

void write_theta_dump(const SimResult& result, std::ostream& out) {
  out << "design,condition,rep,theta_true,theta_hat,sigma_true,sigma_hat,converged\n";
  for (const auto& c : result.conditions) {
    for (const auto& r : c.reps) {
      out << result.design << ',' << c.cond.label << ',' << r.rep << ','
          << real_text(r.theta_true) << ',' << real_text(r.theta_hat) << ','
          << real_text(r.sigma_true) << ',' << real_text(r.sigma_hat) << ','
          << (r.converged ? "true" : "false") << '\n';
    }
  }
}

}  // namespace rdif
