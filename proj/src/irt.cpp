#include "rdif/irt.hpp"

#include "rdif/error.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace rdif {

namespace {

constexpr double kScoreStep = 1e-5;

double log1pexp(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct EStep {
  double loglik = 0.0;
  Eigen::VectorXd nq;  // expected respondents per node
  Eigen::MatrixXd r;   // m x Q expected correct responses per node
};

class Engine {
 public:
  Engine(const ResponseMatrix& data, Quadrature quad) : quad_(std::move(quad)) {
    x_.resize(data.n, data.m);
    for (int p = 0; p < data.n; ++p) {
      for (int i = 0; i < data.m; ++i) x_(p, i) = data.at(p, i);
    }
    t_ = Eigen::Map<const Eigen::VectorXd>(quad_.nodes.data(), quad_.nodes.size());
    logw_.resize(t_.size());
    for (Eigen::Index q = 0; q < t_.size(); ++q) logw_(q) = std::log(quad_.weights[q]);
  }

  int m() const { return static_cast<int>(x_.cols()); }
  const Eigen::VectorXd& nodes() const { return t_; }

  EStep run(const std::vector<double>& a, const std::vector<double>& d, bool need_counts = true) const {
    const Eigen::Index nq = t_.size();
    Eigen::MatrixXd z(m(), nq);
    Eigen::RowVectorXd base = logw_.transpose();
    for (int i = 0; i < m(); ++i) {
      for (Eigen::Index q = 0; q < nq; ++q) {
        z(i, q) = a[i] * t_(q) + d[i];
        base(q) -= log1pexp(z(i, q));
      }
    }
    Eigen::MatrixXd ll = x_ * z;
    ll.rowwise() += base;
    EStep out;
    for (Eigen::Index p = 0; p < ll.rows(); ++p) {
      const double top = ll.row(p).maxCoeff();
      ll.row(p) = (ll.row(p).array() - top).exp();
      const double s = ll.row(p).sum();
      out.loglik += top + std::log(s);
      ll.row(p) /= s;
    }
    if (need_counts) {
      out.nq = ll.colwise().sum().transpose();
      out.r = x_.transpose() * ll;
    }
    return out;
  }

  Eigen::VectorXd score(const std::vector<double>& a, const std::vector<double>& d) const {
    return score_from(run(a, d), a, d);
  }

  Eigen::VectorXd score_from(const EStep& e, const std::vector<double>& a,
                             const std::vector<double>& d) const {
    Eigen::VectorXd g(2 * m());
    for (int i = 0; i < m(); ++i) {
      double ga = 0.0;
      double gd = 0.0;
      for (Eigen::Index q = 0; q < t_.size(); ++q) {
        const double resid = e.r(i, q) - e.nq(q) * logistic(a[i] * t_(q) + d[i]);
        ga += resid * t_(q);
        gd += resid;
      }
      g(2 * i) = ga;
      g(2 * i + 1) = gd;
    }
    return g;
  }

  // Differences of the analytic score, symmetrized. Central unless `g0`
  // (the score at (a, d)) is supplied for forward differences.
  Eigen::MatrixXd hessian(const std::vector<double>& a, const std::vector<double>& d,
                          const Eigen::VectorXd* g0 = nullptr) const {
    const int p = 2 * m();
    Eigen::MatrixXd h(p, p);
    for (int j = 0; j < p; ++j) {
      std::vector<double> ap = a, dp = d, am = a, dm = d;
      auto& vp = (j % 2 == 0) ? ap : dp;
      auto& vm = (j % 2 == 0) ? am : dm;
      vp[j / 2] += kScoreStep;
      if (g0) {
        h.col(j) = (score(ap, dp) - *g0) / kScoreStep;
      } else {
        vm[j / 2] -= kScoreStep;
        h.col(j) = (score(ap, dp) - score(am, dm)) / (2.0 * kScoreStep);
      }
    }
    return 0.5 * (h + h.transpose());
  }

 private:
  Quadrature quad_;
  Eigen::MatrixXd x_;
  Eigen::VectorXd t_;
  Eigen::VectorXd logw_;
};

// Expected complete-data log-likelihood of one item.
double item_q(const EStep& e, int i, const Eigen::VectorXd& t, double a, double d) {
  double s = 0.0;
  for (Eigen::Index q = 0; q < t.size(); ++q) {
    const double z = a * t(q) + d;
    s += e.r(i, q) * z - e.nq(q) * log1pexp(z);
  }
  return s;
}

// Newton ascent on item_q with backtracking; returns true if a slope bound
// was active at the end.
bool m_step_item(const EStep& e, int i, const Eigen::VectorXd& t, const FitOptions& opt,
                 double& a, double& d) {
  bool at_bound = false;
  double current = item_q(e, i, t, a, d);
  for (int it = 0; it < 20; ++it) {
    double ga = 0.0, gd = 0.0, haa = 0.0, had = 0.0, hdd = 0.0;
    for (Eigen::Index q = 0; q < t.size(); ++q) {
      const double p = logistic(a * t(q) + d);
      const double resid = e.r(i, q) - e.nq(q) * p;
      const double w = e.nq(q) * p * (1.0 - p);
      ga += resid * t(q);
      gd += resid;
      haa += w * t(q) * t(q);
      had += w * t(q);
      hdd += w;
    }
    const double det = haa * hdd - had * had;
    if (!(det > 0.0)) break;
    double sa = (hdd * ga - had * gd) / det;
    double sd = (haa * gd - had * ga) / det;
    bool accepted = false;
    for (int half = 0; half < 30; ++half) {
      double na = a + sa;
      const double nd = d + sd;
      const bool clamp = na < opt.min_slope || na > opt.max_slope;
      na = std::clamp(na, opt.min_slope, opt.max_slope);
      const double value = item_q(e, i, t, na, nd);
      if (value >= current) {
        const double change = std::max(std::abs(na - a), std::abs(nd - d));
        a = na;
        d = nd;
        current = value;
        at_bound = clamp;
        accepted = change > 1e-12;
        break;
      }
      sa *= 0.5;
      sd *= 0.5;
    }
    if (!accepted) break;
  }
  return at_bound;
}

void check_degenerate(const ResponseMatrix& data) {
  for (int i = 0; i < data.m; ++i) {
    int ones = 0;
    for (int p = 0; p < data.n; ++p) ones += data.at(p, i);
    if (ones == 0 || ones == data.n) {
      const std::string id = i < static_cast<int>(data.item_ids.size())
                                 ? data.item_ids[i]
                                 : std::to_string(i + 1);
      throw DegenerateItemError(static_cast<std::size_t>(i),
                                "item " + id + ": all responses are " + (ones == 0 ? "0" : "1"));
    }
  }
}

// Starting values from item proportions.
void initial_values(const ResponseMatrix& data, std::vector<double>& a, std::vector<double>& d) {
  a.assign(data.m, 1.0);
  d.assign(data.m, 0.0);
  for (int i = 0; i < data.m; ++i) {
    int ones = 0;
    for (int p = 0; p < data.n; ++p) ones += data.at(p, i);
    const double prop = (ones + 0.5) / (data.n + 1.0);
    d[i] = 1.3 * std::log(prop / (1.0 - prop));
  }
}

}  // namespace

void TwoPlSpec::validate() const {
  if (a.size() != d.size()) throw ValidationError("slope and intercept lists differ in length");
  if (a.empty()) throw ValidationError("at least one item required");
  if (!(sd > 0.0) || !std::isfinite(sd)) throw ValidationError("latent sd must be positive");
  if (!std::isfinite(mean)) throw ValidationError("latent mean must be finite");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i] > 0.0) || !std::isfinite(a[i])) {
      throw ValidationError("item " + std::to_string(i + 1) + ": slope must be positive");
    }
    if (!std::isfinite(d[i])) {
      throw ValidationError("item " + std::to_string(i + 1) + ": intercept must be finite");
    }
  }
}

ResponseMatrix simulate_2pl(const TwoPlSpec& spec, int n, std::mt19937_64& rng) {
  spec.validate();
  if (n < 1) throw ValidationError("n must be at least 1");
  ResponseMatrix out;
  out.n = n;
  out.m = static_cast<int>(spec.m());
  out.x.resize(static_cast<std::size_t>(n) * out.m);
  for (int i = 0; i < out.m; ++i) out.item_ids.push_back("item" + std::to_string(i + 1));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int p = 0; p < n; ++p) {
    const double eta = spec.mean + spec.sd * normal(rng);
    for (int i = 0; i < out.m; ++i) {
      const double prob = logistic(spec.a[i] * eta + spec.d[i]);
      out.x[static_cast<std::size_t>(p) * out.m + i] = unif(rng) < prob ? 1 : 0;
    }
  }
  return out;
}

ResponseMatrix simulate_2pl(const TwoPlSpec& spec, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ResponseMatrix out = simulate_2pl(spec, n, rng);
  out.seed = seed;
  return out;
}

Quadrature make_quadrature(int points, double range) {
  if (points < 2) throw ValidationError("at least two quadrature points required");
  if (!(range > 0.0)) throw ValidationError("quadrature range must be positive");
  Quadrature quad;
  double total = 0.0;
  for (int q = 0; q < points; ++q) {
    const double t = -range + 2.0 * range * q / (points - 1);
    const double w = std::exp(-0.5 * t * t);
    quad.nodes.push_back(t);
    quad.weights.push_back(w);
    total += w;
  }
  for (double& w : quad.weights) w /= total;
  return quad;
}

double marginal_loglik(const ResponseMatrix& data, const std::vector<double>& a,
                       const std::vector<double>& d, const Quadrature& quad) {
  return Engine(data, quad).run(a, d, false).loglik;
}

Eigen::VectorXd marginal_score(const ResponseMatrix& data, const std::vector<double>& a,
                               const std::vector<double>& d, const Quadrature& quad) {
  return Engine(data, quad).score(a, d);
}

namespace {

Eigen::MatrixXd invert_information(const Eigen::MatrixXd& hessian) {
  const Eigen::MatrixXd info = -hessian;
  Eigen::LLT<Eigen::MatrixXd> llt(info);
  if (llt.info() != Eigen::Success) {
    throw SingularMatrixError("observed information is not positive definite");
  }
  Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(info.rows(), info.cols()));
  cov = 0.5 * (cov + cov.transpose());
  if (!cov.allFinite()) throw SingularMatrixError("observed information is singular");
  return cov;
}

}  // namespace

Mle2pl fit_2pl(const ResponseMatrix& data, const FitOptions& options) {
  if (data.n < 1 || data.m < 1) throw ValidationError("empty response matrix");
  check_degenerate(data);
  const Engine engine(data, make_quadrature(options.quad_points, options.quad_range));
  const Eigen::VectorXd& t = engine.nodes();

  Mle2pl fit;
  fit.n = data.n;
  fit.quad_points = options.quad_points;
  fit.quad_range = options.quad_range;
  initial_values(data, fit.a_hat, fit.d_hat);

  bool at_bound = false;
  bool em_done = false;
  for (int iter = 0; iter < options.max_em_iter; ++iter) {
    const EStep e = engine.run(fit.a_hat, fit.d_hat);
    fit.loglik_trace.push_back(e.loglik);
    double change = 0.0;
    at_bound = false;
    for (int i = 0; i < data.m; ++i) {
      const double a0 = fit.a_hat[i];
      const double d0 = fit.d_hat[i];
      at_bound = m_step_item(e, i, t, options, fit.a_hat[i], fit.d_hat[i]) || at_bound;
      change = std::max({change, std::abs(fit.a_hat[i] - a0), std::abs(fit.d_hat[i] - d0)});
    }
    fit.em_iterations = iter + 1;
    if (change < options.tol) {
      em_done = true;
      break;
    }
  }

  EStep e = engine.run(fit.a_hat, fit.d_hat);
  fit.loglik = e.loglik;
  fit.loglik_trace.push_back(e.loglik);

  if (!at_bound) {
    for (int step = 0; step < options.polish_steps; ++step) {
      const Eigen::VectorXd g = engine.score_from(e, fit.a_hat, fit.d_hat);
      if (g.cwiseAbs().maxCoeff() < 1e-8) break;
      const Eigen::MatrixXd hess = engine.hessian(fit.a_hat, fit.d_hat, &g);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(-hess);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
      const Eigen::VectorXd delta = ldlt.solve(g);
      std::vector<double> a = fit.a_hat, d = fit.d_hat;
      bool inside = true;
      for (int i = 0; i < data.m; ++i) {
        a[i] += delta(2 * i);
        d[i] += delta(2 * i + 1);
        inside = inside && a[i] >= options.min_slope && a[i] <= options.max_slope;
      }
      if (!inside) break;
      EStep trial = engine.run(a, d);
      if (!(trial.loglik >= fit.loglik)) break;
      fit.a_hat = std::move(a);
      fit.d_hat = std::move(d);
      fit.loglik = trial.loglik;
      fit.loglik_trace.push_back(trial.loglik);
      e = std::move(trial);
    }
  }
  fit.converged = em_done && !at_bound;

  if (options.compute_cov) {
    fit.cov = invert_information(engine.hessian(fit.a_hat, fit.d_hat));
  }
  return fit;
}

Eigen::MatrixXd mle_covariance(const Mle2pl& fit, const ResponseMatrix& data) {
  if (static_cast<int>(fit.a_hat.size()) != data.m) {
    throw ValidationError("fit and data have different item counts");
  }
  const Engine engine(data, make_quadrature(fit.quad_points, fit.quad_range));
  return invert_information(engine.hessian(fit.a_hat, fit.d_hat));
}

CalibrationPair make_pair(const Mle2pl& fit0, const Mle2pl& fit1) {
  const std::size_t m = fit0.a_hat.size();
  if (fit1.a_hat.size() != m) {
    throw ValidationError("calibrations have different item counts (" + std::to_string(m) +
                          " vs " + std::to_string(fit1.a_hat.size()) + ")");
  }
  const auto p = static_cast<Eigen::Index>(2 * m);
  if (fit0.cov.rows() != p || fit0.cov.cols() != p || fit1.cov.rows() != p ||
      fit1.cov.cols() != p) {
    throw ValidationError("calibration covariance has the wrong dimension");
  }
  CalibrationPair pair;
  pair.n0 = fit0.n;
  pair.n1 = fit1.n;
  for (std::size_t i = 0; i < m; ++i) {
    ItemCalibration item;
    item.index = static_cast<int>(i + 1);
    item.a0 = fit0.a_hat[i];
    item.d0 = fit0.d_hat[i];
    item.a1 = fit1.a_hat[i];
    item.d1 = fit1.d_hat[i];
    const auto j = static_cast<Eigen::Index>(2 * i);
    item.cov.block<2, 2>(0, 0) = fit0.cov.block<2, 2>(j, j);
    item.cov.block<2, 2>(2, 2) = fit1.cov.block<2, 2>(j, j);
    pair.items.push_back(item);
  }
  return pair;
}

ResponseMatrix read_responses(std::istream& in) {
  ResponseMatrix data;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (!have_header) {
      data.item_ids = cells;
      data.m = static_cast<int>(cells.size());
      have_header = true;
      continue;
    }
    if (static_cast<int>(cells.size()) != data.m) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(data.m) + " columns, got " +
                       std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      std::string v = cells[c];
      v.erase(0, v.find_first_not_of(' '));
      v.erase(v.find_last_not_of(' ') + 1);
      if (v != "0" && v != "1") {
        throw ParseError("line " + std::to_string(line_no) + ", column " +
                         std::to_string(c + 1) + ": expected 0 or 1, got \"" + v + "\"");
      }
      data.x.push_back(v == "1" ? 1 : 0);
    }
    ++data.n;
  }
  if (!have_header) throw ParseError("missing header row");
  if (data.n < 1) throw ParseError("no response rows");
  return data;
}

void write_responses(const ResponseMatrix& data, std::ostream& out) {
  for (int i = 0; i < data.m; ++i) {
    if (i) out << ',';
    out << (i < static_cast<int>(data.item_ids.size()) ? data.item_ids[i]
                                                      : "item" + std::to_string(i + 1));
  }
  out << '\n';
  for (int p = 0; p < data.n; ++p) {
    for (int i = 0; i < data.m; ++i) {
      if (i) out << ',';
      out << static_cast<int>(data.at(p, i));
    }
    out << '\n';
  }
}

}  // namespace rdif
