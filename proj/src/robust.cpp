#include "rdif/robust.hpp"

#include "rdif/error.hpp"
#include "rdif/normal.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>

namespace rdif {

namespace {

// Target for |Psi| once the step tolerance has been met; the extra
// iterations are bounded by kPolishIters.
constexpr double kPsiTarget = 1e-11;
constexpr int kPolishIters = 50;
constexpr double kPsiAccept = 1e-8;
constexpr double kStationaryTol = 1e-10;

struct Residuals {
  std::vector<double> taus;
  std::vector<double> k;
  std::vector<double> u;
};

Residuals residuals_at(std::span<const double> ys, std::vector<double> taus,
                       const PsiSpec& spec, double theta) {
  if (taus.size() != ys.size()) {
    throw std::invalid_argument("tau function returned " + std::to_string(taus.size()) +
                                " variances for " + std::to_string(ys.size()) + " items");
  }
  Residuals r;
  r.k = spec.k.empty() ? tune_k(taus, spec.estimation_alpha()) : spec.k;
  if (r.k.size() != ys.size()) throw std::invalid_argument("tuning constant count mismatch");
  r.u.resize(ys.size());
  for (std::size_t i = 0; i < ys.size(); ++i) r.u[i] = (ys[i] - theta) / taus[i];
  r.taus = std::move(taus);
  return r;
}

void check_inputs(std::span<const double> ys, const PsiSpec& spec, double theta0) {
  if (ys.size() < 2) throw std::invalid_argument("at least two items required");
  for (double y : ys) {
    if (!std::isfinite(y)) throw std::invalid_argument("non-finite data value");
  }
  if (!std::isfinite(theta0)) throw std::invalid_argument("starting value must be finite");
  spec.validate(ys.size());
}

double psi_at(std::span<const double> ys, std::vector<double> taus, const PsiSpec& spec,
              double theta) {
  const Residuals r = residuals_at(ys, std::move(taus), spec, theta);
  double psi = 0.0;
  for (std::size_t i = 0; i < ys.size(); ++i) psi += bisquare(r.u[i], r.k[i]).psi;
  return psi;
}

RdifFit finish(std::span<const double> ys, const TauFn& tau_fn, const PsiSpec& spec,
               const SolveOptions& options, const std::vector<double>& taus0, double theta0,
               double theta, int iterations, bool converged) {
  Residuals r = residuals_at(ys, options.update_tau ? tau_fn(theta) : taus0, spec, theta);
  RdifFit fit;
  fit.theta = theta;
  fit.start = theta0;
  fit.iterations = iterations;
  fit.converged = converged;
  fit.var_theta = var_estimator(r.taus);
  fit.residuals = r.u;
  fit.weights.resize(ys.size());
  fit.flagged.resize(ys.size());
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const Bisquare b = bisquare(r.u[i], r.k[i]);
    fit.weights[i] = b.weight;
    fit.flagged[i] = std::fabs(r.u[i]) > r.k[i];
    fit.objective += b.rho;
    fit.psi_sum += b.psi;
  }
  fit.taus = std::move(r.taus);
  fit.k = std::move(r.k);
  return fit;
}

}  // namespace

Bisquare bisquare(double u, double k) {
  Bisquare b;
  const double cap = k * k / 6.0;
  if (std::fabs(u) > k) {
    b.rho = cap;
    return b;
  }
  const double t = (u / k) * (u / k);
  const double s = 1.0 - t;
  b.weight = s * s;
  b.psi = u * b.weight;
  b.rho = cap * (1.0 - s * s * s);
  return b;
}

double bisquare_dpsi(double u, double k) {
  if (std::fabs(u) > k) return 0.0;
  const double t = (u / k) * (u / k);
  return (1.0 - t) * (1.0 - 5.0 * t);
}

void PsiSpec::validate(std::size_t m) const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0,1)");
  if (downtune_alpha) {
    if (!(*downtune_alpha > 0.0 && *downtune_alpha < alpha)) {
      throw std::invalid_argument("downtune alpha must be in (0, alpha)");
    }
  }
  if (!k.empty()) {
    if (k.size() != m) throw std::invalid_argument("tuning constant count mismatch");
    for (double v : k) {
      if (!(v > 0.0)) throw std::invalid_argument("tuning constants must be positive");
    }
  }
}

std::vector<double> tune_k(std::span<const double> taus, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0,1)");
  if (taus.size() < 2) throw std::invalid_argument("tune_k: at least two items required");
  const double z = normal_quantile(1.0 - alpha / 2.0);
  const double v = var_estimator(taus);
  std::vector<double> k(taus.size());
  for (std::size_t i = 0; i < taus.size(); ++i) {
    k[i] = z * std::sqrt((taus[i] - v) / (taus[i] * taus[i]));
  }
  return k;
}

const char* to_string(StartStrategy s) {
  switch (s) {
    case StartStrategy::median: return "median";
    case StartStrategy::lts_half: return "lts";
    case StartStrategy::grid: return "grid";
    case StartStrategy::med3: return "med3";
  }
  return "?";
}

std::optional<StartStrategy> parse_start_strategy(const char* name) {
  if (std::strcmp(name, "median") == 0) return StartStrategy::median;
  if (std::strcmp(name, "lts") == 0 || std::strcmp(name, "lts_half") == 0) {
    return StartStrategy::lts_half;
  }
  if (std::strcmp(name, "grid") == 0) return StartStrategy::grid;
  if (std::strcmp(name, "med3") == 0) return StartStrategy::med3;
  return std::nullopt;
}

double median(std::span<const double> ys) {
  if (ys.empty()) throw std::invalid_argument("median of empty input");
  std::vector<double> s(ys.begin(), ys.end());
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();
  return n % 2 == 1 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
}

double lts_half(std::span<const double> ys) {
  if (ys.empty()) throw std::invalid_argument("lts of empty input");
  std::vector<double> s(ys.begin(), ys.end());
  std::sort(s.begin(), s.end());
  const std::size_t h = s.size() / 2 + 1;
  double best_ss = 0.0;
  double best_mean = 0.0;
  for (std::size_t start = 0; start + h <= s.size(); ++start) {
    double mean = 0.0;
    for (std::size_t j = start; j < start + h; ++j) mean += s[j];
    mean /= static_cast<double>(h);
    double ss = 0.0;
    for (std::size_t j = start; j < start + h; ++j) ss += (s[j] - mean) * (s[j] - mean);
    if (start == 0 || ss < best_ss) {
      best_ss = ss;
      best_mean = mean;
    }
  }
  return best_mean;
}

double objective(std::span<const double> ys, const TauFn& tau_fn, const PsiSpec& spec,
                 double theta) {
  const Residuals r = residuals_at(ys, tau_fn(theta), spec, theta);
  double total = 0.0;
  for (std::size_t i = 0; i < ys.size(); ++i) total += bisquare(r.u[i], r.k[i]).rho;
  return total;
}

double estimating_function(std::span<const double> ys, const TauFn& tau_fn,
                           const PsiSpec& spec, double theta) {
  return psi_at(ys, tau_fn(theta), spec, theta);
}

double grid_argmin(std::span<const double> ys, const TauFn& tau_fn, const PsiSpec& spec,
                   double step) {
  if (ys.empty()) throw std::invalid_argument("grid start of empty input");
  if (!(step > 0.0)) throw std::invalid_argument("grid step must be positive");
  const auto [lo_it, hi_it] = std::minmax_element(ys.begin(), ys.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (hi == lo) return lo;

  std::size_t count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  if (count > kMaxGridPoints) {
    count = kMaxGridPoints;
    step = (hi - lo) / static_cast<double>(count - 1);
  }
  double best = lo;
  double best_value = objective(ys, tau_fn, spec, lo);
  auto consider = [&](double theta) {
    const double value = objective(ys, tau_fn, spec, theta);
    if (value < best_value) {
      best_value = value;
      best = theta;
    }
  };
  for (std::size_t j = 1; j < count; ++j) consider(lo + static_cast<double>(j) * step);
  if (lo + static_cast<double>(count - 1) * step < hi) consider(hi);
  return best;
}

double start_value(std::span<const double> ys, const TauFn& tau_fn, const PsiSpec& spec,
                   StartStrategy strategy) {
  if (ys.empty()) throw std::invalid_argument("start value of empty input");
  switch (strategy) {
    case StartStrategy::median: return median(ys);
    case StartStrategy::lts_half: return lts_half(ys);
    case StartStrategy::grid: return grid_argmin(ys, tau_fn, spec);
    case StartStrategy::med3: {
      const double three[3] = {median(ys), lts_half(ys), grid_argmin(ys, tau_fn, spec)};
      return median(three);
    }
  }
  throw std::invalid_argument("unknown start strategy");
}

RdifFit irls_solve(std::span<const double> ys, const TauFn& tau_fn, const PsiSpec& spec,
                   double theta0, const SolveOptions& options) {
  check_inputs(ys, spec, theta0);
  const std::vector<double> taus0 = tau_fn(theta0);
  auto psi_of = [&](double theta) {
    return psi_at(ys, options.update_tau ? tau_fn(theta) : taus0, spec, theta);
  };
  auto irls_step = [&](double theta) {
    const Residuals r =
        residuals_at(ys, options.update_tau ? tau_fn(theta) : taus0, spec, theta);
    double sw = 0.0;
    double swr = 0.0;
    for (std::size_t i = 0; i < ys.size(); ++i) {
      const double w = bisquare(r.u[i], r.k[i]).weight / r.taus[i];
      sw += w;
      swr += w * (ys[i] - theta);
    }
    if (!(sw > 0.0)) {
      throw NoUsableItemsError("all items have zero weight at theta = " + std::to_string(theta));
    }
    return theta + swr / sw;
  };
  double theta = theta0;
  double prev = theta0;
  bool converged = false;
  int iterations = 0;
  for (int iter = 1; iter <= options.max_iter; ++iter) {
    prev = theta;
    theta = irls_step(theta);
    iterations = iter;
    if (std::fabs(theta - prev) < options.tol) {
      converged = true;
      break;
    }
  }

  // IRLS converges linearly, so a small step does not mean a small Psi.
  // Finish with secant steps, falling back to IRLS when one does not help.
  if (converged) {
    double psi = psi_of(theta);
    double psi_prev = psi_of(prev);
    for (int k = 0; k < kPolishIters && std::fabs(psi) > kPsiTarget; ++k) {
      double next = std::numeric_limits<double>::quiet_NaN();
      const double denom = psi - psi_prev;
      if (denom != 0.0 && theta != prev) next = theta - psi * (theta - prev) / denom;
      double psi_next = std::isfinite(next) ? psi_of(next) : psi;
      if (!(std::fabs(psi_next) < std::fabs(psi))) {
        next = irls_step(theta);
        psi_next = psi_of(next);
        if (!(std::fabs(psi_next) < std::fabs(psi))) break;
      }
      prev = theta;
      psi_prev = psi;
      theta = next;
      psi = psi_next;
    }
    converged = std::fabs(psi) < kPsiAccept;
  }
  return finish(ys, tau_fn, spec, options, taus0, theta0, theta, iterations, converged);
}

RdifFit newton_solve(std::span<const double> ys, const TauFn& tau_fn, const PsiSpec& spec,
                     double theta0, const SolveOptions& options) {
  check_inputs(ys, spec, theta0);
  const std::vector<double> taus0 = tau_fn(theta0);
  double theta = theta0;
  bool converged = false;
  int polish_left = kPolishIters;
  int iterations = 0;
  for (int iter = 1; iter <= options.max_iter; ++iter) {
    const Residuals r =
        residuals_at(ys, options.update_tau ? tau_fn(theta) : taus0, spec, theta);
    double psi = 0.0;
    double slope = 0.0;
    for (std::size_t i = 0; i < ys.size(); ++i) {
      psi += bisquare(r.u[i], r.k[i]).psi;
      slope += bisquare_dpsi(r.u[i], r.k[i]) / r.taus[i];
    }
    if (std::fabs(slope) <= kStationaryTol) {
      if (iter == 1) {
        throw StationaryStartError("starting value is a stationary point of Psi");
      }
      converged = converged && std::fabs(psi) < kPsiAccept;
      break;
    }
    if (converged && std::fabs(psi) <= kPsiTarget) break;
    const double next = theta + psi / slope;
    if (!std::isfinite(next)) {
      converged = false;
      break;
    }
    const double step = std::fabs(next - theta);
    theta = next;
    iterations = iter;
    if (!converged && step < options.tol) converged = true;
    if (converged && (step == 0.0 || --polish_left < 0)) break;
  }
  return finish(ys, tau_fn, spec, options, taus0, theta0, theta, iterations, converged);
}

double one_step(std::span<const double> ys, const TauFn& tau_fn, const PsiSpec& spec,
                double theta0) {
  check_inputs(ys, spec, theta0);
  const Residuals r = residuals_at(ys, tau_fn(theta0), spec, theta0);
  double psi = 0.0;
  double slope = 0.0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    psi += bisquare(r.u[i], r.k[i]).psi;
    slope += bisquare_dpsi(r.u[i], r.k[i]) / r.taus[i];
  }
  if (std::fabs(slope) <= kStationaryTol) {
    throw StationaryStartError("starting value is a stationary point of Psi");
  }
  return theta0 + psi / slope;
}

}  // namespace rdif
