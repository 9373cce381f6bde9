#pragma once

#include "rdif/fit.hpp"
#include "rdif/scaling.hpp"

#include <optional>
#include <span>
#include <vector>

namespace rdif {

/// Tukey bisquare evaluated at u with tuning constant k:
///   psi(u)    = u (1 - (u/k)^2)^2       for |u| <= k, else 0
///   weight(u) = psi(u) / u = (1 - (u/k)^2)^2
///   rho(u)    = k^2/6 (1 - (1 - (u/k)^2)^3), capped at k^2/6
struct Bisquare {
  double psi = 0.0;
  double weight = 0.0;
  double rho = 0.0;
};

Bisquare bisquare(double u, double k);

/// Derivative of the bisquare psi with respect to u.
double bisquare_dpsi(double u, double k);

/// Loss specification. When `k` is empty the tuning constants are re-derived
/// from the current null variances at every evaluation, which keeps the
/// zero-weight rule equivalent to the Wald test at the final estimate.
struct PsiSpec {
  double alpha = 0.05;
  std::optional<double> downtune_alpha;
  std::vector<double> k;

  /// Error rate used to tune k during estimation.
  double estimation_alpha() const { return downtune_alpha.value_or(alpha); }
  void validate(std::size_t m) const;
};

/// k_i = Phi^{-1}(1 - alpha/2) * sqrt(omega_i).
std::vector<double> tune_k(std::span<const double> taus, double alpha);

enum class StartStrategy { median, lts_half, grid, med3 };

const char* to_string(StartStrategy s);
std::optional<StartStrategy> parse_start_strategy(const char* name);

double median(std::span<const double> ys);

/// Location LTS with h = floor(m/2) + 1: mean of the contiguous sorted window
/// of size h with the smallest within-window sum of squares.
double lts_half(std::span<const double> ys);

/// R(theta) = sum_i rho(U_i(theta)).
double objective(std::span<const double> ys, const TauFn& tau_fn, const PsiSpec& spec,
                 double theta);

/// Psi(theta) = sum_i psi(U_i(theta)) with tau_i evaluated at theta.
double estimating_function(std::span<const double> ys, const TauFn& tau_fn,
                           const PsiSpec& spec, double theta);

/// Grid step used by the grid start.
inline constexpr double kGridStep = 0.05;
/// Upper bound on grid evaluations; wider ranges use a coarser uniform step.
inline constexpr std::size_t kMaxGridPoints = 100000;

double grid_argmin(std::span<const double> ys, const TauFn& tau_fn, const PsiSpec& spec,
                   double step = kGridStep);

double start_value(std::span<const double> ys, const TauFn& tau_fn, const PsiSpec& spec,
                   StartStrategy strategy);

struct SolveOptions {
  bool update_tau = true;
  double tol = 1e-5;
  int max_iter = 100;
};

RdifFit irls_solve(std::span<const double> ys, const TauFn& tau_fn, const PsiSpec& spec,
                   double theta0, const SolveOptions& options = {});

RdifFit newton_solve(std::span<const double> ys, const TauFn& tau_fn, const PsiSpec& spec,
                     double theta0, const SolveOptions& options = {});

/// A single Newton update from theta0 with tau fixed at tau(theta0).
double one_step(std::span<const double> ys, const TauFn& tau_fn, const PsiSpec& spec,
                double theta0);

}  // namespace rdif
