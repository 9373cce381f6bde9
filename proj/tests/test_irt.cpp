#include "rdif/error.hpp"
#include "rdif/irt.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

using doctest::Approx;

namespace {

rdif::TwoPlSpec random_spec(int m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> a(0.9, 2.5), b(-1.5, 1.5);
  rdif::TwoPlSpec s;
  for (int i = 0; i < m; ++i) {
    s.a.push_back(a(rng));
    s.d.push_back(-s.a.back() * b(rng));
  }
  return s;
}

double item_mean(const rdif::ResponseMatrix& x, int i) {
  double s = 0.0;
  for (int p = 0; p < x.n; ++p) s += x.at(p, i);
  return s / x.n;
}

// Composite Simpson integration of the model-implied proportion correct.
double model_mean(double a, double d, double mean, double sd) {
  const int n = 4000;
  const double lo = -10.0, hi = 10.0, h = (hi - lo) / n;
  double s = 0.0;
  for (int j = 0; j <= n; ++j) {
    const double t = lo + j * h;
    const double f = std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI) /
                     (1.0 + std::exp(-(a * (mean + sd * t) + d)));
    s += f * (j == 0 || j == n ? 1.0 : (j % 2 ? 4.0 : 2.0));
  }
  return s * h / 3.0;
}

}  // namespace

TEST_CASE("simulation limits") {
  rdif::TwoPlSpec flat;
  flat.a = {1e-6, 1e-6};
  flat.d = {0.0, 10.0};
  const auto x = rdif::simulate_2pl(flat, 10000, 1ull);
  CHECK(std::fabs(item_mean(x, 0) - 0.5) < 3.0 * std::sqrt(0.25 / 10000));
  CHECK(item_mean(x, 1) > 0.99);
  rdif::TwoPlSpec bad = flat;
  bad.a[0] = 0.0;
  CHECK_THROWS_AS(rdif::simulate_2pl(bad, 10, 1ull), rdif::ValidationError);
}

TEST_CASE("simulated item means match the integrated model") {
  auto spec = random_spec(8, 41);
  spec.mean = 0.3;
  spec.sd = 1.2;
  const auto x = rdif::simulate_2pl(spec, 100000, 2ull);
  for (int i = 0; i < 8; ++i) {
    CHECK(std::fabs(item_mean(x, i) - model_mean(spec.a[i], spec.d[i], 0.3, 1.2)) < 0.01);
  }
}

TEST_CASE("seeded determinism") {
  const auto spec = random_spec(6, 42);
  const auto x1 = rdif::simulate_2pl(spec, 300, 9ull);
  const auto x2 = rdif::simulate_2pl(spec, 300, 9ull);
  CHECK(x1.x == x2.x);
  const auto f1 = rdif::fit_2pl(x1);
  const auto f2 = rdif::fit_2pl(x2);
  CHECK(f1.a_hat == f2.a_hat);
  CHECK(f1.d_hat == f2.d_hat);
  CHECK(f1.cov == f2.cov);
}

TEST_CASE("fit recovers generating parameters and improves on them") {
  // Slopes up to 1.6: above that the standard error of a-hat at n = 5000
  // approaches 0.1 and the band below is no longer a 90% event.
  rdif::TwoPlSpec spec;
  {
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> a(0.8, 1.6), b(-1.5, 1.5);
    for (int i = 0; i < 10; ++i) {
      spec.a.push_back(a(rng));
      spec.d.push_back(-spec.a.back() * b(rng));
    }
  }
  const auto quad = rdif::make_quadrature(61, 5.0);
  int close = 0;
  double z2 = 0.0;
  const int datasets = 10;
  for (int rep = 0; rep < datasets; ++rep) {
    const auto x = rdif::simulate_2pl(spec, 5000, 3ull + rep);
    const auto fit = rdif::fit_2pl(x);
    CHECK(fit.converged);
    for (int i = 0; i < 10; ++i) {
      const double ea = fit.a_hat[i] - spec.a[i];
      const double ed = fit.d_hat[i] - spec.d[i];
      close += std::fabs(ea) < 0.1 && std::fabs(ed) < 0.1;
      z2 += ea * ea / fit.cov(2 * i, 2 * i) + ed * ed / fit.cov(2 * i + 1, 2 * i + 1);
    }
    CHECK(fit.loglik >= rdif::marginal_loglik(x, spec.a, spec.d, quad) - 1e-6);
    CHECK(fit.loglik ==
          Approx(rdif::marginal_loglik(x, fit.a_hat, fit.d_hat, quad)).epsilon(1e-12));
  }
  CHECK(close >= 9 * datasets);
  // Squared standardized errors average 1 when the covariance is right.
  const double mean_z2 = z2 / (20.0 * datasets);
  CHECK(mean_z2 > 0.7);
  CHECK(mean_z2 < 1.3);
}

TEST_CASE("EM is monotone and the optimum has a vanishing score") {
  const auto spec = random_spec(12, 44);
  const auto x = rdif::simulate_2pl(spec, 1500, 4ull);
  const auto fit = rdif::fit_2pl(x);
  for (std::size_t i = 1; i < fit.loglik_trace.size(); ++i) {
    CHECK(fit.loglik_trace[i] >= fit.loglik_trace[i - 1] - 1e-10);
  }
  const auto quad = rdif::make_quadrature(61, 5.0);
  const auto g = rdif::marginal_score(x, fit.a_hat, fit.d_hat, quad);
  CHECK(g.cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("analytic score matches central differences") {
  const auto spec = random_spec(5, 45);
  const auto x = rdif::simulate_2pl(spec, 800, 5ull);
  const auto quad = rdif::make_quadrature(61, 5.0);
  std::vector<double> a = spec.a, d = spec.d;
  a[1] += 0.2;
  d[3] -= 0.3;
  const auto g = rdif::marginal_score(x, a, d, quad);
  const double h = 1e-5;
  for (int j = 0; j < 10; ++j) {
    auto ap = a, am = a, dp = d, dm = d;
    if (j % 2 == 0) {
      ap[j / 2] += h;
      am[j / 2] -= h;
    } else {
      dp[j / 2] += h;
      dm[j / 2] -= h;
    }
    const double fd =
        (rdif::marginal_loglik(x, ap, dp, quad) - rdif::marginal_loglik(x, am, dm, quad)) / (2 * h);
    CHECK(std::fabs(g(j) - fd) <= 1e-4 * std::max(1.0, std::fabs(fd)));
  }
}

TEST_CASE("covariance is symmetric, PD and shrinks like 1/n") {
  const auto spec = random_spec(8, 46);
  const auto small = rdif::fit_2pl(rdif::simulate_2pl(spec, 2000, 6ull));
  const auto large = rdif::fit_2pl(rdif::simulate_2pl(spec, 4000, 7ull));
  for (const auto* f : {&small, &large}) {
    CHECK((f->cov - f->cov.transpose()).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(Eigen::LLT<Eigen::MatrixXd>(f->cov).info() == Eigen::Success);
  }
  const double ratio = large.cov.diagonal().sum() / small.cov.diagonal().sum();
  CHECK(ratio > 0.4);
  CHECK(ratio < 0.6);
  const auto x = rdif::simulate_2pl(spec, 2000, 6ull);
  CHECK((rdif::mle_covariance(small, x) - small.cov).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("41 and 61 quadrature nodes agree") {
  const auto spec = random_spec(8, 47);
  const auto x = rdif::simulate_2pl(spec, 1000, 8ull);
  rdif::FitOptions o41;
  o41.quad_points = 41;
  const auto f41 = rdif::fit_2pl(x, o41);
  const auto f61 = rdif::fit_2pl(x);
  for (int i = 0; i < 8; ++i) {
    CHECK(std::fabs(f41.a_hat[i] - f61.a_hat[i]) < 0.01);
    CHECK(std::fabs(f41.d_hat[i] - f61.d_hat[i]) < 0.01);
  }
}

TEST_CASE("degenerate items are reported by position") {
  auto x = rdif::simulate_2pl(random_spec(5, 48), 200, 9ull);
  for (int p = 0; p < x.n; ++p) x.x[static_cast<std::size_t>(p) * x.m + 3] = 1;
  try {
    rdif::fit_2pl(x);
    FAIL("expected a degenerate item error");
  } catch (const rdif::DegenerateItemError& e) {
    CHECK(e.item() == 3);
    CHECK(std::string(e.what()).find("item4") != std::string::npos);
  }
}

TEST_CASE("make_pair assembles independent blocks") {
  const auto spec = random_spec(6, 49);
  const auto f0 = rdif::fit_2pl(rdif::simulate_2pl(spec, 600, 10ull));
  const auto f1 = rdif::fit_2pl(rdif::simulate_2pl(spec, 700, 11ull));
  const auto pair = rdif::make_pair(f0, f1);
  CHECK(pair.n0 == 600);
  CHECK(pair.n1 == 700);
  CHECK_NOTHROW(rdif::validate(pair));
  for (int i = 0; i < 6; ++i) {
    const auto& it = pair.items[i];
    CHECK(it.cov.block<2, 2>(0, 2).isZero(0.0));
    CHECK(it.cov.block<2, 2>(2, 0).isZero(0.0));
    CHECK(it.cov(0, 0) == f0.cov(2 * i, 2 * i));
    CHECK(it.cov(0, 1) == f0.cov(2 * i, 2 * i + 1));
    CHECK(it.cov(3, 3) == f1.cov(2 * i + 1, 2 * i + 1));
    CHECK(it.a1 == f1.a_hat[i]);
  }
  auto short_fit = f1;
  short_fit.a_hat.pop_back();
  CHECK_THROWS_AS(rdif::make_pair(f0, short_fit), rdif::ValidationError);
}

TEST_CASE("response CSV round trip and parse errors") {
  const auto x = rdif::simulate_2pl(random_spec(4, 50), 25, 12ull);
  std::stringstream io;
  rdif::write_responses(x, io);
  const auto back = rdif::read_responses(io);
  CHECK(back.n == 25);
  CHECK(back.m == 4);
  CHECK(back.x == x.x);
  CHECK(back.item_ids == x.item_ids);
  std::istringstream bad("q1,q2\n0,1\n1,2\n");
  try {
    rdif::read_responses(bad);
    FAIL("expected a parse error");
  } catch (const rdif::ParseError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  std::istringstream ragged("q1,q2\n0\n");
  CHECK_THROWS_AS(rdif::read_responses(ragged), rdif::ParseError);
}

TEST_CASE("quadrature weights") {
  const auto q = rdif::make_quadrature(61, 5.0);
  CHECK(q.nodes.front() == -5.0);
  CHECK(q.nodes.back() == 5.0);
  CHECK(std::accumulate(q.weights.begin(), q.weights.end(), 0.0) == Approx(1.0));
  double var = 0.0;
  for (std::size_t j = 0; j < q.nodes.size(); ++j) var += q.weights[j] * q.nodes[j] * q.nodes[j];
  CHECK(var == Approx(1.0).epsilon(1e-4));
}
