#include "rdif/error.hpp"
#include "rdif/mantel_haenszel.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

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

}  // namespace

TEST_CASE("hand-computed single stratum") {
  const rdif::Table2x2 t{10, 0, 0, 10};
  // E = 10 * 10 / 20 = 5, V = 10 * 10 * 10 * 10 / (20^2 * 19).
  const double v = 10000.0 / (400.0 * 19.0);
  const double expected = (5.0 - 0.5) * (5.0 - 0.5) / v;
  CHECK(rdif::mh_chi_square(std::vector<rdif::Table2x2>{t}) == Approx(expected).epsilon(1e-14));
  CHECK(expected == Approx(15.39).epsilon(1e-3));
}

TEST_CASE("degenerate strata contribute nothing") {
  const std::vector<rdif::Table2x2> base{{10, 3, 4, 8}, {6, 6, 2, 9}};
  std::vector<rdif::Table2x2> padded = base;
  padded.push_back({0, 0, 0, 0});
  padded.push_back({1, 0, 0, 0});
  padded.push_back({0, 0, 0, 1});
  padded.push_back({5, 0, 7, 0});  // one response category only
  CHECK(rdif::mh_chi_square(padded) == Approx(rdif::mh_chi_square(base)).epsilon(1e-14));
  const std::vector<rdif::Table2x2> none{{3, 0, 4, 0}, {1, 0, 0, 0}};
  CHECK_THROWS_AS(rdif::mh_chi_square(none), rdif::NumericalError);
}

TEST_CASE("identical groups sit at the continuity-corrected floor") {
  const auto x = rdif::simulate_2pl(random_spec(10, 61), 400, 1ull);
  for (const auto& r : rdif::mantel_haenszel(x, x, 0.05)) {
    CHECK(r.chi2 == 0.0);
    CHECK(r.p == 1.0);
    CHECK_FALSE(r.flag);
  }
}

TEST_CASE("respondent order does not matter") {
  const auto spec = random_spec(8, 62);
  const auto x0 = rdif::simulate_2pl(spec, 300, 2ull);
  const auto x1 = rdif::simulate_2pl(spec, 350, 3ull);
  auto shuffled = x0;
  std::vector<int> order(x0.n);
  for (int p = 0; p < x0.n; ++p) order[p] = p;
  std::mt19937_64 rng(4);
  std::shuffle(order.begin(), order.end(), rng);
  for (int p = 0; p < x0.n; ++p) {
    for (int i = 0; i < x0.m; ++i) shuffled.x[static_cast<std::size_t>(p) * x0.m + i] = x0.at(order[p], i);
  }
  const auto a = rdif::mantel_haenszel(x0, x1, 0.05);
  const auto b = rdif::mantel_haenszel(shuffled, x1, 0.05);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].chi2 == Approx(b[i].chi2).epsilon(1e-12));
}

TEST_CASE("gross uniform DIF is detected") {
  auto spec = random_spec(10, 63);
  const auto x0 = rdif::simulate_2pl(spec, 800, 5ull);
  spec.d[2] -= 1.5;
  const auto x1 = rdif::simulate_2pl(spec, 800, 6ull);
  const auto r = rdif::mantel_haenszel(x0, x1, 0.05);
  CHECK(r[2].flag);
  CHECK(r[2].p < 1e-6);
}

TEST_CASE("null flag rate is near alpha") {
  const auto spec = random_spec(15, 64);
  const int reps = 500;
  long flags = 0;
  for (int rep = 0; rep < reps; ++rep) {
    const auto x0 = rdif::simulate_2pl(spec, 500, 1000ull + rep);
    const auto x1 = rdif::simulate_2pl(spec, 500, 5000ull + rep);
    for (const auto& r : rdif::mantel_haenszel(x0, x1, 0.05)) flags += r.flag;
  }
  // 99% binomial band for a single item's rate over 500 replications.
  const double rate = static_cast<double>(flags) / (reps * 15.0);
  const double half = 2.5758 * std::sqrt(0.05 * 0.95 / reps);
  CHECK(rate > 0.05 - half);
  CHECK(rate < 0.05 + half);
}

TEST_CASE("input checks") {
  const auto x0 = rdif::simulate_2pl(random_spec(4, 65), 50, 7ull);
  const auto x1 = rdif::simulate_2pl(random_spec(5, 65), 50, 8ull);
  CHECK_THROWS_AS(rdif::mantel_haenszel(x0, x1, 0.05), rdif::ValidationError);
  CHECK_THROWS_AS(rdif::mantel_haenszel(x0, x0, 0.0), rdif::ValidationError);
}
