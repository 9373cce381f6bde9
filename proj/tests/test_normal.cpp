#include "rdif/normal.hpp"

#include <doctest.h>

#include <cmath>
#include <stdexcept>

using doctest::Approx;

// Reference values computed with mpmath at 30 digits.

TEST_CASE("normal_cdf matches high-precision references") {
  CHECK(rdif::normal_cdf(-3.0) == Approx(0.0013498980316300945267).epsilon(1e-13));
  CHECK(rdif::normal_cdf(0.5) == Approx(0.69146246127401310364).epsilon(1e-13));
  CHECK(rdif::normal_cdf(-1.0) == Approx(0.158655253931457051414).epsilon(1e-13));
  CHECK(rdif::normal_cdf(2.5) == Approx(0.993790334674223864833).epsilon(1e-13));
  CHECK(rdif::normal_cdf(-8.0) == Approx(6.2209605742717841235e-16).epsilon(1e-10));
  CHECK(rdif::normal_cdf(0.0) == 0.5);
}

TEST_CASE("normal_quantile is accurate across the open unit interval") {
  CHECK(std::fabs(rdif::normal_quantile(0.975) - 1.9599639845400542355) < 1e-12);
  CHECK(std::fabs(rdif::normal_quantile(0.84) - 0.99445788320975316774) < 1e-12);
  CHECK(std::fabs(rdif::normal_quantile(0.995) - 2.575829303548900761) < 1e-12);
  CHECK(std::fabs(rdif::normal_quantile(1e-10) + 6.3613409024040562047) < 1e-9);
  CHECK(std::fabs(rdif::normal_quantile(1e-4) + 3.7190164854556805644) < 1e-10);
  CHECK(std::fabs(rdif::normal_quantile(0.3) + 0.52440051270804078404) < 1e-12);
  CHECK(std::fabs(rdif::normal_quantile(0.999999) - 4.7534243088228989482) < 1e-10);
  CHECK(rdif::normal_quantile(0.5) == 0.0);
}

TEST_CASE("normal_quantile inverts normal_cdf") {
  // Above x = 5 the cdf itself rounds to within a few ulps of 1, so the
  // upper tail is only checked through symmetry.
  for (double x = -6.0; x <= 5.0; x += 0.25) {
    CHECK(rdif::normal_quantile(rdif::normal_cdf(x)) == Approx(x).epsilon(1e-9));
  }
}

TEST_CASE("normal_quantile rejects probabilities outside (0,1)") {
  CHECK_THROWS_AS(rdif::normal_quantile(0.0), std::domain_error);
  CHECK_THROWS_AS(rdif::normal_quantile(1.0), std::domain_error);
  CHECK_THROWS_AS(rdif::normal_quantile(-0.1), std::domain_error);
}

TEST_CASE("p-value helpers") {
  CHECK(rdif::two_sided_p(0.0) == Approx(1.0));
  CHECK(rdif::two_sided_p(1.4142135623730951) == Approx(0.15729920705028511563).epsilon(1e-13));
  CHECK(rdif::two_sided_p(-1.4142135623730951) == Approx(0.15729920705028511563).epsilon(1e-13));
  CHECK(rdif::chi2_1df_sf(3.841458820694124) == Approx(0.05).epsilon(1e-12));
  CHECK(rdif::chi2_2df_sf(5.991465) == Approx(0.049999988677700831617).epsilon(1e-13));
  CHECK(rdif::chi2_2df_sf(0.0) == 1.0);
}
