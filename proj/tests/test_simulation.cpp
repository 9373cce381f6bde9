#include "rdif/error.hpp"
#include "rdif/simulation.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using doctest::Approx;

namespace {

rdif::SimCondition small_condition() {
  rdif::SimCondition c;
  c.label = "t";
  c.m = 8;
  c.n0 = c.n1 = 300;
  c.dif_count = 2;
  c.reps = 4;
  c.seed = 77;
  return c;
}

}  // namespace

TEST_CASE("null condition leaves group parameters identical") {
  auto c = small_condition();
  c.dif_count = 0;
  const auto g = rdif::gen_condition_data(c, 0);
  CHECK(g.dif_items.empty());
  CHECK(g.spec0.a == g.spec1.a);
  CHECK(g.spec0.d == g.spec1.d);
  CHECK(g.spec1.mean == 0.5);
  CHECK(g.spec1.sd == 1.0);
  CHECK(g.theta() == 0.5);
}

TEST_CASE("DIF rules") {
  auto c = small_condition();
  c.dif_count = 3;
  c.delta = 0.5;
  const auto g = rdif::gen_condition_data(c, 1);
  REQUIRE(g.dif_items.size() == 3);
  for (int i = 0; i < c.m; ++i) {
    const bool dif = std::find(g.dif_items.begin(), g.dif_items.end(), i) != g.dif_items.end();
    const double b = -g.spec0.d[i] / g.spec0.a[i];
    CHECK(g.spec1.a[i] == g.spec0.a[i]);
    if (dif) {
      CHECK(g.spec1.d[i] == Approx(-g.spec1.a[i] * (b + 0.5)).epsilon(1e-13));
    } else {
      CHECK(g.spec1.d[i] == g.spec0.d[i]);
    }
    CHECK(g.spec0.a[i] >= 0.9);
    CHECK(g.spec0.a[i] <= 2.5);
    CHECK(b >= -1.5 - 1e-12);
    CHECK(b <= 1.5 + 1e-12);
  }
  // The worked case: slope 2, difficulty 0, shift 0.5.
  CHECK(-2.0 * (0.0 + 0.5) == -1.0);

  c.dif_type = rdif::DifType::slope;
  c.gamma = 2.0;
  const auto s = rdif::gen_condition_data(c, 1);
  for (int i : s.dif_items) {
    CHECK(s.spec1.a[i] == Approx(2.0 * s.spec0.a[i]));
    CHECK(s.spec1.d[i] == s.spec0.d[i]);
  }

  c.dif_type = rdif::DifType::both;
  c.gamma = 1.5;
  c.delta = 0.35;
  const auto both = rdif::gen_condition_data(c, 1);
  for (int i : both.dif_items) {
    const double b = -both.spec0.d[i] / both.spec0.a[i];
    CHECK(both.spec1.a[i] == Approx(1.5 * both.spec0.a[i]));
    CHECK(both.spec1.d[i] == Approx(-1.5 * both.spec0.a[i] * (b + 0.35)));
  }
}

TEST_CASE("sampled impact stays in its ranges") {
  auto c = small_condition();
  c.impact.sampled = true;
  for (int rep = 0; rep < 200; ++rep) {
    const auto g = rdif::gen_condition_data(c, rep);
    CHECK(g.mu >= -0.5);
    CHECK(g.mu <= 0.5);
    CHECK(g.sigma * g.sigma >= 0.5 - 1e-12);
    CHECK(g.sigma * g.sigma <= 2.0 + 1e-12);
  }
}

TEST_CASE("DIF items are selected uniformly") {
  rdif::SimCondition c;
  c.m = 15;
  c.n0 = c.n1 = 1;
  c.dif_count = 5;
  c.seed = 99;
  const int reps = 10000;
  std::vector<int> hits(15, 0);
  for (int rep = 0; rep < reps; ++rep) {
    for (int i : rdif::gen_condition_data(c, rep).dif_items) ++hits[i];
  }
  const double p = 5.0 / 15.0;
  const double se = std::sqrt(p * (1 - p) / reps);
  for (int h : hits) CHECK(std::fabs(static_cast<double>(h) / reps - p) < 3.0 * se);
}

TEST_CASE("generation is deterministic in seed and replication") {
  const auto c = small_condition();
  const auto a = rdif::gen_condition_data(c, 3);
  const auto b = rdif::gen_condition_data(c, 3);
  const auto other = rdif::gen_condition_data(c, 4);
  CHECK(a.data0.x == b.data0.x);
  CHECK(a.data1.x == b.data1.x);
  CHECK(a.data0.x != other.data0.x);
}

TEST_CASE("harness accounting, shape and determinism") {
  auto c0 = small_condition();
  c0.dif_count = 0;
  auto c1 = small_condition();
  c1.label = "u";
  c1.dif_count = 3;
  c1.seed = 78;
  rdif::RunOptions one;
  one.jobs = 1;
  const auto r = rdif::run_conditions("unit", {c0, c1}, one);
  REQUIRE(r.conditions.size() == 2);
  for (const auto& cond : r.conditions) {
    CHECK(cond.rows.size() == 5);
    CHECK(cond.reps.size() == static_cast<std::size_t>(cond.cond.reps));
    for (const auto& row : cond.rows) {
      const long positives = row.test == "slope" ? 0 : cond.cond.dif_count;
      CHECK(row.fp + row.tn == (cond.cond.m - positives) * cond.cond.reps);
      CHECK(row.tp + row.fn == positives * cond.cond.reps);
      CHECK(row.fpr() >= 0.0);
      CHECK(row.fpr() <= 1.0);
    }
    CHECK(cond.convergence_rate() >= 0.0);
  }
  CHECK(std::isnan(r.conditions[0].find("rdif", "intercept")->power()));

  std::ostringstream a, b, thetas;
  rdif::write_sim_csv(r, a);
  rdif::RunOptions three;
  three.jobs = 3;
  rdif::write_sim_csv(rdif::run_conditions("unit", {c0, c1}, three), b);
  CHECK(a.str() == b.str());
  const std::string text = a.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 11);
  rdif::write_theta_dump(r, thetas);
  const std::string dump = thetas.str();
  CHECK(std::count(dump.begin(), dump.end(), '\n') == 9);
}

TEST_CASE("condition builders") {
  const auto s1 = rdif::sim1_conditions(rdif::Sim1Config{});
  REQUIRE(s1.size() == 9);
  for (int k = 0; k < 9; ++k) {
    CHECK(s1[k].dif_count == k);
    CHECK(s1[k].m == 15);
    CHECK(s1[k].n0 == 500);
    CHECK(s1[k].delta == 0.5);
    CHECK_FALSE(s1[k].impact.sampled);
  }
  const auto s2 = rdif::sim2_conditions(rdif::Sim2Config{});
  REQUIRE(s2.size() == 9);
  CHECK(s2[0].dif_type == rdif::DifType::intercept);
  CHECK(s2[4].dif_type == rdif::DifType::slope);
  CHECK(s2[4].gamma == 2.0);
  CHECK(s2[8].dif_type == rdif::DifType::both);
  CHECK(s2[8].n1 == 500);
  CHECK(s2[8].delta == 0.35);
  CHECK(s2[0].impact.sampled);
  CHECK(s1[0].seed != s1[1].seed);
}

TEST_CASE("config parsing") {
  const auto c = rdif::sim1_config_from_json(nlohmann::json{{"m", 9}, {"reps", 3}, {"seed", 5}});
  CHECK(c.m == 9);
  CHECK(c.reps == 3);
  CHECK(c.seed == 5u);
  CHECK_THROWS_AS(rdif::sim1_config_from_json(nlohmann::json{{"m", 5}, {"dif_counts", {6}}}),
                  rdif::ValidationError);
  CHECK_THROWS_AS(rdif::sim1_config_from_json(nlohmann::json{{"bogus", 1}}),
                  rdif::ValidationError);
  CHECK_THROWS_AS(rdif::sim1_config_from_json(nlohmann::json{{"m", "x"}}), rdif::ValidationError);
  const auto c2 = rdif::sim2_config_from_json(
      nlohmann::json{{"arms", {{{"type", "slope"}, {"gamma", 1.8}}}}, {"ns", {100}}});
  REQUIRE(c2.arms.size() == 1);
  CHECK(c2.arms[0].gamma == 1.8);
  CHECK_THROWS_AS(
      rdif::sim2_config_from_json(nlohmann::json{{"arms", {{{"type", "sideways"}}}}}),
      rdif::ValidationError);
  CHECK_THROWS_AS(rdif::sim2_config_from_json(nlohmann::json{{"dif_count", 11}}),
                  rdif::ValidationError);
}
