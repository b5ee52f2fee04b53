#include <cmath>

#include <catch2/catch_amalgamated.hpp>

#include "smdiag/flow.hpp"
#include "smdiag/localtime.hpp"
#include "smdiag/sample_path.hpp"
#include "smdiag/variation.hpp"

using namespace smdiag;

TEST_CASE("hand values for the variation sums") {
  std::vector<double> v = {0.0, 1.0, 0.0, 1.0};
  REQUIRE(total_variation(v) == 3.0);
  REQUIRE(p_variation_sum(v, 1.0, 1) == 3.0);
  REQUIRE(p_variation_sum(v, 2.0, 1) == 3.0);
  REQUIRE(p_variation_sum(v, 2.0, 3) == 1.0);  // endpoints only
  std::vector<double> mono = {0.0, 0.3, 1.1, 2.0};
  REQUIRE(total_variation(mono) == Catch::Approx(2.0).margin(1e-15));
}

TEST_CASE("sums shrink as the order grows when steps are small") {
  SamplePath p = gen_brownian({41, 0}, 1.0, 4096);
  double s11 = p_variation_sum(p.values, 1.1, 1);
  double s2 = p_variation_sum(p.values, 2.0, 1);
  double s3 = p_variation_sum(p.values, 3.0, 1);
  REQUIRE(s11 > s2);
  REQUIRE(s2 > s3);
}

TEST_CASE("quadratic variation of a standard path approximates the horizon") {
  SamplePath p = gen_brownian({42, 0}, 1.0, 100000);
  REQUIRE(quadratic_variation(p.values, 1) == Catch::Approx(1.0).epsilon(0.02));
}

TEST_CASE("trend verdicts") {
  REQUIRE(trend_verdict({1.0, 2.0, 3.0}, 0.0) == Trend::Increasing);
  REQUIRE(trend_verdict({3.0, 2.0, 1.0}, 0.0) == Trend::Decreasing);
  REQUIRE(trend_verdict({1.0, 1.02, 0.99}, 0.05) == Trend::Flat);
  REQUIRE(trend_verdict({1.0, 2.0, 1.0}, 0.0) == Trend::Mixed);
}

TEST_CASE("ladders validate their strides") {
  PartitionLadder lad = dyadic_ladder(64, 7);
  REQUIRE(lad.strides == std::vector<std::size_t>{64, 32, 16, 8, 4, 2, 1});
  REQUIRE_THROWS(make_ladder({4, 4, 2}));
  REQUIRE_THROWS(make_ladder({}));
}

TEST_CASE("variation report straddles the brownian critical order") {
  SamplePath p = gen_brownian({43, 0}, 1.0, 65536);
  PartitionLadder lad = dyadic_ladder(64, 7);
  VariationReport above = variation_report(p.values, p.dt, 3.0, lad, 0.05);
  REQUIRE(above.trend == Trend::Decreasing);
  VariationReport below = variation_report(p.values, p.dt, 1.5, lad, 0.05);
  REQUIRE(below.trend == Trend::Increasing);
}

TEST_CASE("chain rule probe tracks a smooth image of the path") {
  SamplePath p = gen_brownian({44, 0}, 1.0, 32768);
  std::vector<double> times(p.values.size());
  for (std::size_t i = 0; i < times.size(); ++i) times[i] = p.time(i);
  PartitionLadder lad = dyadic_ladder(16, 5);
  auto rungs = space_qv_chain_check(
      times, p.values, [](double x) { return x * x; },
      [](double x) { return 2.0 * x; }, lad);
  REQUIRE(rungs.size() == 5);
  const ChainRung& finest = rungs.back();
  REQUIRE(finest.mesh == Catch::Approx(p.dt).epsilon(1e-9));
  REQUIRE(finest.empirical == Catch::Approx(finest.formula).epsilon(0.15));
}

TEST_CASE("partition mesh probe separates hypothesis from conclusion") {
  SamplePath p = gen_brownian({45, 0}, 1.0, 16384);
  PartitionLadder lad = dyadic_ladder(64, 4);
  auto rows = mesh_condition_probe([](double, double) { return 1.0; }, p, lad);
  for (const auto& r : rows) {
    REQUIRE(r.hypothesis == Catch::Approx(1.0).margin(1e-9));
    REQUIRE(r.conclusion == Catch::Approx(1.0).epsilon(0.25));
  }
}

TEST_CASE("incremental crossing tally matches the batch counter") {
  SamplePath p = gen_brownian({46, 0}, 1.0, 50000);
  const double delta = 0.05;
  RunningLocalTime rlt(delta, 0.0);
  for (std::size_t i = 0; i < p.steps(); ++i) rlt.advance(p.values[i], p.values[i + 1]);
  double batch = crossing_local_time(p, 0.0, delta, 1.0);
  REQUIRE(rlt.at(0.0) == batch);
}

TEST_CASE("running local time is within the usual estimator spread") {
  SamplePath p = gen_brownian({47, 0}, 1.0, 250000);
  const double delta = 0.05;
  RunningLocalTime rlt(delta, 0.0);
  for (std::size_t i = 0; i < p.steps(); ++i) rlt.advance(p.values[i], p.values[i + 1]);
  double tan = tanaka_local_time(p, 0.0, 1.0);
  REQUIRE(rlt.at(0.0) == Catch::Approx(tan).epsilon(0.25));
}

TEST_CASE("query points book occupation minus integral exactly") {
  SamplePath p = gen_brownian({48, 0}, 1.0, 8192);
  auto pts = rogers_points(p, 64, 10.0 * std::sqrt(p.dt));
  REQUIRE(pts.size() == 65);  // includes the time-zero anchor
  for (const auto& q : pts) {
    REQUIRE(q.x == q.occupation - q.integral);
    REQUIRE(q.occupation >= 0.0);
  }
  REQUIRE(pts.front().t < pts.back().t);
  REQUIRE_THROWS(rogers_points(p, 63, 0.05));  // must divide the step count
}

TEST_CASE("space QV formula is additive across subintervals") {
  auto s = PiecewiseLinearSigma::canonical();
  SamplePath drv = gen_brownian({49, 0}, 1.0, 20000);
  std::vector<double> grid(201);
  for (std::size_t j = 0; j < grid.size(); ++j)
    grid[j] = 0.25 + 0.0025 * static_cast<double>(j);
  FlowOptions opt;
  opt.record_steps = {0, drv.steps()};
  FlowField f = simulate_flow(s, grid, drv, opt);
  SpaceQv whole = space_qv_Z(f, 0.3, 0.7);
  SpaceQv left = space_qv_Z(f, 0.3, 0.5);
  SpaceQv right = space_qv_Z(f, 0.5, 0.7);
  REQUIRE(left.formula + right.formula == Catch::Approx(whole.formula).margin(1e-12));
  REQUIRE(left.empirical + right.empirical ==
          Catch::Approx(whole.empirical).margin(1e-12));
  REQUIRE(whole.formula > 0.0);
}

TEST_CASE("variation sum rejects orders below one") {
  REQUIRE_THROWS(p_variation_sum({0.0, 1.0}, 0.5, 1));
}
