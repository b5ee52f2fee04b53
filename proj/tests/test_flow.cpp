#include <cmath>

#include <catch2/catch_amalgamated.hpp>

#include "smdiag/flow.hpp"
#include "smdiag/sample_path.hpp"

using namespace smdiag;

TEST_CASE("tent coefficient evaluates exactly") {
  auto s = PiecewiseLinearSigma::canonical();
  REQUIRE(s(0.5) == 0.5);
  REQUIRE(s(0.25) == 0.25);
  REQUIRE(s(0.75) == 0.25);
  REQUIRE(s(0.0) == 0.0);
  REQUIRE(s(1.0) == 0.0);
  REQUIRE(s(-2.0) == -2.0);
  REQUIRE(s(3.0) == -2.0);
  REQUIRE(s.left_slope(0.3) == 1.0);
  REQUIRE(s.left_slope(0.5) == 1.0);  // left derivative at the kink
  REQUIRE(s.left_slope(0.7) == -1.0);
  REQUIRE(s.slope_jump(0) == -2.0);
}

TEST_CASE("piecewise coefficient rejects malformed tables") {
  REQUIRE_THROWS(PiecewiseLinearSigma({0.5, 0.4}, {1.0, 0.0, -1.0}, 0.5, 0.5));
  REQUIRE_THROWS(PiecewiseLinearSigma({0.5}, {1.0}, 0.5, 0.5));
}

TEST_CASE("scale map hits closed-form values") {
  auto s = PiecewiseLinearSigma::canonical();
  LampertiMap p = lamperti_map(s, 0.5);
  REQUIRE(p(0.5) == 0.0);
  // integral of 1/x from 1/4 to 1/2 is log 2, traversed downward.
  REQUIRE(p(0.25) == Catch::Approx(std::log(0.5)).margin(1e-15));
  REQUIRE(p(0.75) == Catch::Approx(-std::log(0.5)).margin(1e-15));
  REQUIRE(p(0.9) > p(0.6));
  REQUIRE_THROWS_AS(p(0.0), PreconditionViolation);
  REQUIRE_THROWS_AS(p(-0.2), PreconditionViolation);
}

TEST_CASE("flow tails follow the exponential closed forms") {
  auto s = PiecewiseLinearSigma::canonical();
  SamplePath drv = gen_brownian({61, 0}, 1.0, 20000);
  std::vector<double> grid = {-1.0, 2.0};
  double worst = 0.0;
  run_flow(s, grid, drv,
           [&](std::size_t k, const std::vector<double>& D, const std::vector<double>&,
               const std::vector<double>&) {
             double t = static_cast<double>(k) * drv.dt;
             double b = drv.values[k];
             worst = std::max(worst, std::abs(D[0] + std::exp(b - 0.5 * t)));
             worst = std::max(worst, std::abs(D[1] - 1.0 - std::exp(-b - 0.5 * t)));
           });
  REQUIRE(worst < 0.02);
}

TEST_CASE("flow keeps the fixed points and the order") {
  auto s = PiecewiseLinearSigma::canonical();
  SamplePath drv = gen_brownian({62, 0}, 1.0, 5000);
  std::vector<double> grid = {0.0, 0.3, 0.7, 1.0};
  run_flow(s, grid, drv,
           [&](std::size_t, const std::vector<double>& D, const std::vector<double>&,
               const std::vector<double>&) {
             REQUIRE(D[0] == 0.0);
             REQUIRE(D[3] == 1.0);
             REQUIRE(D[1] < D[2]);
           });
}

TEST_CASE("one crafted step trips the order guard") {
  auto s = PiecewiseLinearSigma::canonical();
  SamplePath drv;
  drv.t0 = 0.0;
  drv.dt = 1.0;
  drv.values = {0.0, -1.2};
  std::vector<double> grid = {0.4, 0.5};
  REQUIRE_THROWS_AS(
      run_flow(s, grid, drv,
               [](std::size_t, const std::vector<double>&, const std::vector<double>&,
                  const std::vector<double>&) {}),
      FlowOrderViolation);
}

TEST_CASE("recorded slices carry the exponential derivative") {
  auto s = PiecewiseLinearSigma::canonical();
  SamplePath drv = gen_brownian({63, 0}, 0.5, 2000);
  std::vector<double> grid;
  for (double x = 0.2; x <= 0.8 + 1e-12; x += 0.01) grid.push_back(x);
  FlowOptions opt;
  opt.record_steps = {0, 1000, 2000};
  FlowField f = simulate_flow(s, grid, drv, opt);
  REQUIRE(f.slices() == 3);
  REQUIRE(f.slice_steps[1] == 1000);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    REQUIRE(f.D[0][j] == grid[j]);
    REQUIRE(f.Dprime[1][j] ==
            std::exp(f.Z[1][j] - 0.5 * f.Zqv[1][j]));
  }
}

TEST_CASE("level-line inversion starts at the level and stays in range") {
  auto s = PiecewiseLinearSigma::canonical();
  SamplePath drv = gen_brownian({64, 0}, 1.0, 4000);
  std::vector<double> grid;
  for (double x = -0.1; x <= 1.1 + 1e-12; x += 0.005) grid.push_back(x);
  FlowOptions opt;
  opt.record_stride = 40;
  FlowField f = simulate_flow(s, grid, drv, opt);
  QuantilePath q = invert_flow(f, 0.5);
  REQUIRE(q.q.front() == Catch::Approx(0.5).margin(1e-12));
  for (double v : q.q) {
    REQUIRE(v > 0.0);
    REQUIRE(v < 1.0);
  }
  for (double d : q.inv_derivative) REQUIRE(d > 0.0);
}

TEST_CASE("inversion refuses a level outside the recorded range") {
  auto s = PiecewiseLinearSigma::canonical();
  SamplePath drv = gen_brownian({65, 0}, 0.1, 100);
  std::vector<double> grid = {0.4, 0.5, 0.6};
  FlowField f = simulate_flow(s, grid, drv, FlowOptions{});
  REQUIRE_THROWS_AS(invert_flow(f, 0.99), QuantileOutOfRange);
}

TEST_CASE("restarting the flow midway composes") {
  auto s = PiecewiseLinearSigma::canonical();
  SamplePath drv = gen_brownian({66, 0}, 1.0, 20000);
  std::vector<double> grid;
  for (double x = -0.1; x <= 1.1 + 1e-12; x += 0.01) grid.push_back(x);
  double disc = compose_flow_check(s, grid, drv, 0.5);
  REQUIRE(disc < 0.05);
}

TEST_CASE("drifted sign walk follows its deterministic skeleton") {
  // The scale map of the tent coefficient carries curvature +-1/2 away from
  // the kink, so the transformed walk drifts away from the origin.
  SamplePath still;
  still.t0 = 0.0;
  still.dt = 0.01;
  still.values.assign(11, 0.0);  // zero driver
  SamplePath g = simulate_sign_sde(0.5, 1.0, still);
  REQUIRE(g.values[1] == Catch::Approx(1.0 + 0.5 * 0.01).margin(1e-15));
  REQUIRE(g.values.back() > 1.0);
  SamplePath h = simulate_sign_sde(0.5, -1.0, still);
  REQUIRE(h.values[1] == Catch::Approx(-1.0 - 0.5 * 0.01).margin(1e-15));
  SamplePath z = simulate_sign_sde(0.5, 0.0, still);
  REQUIRE(z.values.back() == 0.0);  // sign(0) = 0 pins the origin
}

TEST_CASE("frozen coefficient leaves no energy anywhere") {
  PiecewiseLinearSigma zero({0.5}, {0.0, 0.0}, 0.5, 0.0);
  SamplePath drv = gen_brownian({67, 0}, 1.0, 2000);
  std::vector<double> grid;
  for (double x = -0.2; x <= 1.2 + 1e-12; x += 0.01) grid.push_back(x);
  ZeroEnergyReport r = zero_energy_residual(zero, grid, drv, 0.5, {64, 16, 4, 1});
  REQUIRE(r.mart_qv == 0.0);
  for (double v : r.qv_A) REQUIRE(v == 0.0);
  for (double v : r.qv_q) REQUIRE(v == 0.0);
}

TEST_CASE("level line of the tent flow loses its quadratic variation") {
  auto s = PiecewiseLinearSigma::canonical();
  SamplePath drv = gen_brownian({68, 0}, 1.0, 20000);
  std::vector<double> grid;
  for (double x = -0.05; x <= 1.05 + 1e-12; x += 0.0055) grid.push_back(x);
  ZeroEnergyReport r = zero_energy_residual(s, grid, drv, 0.5, {400, 100, 25, 5});
  REQUIRE(r.qv_A.back() < r.qv_A.front());
  REQUIRE(r.mart_qv > 0.0);
}
