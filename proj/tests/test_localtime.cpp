#include <cmath>

#include <catch2/catch_amalgamated.hpp>

#include "smdiag/localtime.hpp"
#include "smdiag/sample_path.hpp"

using namespace smdiag;

TEST_CASE("occupation below a high level is the whole horizon") {
  SamplePath p = gen_brownian({21, 0}, 1.0, 20000);
  REQUIRE(occupation_below(p, 50.0, 1.0) == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(occupation_below(p, -50.0, 1.0) == 0.0);
}

TEST_CASE("occupation is monotone in level and additive in time") {
  SamplePath p = gen_brownian({22, 0}, 1.0, 20000);
  double lo = occupation_below(p, -0.3, 1.0);
  double mid = occupation_below(p, 0.0, 1.0);
  double hi = occupation_below(p, 0.3, 1.0);
  REQUIRE(lo <= mid);
  REQUIRE(mid <= hi);
  double first = occupation_below(p, 0.0, 0.5);
  REQUIRE(first <= mid);
}

TEST_CASE("disjoint occupation windows tile the occupation integral") {
  SamplePath p = gen_brownian({23, 0}, 1.0, 20000);
  const double h = 0.05;
  std::vector<double> levels;
  for (double y = -0.975; y <= 0.975 + 1e-12; y += h) levels.push_back(y);
  LocalTimeProfile prof = occupation_profile(p, 1.0, levels, h);
  double tiled = 0.0;
  for (double v : prof.value) tiled += v * h;
  double direct = occupation_below(p, 1.0, 1.0) - occupation_below(p, -1.0, 1.0);
  REQUIRE(tiled == Catch::Approx(direct).margin(1e-10));
}

TEST_CASE("three estimators agree on one long path") {
  SamplePath p = gen_brownian({24, 0}, 1.0, 250000);
  double tan = tanaka_local_time(p, 0.0, 1.0);
  double occ = occupation_profile(p, 1.0, {0.0}, 0.02).value[0];
  // Generous exit distance keeps the overshoot bias of the cycle counter
  // second order: delta^2/dt = 625.
  double cross = crossing_local_time(p, 0.0, 0.05, 1.0);
  REQUIRE(tan > 0.0);
  REQUIRE(occ == Catch::Approx(tan).epsilon(0.20));
  REQUIRE(cross == Catch::Approx(tan).epsilon(0.20));
}

TEST_CASE("tanaka construction on a deterministic triangle") {
  // Path 0 -> 1 -> 0 over [0, 2]. Above-level increments cancel except for
  // the legs the level cuts, leaving exactly 2 * (excursion overshoot).
  SamplePath p;
  p.t0 = 0.0;
  p.dt = 0.5;
  p.values = {0.0, 0.5, 1.0, 0.5, 0.0};
  REQUIRE(tanaka_local_time(p, 0.0, 2.0) == Catch::Approx(1.0).margin(1e-15));
  REQUIRE(tanaka_local_time(p, 0.5, 2.0) == Catch::Approx(1.0).margin(1e-15));
  REQUIRE(tanaka_local_time(p, 2.0, 2.0) == 0.0);
}

TEST_CASE("profile validates its level grid") {
  SamplePath p = gen_brownian({25, 0}, 1.0, 1000);
  REQUIRE_THROWS(occupation_profile(p, 1.0, {0.1, 0.1}, 0.02));
  REQUIRE_THROWS(occupation_profile(p, 1.0, {0.0}, -0.01));
}

TEST_CASE("integrated profile equals occupation below") {
  SamplePath p = gen_brownian({26, 0}, 1.0, 50000);
  REQUIRE(rogers_F(p, 0.2, 1.0) == occupation_below(p, 0.2, 1.0));
  double a = rogers_F(p, -0.4, 1.0);
  double b = rogers_F(p, 0.4, 1.0);
  REQUIRE(b >= a);
}

TEST_CASE("crossing estimator needs a sane scale separation") {
  SamplePath p = gen_brownian({27, 0}, 1.0, 1000);
  REQUIRE_THROWS(crossing_local_time(p, 0.0, -0.1, 1.0));
}
