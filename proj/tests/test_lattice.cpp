#include <cmath>

#include <catch2/catch_amalgamated.hpp>

#include "smdiag/lattice.hpp"
#include "smdiag/sample_path.hpp"

using namespace smdiag;

namespace {

SamplePath make_path(std::vector<double> v, double dt = 1.0) {
  SamplePath p;
  p.t0 = 0.0;
  p.dt = dt;
  p.values = std::move(v);
  return p;
}

}  // namespace

TEST_CASE("embedding a hand-built zig-zag") {
  // Anchored at 0 immediately; exits at +1, then back to 0, then -1.
  SamplePath p = make_path({0.0, 0.4, 1.05, 0.7, -0.02, -0.6, -1.2});
  LatticeWalk w = embed_walk(p, 1.0, 0.0);
  REQUIRE(w.anchored);
  REQUIRE(w.anchor_site == 0);
  REQUIRE(w.anchor_time == 0.0);
  REQUIRE(w.steps() == 3);
  REQUIRE(w.walk_value(1) == 1.0);
  REQUIRE(w.walk_value(2) == 0.0);
  REQUIRE(w.walk_value(3) == -1.0);
  REQUIRE(w.tau[0] == 2.0);
  REQUIRE(w.tau[1] == 4.0);
  REQUIRE(w.tau[2] == 6.0);
}

TEST_CASE("anchor waits for the first site crossing") {
  SamplePath p = make_path({0.3, 0.8, 1.4, 0.2});
  LatticeWalk w = embed_walk(p, 1.0, 0.0);
  REQUIRE(w.anchored);
  REQUIRE(w.anchor_site == 1);  // first crossed site moving up
  REQUIRE(w.anchor_time == 2.0);
}

TEST_CASE("no anchor on a path that never reaches a site") {
  SamplePath p = make_path({0.3, 0.4, 0.45});
  LatticeWalk w = embed_walk(p, 1.0, 0.0);
  REQUIRE_FALSE(w.anchored);
  REQUIRE(w.steps() == 0);
}

TEST_CASE("pathwise second-order identity is exact on a Brownian walk") {
  SamplePath p = gen_brownian({31, 0}, 0.25, 25000);
  LatticeWalk w = embed_walk(p, 0.05, 0.0);
  REQUIRE(w.steps() > 20);
  auto fs = {
      std::function<double(double)>([](double x) { return x * x; }),
      std::function<double(double)>([](double x) { return std::abs(x); }),
      std::function<double(double)>([](double x) { return std::cos(3.0 * x); }),
  };
  for (const auto& f : fs) {
    ItoDecomposition d = discrete_ito(f, w, w.steps());
    REQUIRE(std::abs(d.residual) <= 1e-12);
    REQUIRE(d.laplacian_part == discrete_ito_tanaka(f, w, w.steps()));
  }
}

TEST_CASE("site-count regrouping equals the stepwise curvature sum halved") {
  // Convex f: every visit contributes the same positive curvature weight, so
  // the laplacian sum equals (#steps) * (f(d) + f(-d) - 2 f(0))/2 only when a
  // single site is visited; the zig-zag visits three.
  SamplePath p = make_path({0.0, 1.1, -0.05, 1.02, 0.1, -1.3});
  LatticeWalk w = embed_walk(p, 1.0, 0.0);
  auto f = [](double x) { return x * x; };
  ItoDecomposition d = discrete_ito(f, w, w.steps());
  REQUIRE(d.laplacian_part == Catch::Approx(static_cast<double>(w.steps())));
  REQUIRE(d.residual == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("mean first-exit time carries the sampling barrier shift") {
  // Discrete monitoring detects the exit only after an overshoot, which
  // inflates the effective barrier from d to d + beta sqrt(dt),
  // beta = |zeta(1/2)| / sqrt(2 pi).
  const double delta = 0.02;
  const double dt = 1e-5;
  const double beta = 0.5826;
  const int reps = 1000;
  double acc = 0.0;
  int used = 0;
  for (int r = 0; r < reps; ++r) {
    SamplePath p = gen_brownian({808, static_cast<std::uint64_t>(r)}, 0.02, 2000);
    LatticeWalk w = embed_walk(p, delta, 0.0);
    if (w.steps() == 0) continue;
    acc += w.tau[0] - w.anchor_time;
    ++used;
  }
  REQUIRE(used > 990);
  double mean = acc / used;
  double shifted = delta * (1.0 + beta * std::sqrt(dt) / delta);
  REQUIRE(mean == Catch::Approx(shifted * shifted).epsilon(0.08));
}

TEST_CASE("visit counts respect the time cutoff") {
  SamplePath p = make_path({0.0, 1.1, -0.05, 1.02, 0.1, -1.3});
  LatticeWalk w = embed_walk(p, 1.0, 0.0);
  VisitCounts all = visit_counts(w, 100.0);
  REQUIRE(all.total() == w.steps() + 1);
  VisitCounts none = visit_counts(w, 0.0);
  REQUIRE(none.total() == 0);
}

TEST_CASE("alternating crossing cycles on a sawtooth") {
  // Hits 0 four times; exits land up, down, up, down.
  SamplePath p = make_path({0.0, 0.6, -0.1, -0.7, 0.05, 0.8, -0.2, -0.9});
  CrossingCounts cc = crossing_counts(p, 0.0, 0.5, 100.0);
  REQUIRE(cc.ell == 4);
  REQUIRE(cc.ell_plus == 2);
}

TEST_CASE("crossing cycle must close before the next one opens") {
  // Returns to the level while still inside the exit band: one cycle only.
  SamplePath p = make_path({0.0, 0.2, -0.1, 0.3, 0.9});
  CrossingCounts cc = crossing_counts(p, 0.0, 0.8, 100.0);
  REQUIRE(cc.ell == 1);
  REQUIRE(cc.ell_plus == 1);
}
