#pragma once

#include <atomic>
#include <cmath>
#include <cstddef>
#include <iostream>
#include <vector>

#include "smdiag/common.hpp"
#include "smdiag/lattice.hpp"
#include "smdiag/sample_path.hpp"

namespace smdiag {

namespace detail {
/// Nearest grid index to time t (t need not be an exact grid time).
inline std::size_t nearest_index(const SamplePath& p, double t) {
  require(p.dt > 0.0, "nearest_index: path has no grid");
  double kf = std::round((t - p.t0) / p.dt);
  require(kf >= 0.0 && kf <= static_cast<double>(p.steps()),
          "nearest_index: time outside sampled range");
  return static_cast<std::size_t>(kf);
}
}  // namespace detail

/// Tanaka-formula estimator of the local time at `level` up to time t:
///
///   L = 2 [ (X_t-x)_+ - (X_0-x)_+ - sum_i 1{X_i > x} (X_{i+1} - X_i) ],
///
/// with the indicator read at the left endpoint of each increment. Unbiased
/// for Brownian paths; the Riemann-sum gap is a mean-zero martingale.
inline double tanaka_local_time(const SamplePath& p, double level, double t) {
  std::size_t n = detail::nearest_index(p, t);
  CompensatedSum s;
  for (std::size_t i = 0; i < n; ++i) {
    if (p.values[i] > level) s.add(p.values[i + 1] - p.values[i]);
  }
  double plus_t = std::max(p.values[n] - level, 0.0);
  double plus_0 = std::max(p.values[0] - level, 0.0);
  return 2.0 * (plus_t - plus_0 - s.value());
}

/// Level profile of an estimator.
struct LocalTimeProfile {
  std::vector<double> level;
  std::vector<double> value;
};

/// Occupation-density profile: value at level y is the exact time the
/// piecewise-linear path spends in [y - h/2, y + h/2) before t, divided by h.
/// Levels must be ascending. With spacing equal to h the windows tile the
/// line and spacing * sum(values) recovers t up to roundoff.
inline LocalTimeProfile occupation_profile(const SamplePath& p, double t,
                                           const std::vector<double>& levels,
                                           double bandwidth) {
  require(bandwidth > 0.0, "occupation_profile: bandwidth must be positive");
  require(!levels.empty(), "occupation_profile: no levels");
  for (std::size_t k = 1; k < levels.size(); ++k)
    require(levels[k] > levels[k - 1], "occupation_profile: levels must ascend");
  std::size_t n = detail::nearest_index(p, t);
  std::vector<CompensatedSum> occ(levels.size());
  double h = bandwidth;
  for (std::size_t i = 0; i < n; ++i) {
    double v0 = p.values[i];
    double v1 = p.values[i + 1];
    double lo = std::min(v0, v1);
    double hi = std::max(v0, v1);
    // Windows with right edge above lo: levels[k] + h/2 > lo.
    std::size_t k = static_cast<std::size_t>(
        std::lower_bound(levels.begin(), levels.end(), lo - 0.5 * h) - levels.begin());
    if (k > 0) --k;
    for (; k < levels.size(); ++k) {
      double wl = levels[k] - 0.5 * h;
      double wr = levels[k] + 0.5 * h;
      if (wl > hi) break;
      if (lo == hi) {
        if (v0 >= wl && v0 < wr) occ[k].add(p.dt);
        continue;
      }
      double overlap = std::min(hi, wr) - std::max(lo, wl);
      if (overlap > 0.0) occ[k].add(p.dt * overlap / (hi - lo));
    }
  }
  LocalTimeProfile out;
  out.level = levels;
  out.value.resize(levels.size());
  for (std::size_t j = 0; j < levels.size(); ++j) out.value[j] = occ[j].value() / h;
  return out;
}

/// Crossing-count estimator: delta times the number of completed
/// visit-and-exit cycles at the level before t. Expects delta^2 well above
/// the grid step (warns below a 100x margin).
inline double crossing_local_time(const SamplePath& p, double level, double delta, double t) {
  require(delta > 0.0, "crossing_local_time: delta must be positive");
  static std::atomic<bool> warned{false};
  if (p.dt > 0.0 && delta * delta / p.dt < 100.0 && !warned.exchange(true))
    std::cerr << "crossing_local_time: delta^2/dt = " << delta * delta / p.dt
              << " is below the recommended resolution margin of 100\n";
  return delta * static_cast<double>(crossing_counts(p, level, delta, t).ell);
}

/// Exact time the interpolated path spends at or below `level` before t.
inline double occupation_below(const SamplePath& p, double level, double t) {
  std::size_t n = detail::nearest_index(p, t);
  CompensatedSum s;
  for (std::size_t i = 0; i < n; ++i) {
    double v0 = p.values[i];
    double v1 = p.values[i + 1];
    double lo = std::min(v0, v1);
    double hi = std::max(v0, v1);
    if (hi <= level) {
      s.add(p.dt);
    } else if (lo <= level) {
      s.add(p.dt * (level - lo) / (hi - lo));
    }
  }
  return s.value();
}

/// Integrated local-time profile below a level,
///   F(x) = integral_{-inf}^{x} L^y_t dy,
/// which by the occupation-time identity is occupation_below. Monotone in x
/// from 0 to t; differences F(b) - F(a) integrate the profile over [a, b].
inline double rogers_F(const SamplePath& p, double level, double t) {
  return occupation_below(p, level, t);
}

}  // namespace smdiag
