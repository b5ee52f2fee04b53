#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "smdiag/common.hpp"
#include "smdiag/rng.hpp"

namespace smdiag {

/// Equally spaced scalar path. Sample k lives at time t0 + k*dt; times are
/// always derived from the index so the grid cannot drift.
struct SamplePath {
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<double> values;

  std::size_t steps() const { return values.empty() ? 0 : values.size() - 1; }
  double time(std::size_t k) const { return t0 + static_cast<double>(k) * dt; }
  double horizon() const { return static_cast<double>(steps()) * dt; }
  double front() const { return values.front(); }
  double back() const { return values.back(); }
};

namespace detail {
/// Index of the grid time equal to s, or throws. Accepts one ulp of slack so
/// callers can pass times printed and re-read at full precision.
inline std::size_t grid_index(const SamplePath& p, double s) {
  require(p.dt > 0.0, "grid_index: path has no grid");
  double kf = (s - p.t0) / p.dt;
  double kr = std::round(kf);
  if (kr < 0.0 || kr > static_cast<double>(p.steps()))
    throw std::invalid_argument("grid_index: time outside sampled range");
  std::size_t k = static_cast<std::size_t>(kr);
  double t = p.time(k);
  double tol = 4.0 * (std::abs(t) + p.dt) * 1e-16;
  require(std::abs(t - s) <= tol, "grid_index: time is not a grid point");
  return k;
}
}  // namespace detail

/// Brownian path on [0, horizon] with n_steps increments, started at 0.
///
/// Increments are sqrt(dt) times consecutive draws of the stream, so the
/// stream consumption does not depend on dt. Consequently rescaling the
/// horizon by c rescales every value by sqrt(c); for c a power of four the
/// equality is bit-exact (binary scaling commutes with rounding).
inline SamplePath gen_brownian(SeedSpec seed, double horizon, std::size_t n_steps) {
  require(horizon > 0.0, "gen_brownian: horizon must be positive");
  require(n_steps >= 1, "gen_brownian: need at least one step");
  SamplePath p;
  p.t0 = 0.0;
  p.dt = horizon / static_cast<double>(n_steps);
  p.values.resize(n_steps + 1);
  p.values[0] = 0.0;
  NormalStream z(seed);
  double root = std::sqrt(p.dt);
  double acc = 0.0;
  for (std::size_t k = 0; k < n_steps; ++k) {
    acc += root * z.next();
    p.values[k + 1] = acc;
  }
  return p;
}

/// Increment view from grid time s: result(k) = p(s + k dt) - p(s).
inline SamplePath shift_path(const SamplePath& p, double s) {
  std::size_t k0 = detail::grid_index(p, s);
  SamplePath out;
  out.t0 = 0.0;
  out.dt = p.dt;
  out.values.resize(p.values.size() - k0);
  double base = p.values[k0];
  for (std::size_t j = 0; j < out.values.size(); ++j)
    out.values[j] = p.values[k0 + j] - base;
  return out;
}

/// Time reversal around grid time s: result(u) = p(s - u) - p(s), u in [0, s].
inline SamplePath reverse_path(const SamplePath& p, double s) {
  std::size_t k0 = detail::grid_index(p, s);
  SamplePath out;
  out.t0 = 0.0;
  out.dt = p.dt;
  out.values.resize(k0 + 1);
  double base = p.values[k0];
  for (std::size_t j = 0; j <= k0; ++j) out.values[j] = p.values[k0 - j] - base;
  return out;
}

/// Bridge refinement: inserts factor-1 conditionally Gaussian points per
/// coarse interval. Coarse samples are preserved bit for bit.
inline SamplePath refine_brownian(const SamplePath& p, std::size_t factor, SeedSpec seed) {
  require(factor >= 1, "refine_brownian: factor must be >= 1");
  require(p.steps() >= 1, "refine_brownian: empty path");
  if (factor == 1) return p;
  SamplePath out;
  out.t0 = p.t0;
  out.dt = p.dt / static_cast<double>(factor);
  out.values.resize(p.steps() * factor + 1);
  NormalStream z(seed);
  for (std::size_t i = 0; i < p.steps(); ++i) {
    double right = p.values[i + 1];
    double cur = p.values[i];
    out.values[i * factor] = cur;
    // Walk across the interval; each inserted point is Gaussian given the
    // current left anchor and the fixed right endpoint.
    for (std::size_t j = 1; j < factor; ++j) {
      double remain = static_cast<double>(factor - j + 1) * out.dt;
      double mean = cur + (right - cur) * (out.dt / remain);
      double var = out.dt * (remain - out.dt) / remain;
      cur = mean + std::sqrt(var) * z.next();
      out.values[i * factor + j] = cur;
    }
  }
  out.values.back() = p.values.back();
  return out;
}

}  // namespace smdiag
