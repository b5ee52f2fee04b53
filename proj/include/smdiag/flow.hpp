#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "smdiag/common.hpp"
#include "smdiag/sample_path.hpp"

namespace smdiag {

/// Continuous piecewise linear coefficient. Slopes are read with the left-
/// derivative convention: left_slope at a breakpoint is the slope of the
/// piece ending there. Breakpoint values are precomputed so evaluation at a
/// breakpoint is exact, and zeros placed on breakpoints stay exact zeros.
class PiecewiseLinearSigma {
 public:
  PiecewiseLinearSigma(std::vector<double> breakpoints, std::vector<double> slopes,
                       double anchor_x, double anchor_value)
      : breaks_(std::move(breakpoints)), slopes_(std::move(slopes)) {
    require(!breaks_.empty(), "sigma: need at least one breakpoint");
    require(slopes_.size() == breaks_.size() + 1, "sigma: need breakpoints+1 slopes");
    for (std::size_t k = 1; k < breaks_.size(); ++k)
      require(breaks_[k] > breaks_[k - 1], "sigma: breakpoints must ascend");
    break_values_.resize(breaks_.size());
    std::size_t pa = static_cast<std::size_t>(
        std::lower_bound(breaks_.begin(), breaks_.end(), anchor_x) - breaks_.begin());
    if (pa < breaks_.size()) {
      break_values_[pa] = anchor_value + slopes_[pa] * (breaks_[pa] - anchor_x);
      for (std::size_t j = pa + 1; j < breaks_.size(); ++j)
        break_values_[j] = break_values_[j - 1] + slopes_[j] * (breaks_[j] - breaks_[j - 1]);
    }
    if (pa > 0) {
      std::size_t j = pa - 1;
      break_values_[j] = anchor_value - slopes_[pa] * (anchor_x - breaks_[j]);
      while (j-- > 0)
        break_values_[j] = break_values_[j + 1] - slopes_[j + 1] * (breaks_[j + 1] - breaks_[j]);
    }
  }

  /// The reflecting tent x ^ (1 - x): one kink at 1/2, zeros at 0 and 1.
  static PiecewiseLinearSigma canonical() { return {{0.5}, {1.0, -1.0}, 0.5, 0.5}; }

  double operator()(double x) const {
    std::size_t k = piece(x);
    if (k < breaks_.size() && breaks_[k] == x) return break_values_[k];
    if (k == 0) return break_values_[0] + slopes_[0] * (x - breaks_[0]);
    return break_values_[k - 1] + slopes_[k] * (x - breaks_[k - 1]);
  }

  /// Left derivative at x.
  double left_slope(double x) const { return slopes_[piece(x)]; }

  const std::vector<double>& breakpoints() const { return breaks_; }
  const std::vector<double>& slopes() const { return slopes_; }

  /// Slope jump (right minus left) across breakpoint k.
  double slope_jump(std::size_t k) const { return slopes_[k + 1] - slopes_[k]; }

  double value_at_break(std::size_t k) const { return break_values_[k]; }

 private:
  std::size_t piece(double x) const {
    return static_cast<std::size_t>(std::lower_bound(breaks_.begin(), breaks_.end(), x) -
                                    breaks_.begin());
  }

  std::vector<double> breaks_;
  std::vector<double> slopes_;
  std::vector<double> break_values_;
};

/// Scale map with p' = 1/sigma and p(center) = 0, valid on the component of
/// {sigma > 0} containing center. Piecewise logarithmic in closed form.
class LampertiMap {
 public:
  LampertiMap(PiecewiseLinearSigma sigma, double center)
      : sigma_(std::move(sigma)), center_(center) {
    require(sigma_(center) > 0.0, "lamperti_map: sigma must be positive at the center");
  }

  double operator()(double x) const {
    if (x == center_) return 0.0;
    double lo = std::min(x, center_);
    double hi = std::max(x, center_);
    // Split [lo, hi] at breakpoints and integrate 1/sigma piece by piece.
    CompensatedSum acc;
    double u = lo;
    const auto& breaks = sigma_.breakpoints();
    for (double b : breaks) {
      if (b <= lo) continue;
      if (b >= hi) break;
      acc.add(piece_integral(u, b));
      u = b;
    }
    acc.add(piece_integral(u, hi));
    return x > center_ ? acc.value() : -acc.value();
  }

 private:
  double piece_integral(double u0, double u1) const {
    if (u0 == u1) return 0.0;
    double s0 = sigma_(u0);
    double s1 = sigma_(u1);
    if (s0 <= 0.0 || s1 <= 0.0)
      throw PreconditionViolation("lamperti_map: query leaves the positivity component");
    double sl = sigma_.left_slope(0.5 * (u0 + u1));
    if (sl == 0.0) return (u1 - u0) / s0;
    return std::log(s1 / s0) / sl;
  }

  PiecewiseLinearSigma sigma_;
  double center_;
};

inline LampertiMap lamperti_map(const PiecewiseLinearSigma& sigma, double center) {
  return LampertiMap(sigma, center);
}

namespace detail {
/// Interpolated inverse of one monotone slice: returns the cell index j and
/// the abscissa q with D interpolated linearly on [x_j, x_{j+1}].
struct SliceInverse {
  std::size_t cell = 0;
  double q = 0.0;
};

inline SliceInverse slice_invert(const std::vector<double>& x_grid,
                                 const std::vector<double>& D, double alpha) {
  if (alpha < D.front() || alpha > D.back())
    throw QuantileOutOfRange("quantile level outside the simulated range");
  std::size_t j = static_cast<std::size_t>(std::upper_bound(D.begin(), D.end(), alpha) -
                                           D.begin());
  if (j > 0) --j;
  if (j + 1 >= D.size()) j = D.size() - 2;
  SliceInverse out;
  out.cell = j;
  double span = D[j + 1] - D[j];
  out.q = span > 0.0 ? x_grid[j] + (alpha - D[j]) * (x_grid[j + 1] - x_grid[j]) / span
                     : x_grid[j];
  return out;
}
}  // namespace detail

/// Streaming Euler scheme for dD = sigma(D) dB over a comparison grid.
///
/// All columns share the driver increments. Zeros of sigma that sit on grid
/// points are preserved exactly (the increment is exactly 0). The callback
/// sees the state after every step, including the initial one; losing
/// monotonicity across columns throws FlowOrderViolation with the first
/// offending (step, column).
template <class Cb>
void run_flow(const PiecewiseLinearSigma& sigma, const std::vector<double>& x_grid,
              const SamplePath& driver, Cb&& cb) {
  require(x_grid.size() >= 1, "run_flow: empty grid");
  for (std::size_t j = 1; j < x_grid.size(); ++j)
    require(x_grid[j] > x_grid[j - 1], "run_flow: grid must strictly ascend");
  require(driver.steps() >= 1, "run_flow: driver has no increments");
  std::vector<double> D(x_grid.begin(), x_grid.end());
  std::vector<double> Z(x_grid.size(), 0.0);
  std::vector<double> Zqv(x_grid.size(), 0.0);
  const double dt = driver.dt;
  cb(std::size_t{0}, D, Z, Zqv);
  for (std::size_t i = 0; i < driver.steps(); ++i) {
    double dB = driver.values[i + 1] - driver.values[i];
    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < x_grid.size(); ++j) {
      double d = D[j];
      double sp = sigma.left_slope(d);
      double nd = d + sigma(d) * dB;
      Z[j] += sp * dB;
      Zqv[j] += sp * sp * dt;
      if (nd < prev) throw FlowOrderViolation(i + 1, j);
      prev = nd;
      D[j] = nd;
    }
    cb(i + 1, D, Z, Zqv);
  }
}

struct FlowOptions {
  /// Record every record_stride-th step (first and last always). Dense
  /// recording of big grids is memory-hungry; scale accordingly.
  std::size_t record_stride = 1;
  /// Explicit step list overriding the stride when non-empty.
  std::vector<std::size_t> record_steps;
  /// Tabulate exp(Z - Zqv/2) at recorded slices.
  bool with_derivative = true;
};

/// Recorded comparison flow: slices of D (and the spatial derivative data)
/// plus a dense-in-time trapezoid tally of the time each column spends at or
/// below each sigma breakpoint. The tally drives the space-variable
/// quadratic variation formulas without storing every slice.
struct FlowField {
  std::vector<double> x_grid;
  double t0 = 0.0;
  double dt = 0.0;
  std::size_t n_steps = 0;
  std::vector<std::size_t> slice_steps;
  std::vector<std::vector<double>> D, Dprime, Z, Zqv;  // [slice][column]
  std::vector<double> sigma_breaks;
  std::vector<double> sigma_jumps;                 // slope jump at each break
  std::vector<std::vector<double>> below_time;     // [break][column]
  bool has_derivative = true;

  double slice_time(std::size_t s) const {
    return t0 + static_cast<double>(slice_steps[s]) * dt;
  }
  std::size_t slices() const { return slice_steps.size(); }

  std::size_t column_of(double x) const {
    auto it = std::lower_bound(x_grid.begin(), x_grid.end(), x - 1e-9);
    require(it != x_grid.end() && std::abs(*it - x) <= 1e-9 * (1.0 + std::abs(x)),
            "column_of: x is not a grid point");
    return static_cast<std::size_t>(it - x_grid.begin());
  }

  std::size_t slice_of(std::size_t step) const {
    auto it = std::find(slice_steps.begin(), slice_steps.end(), step);
    require(it != slice_steps.end(), "slice_of: step was not recorded");
    return static_cast<std::size_t>(it - slice_steps.begin());
  }
};

inline FlowField simulate_flow(const PiecewiseLinearSigma& sigma,
                               const std::vector<double>& x_grid, const SamplePath& driver,
                               FlowOptions opt = {}) {
  require(opt.record_stride >= 1, "simulate_flow: stride must be positive");
  FlowField f;
  f.x_grid = x_grid;
  f.t0 = driver.t0;
  f.dt = driver.dt;
  f.n_steps = driver.steps();
  f.sigma_breaks = sigma.breakpoints();
  f.sigma_jumps.resize(f.sigma_breaks.size());
  for (std::size_t k = 0; k < f.sigma_breaks.size(); ++k)
    f.sigma_jumps[k] = sigma.slope_jump(k);
  f.has_derivative = opt.with_derivative;
  f.below_time.assign(f.sigma_breaks.size(), std::vector<double>(x_grid.size(), 0.0));

  std::vector<bool> want(driver.steps() + 1, false);
  if (opt.record_steps.empty()) {
    for (std::size_t s = 0; s <= driver.steps(); s += opt.record_stride) want[s] = true;
  } else {
    for (std::size_t s : opt.record_steps) {
      require(s <= driver.steps(), "simulate_flow: recorded step beyond driver");
      want[s] = true;
    }
  }
  want[0] = true;
  want[driver.steps()] = true;

  std::vector<double> prev_D;
  run_flow(sigma, x_grid, driver,
           [&](std::size_t step, const std::vector<double>& D, const std::vector<double>& Z,
               const std::vector<double>& Zqv) {
             if (step > 0) {
               for (std::size_t k = 0; k < f.sigma_breaks.size(); ++k) {
                 double z = f.sigma_breaks[k];
                 auto& bt = f.below_time[k];
                 for (std::size_t j = 0; j < D.size(); ++j) {
                   double w = (prev_D[j] <= z ? 0.5 : 0.0) + (D[j] <= z ? 0.5 : 0.0);
                   if (w != 0.0) bt[j] += w * f.dt;
                 }
               }
             }
             prev_D = D;
             if (!want[step]) return;
             f.slice_steps.push_back(step);
             f.D.push_back(D);
             f.Z.push_back(Z);
             f.Zqv.push_back(Zqv);
             if (opt.with_derivative) {
               std::vector<double> dp(D.size());
               for (std::size_t j = 0; j < D.size(); ++j)
                 dp[j] = std::exp(Z[j] - 0.5 * Zqv[j]);
               f.Dprime.push_back(std::move(dp));
             }
           });
  return f;
}

/// Level line of the flow: q and the inverse-map derivative at each
/// recorded slice. The derivative is 1 / D'(q) with D' interpolated.
struct QuantilePath {
  double alpha = 0.0;
  std::vector<double> times;
  std::vector<double> q;
  std::vector<double> inv_derivative;
};

inline QuantilePath invert_flow(const FlowField& f, double alpha) {
  require(f.has_derivative, "invert_flow: field was recorded without derivatives");
  QuantilePath out;
  out.alpha = alpha;
  out.times.reserve(f.slices());
  for (std::size_t s = 0; s < f.slices(); ++s) {
    auto inv = detail::slice_invert(f.x_grid, f.D[s], alpha);
    std::size_t j = inv.cell;
    double theta = f.x_grid[j + 1] > f.x_grid[j]
                       ? (inv.q - f.x_grid[j]) / (f.x_grid[j + 1] - f.x_grid[j])
                       : 0.0;
    double dp = f.Dprime[s][j] + theta * (f.Dprime[s][j + 1] - f.Dprime[s][j]);
    out.times.push_back(f.slice_time(s));
    out.q.push_back(inv.q);
    out.inv_derivative.push_back(1.0 / dp);
  }
  return out;
}

/// Cocycle check: run to split_s, restart from the reached profile with the
/// shifted driver, and compare against the one-shot run at the final time.
/// Returns the max interpolated discrepancy over comparable columns.
inline double compose_flow_check(const PiecewiseLinearSigma& sigma,
                                 const std::vector<double>& x_grid, const SamplePath& driver,
                                 double split_s) {
  std::size_t k0 = detail::grid_index(driver, split_s);
  require(k0 > 0 && k0 < driver.steps(), "compose_flow_check: split must be interior");
  FlowOptions opt;
  opt.record_steps = {0, k0, driver.steps()};
  opt.with_derivative = false;
  FlowField full = simulate_flow(sigma, x_grid, driver, opt);

  SamplePath tail = shift_path(driver, split_s);
  FlowOptions opt2;
  opt2.record_steps = {0, tail.steps()};
  opt2.with_derivative = false;
  FlowField rest = simulate_flow(sigma, x_grid, tail, opt2);

  const std::vector<double>& Ds = full.D[full.slice_of(k0)];
  const std::vector<double>& Dend = full.D[full.slice_of(driver.steps())];
  const std::vector<double>& G = rest.D[rest.slice_of(tail.steps())];
  double worst = 0.0;
  std::size_t compared = 0;
  for (std::size_t j = 0; j < x_grid.size(); ++j) {
    double y = Ds[j];
    if (y < x_grid.front() || y > x_grid.back()) continue;
    auto it = std::upper_bound(x_grid.begin(), x_grid.end(), y);
    std::size_t c = static_cast<std::size_t>(it - x_grid.begin());
    if (c > 0) --c;
    if (c + 1 >= x_grid.size()) c = x_grid.size() - 2;
    double span = x_grid[c + 1] - x_grid[c];
    double theta = (y - x_grid[c]) / span;
    double composed = G[c] + theta * (G[c + 1] - G[c]);
    worst = std::max(worst, std::abs(Dend[j] - composed));
    ++compared;
  }
  require(compared > 0, "compose_flow_check: no comparable columns");
  return worst;
}

/// Euler scheme for dG = dB + beta * sign(G) dt with sign(0) = 0.
inline SamplePath simulate_sign_sde(double beta, double x0, const SamplePath& driver) {
  require(driver.steps() >= 1, "simulate_sign_sde: driver has no increments");
  SamplePath g;
  g.t0 = driver.t0;
  g.dt = driver.dt;
  g.values.resize(driver.values.size());
  double cur = x0;
  g.values[0] = cur;
  for (std::size_t i = 0; i < driver.steps(); ++i) {
    double dB = driver.values[i + 1] - driver.values[i];
    double sgn = cur > 0.0 ? 1.0 : (cur < 0.0 ? -1.0 : 0.0);
    cur += dB + beta * sgn * driver.dt;
    g.values[i + 1] = cur;
  }
  return g;
}

/// Dyadic-ladder decomposition of the level line into the drawdown part
///
///   A_t = q_t + int_0^t (inverse-map derivative) sigma(alpha) dB,
///
/// whose quadratic variation should vanish along refining partitions, while
/// the QV of q itself converges to mart_qv (the compensator integral).
struct ZeroEnergyReport {
  std::vector<std::size_t> strides;
  std::vector<double> mesh;
  std::vector<double> qv_A;
  std::vector<double> qv_q;
  double mart_qv = 0.0;
  std::vector<double> q;  // dense level line, one value per driver step
  std::vector<double> A;  // dense zero-energy candidate
};

inline ZeroEnergyReport zero_energy_residual(const PiecewiseLinearSigma& sigma,
                                             const std::vector<double>& x_grid,
                                             const SamplePath& driver, double alpha,
                                             const std::vector<std::size_t>& strides) {
  require(!strides.empty(), "zero_energy_residual: no partition strides");
  ZeroEnergyReport rep;
  rep.strides = strides;
  const double sig_alpha = sigma(alpha);
  const std::size_t n = driver.steps();
  rep.q.resize(n + 1);
  rep.A.resize(n + 1);
  double integral = 0.0;
  double inv_prev = 0.0;
  CompensatedSum mqv;
  run_flow(sigma, x_grid, driver,
           [&](std::size_t step, const std::vector<double>& D, const std::vector<double>& Z,
               const std::vector<double>& Zqv) {
             if (step > 0) {
               double dB = driver.values[step] - driver.values[step - 1];
               integral += inv_prev * sig_alpha * dB;
               mqv.add(inv_prev * sig_alpha * inv_prev * sig_alpha * driver.dt);
             }
             auto inv = detail::slice_invert(x_grid, D, alpha);
             std::size_t j = inv.cell;
             double theta = (inv.q - x_grid[j]) / (x_grid[j + 1] - x_grid[j]);
             double dpj = std::exp(Z[j] - 0.5 * Zqv[j]);
             double dpj1 = std::exp(Z[j + 1] - 0.5 * Zqv[j + 1]);
             double dp = dpj + theta * (dpj1 - dpj);
             inv_prev = 1.0 / dp;
             rep.q[step] = inv.q;
             rep.A[step] = inv.q + integral;
           });
  rep.mart_qv = mqv.value();
  for (std::size_t m : strides) {
    require(m >= 1 && m <= n, "zero_energy_residual: bad stride");
    CompensatedSum qa, qq;
    for (std::size_t k = 0; k + m <= n; k += m) {
      double da = rep.A[k + m] - rep.A[k];
      double dq = rep.q[k + m] - rep.q[k];
      qa.add(da * da);
      qq.add(dq * dq);
    }
    // Tail increment so every rung partitions the full horizon.
    std::size_t last = (n / m) * m;
    if (last < n) {
      double da = rep.A[n] - rep.A[last];
      double dq = rep.q[n] - rep.q[last];
      qa.add(da * da);
      qq.add(dq * dq);
    }
    rep.mesh.push_back(static_cast<double>(m) * driver.dt);
    rep.qv_A.push_back(qa.value());
    rep.qv_q.push_back(qq.value());
  }
  return rep;
}

}  // namespace smdiag
