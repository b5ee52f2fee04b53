#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <unordered_map>
#include <vector>

#include "smdiag/common.hpp"
#include "smdiag/flow.hpp"
#include "smdiag/localtime.hpp"
#include "smdiag/sample_path.hpp"

namespace smdiag {

/// Subdivision ladder expressed as index strides over a common sample range,
/// ordered coarse to fine (strictly decreasing stride).
struct PartitionLadder {
  std::vector<std::size_t> strides;
};

inline PartitionLadder make_ladder(std::vector<std::size_t> strides) {
  require(!strides.empty(), "ladder: empty");
  for (std::size_t k = 0; k < strides.size(); ++k) {
    require(strides[k] >= 1, "ladder: zero stride");
    if (k > 0) require(strides[k] < strides[k - 1], "ladder: strides must strictly decrease");
  }
  return PartitionLadder{std::move(strides)};
}

/// Halving ladder: coarsest, coarsest/2, ..., down to coarsest/2^(rungs-1).
inline PartitionLadder dyadic_ladder(std::size_t coarsest, std::size_t rungs) {
  require(rungs >= 1, "dyadic_ladder: need at least one rung");
  std::vector<std::size_t> s;
  std::size_t m = coarsest;
  for (std::size_t r = 0; r < rungs; ++r) {
    require(m >= 1, "dyadic_ladder: coarsest stride too small for rung count");
    s.push_back(m);
    if (r + 1 < rungs) {
      require(m % 2 == 0, "dyadic_ladder: coarsest must be divisible by 2^(rungs-1)");
      m /= 2;
    }
  }
  return PartitionLadder{std::move(s)};
}

namespace detail {
/// Partition of [0, n-1] by stride: 0, m, 2m, ..., plus the last index.
inline std::vector<std::size_t> strided_indices(std::size_t n_samples, std::size_t stride) {
  require(n_samples >= 2, "partition: need at least two samples");
  require(stride >= 1, "partition: zero stride");
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < n_samples - 1; k += stride) idx.push_back(k);
  idx.push_back(n_samples - 1);
  return idx;
}

/// Map partition positions onto sample positions (must match within tol).
inline std::vector<std::size_t> partition_indices(const std::vector<double>& positions,
                                                  const std::vector<double>& partition) {
  require(partition.size() >= 2, "partition: need at least two points");
  std::vector<std::size_t> idx;
  idx.reserve(partition.size());
  double span = std::abs(positions.back() - positions.front()) + 1.0;
  for (double x : partition) {
    auto it = std::lower_bound(positions.begin(), positions.end(), x - 1e-9 * span);
    if (it == positions.end() || std::abs(*it - x) > 1e-9 * span)
      throw std::invalid_argument("partition point is not a sample position");
    std::size_t k = static_cast<std::size_t>(it - positions.begin());
    require(idx.empty() || k > idx.back(), "partition points must strictly ascend");
    idx.push_back(k);
  }
  return idx;
}
}  // namespace detail

/// Sum of |increment|^p along the index partition. With all |increments| at
/// most 1 and p >= 1 the result can never exceed the p=1 sum; that ordering
/// is checked on every call.
inline double p_variation_sum(const std::vector<double>& values,
                              const std::vector<std::size_t>& partition, double p) {
  require(p >= 1.0, "p_variation_sum: p must be >= 1");
  require(partition.size() >= 2, "p_variation_sum: need at least one cell");
  CompensatedSum sum_p, sum_1;
  double max_abs = 0.0;
  for (std::size_t k = 0; k + 1 < partition.size(); ++k) {
    double d = std::abs(values[partition[k + 1]] - values[partition[k]]);
    max_abs = std::max(max_abs, d);
    sum_1.add(d);
    sum_p.add(std::pow(d, p));
  }
  if (max_abs <= 1.0)
    require(sum_p.value() <= sum_1.value() * (1.0 + 1e-12) + 1e-300,
            "p_variation_sum: monotonicity in p violated");
  return sum_p.value();
}

inline double p_variation_sum(const std::vector<double>& values, double p,
                              std::size_t stride) {
  return p_variation_sum(values, detail::strided_indices(values.size(), stride), p);
}

inline double quadratic_variation(const std::vector<double>& values,
                                  const std::vector<std::size_t>& partition) {
  require(partition.size() >= 2, "quadratic_variation: need at least one cell");
  CompensatedSum s;
  for (std::size_t k = 0; k + 1 < partition.size(); ++k) {
    double d = values[partition[k + 1]] - values[partition[k]];
    s.add(d * d);
  }
  return s.value();
}

inline double quadratic_variation(const std::vector<double>& values, std::size_t stride) {
  return quadratic_variation(values, detail::strided_indices(values.size(), stride));
}

inline double quadratic_variation(const std::vector<double>& positions,
                                  const std::vector<double>& values,
                                  const std::vector<double>& partition) {
  return quadratic_variation(values, detail::partition_indices(positions, partition));
}

/// Sum of |increments| over consecutive samples: a lower estimate of the true
/// total variation at the sampling resolution.
inline double total_variation(const std::vector<double>& values, std::size_t stride = 1) {
  CompensatedSum s;
  auto idx = detail::strided_indices(values.size(), stride);
  for (std::size_t k = 0; k + 1 < idx.size(); ++k)
    s.add(std::abs(values[idx[k + 1]] - values[idx[k]]));
  return s.value();
}

enum class Trend { Increasing, Decreasing, Flat, Mixed };

inline const char* to_string(Trend t) {
  switch (t) {
    case Trend::Increasing: return "increasing";
    case Trend::Decreasing: return "decreasing";
    case Trend::Flat: return "flat";
    default: return "mixed";
  }
}

/// Per-rung variation sums in ladder order (coarse to fine) with a pairwise
/// trend verdict: each step must move by more than the relative slack to
/// count as a rise or fall; anything else downgrades the verdict.
struct VariationReport {
  std::vector<double> mesh;
  std::vector<double> value;
  Trend trend = Trend::Flat;
  double slack = 0.0;
};

inline Trend trend_verdict(const std::vector<double>& value, double slack) {
  bool all_up = true, all_down = true, all_flat = true;
  for (std::size_t k = 0; k + 1 < value.size(); ++k) {
    double lo = value[k] * (1.0 - slack);
    double hi = value[k] * (1.0 + slack);
    if (!(value[k + 1] > hi)) all_up = false;
    if (!(value[k + 1] < lo)) all_down = false;
    if (value[k + 1] > hi || value[k + 1] < lo) all_flat = false;
  }
  if (all_flat) return Trend::Flat;
  if (all_up) return Trend::Increasing;
  if (all_down) return Trend::Decreasing;
  return Trend::Mixed;
}

inline VariationReport variation_report(const std::vector<double>& values, double spacing,
                                        double p, const PartitionLadder& ladder,
                                        double slack = 0.05) {
  VariationReport rep;
  rep.slack = slack;
  for (std::size_t m : ladder.strides) {
    rep.mesh.push_back(static_cast<double>(m) * spacing);
    rep.value.push_back(p_variation_sum(values, p, m));
  }
  rep.trend = trend_verdict(rep.value, slack);
  return rep;
}

/// Space-variable QV of x -> Z_t(x) at the final recorded time against the
/// breakpoint-sweep formula: each slope jump contributes jump^2 times the
/// time the flow spends with the breakpoint between the two column paths.
struct SpaceQv {
  double empirical = 0.0;
  double formula = 0.0;
};

namespace detail {
inline double sweep_formula(const FlowField& f, std::size_t ja, std::size_t jb) {
  double total = 0.0;
  for (std::size_t k = 0; k < f.sigma_breaks.size(); ++k)
    total += f.sigma_jumps[k] * f.sigma_jumps[k] *
             (f.below_time[k][ja] - f.below_time[k][jb]);
  return total;
}
}  // namespace detail

inline SpaceQv space_qv_Z(const FlowField& f, double a, double b,
                          const std::vector<double>& partition = {}) {
  std::size_t ja = f.column_of(a);
  std::size_t jb = f.column_of(b);
  require(ja < jb, "space_qv_Z: need a < b on the grid");
  std::vector<std::size_t> cols;
  if (partition.empty()) {
    for (std::size_t j = ja; j <= jb; ++j) cols.push_back(j);
  } else {
    for (double x : partition) {
      std::size_t j = f.column_of(x);
      require(j >= ja && j <= jb, "space_qv_Z: partition point outside [a,b]");
      require(cols.empty() || j > cols.back(), "space_qv_Z: partition must ascend");
      cols.push_back(j);
    }
    require(cols.front() == ja && cols.back() == jb,
            "space_qv_Z: partition must span [a,b]");
  }
  const std::vector<double>& Z = f.Z.back();
  SpaceQv out;
  CompensatedSum emp;
  for (std::size_t k = 0; k + 1 < cols.size(); ++k) {
    double d = Z[cols[k + 1]] - Z[cols[k]];
    emp.add(d * d);
  }
  out.empirical = emp.value();
  out.formula = detail::sweep_formula(f, ja, jb);
  return out;
}

/// One rung of a space-QV identity check.
struct ChainRung {
  double mesh = 0.0;
  double empirical = 0.0;
  double formula = 0.0;
};

/// QV of h(X) against the left-point Stieltjes sum of h'(X)^2 times the
/// per-cell incremental QV of X, both evaluated on the same rung.
template <class H, class HPrime>
std::vector<ChainRung> space_qv_chain_check(const std::vector<double>& positions,
                                            const std::vector<double>& X, H h, HPrime hp,
                                            const PartitionLadder& ladder) {
  require(positions.size() == X.size(), "chain_check: positions/values mismatch");
  std::vector<ChainRung> rungs;
  for (std::size_t m : ladder.strides) {
    auto idx = detail::strided_indices(X.size(), m);
    ChainRung r;
    for (std::size_t k = 0; k + 1 < idx.size(); ++k)
      r.mesh = std::max(r.mesh, positions[idx[k + 1]] - positions[idx[k]]);
    CompensatedSum emp, stj;
    for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
      double dh = h(X[idx[k + 1]]) - h(X[idx[k]]);
      double dx = X[idx[k + 1]] - X[idx[k]];
      double w = hp(X[idx[k]]);
      emp.add(dh * dh);
      stj.add(w * w * dx * dx);
    }
    r.empirical = emp.value();
    r.formula = stj.value();
    rungs.push_back(r);
  }
  return rungs;
}

/// QV of x -> D'_t(x) at the final time against the left-point integral of
/// D'^2 against the incremental breakpoint-sweep measure, per rung. The
/// sweep measure already carries the squared slope jumps, so for the tent
/// coefficient each cell contributes 4 D'^2 times its median-straddle time.
inline std::vector<ChainRung> space_qv_Dprime(const FlowField& f, double a, double b,
                                              const PartitionLadder& ladder) {
  require(f.has_derivative, "space_qv_Dprime: field recorded without derivatives");
  std::size_t ja = f.column_of(a);
  std::size_t jb = f.column_of(b);
  require(ja < jb, "space_qv_Dprime: need a < b on the grid");
  const std::vector<double>& dp = f.Dprime.back();
  std::vector<ChainRung> rungs;
  for (std::size_t m : ladder.strides) {
    std::vector<std::size_t> cols;
    for (std::size_t j = ja; j < jb; j += m) cols.push_back(j);
    cols.push_back(jb);
    ChainRung r;
    for (std::size_t k = 0; k + 1 < cols.size(); ++k)
      r.mesh = std::max(r.mesh, f.x_grid[cols[k + 1]] - f.x_grid[cols[k]]);
    CompensatedSum emp, stj;
    for (std::size_t k = 0; k + 1 < cols.size(); ++k) {
      double d = dp[cols[k + 1]] - dp[cols[k]];
      emp.add(d * d);
      stj.add(dp[cols[k]] * dp[cols[k]] *
              detail::sweep_formula(f, cols[k], cols[k + 1]));
    }
    r.empirical = emp.value();
    r.formula = stj.value();
    rungs.push_back(r);
  }
  return rungs;
}

/// Joint decay probe for a two-argument integrand phi(u, anchor): per rung,
/// the hypothesis integral sum phi^2(u, anchor(u)) du with anchor(u) the left
/// partition point, and the conclusion sum of squared per-cell phi dB sums.
struct MeshProbeRung {
  double mesh = 0.0;
  double hypothesis = 0.0;
  double conclusion = 0.0;
};

template <class Phi>
std::vector<MeshProbeRung> mesh_condition_probe(Phi phi, const SamplePath& driver,
                                                const PartitionLadder& ladder) {
  const std::size_t n = driver.steps();
  require(n >= 1, "mesh_condition_probe: empty driver");
  std::vector<MeshProbeRung> rungs;
  for (std::size_t m : ladder.strides) {
    require(m <= n, "mesh_condition_probe: stride exceeds steps");
    MeshProbeRung r;
    r.mesh = static_cast<double>(m) * driver.dt;
    CompensatedSum hyp, con;
    for (std::size_t cell = 0; cell * m < n; ++cell) {
      std::size_t lo = cell * m;
      std::size_t hi = std::min(lo + m, n);
      CompensatedSum cell_int;
      for (std::size_t u = lo; u < hi; ++u) {
        double v = phi(u, lo);
        hyp.add(v * v * driver.dt);
        cell_int.add(v * (driver.values[u + 1] - driver.values[u]));
      }
      con.add(cell_int.value() * cell_int.value());
    }
    r.hypothesis = hyp.value();
    r.conclusion = con.value();
    rungs.push_back(r);
  }
  return rungs;
}

/// Crossing-count local-time estimates at every lattice site near the path,
/// maintained incrementally so the value at the running level can be read in
/// O(1) per step. Counting matches the hit/exit cycle scheme used for level
/// crossings: a site's count advances on a hit and re-arms once the path has
/// moved a full lattice spacing away.
class RunningLocalTime {
 public:
  explicit RunningLocalTime(double delta, double origin = 0.0)
      : delta_(delta), origin_(origin) {
    require(delta > 0.0, "RunningLocalTime: delta must be positive");
  }

  /// Estimate of the local time at y accumulated so far.
  double at(double y) const {
    long long r = site_of(y);
    auto it = sites_.find(r);
    return it == sites_.end() ? 0.0 : delta_ * static_cast<double>(it->second.hits);
  }

  /// Advance by one path segment from a to b.
  void advance(double a, double b) {
    double lo = std::min(a, b);
    double hi = std::max(a, b);
    long long r0 = static_cast<long long>(std::ceil((lo - origin_) / delta_ - 1e-12));
    long long r1 = static_cast<long long>(std::floor((hi - origin_) / delta_ + 1e-12));
    for (long long r = r0; r <= r1; ++r) {
      Site& s = sites_[r];
      if (!s.awaiting_exit) {
        ++s.hits;
        s.awaiting_exit = true;
        awaiting_.push_back(r);
      }
    }
    for (std::size_t k = 0; k < awaiting_.size();) {
      long long r = awaiting_[k];
      double y = origin_ + static_cast<double>(r) * delta_;
      if (std::abs(b - y) >= delta_) {
        sites_[r].awaiting_exit = false;
        awaiting_[k] = awaiting_.back();
        awaiting_.pop_back();
      } else {
        ++k;
      }
    }
  }

 private:
  struct Site {
    long long hits = 0;
    bool awaiting_exit = false;
  };

  long long site_of(double y) const {
    return static_cast<long long>(std::llround((y - origin_) / delta_));
  }

  double delta_;
  double origin_;
  std::unordered_map<long long, Site> sites_;
  std::vector<long long> awaiting_;
};

/// Sample of the occupation-minus-integral process
///
///   X_t = A(t, W_t) - int_0^t Lhat_s(W_s) dW_s,
///
/// at equally spaced query steps: A is the exact time below the running
/// level, the integral uses left-point crossing-count estimates of the local
/// time at the running level.
struct RogersPoint {
  double t = 0.0;
  double position = 0.0;
  double occupation = 0.0;
  double integral = 0.0;
  double x = 0.0;
};

inline std::vector<RogersPoint> rogers_points(const SamplePath& path,
                                              std::size_t n_queries, double delta) {
  const std::size_t n = path.steps();
  require(n_queries >= 1 && n_queries <= n, "rogers_points: bad query count");
  require(n % n_queries == 0, "rogers_points: queries must divide the step count");
  const std::size_t q = n / n_queries;

  std::vector<double> integral_at(n_queries + 1, 0.0);
  RunningLocalTime lt(delta, path.values.front());
  CompensatedSum integral;
  for (std::size_t i = 0; i < n; ++i) {
    if (i % q == 0) integral_at[i / q] = integral.value();
    integral.add(lt.at(path.values[i]) * (path.values[i + 1] - path.values[i]));
    lt.advance(path.values[i], path.values[i + 1]);
  }
  integral_at[n_queries] = integral.value();

  std::vector<RogersPoint> pts(n_queries + 1);
  for (std::size_t k = 0; k <= n_queries; ++k) {
    std::size_t step = k * q;
    RogersPoint& p = pts[k];
    p.t = path.time(step);
    p.position = path.values[step];
    p.occupation = step == 0 ? 0.0 : occupation_below(path, p.position, p.t);
    p.integral = integral_at[k];
    p.x = p.occupation - p.integral;
  }
  return pts;
}

}  // namespace smdiag
