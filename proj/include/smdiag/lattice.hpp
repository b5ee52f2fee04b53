#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <unordered_map>
#include <vector>

#include "smdiag/common.hpp"
#include "smdiag/sample_path.hpp"

namespace smdiag {

/// Random walk embedded in a path by first-exit times from a site lattice.
///
/// Sites are origin + r*delta for integer r and are always evaluated through
/// site_value(), so consecutive walk values differ by exactly one slot. The
/// anchor (tau_0, S_0) is the first lattice hit and is stored apart from the
/// exit sequence; tau[k] is the (k+1)-th exit time.
struct LatticeWalk {
  double delta = 0.0;
  double origin = 0.0;
  bool anchored = false;
  double anchor_time = 0.0;
  long long anchor_site = 0;
  std::vector<double> tau;
  std::vector<long long> sites;

  double site_value(long long r) const { return origin + static_cast<double>(r) * delta; }
  std::size_t steps() const { return tau.size(); }

  /// Position index of the walk after k steps (k = 0 is the anchor).
  long long site_index(std::size_t k) const { return k == 0 ? anchor_site : sites[k - 1]; }
  double walk_value(std::size_t k) const { return site_value(site_index(k)); }
  double walk_time(std::size_t k) const { return k == 0 ? anchor_time : tau[k - 1]; }
};

/// Embed the first-exit walk of `p` on the lattice origin + delta*Z.
///
/// The anchor is the first sample exactly on a site or the first segment
/// crossing one (nearest crossed site in the direction of motion). After
/// that, an exit is the first grid index whose value moved at least delta
/// from the current site; the walk steps one slot toward the overshoot side.
inline LatticeWalk embed_walk(const SamplePath& p, double delta, double origin = 0.0) {
  require(delta > 0.0, "embed_walk: delta must be positive");
  require(!p.values.empty(), "embed_walk: empty path");
  LatticeWalk w;
  w.delta = delta;
  w.origin = origin;

  std::size_t i = 0;
  const std::size_t n = p.values.size();
  // Anchor search.
  {
    double v0 = p.values[0];
    double r0 = std::round((v0 - origin) / delta);
    if (w.site_value(static_cast<long long>(r0)) == v0) {
      w.anchored = true;
      w.anchor_time = p.time(0);
      w.anchor_site = static_cast<long long>(r0);
    } else {
      for (i = 1; i < n; ++i) {
        double a = p.values[i - 1];
        double b = p.values[i];
        // Nearest site index strictly in the direction of motion from a.
        long long r;
        if (b > a)
          r = static_cast<long long>(std::ceil((a - origin) / delta));
        else if (b < a)
          r = static_cast<long long>(std::floor((a - origin) / delta));
        else
          continue;
        double site = w.site_value(r);
        if ((b > a && site <= b) || (b < a && site >= b)) {
          w.anchored = true;
          w.anchor_time = p.time(i);
          w.anchor_site = r;
          break;
        }
      }
      if (!w.anchored) return w;
    }
  }

  long long site = w.anchor_site;
  double anchor_value = w.site_value(site);
  for (++i; i < n; ++i) {
    double d = p.values[i] - anchor_value;
    if (d >= delta || d <= -delta) {
      site += d > 0.0 ? 1 : -1;
      w.tau.push_back(p.time(i));
      w.sites.push_back(site);
      anchor_value = w.site_value(site);
    }
  }
  return w;
}

/// Site occupation counts of the walk before a time cutoff.
struct VisitCounts {
  double delta = 0.0;
  double origin = 0.0;
  std::map<long long, std::size_t> counts;  // site index -> visits

  double site_value(long long r) const { return origin + static_cast<double>(r) * delta; }
  std::size_t total() const {
    std::size_t s = 0;
    for (const auto& kv : counts) s += kv.second;
    return s;
  }
};

/// counts[r] = #{k : tau_k < cutoff, walk at site r after k steps}.
inline VisitCounts visit_counts(const LatticeWalk& w, double cutoff) {
  VisitCounts vc;
  vc.delta = w.delta;
  vc.origin = w.origin;
  if (!w.anchored) return vc;
  for (std::size_t k = 0; k <= w.steps(); ++k) {
    if (w.walk_time(k) < cutoff) ++vc.counts[w.site_index(k)];
  }
  return vc;
}

namespace detail {
/// Shared per-site second difference, halved: both summation routes must
/// consume bit-identical terms for the regrouping equality to be exact.
template <class F>
double half_second_difference(F&& f, const LatticeWalk& w, long long r) {
  return 0.5 * ((f(w.site_value(r + 1)) + f(w.site_value(r - 1))) - 2.0 * f(w.site_value(r)));
}
}  // namespace detail

struct ItoDecomposition {
  double f_start = 0.0;
  double f_end = 0.0;
  double martingale_part = 0.0;
  double laplacian_part = 0.0;
  double residual = 0.0;  // f_end - f_start - martingale - laplacian
};

/// Pathwise discrete Ito formula along the first n walk steps:
///
///   F(S_n) - F(S_0) = sum_k (F(S_k+d)-F(S_k-d))/2 * chi_k
///                   + sum_k (F(S_k+d)+F(S_k-d)-2F(S_k))/2,
///
/// chi_k = +-1 the step sign. Both sums are accumulated exactly and rounded
/// once, so the residual is a pure float-representation effect (~1e-15).
template <class F>
ItoDecomposition discrete_ito(F&& f, const LatticeWalk& w, std::size_t n) {
  require(n <= w.steps(), "discrete_ito: n exceeds walk length");
  require(w.anchored || n == 0, "discrete_ito: walk has no anchor");
  ItoDecomposition out;
  if (!w.anchored) return out;
  ExactSum mart, lap;
  for (std::size_t k = 0; k < n; ++k) {
    long long r = w.site_index(k);
    double half_span = 0.5 * (f(w.site_value(r + 1)) - f(w.site_value(r - 1)));
    mart.add(w.site_index(k + 1) > r ? half_span : -half_span);
    lap.add(detail::half_second_difference(f, w, r));
  }
  out.f_start = f(w.walk_value(0));
  out.f_end = f(w.walk_value(n));
  out.martingale_part = mart.value();
  out.laplacian_part = lap.value();
  out.residual = out.f_end - out.f_start - out.martingale_part - out.laplacian_part;
  return out;
}

/// Ito-Tanaka regrouping of the Laplacian sum by visited site:
///
///   (1/2) sum_r (F(r+d)+F(r-d)-2F(r)) * #visits(r before step n).
///
/// Bit-identical to discrete_ito().laplacian_part: the terms are shared and
/// both routes round the same exact real once.
template <class F>
double discrete_ito_tanaka(F&& f, const LatticeWalk& w, std::size_t n) {
  require(n <= w.steps(), "discrete_ito_tanaka: n exceeds walk length");
  require(w.anchored || n == 0, "discrete_ito_tanaka: walk has no anchor");
  if (!w.anchored) return 0.0;
  std::unordered_map<long long, long long> visits;
  for (std::size_t k = 0; k < n; ++k) ++visits[w.site_index(k)];
  ExactSum lap;
  for (const auto& kv : visits)
    lap.add_product(detail::half_second_difference(f, w, kv.first),
                    static_cast<double>(kv.second));
  return lap.value();
}

/// Alternating visit/exit cycle counts at one level.
///
/// Cycle k opens at the k-th arrival at `level` (sign change or exact sample
/// equality of the interpolated path) and closes when the path has moved
/// delta away. ell counts arrivals up to the cutoff; ell_plus counts those
/// arrivals whose closing exit lands on the upper side.
struct CrossingCounts {
  std::size_t ell = 0;
  std::size_t ell_plus = 0;
};

inline CrossingCounts crossing_counts(const SamplePath& p, double level, double delta,
                                      double cutoff) {
  require(delta > 0.0, "crossing_counts: delta must be positive");
  require(!p.values.empty(), "crossing_counts: empty path");
  CrossingCounts cc;
  bool awaiting_exit = false;
  bool cycle_counted = false;
  if (p.values[0] == level) {
    awaiting_exit = true;
    cycle_counted = p.time(0) <= cutoff;
    if (cycle_counted) ++cc.ell;
  }
  for (std::size_t i = 1; i < p.values.size(); ++i) {
    double a = p.values[i - 1];
    double b = p.values[i];
    if (!awaiting_exit) {
      if ((a - level) * (b - level) > 0.0) continue;
      if (a != level && b != level && (a - level) * (b - level) == 0.0) {
        // Underflowed product; classify by signs instead.
        if ((a > level) == (b > level)) continue;
      }
      double lambda = (a == level) ? 0.0 : (level - a) / (b - a);
      double t_hit = p.time(i - 1) + lambda * p.dt;
      cycle_counted = t_hit <= cutoff;
      if (cycle_counted) ++cc.ell;
      awaiting_exit = true;
      // The rest of this monotone segment may already complete the cycle.
    }
    if (awaiting_exit && std::abs(b - level) >= delta) {
      if (cycle_counted && b > level) ++cc.ell_plus;
      awaiting_exit = false;
    }
  }
  return cc;
}

}  // namespace smdiag
