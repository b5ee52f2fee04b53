#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "smdiag/common.hpp"

namespace smdiag {

/// Function table on a uniform grid: value j sits at x0 + j*dx.
/// No interpolation is ever applied; operations read table entries only.
struct SampledFunction {
  double x0 = 0.0;
  double dx = 0.0;
  std::vector<double> values;

  double x(std::size_t j) const { return x0 + static_cast<double>(j) * dx; }
  std::size_t size() const { return values.size(); }
};

inline void check_sampled(const SampledFunction& f, const char* who) {
  require(f.dx > 0.0, who);
  require(f.values.size() >= 3, who);
}

/// Point masses at grid locations.
struct AtomicMeasure {
  std::vector<double> location;
  std::vector<double> mass;
  double total = 0.0;
};

namespace detail {

struct Sublattice {
  std::size_t m = 0;       // delta = m * dx
  std::size_t j_lo = 0;    // first site index (into the sample grid)
  std::size_t count = 0;   // sites j_lo, j_lo + m, ...
};

/// Sites of the delta-sublattice anchored at x0 that fall in [a, b] and have
/// both delta-neighbours inside the table.
inline Sublattice sublattice(const SampledFunction& f, double delta, double a, double b,
                             const char* who) {
  check_sampled(f, who);
  require(delta > 0.0, who);
  require(a < b, who);
  double mf = std::round(delta / f.dx);
  require(mf >= 1.0 && std::abs(mf * f.dx - delta) <= 1e-9 * (delta + f.dx),
          "sublattice step must be an integer multiple of the sample step");
  std::size_t m = static_cast<std::size_t>(mf);
  double xmax = f.x(f.size() - 1);
  double tol = 1e-12 * (std::abs(a) + std::abs(b) + delta + 1.0);
  require(a >= f.x0 + delta - tol && b <= xmax - delta + tol,
          "interval must lie inside the sampled range shrunk by delta");
  // First sublattice index i with x0 + i*m*dx >= a - tol and i*m >= m.
  double step = static_cast<double>(m) * f.dx;
  double i_lo = std::ceil((a - tol - f.x0) / step);
  if (i_lo < 1.0) i_lo = 1.0;
  double i_hi = std::floor((b + tol - f.x0) / step);
  double i_max = std::floor(static_cast<double>(f.size() - 1 - m) / static_cast<double>(m));
  if (i_hi > i_max) i_hi = i_max;
  Sublattice s;
  s.m = m;
  if (i_hi < i_lo) return s;
  s.j_lo = static_cast<std::size_t>(i_lo) * m;
  s.count = static_cast<std::size_t>(i_hi - i_lo) + 1;
  return s;
}

inline double second_difference(const SampledFunction& f, std::size_t j, std::size_t m) {
  return (f.values[j + m] + f.values[j - m]) - 2.0 * f.values[j];
}

}  // namespace detail

/// Table of x -> F(x+delta) + F(x-delta) - 2F(x) on the valid interior.
inline SampledFunction discrete_laplacian(const SampledFunction& f, double delta) {
  check_sampled(f, "discrete_laplacian");
  double mf = std::round(delta / f.dx);
  require(mf >= 1.0 && std::abs(mf * f.dx - delta) <= 1e-9 * (delta + f.dx),
          "discrete_laplacian: delta must be an integer multiple of dx");
  std::size_t m = static_cast<std::size_t>(mf);
  require(f.size() >= 2 * m + 1, "discrete_laplacian: table too short for delta");
  SampledFunction out;
  out.x0 = f.x(m);
  out.dx = f.dx;
  out.values.resize(f.size() - 2 * m);
  for (std::size_t j = 0; j < out.values.size(); ++j)
    out.values[j] = detail::second_difference(f, j + m, m);
  return out;
}

namespace detail {
struct SignedMu {
  AtomicMeasure plus, minus;
  double total = 0.0;  // always plus.total + minus.total, as one rounding
};

inline SignedMu mu_delta_impl(const SampledFunction& f, double delta, double a, double b,
                              const char* who) {
  Sublattice s = sublattice(f, delta, a, b, who);
  SignedMu out;
  ExactSum pos, neg;
  for (std::size_t i = 0; i < s.count; ++i) {
    std::size_t j = s.j_lo + i * s.m;
    double d2 = second_difference(f, j, s.m);
    if (d2 > 0.0) {
      double mass = d2 / delta;
      out.plus.location.push_back(f.x(j));
      out.plus.mass.push_back(mass);
      pos.add(mass);
    } else if (d2 < 0.0) {
      double mass = -d2 / delta;
      out.minus.location.push_back(f.x(j));
      out.minus.mass.push_back(mass);
      neg.add(mass);
    }
  }
  out.plus.total = pos.value();
  out.minus.total = neg.value();
  out.total = out.plus.total + out.minus.total;
  return out;
}
}  // namespace detail

/// Curvature-mass measure: atoms (1/delta)|F(x+d)+F(x-d)-2F(x)| at the
/// delta-sublattice sites inside [a, b] (closed; sublattice anchored at x0).
/// Adding an affine function changes nothing; rescaling F rescales masses.
inline AtomicMeasure mu_delta(const SampledFunction& f, double delta, double a, double b) {
  detail::SignedMu s = detail::mu_delta_impl(f, delta, a, b, "mu_delta");
  AtomicMeasure out;
  out.location.reserve(s.plus.location.size() + s.minus.location.size());
  out.mass.reserve(out.location.capacity());
  std::size_t ip = 0, in = 0;
  while (ip < s.plus.location.size() || in < s.minus.location.size()) {
    bool take_plus = in == s.minus.location.size() ||
                     (ip < s.plus.location.size() && s.plus.location[ip] < s.minus.location[in]);
    if (take_plus) {
      out.location.push_back(s.plus.location[ip]);
      out.mass.push_back(s.plus.mass[ip++]);
    } else {
      out.location.push_back(s.minus.location[in]);
      out.mass.push_back(s.minus.mass[in++]);
    }
  }
  out.total = s.total;
  return out;
}

/// Jordan split of the curvature measure: convex-part and concave-part atoms.
/// plus.total + minus.total equals mu_delta(...).total bit for bit.
struct SignedMeasures {
  AtomicMeasure plus, minus;
};

inline SignedMeasures mu_delta_signed(const SampledFunction& f, double delta, double a,
                                      double b) {
  detail::SignedMu s = detail::mu_delta_impl(f, delta, a, b, "mu_delta_signed");
  return {std::move(s.plus), std::move(s.minus)};
}

/// Hat-sum reconstruction: f and g are tabulated on the full delta-sublattice
/// of the sample range, convex there, with F - (f - g) affine on the
/// sublattice restricted to [a, b] (second differences cancel exactly).
struct DcDecomposition {
  SampledFunction f, g;
  AtomicMeasure plus, minus;
};

inline DcDecomposition dc_decompose(const SampledFunction& f, double delta, double a, double b) {
  detail::SignedMu s = detail::mu_delta_impl(f, delta, a, b, "dc_decompose");
  detail::Sublattice lat = detail::sublattice(f, delta, a, b, "dc_decompose");
  DcDecomposition out;
  out.plus = std::move(s.plus);
  out.minus = std::move(s.minus);
  std::size_t n_sites = (f.size() - 1) / lat.m + 1;
  for (SampledFunction* part : {&out.f, &out.g}) {
    part->x0 = f.x0;
    part->dx = static_cast<double>(lat.m) * f.dx;
    part->values.assign(n_sites, 0.0);
  }
  // Hat kernel (x - y)_+ integrates each measure; the discrete Laplacian of
  // the hat at lattice points is delta * 1{x == y}, hence exact cancellation.
  for (std::size_t i = 0; i < n_sites; ++i) {
    double xi = out.f.x(i);
    CompensatedSum sf, sg;
    for (std::size_t k = 0; k < out.plus.location.size(); ++k) {
      double d = xi - out.plus.location[k];
      if (d > 0.0) sf.add(out.plus.mass[k] * d);
    }
    for (std::size_t k = 0; k < out.minus.location.size(); ++k) {
      double d = xi - out.minus.location[k];
      if (d > 0.0) sg.add(out.minus.mass[k] * d);
    }
    out.f.values[i] = sf.value();
    out.g.values[i] = sg.value();
  }
  return out;
}

enum class Boundedness { bounded, diverging, inconclusive };

inline const char* to_string(Boundedness b) {
  switch (b) {
    case Boundedness::bounded: return "bounded";
    case Boundedness::diverging: return "diverging";
    default: return "inconclusive";
  }
}

struct DcThresholds {
  double bounded_exponent = 0.1;
  double bounded_ratio = 3.0;
  double diverging_exponent = 0.25;
  double mass_floor = 1e-10;
};

struct DcVerdict {
  std::vector<double> deltas;
  std::vector<double> masses;
  double growth_exponent = 0.0;
  Boundedness verdict = Boundedness::inconclusive;
};

/// Mass-growth classification along a decreasing delta ladder.
///
/// growth_exponent is the least-squares slope of log mass against
/// log(1/delta). Bounded needs a flat, tight ladder; diverging needs clear
/// growth; anything else stays inconclusive.
inline DcVerdict dc_test(const SampledFunction& f, const std::vector<double>& deltas, double a,
                         double b, DcThresholds th = {}) {
  require(deltas.size() >= 2, "dc_test: need at least two deltas");
  for (std::size_t i = 1; i < deltas.size(); ++i)
    require(deltas[i] < deltas[i - 1], "dc_test: deltas must decrease");
  DcVerdict v;
  v.deltas = deltas;
  for (double d : deltas) v.masses.push_back(mu_delta(f, d, a, b).total);

  double mmax = 0.0, mmin = std::numeric_limits<double>::infinity();
  for (double m : v.masses) {
    mmax = std::max(mmax, m);
    mmin = std::min(mmin, m);
  }
  if (mmax <= th.mass_floor) {
    v.growth_exponent = 0.0;
    v.verdict = Boundedness::bounded;
    return v;
  }
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (v.masses[i] > th.mass_floor) {
      lx.push_back(std::log(1.0 / deltas[i]));
      ly.push_back(std::log(v.masses[i]));
    }
  }
  if (lx.size() < 2) {
    v.verdict = Boundedness::inconclusive;
    return v;
  }
  v.growth_exponent = ls_slope(lx, ly);
  if (v.growth_exponent < th.bounded_exponent && mmin > 0.0 && mmax / mmin < th.bounded_ratio)
    v.verdict = Boundedness::bounded;
  else if (v.growth_exponent > th.diverging_exponent)
    v.verdict = Boundedness::diverging;
  else
    v.verdict = Boundedness::inconclusive;
  return v;
}

/// For convex F, the curvature mass of [a, b] never exceeds the divided-
/// difference slope gap at the interval ends.
struct ConvexBound {
  double mass = 0.0;
  double bound = 0.0;
};

inline ConvexBound convex_upper_bound_check(const SampledFunction& f, double delta, double a,
                                            double b) {
  detail::Sublattice lat = detail::sublattice(f, delta, a, b, "convex_upper_bound_check");
  // Convexity precondition at the finest available scale.
  double scale = 0.0;
  for (double v : f.values) scale = std::max(scale, std::abs(v));
  double ctol = 1e-11 * (scale + 1.0);
  for (std::size_t j = 1; j + 1 < f.size(); ++j) {
    if (detail::second_difference(f, j, 1) < -ctol)
      throw PreconditionViolation("convex_upper_bound_check: table is not convex");
  }
  double ja_f = std::round((a - f.x0) / f.dx);
  double jb_f = std::round((b - f.x0) / f.dx);
  require(ja_f >= static_cast<double>(lat.m) &&
              jb_f + static_cast<double>(lat.m) <= static_cast<double>(f.size() - 1),
          "convex_upper_bound_check: interval ends need delta margins");
  std::size_t ja = static_cast<std::size_t>(ja_f);
  std::size_t jb = static_cast<std::size_t>(jb_f);
  ConvexBound out;
  out.mass = detail::mu_delta_impl(f, delta, a, b, "convex_upper_bound_check").total;
  out.bound = (f.values[jb + lat.m] - f.values[jb]) / delta -
              (f.values[ja] - f.values[ja - lat.m]) / delta;
  if (out.mass > out.bound + 1e-9 * (1.0 + std::abs(out.bound)))
    throw std::logic_error("convex_upper_bound_check: slope bound violated");
  return out;
}

}  // namespace smdiag
