#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace smdiag {

/// Thrown when a requested computation exceeds a documented resource cap.
class ResourceLimitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a comparison-ordered family loses monotonicity.
/// Carries the first offending (time step, grid column) pair.
class FlowOrderViolation : public std::runtime_error {
 public:
  FlowOrderViolation(std::size_t step, std::size_t column)
      : std::runtime_error("flow order violation at step " + std::to_string(step) +
                           ", column " + std::to_string(column)),
        step_(step),
        column_(column) {}
  std::size_t step() const { return step_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t step_;
  std::size_t column_;
};

/// Thrown when a quantile level leaves the representable range of a field.
class QuantileOutOfRange : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when an operation's mathematical precondition fails on the data.
class PreconditionViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

/// Exact accumulation of doubles (Shewchuk-style nonoverlapping expansion).
///
/// value() returns the correctly rounded sum of everything added, so two
/// accumulations of the same multiset of terms agree bit for bit regardless
/// of order. add_product(a, b) folds in the exact product via an FMA split.
class ExactSum {
 public:
  void add(double x) {
    std::size_t out = 0;
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      double p = parts_[i];
      double hi = x + p;
      double bv = hi - x;
      double lo = (p - bv) + (x - (hi - bv));
      if (lo != 0.0) parts_[out++] = lo;
      x = hi;
    }
    parts_.resize(out);
    if (x != 0.0) parts_.push_back(x);
  }

  void add_product(double a, double b) {
    double p = a * b;
    double err = std::fma(a, b, -p);
    add(p);
    if (err != 0.0) add(err);
  }

  /// Correctly rounded value of the accumulated sum.
  double value() const {
    if (parts_.empty()) return 0.0;
    // Compress pass (two sweeps of fast-two-sum); the surviving top
    // component approximates the exact sum to within half an ulp.
    std::vector<double> g(parts_.size());
    double q = parts_.back();
    std::size_t bottom = parts_.size() - 1;
    for (std::size_t i = parts_.size() - 1; i-- > 0;) {
      double hi = q + parts_[i];
      double err = parts_[i] - (hi - q);
      q = hi;
      if (err != 0.0) {
        g[bottom--] = q;
        q = err;
      }
    }
    double top = q;
    for (std::size_t i = bottom + 1; i < parts_.size(); ++i) {
      double hi = g[i] + top;
      top = hi;
    }
    return top;
  }

  void reset() { parts_.clear(); }

 private:
  std::vector<double> parts_;
};

/// Compensated (Neumaier) summation for long statistical accumulations.
class CompensatedSum {
 public:
  void add(double x) {
    double t = s_ + x;
    if (std::abs(s_) >= std::abs(x))
      c_ += (s_ - t) + x;
    else
      c_ += (x - t) + s_;
    s_ = t;
  }
  double value() const { return s_ + c_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

/// Least-squares slope of y against x.
inline double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, "ls_slope: need two points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  require(sxx > 0, "ls_slope: degenerate abscissae");
  return sxy / sxx;
}

struct MeanVar {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
};

inline MeanVar mean_variance(const std::vector<double>& v) {
  require(v.size() >= 2, "mean_variance: need two samples");
  CompensatedSum s;
  for (double x : v) s.add(x);
  double m = s.value() / static_cast<double>(v.size());
  CompensatedSum q;
  for (double x : v) q.add((x - m) * (x - m));
  return {m, q.value() / static_cast<double>(v.size() - 1)};
}

/// One-sample Kolmogorov-Smirnov distance against a cdf callable.
template <class Cdf>
double ks_distance(std::vector<double> sample, Cdf&& cdf) {
  require(!sample.empty(), "ks_distance: empty sample");
  std::sort(sample.begin(), sample.end());
  double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    double F = cdf(sample[i]);
    double lo = static_cast<double>(i) / n;
    double hi = static_cast<double>(i + 1) / n;
    d = std::max(d, std::max(std::abs(F - lo), std::abs(hi - F)));
  }
  return d;
}

inline double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace smdiag
