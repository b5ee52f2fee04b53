#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "smdiag/common.hpp"
#include "smdiag/rng.hpp"
#include "smdiag/sample_path.hpp"

namespace smdiag {

/// Hard cap on exact-factorization sizes (n^3 work; one core budget).
inline constexpr std::size_t kFbmMaxSteps = 4096;

/// Exact fractional Brownian sampler on a fixed grid.
///
/// Builds the Cholesky factor of Cov(xi_s, xi_t) = (s^2H + t^2H - |t-s|^2H)/2
/// once; sample() then costs one matrix-vector product. Keep an instance
/// around when drawing many replicates on the same grid.
class FbmCholesky {
 public:
  FbmCholesky(double hurst, double horizon, std::size_t n_steps)
      : hurst_(hurst), n_(n_steps), dt_(horizon / static_cast<double>(n_steps)) {
    require(hurst > 0.0 && hurst < 1.0, "fbm: hurst must lie in (0,1)");
    require(horizon > 0.0, "fbm: horizon must be positive");
    require(n_steps >= 1, "fbm: need at least one step");
    if (n_steps > kFbmMaxSteps)
      throw ResourceLimitError("fbm: grid exceeds exact-factorization cap");
    factor();
  }

  double hurst() const { return hurst_; }

  static double covariance(double s, double t, double hurst) {
    double h2 = 2.0 * hurst;
    return 0.5 * (std::pow(s, h2) + std::pow(t, h2) - std::pow(std::abs(t - s), h2));
  }

  SamplePath sample(SeedSpec seed) const {
    NormalStream z(seed);
    std::vector<double> g(n_);
    for (std::size_t i = 0; i < n_; ++i) g[i] = z.next();
    SamplePath p;
    p.t0 = 0.0;
    p.dt = dt_;
    p.values.assign(n_ + 1, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      const double* row = &chol_[i * (i + 1) / 2];
      double acc = 0.0;
      for (std::size_t j = 0; j <= i; ++j) acc += row[j] * g[j];
      p.values[i + 1] = acc;
    }
    return p;
  }

 private:
  void factor() {
    // Packed lower triangle of the covariance at times (i+1)*dt.
    chol_.resize(n_ * (n_ + 1) / 2);
    for (std::size_t i = 0; i < n_; ++i) {
      double ti = static_cast<double>(i + 1) * dt_;
      for (std::size_t j = 0; j <= i; ++j) {
        double tj = static_cast<double>(j + 1) * dt_;
        chol_[i * (i + 1) / 2 + j] = covariance(ti, tj, hurst_);
      }
    }
    for (std::size_t j = 0; j < n_; ++j) {
      double* colj = &chol_[j * (j + 1) / 2];
      double d = colj[j];
      for (std::size_t k = 0; k < j; ++k) d -= colj[k] * colj[k];
      require(d > 0.0, "fbm: covariance not positive definite on this grid");
      d = std::sqrt(d);
      colj[j] = d;
      for (std::size_t i = j + 1; i < n_; ++i) {
        double* rowi = &chol_[i * (i + 1) / 2];
        double acc = rowi[j];
        for (std::size_t k = 0; k < j; ++k) acc -= rowi[k] * colj[k];
        rowi[j] = acc / d;
      }
    }
  }

  double hurst_;
  std::size_t n_;
  double dt_;
  std::vector<double> chol_;
};

/// One fractional Brownian path; convenience wrapper over FbmCholesky.
inline SamplePath gen_fbm(SeedSpec seed, double hurst, double horizon, std::size_t n_steps) {
  return FbmCholesky(hurst, horizon, n_steps).sample(seed);
}

}  // namespace smdiag
