#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "smdiag/common.hpp"

namespace smdiag {

/// Identifies one reproducible noise stream.
///
/// Streams with the same master_seed and different stream_index values are
/// statistically independent; parallel replicates take one stream each, so
/// results do not depend on scheduling.
struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_index = 0;
};

/// Philox 4x32-10 counter-based generator.
///
/// The key is the master seed, the high counter words are the stream index,
/// and the low words enumerate blocks. Output is a platform-independent
/// function of (seed, stream, position).
class Philox {
 public:
  explicit Philox(SeedSpec s)
      : key_{static_cast<std::uint32_t>(s.master_seed),
             static_cast<std::uint32_t>(s.master_seed >> 32)},
        ctr_{0, 0, static_cast<std::uint32_t>(s.stream_index),
             static_cast<std::uint32_t>(s.stream_index >> 32)} {}

  std::array<std::uint32_t, 4> next_block() {
    std::array<std::uint32_t, 4> c = ctr_;
    std::array<std::uint32_t, 2> k = key_;
    for (int round = 0; round < 10; ++round) {
      c = bumped(c, k);
      k[0] += kWeyl0;
      k[1] += kWeyl1;
    }
    if (++ctr_[0] == 0) ++ctr_[1];
    return c;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static std::array<std::uint32_t, 4> bumped(std::array<std::uint32_t, 4> c,
                                             std::array<std::uint32_t, 2> k) {
    std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0],
            static_cast<std::uint32_t>(p1),
            static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1],
            static_cast<std::uint32_t>(p0)};
  }

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> ctr_;
};

/// Standard normal stream over a Philox block sequence (Box-Muller pairs).
class NormalStream {
 public:
  explicit NormalStream(SeedSpec s) : gen_(s) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    auto b = gen_.next_block();
    double u1 = to_unit(b[0], b[1]);
    double u2 = to_unit(b[2], b[3]);
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * kPi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  /// Uniform draw on (0,1); consumes one block like a normal pair would not.
  double next_uniform() {
    auto b = gen_.next_block();
    return to_unit(b[0], b[1]);
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;

  static double to_unit(std::uint32_t hi, std::uint32_t lo) {
    std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
    double u = static_cast<double>(bits >> 11) * 0x1.0p-53;
    return u > 0.0 ? u : 0x1.0p-53;
  }

  Philox gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace smdiag
