#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Core>

namespace typeflow {

/// Counter-based random generator (Philox 4x64-10). A generator is fully
/// determined by (seed, stream); replicates get independent streams by
/// varying the stream word, with no coordination between threads.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_{seed, stream}, counter_{0, 0, 0, 0}, pos_(4) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<std::uint64_t>::max();
  }

  result_type operator()() {
    if (pos_ == 4) {
      block_ = philox_block();
      advance_counter();
      pos_ = 0;
    }
    return block_[pos_++];
  }

  /// Uniform double in [0, 1), 53 random bits.
  double uniform01() { return double((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  /// Standard normal via Box-Muller (stateless; two uniforms per draw).
  double normal() {
    double u1 = 1.0 - uniform01();  // (0, 1]
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double exponential(double rate) {
    return -std::log1p(-uniform01()) / rate;
  }

  /// Binomial(n, p). Inverse-CDF search for small n*p, transformed
  /// rejection (BTRS) otherwise. The algorithm is pinned so that a given
  /// (seed, stream) reproduces bit-identical draws on any platform.
  long long binomial(long long n, double p);

  /// Multinomial(n, probs) by sequential conditional binomials.
  Eigen::Matrix<long long, Eigen::Dynamic, 1> multinomial(
      long long n, const Eigen::VectorXd& probs);

  /// Gamma(shape, 1) by Marsaglia-Tsang.
  double gamma(double shape);

  Eigen::VectorXd dirichlet(const Eigen::VectorXd& alpha);

  /// Index drawn from a discrete law given as nonnegative weights.
  int discrete(const Eigen::VectorXd& weights);

 private:
  std::array<std::uint64_t, 2> key_;
  std::array<std::uint64_t, 4> counter_;
  std::array<std::uint64_t, 4> block_{};
  int pos_;

  static void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi,
                      std::uint64_t& lo) {
    unsigned __int128 prod = (unsigned __int128)a * b;
    hi = std::uint64_t(prod >> 64);
    lo = std::uint64_t(prod);
  }

  std::array<std::uint64_t, 4> philox_block() const {
    constexpr std::uint64_t M0 = 0xD2E7470EE14C6C93ULL;
    constexpr std::uint64_t M1 = 0xCA5A826395121157ULL;
    constexpr std::uint64_t W0 = 0x9E3779B97F4A7C15ULL;
    constexpr std::uint64_t W1 = 0xBB67AE8584CAA73BULL;
    auto ctr = counter_;
    auto key = key_;
    for (int round = 0; round < 10; ++round) {
      std::uint64_t hi0, lo0, hi1, lo1;
      mulhilo(M0, ctr[0], hi0, lo0);
      mulhilo(M1, ctr[2], hi1, lo1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
      key[0] += W0;
      key[1] += W1;
    }
    return ctr;
  }

  void advance_counter() {
    for (auto& c : counter_)
      if (++c != 0) break;
  }
};

/// Deterministic 64-bit mix for deriving stream ids from components.
inline std::uint64_t mix_stream(std::uint64_t a, std::uint64_t b = 0,
                                std::uint64_t c = 0) {
  auto split = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  return split(split(split(a) ^ b) ^ c);
}

}  // namespace typeflow
