#pragma once

#include <cmath>
#include <cstdint>

namespace modered {

// Deterministic, platform-independent random streams (xoshiro256** seeded
// through splitmix64).  The standard library distributions are avoided on
// purpose: their algorithms are implementation-defined, and reproducibility
// of seeded runs is part of the contract here.
//
// Per-trajectory streams come from derive(master_seed, index): every sampled
// trajectory draws from its own stream, so ensembles are schedule-independent
// no matter how the samples are distributed over threads.
class RngStream {
 public:
  RngStream() : RngStream(0x853c49e6748fea9bULL) {}

  explicit RngStream(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& word : state_) word = splitmix64(x);
    spare_valid_ = false;
  }

  static RngStream derive(std::uint64_t master_seed, std::uint64_t index) {
    // Golden-ratio spacing decorrelates consecutive indices before the
    // splitmix chain expands the 64-bit value into full state.
    return RngStream(master_seed ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on (0, 1]; the open lower end keeps log() finite in Box-Muller.
  double uniform01() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller, one spare cached per pair.
  double gaussian() {
    if (spare_valid_) {
      spare_valid_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    spare_valid_ = true;
    return r * std::cos(a);
  }

  double gaussian(double mean, double stddev) {
    return mean + stddev * gaussian();
  }

 private:
  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
  double spare_ = 0.0;
  bool spare_valid_ = false;
};

}  // namespace modered
