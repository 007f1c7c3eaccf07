#pragma once

#include <cstdint>
#include <random>

namespace twins {

/// Single seeded generator used by every stochastic step. Draw order is part of
/// the replay contract, so callers never share one instance across threads.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return unit_(engine_); }
  double normal(double mean, double sigma) {
    if (sigma <= 0.0) return mean;
    std::normal_distribution<double> dist(mean, sigma);
    return dist(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

/// SplitMix64 finalizer; derives independent stream seeds (per cell, per trial).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace twins
