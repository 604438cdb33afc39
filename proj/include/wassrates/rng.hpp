#pragma once

#include <cstdint>
#include <vector>

namespace wassrates {

// SplitMix64 finalizer, used as the mixing function of the counter generator.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives the seed of replica `index` from a master seed. Streams for distinct
// indices are independent for all practical purposes, and the derivation is a
// pure function so parallel runs are reproducible.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(master ^ mix64(0x5851f42d4c957f2dULL + index));
}

// Counter-based generator: draw i of stream s is mix64(s ^ mix64(i)). State is
// just (seed, counter), so a trajectory regenerates bit-exactly from its seed.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64() { return mix64(seed_ ^ mix64(counter_++)); }

  // Uniform on the open interval (0,1).
  double next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double next_normal();
  // Marsaglia-Tsang; consumes a variable number of draws from the stream.
  double next_gamma(double shape);
  double next_beta(double a, double b);
  std::vector<double> next_dirichlet(const std::vector<double>& alpha);
  // Index in [0, cdf.size()) by inversion of a cumulative weight table.
  std::size_t next_index(const std::vector<double>& cdf);

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

// Standard normal quantile (Wichura's algorithm), accurate to ~1e-15.
double normal_quantile(double p);
// Standard normal CDF.
double normal_cdf(double x);

}  // namespace wassrates
