#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace radiomap {

/// Portable seeded generator. The engine is std::mt19937_64 (its output
/// sequence is fixed by the standard); the real-valued and integer
/// distributions are implemented here so streams are identical across
/// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream derived from (seed, stream) by SplitMix64 mixing.
  static Rng substream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on [lo, hi], inclusive.
  int uniform_int(int lo, int hi);
  /// Standard normal (Marsaglia polar method).
  double normal();

  /// k distinct values from [0, n), uniformly, in draw order.
  std::vector<int> sample_without_replacement(int n, int k);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace radiomap
