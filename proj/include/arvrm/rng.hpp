#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace arvrm {

/// Deterministic PRNG (xoshiro256++ seeded through splitmix64).
///
/// The standard <random> engines are portable but the distributions are not;
/// every draw here is specified bit-for-bit so that artifacts are reproducible
/// from (seed, config) alone.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01();

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi);

  /// Gaussian via Box-Muller (cos branch first, spare cached).
  double normal(double mean = 0.0, double stddev = 1.0);

  /// Uniform integer in [0, bound) by rejection; bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  /// Fisher-Yates shuffle using below().
  template <class T>
  void shuffle(std::vector<T>& values) {
    if (values.size() < 2) return;
    for (std::size_t i = values.size() - 1; i > 0; --i) {
      const std::uint64_t j = below(i + 1);
      std::swap(values[i], values[j]);
    }
  }

  /// Derives an independent stream; fork(k) is stable under interleaving of
  /// draws on the parent.
  Rng fork(std::uint64_t stream) const;

 private:
  Rng() = default;
  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
  std::uint64_t origin_ = 0;  // seed material, used by fork()
};

/// FNV-1a 64-bit hash.
std::uint64_t fnv1a(std::string_view text);
std::uint64_t fnv1a_bytes(const void* data, std::size_t size,
                          std::uint64_t basis = 14695981039346656037ull);

}  // namespace arvrm
