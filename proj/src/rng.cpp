#include "arvrm/rng.hpp"

#include <cmath>

#include "arvrm/errors.hpp"

namespace arvrm {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

Rng::Rng(std::uint64_t seed) {
  origin_ = seed;
  std::uint64_t sm = seed;
  for (auto& word : state_) word = splitmix64(sm);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform01();
}

double Rng::normal(double mean, double stddev) {
  if (has_spare_) {
    has_spare_ = false;
    return mean + spare_ * stddev;
  }
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  const double angle = uniform01() * kTwoPi;
  const double u = 1.0 - uniform01();  // (0, 1], keeps log finite
  const double radius = std::sqrt(-2.0 * std::log(u));
  spare_ = std::sin(angle) * radius;
  has_spare_ = true;
  return mean + std::cos(angle) * radius * stddev;
}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw InputError("Rng::below: bound must be positive");
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return r % bound;
  }
}

Rng Rng::fork(std::uint64_t stream) const {
  std::uint64_t sm = origin_ ^ (0x6a09e667f3bcc909ull + stream * 0x3c6ef372fe94f82bull);
  Rng child;
  child.origin_ = splitmix64(sm);
  std::uint64_t sm2 = child.origin_;
  for (auto& word : child.state_) word = splitmix64(sm2);
  return child;
}

std::uint64_t fnv1a(std::string_view text) {
  return fnv1a_bytes(text.data(), text.size());
}

std::uint64_t fnv1a_bytes(const void* data, std::size_t size, std::uint64_t basis) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t hash = basis;
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 1099511628211ull;
  }
  return hash;
}

}  // namespace arvrm
