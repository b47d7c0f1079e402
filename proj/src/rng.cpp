// SPDX-License-Identifier: Apache-2.0
#include "mcdn/rng.hpp"

#include <cmath>
#include <numbers>

namespace mcdn {

namespace {
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}
} // namespace

std::uint64_t Rng::next_u64() {
  return splitmix64(splitmix64(seed_) + 0x9E3779B97F4A7C15ULL * ++counter_);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0)
    u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n <= 1)
    return 0;
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = next_u64();
  while (x >= limit)
    x = next_u64();
  return x % n;
}

Rng Rng::fork(std::uint64_t stream) {
  return Rng(splitmix64(next_u64() ^ splitmix64(stream)));
}

} // namespace mcdn
