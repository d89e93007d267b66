#include "wdro/rng.hpp"

#include <cmath>
#include <numbers>
#include <utility>

namespace wdro {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(splitmix64(seed ^ splitmix64(stream + 0x632BE59BD9B4E019ULL))) {}

CounterRng CounterRng::from_state(State s) {
  CounterRng r;
  r.key_ = s.key;
  r.counter_ = s.counter;
  return r;
}

std::uint64_t CounterRng::next_u64() {
  // Two rounds so that nearby keys and counters decorrelate.
  const std::uint64_t c = counter_++;
  return splitmix64(splitmix64(key_ + c * 0xD1B54A32D192ED03ULL) ^ key_);
}

double CounterRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t CounterRng::below(std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
  std::uint64_t r = next_u64();
  while (r >= limit) r = next_u64();
  return r % n;
}

CounterRng CounterRng::split(std::uint64_t stream) const {
  CounterRng child;
  child.key_ = splitmix64(key_ ^ splitmix64(stream + 0x2545F4914F6CDD1DULL));
  return child;
}

std::vector<std::int64_t> random_permutation(std::int64_t n, CounterRng& rng) {
  std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  for (std::int64_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(i + 1)));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  return perm;
}

}  // namespace wdro
