#pragma once

#include <cstdint>
#include <vector>

namespace wdro {

/// Counter-based 64-bit generator: the n-th draw is a pure function of
/// (key, n), so a stream is fully described by two integers and split
/// streams are independent of scheduling order.
class CounterRng {
 public:
  struct State {
    std::uint64_t key = 0;
    std::uint64_t counter = 0;
    bool operator==(const State&) const = default;
  };

  explicit CounterRng(std::uint64_t seed = 0, std::uint64_t stream = 0);
  static CounterRng from_state(State s);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller; consumes exactly two draws.
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  /// Independent child stream.
  CounterRng split(std::uint64_t stream) const;

  State state() const { return {key_, counter_}; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Fisher-Yates permutation of [0, n).
std::vector<std::int64_t> random_permutation(std::int64_t n, CounterRng& rng);

/// Named stream ids so components never share draws.
namespace streams {
inline constexpr std::uint64_t kData = 1;
inline constexpr std::uint64_t kTheta = 2;
inline constexpr std::uint64_t kSchedule = 3;
inline constexpr std::uint64_t kTransportNet = 4;
inline constexpr std::uint64_t kClassifier = 5;
inline constexpr std::uint64_t kProbe = 6;
}  // namespace streams

}  // namespace wdro
