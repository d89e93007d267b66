#include "wdro/schedule.hpp"

#include <algorithm>
#include <numeric>

namespace wdro {

BatchSchedule::BatchSchedule(Index n, Index batch_size, std::uint64_t seed)
    : n_(n), m_(batch_size == 0 ? n : batch_size) {
  if (n_ < 1) throw ConfigError("batch schedule needs at least one sample");
  if (m_ < 1 || m_ > n_) throw ConfigError("batch size must lie in [1, n]");
  rng_ = CounterRng(seed, streams::kSchedule).state();
  cursor_ = n_;  // forces a permutation on the first call
}

std::vector<Index> BatchSchedule::next() {
  std::vector<Index> batch;
  if (full_batch()) {
    batch.resize(static_cast<std::size_t>(n_));
    std::iota(batch.begin(), batch.end(), Index{0});
    return batch;
  }
  if (cursor_ >= n_) {
    CounterRng rng = CounterRng::from_state(rng_);
    perm_ = random_permutation(n_, rng);
    rng_ = rng.state();
    cursor_ = 0;
  }
  const Index end = std::min(n_, cursor_ + m_);
  batch.assign(perm_.begin() + cursor_, perm_.begin() + end);
  cursor_ = end;
  std::sort(batch.begin(), batch.end());
  return batch;
}

nlohmann::json BatchSchedule::to_json() const {
  return {{"n", n_}, {"m", m_}, {"cursor", cursor_}, {"perm", perm_},
          {"rng_key", rng_.key}, {"rng_counter", rng_.counter}};
}

BatchSchedule BatchSchedule::from_json(const nlohmann::json& j) {
  BatchSchedule s;
  s.n_ = j.at("n").get<Index>();
  s.m_ = j.at("m").get<Index>();
  s.cursor_ = j.at("cursor").get<Index>();
  s.perm_ = j.at("perm").get<std::vector<std::int64_t>>();
  s.rng_.key = j.at("rng_key").get<std::uint64_t>();
  s.rng_.counter = j.at("rng_counter").get<std::uint64_t>();
  return s;
}

}  // namespace wdro
