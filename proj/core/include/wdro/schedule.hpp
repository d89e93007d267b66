#pragma once

#include "wdro/core.hpp"
#include "wdro/rng.hpp"

#include <nlohmann/json.hpp>

#include <vector>

namespace wdro {

/// Cyclic batch scheduler. Each epoch is a fresh random permutation of [n]
/// cut into consecutive batches, so batches partition [n] before any index
/// repeats; when m does not divide n the last batch of an epoch is short.
/// With m == n every batch is [0, n) in order and no randomness is drawn.
class BatchSchedule {
 public:
  BatchSchedule() = default;
  BatchSchedule(Index n, Index batch_size, std::uint64_t seed);

  /// Indices of the next batch, sorted ascending.
  std::vector<Index> next();

  Index n() const { return n_; }
  Index batch_size() const { return m_; }
  bool full_batch() const { return m_ == n_; }
  Index cursor() const { return cursor_; }

  nlohmann::json to_json() const;
  static BatchSchedule from_json(const nlohmann::json& j);

  bool operator==(const BatchSchedule&) const = default;

 private:
  Index n_ = 0;
  Index m_ = 0;
  Index cursor_ = 0;
  std::vector<std::int64_t> perm_;
  CounterRng::State rng_{};
};

}  // namespace wdro
