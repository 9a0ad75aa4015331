#pragma once

#include "varfa/rng.hpp"

#include <Eigen/Core>

#include <chrono>
#include <cstdint>
#include <vector>

namespace varfa {

/// Monotone wall clock.
class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

struct EpochStat {
  int epoch = 0;
  double train_loss = 0.0;   // sum of mini-batch objectives over the epoch
  double wall_seconds = 0.0; // cumulative training time at the end of the epoch
  double min_M = 0.0;
};

struct TrainTrace {
  std::vector<EpochStat> epochs;
  double wall_train_seconds = 0.0;
};

/// Student mini-batches for one epoch: a seeded permutation cut into chunks.
inline std::vector<std::vector<Eigen::Index>> student_batches(Eigen::Index n, int batch_size, std::uint64_t seed,
                                                              int epoch) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  CounterRng rng(seed, {0xba7c, static_cast<std::uint64_t>(epoch)});
  for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[rng.below(k)]);
  std::vector<std::vector<Eigen::Index>> batches;
  const auto size = static_cast<std::size_t>(batch_size > 0 ? batch_size : n);
  for (std::size_t start = 0; start < order.size(); start += size)
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + size)));
  return batches;
}

}  // namespace varfa
