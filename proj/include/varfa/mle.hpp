#pragma once

#include "varfa/data.hpp"
#include "varfa/model.hpp"
#include "varfa/training.hpp"

#include <cstdint>
#include <vector>

namespace varfa {

struct MleConfig {
  ModelHyper hyper;
  double lr = 0.05;
  int epochs = 100;
  int batch_students = 32;
  std::uint64_t seed = 0;
};

struct MleResult {
  FactorSetd factors;
  TrainTrace trace;
};

/// -loglik over `mask` plus the full regularizer, l1 term included.
double mle_objective(const FactorSetd& factors, const ResponseDataset& dataset, const Mask& mask,
                     const ModelHyper& hyper);

/// Gradient of the smooth part (everything except the l1 term on M).
FactorSetd mle_smooth_gradient(const FactorSetd& factors, const ObservedEntries& observed, const ModelHyper& hyper);

/// C, mu ~ N(0, 0.1^2) and M = |N(0, 0.1^2)|, keyed by seed.
FactorSetd init_factors(Eigen::Index K, Eigen::Index N, Eigen::Index Q, std::uint64_t seed);

/// Joint proximal Adam over (C, M, mu) in student mini-batches.
MleResult train_mle(const ResponseDataset& dataset, const SplitMask& split, const MleConfig& config);

struct ScoredEntry {
  Eigen::Index student = 0;
  Eigen::Index question = 0;
  double prob = 0.0;
  double label = 0.0;
};

/// Predicted probabilities for every entry of `mask`, row-major.
std::vector<ScoredEntry> predict_entries(const FactorSetd& factors, const ResponseDataset& dataset, const Mask& mask);

inline std::vector<ScoredEntry> predict_missing(const FactorSetd& factors, const ResponseDataset& dataset,
                                                const Mask& test_mask) {
  return predict_entries(factors, dataset, test_mask);
}

}  // namespace varfa
