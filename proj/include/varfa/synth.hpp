#pragma once

#include "varfa/data.hpp"
#include "varfa/model.hpp"

#include <cstdint>

namespace varfa {

struct SynthSpec {
  Eigen::Index N = 300;
  Eigen::Index Q = 50;
  Eigen::Index K = 5;
  double pi = 0.3;  // probability that a loading is nonzero
  std::uint64_t seed = 0;
  // false: one U[-1,1] mean per factor family; true: one per coordinate.
  bool per_coordinate_means = false;
};

struct SynthInstance {
  FactorSetd truth;
  Eigen::MatrixXd full_values;  // N x Q, binary
  Eigen::MatrixXd full_probs;   // N x Q
};

/// Draws a ground-truth SPARFA instance: s_kj ~ Bernoulli(pi), m_kj ~ Exp(1) where
/// s_kj = 1, abilities and difficulties unit-variance Gaussian around uniform means.
SynthInstance generate(const SynthSpec& spec);

/// Fully observed dataset with ids s0000.. and q0000..
ResponseDataset to_dataset(const SynthInstance& instance);

/// Dataset where student i observes n_i questions, n_i uniform on [min_count, max_count].
ResponseDataset to_dataset_with_counts(const SynthInstance& instance, Eigen::Index min_count, Eigen::Index max_count,
                                       std::uint64_t seed);

}  // namespace varfa
