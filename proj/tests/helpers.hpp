#pragma once

#include "varfa/data.hpp"
#include "varfa/rng.hpp"

#include <filesystem>
#include <string>

namespace testing {

/// N x Q dataset where each entry is observed with probability `density`.
inline varfa::ResponseDataset random_dataset(Eigen::Index N, Eigen::Index Q, double density, std::uint64_t seed) {
  varfa::ResponseDataset d;
  d.values = Eigen::MatrixXd::Zero(N, Q);
  d.mask = varfa::Mask::Constant(N, Q, false);
  varfa::CounterRng rng(seed, {77});
  for (Eigen::Index i = 0; i < N; ++i)
    for (Eigen::Index j = 0; j < Q; ++j)
      if (rng.bernoulli(density)) {
        d.mask(i, j) = true;
        d.values(i, j) = rng.bernoulli(0.6) ? 1.0 : 0.0;
      }
  std::vector<std::string> s, q;
  char buf[32];
  for (Eigen::Index i = 0; i < N; ++i) {
    std::snprintf(buf, sizeof buf, "s%04ld", static_cast<long>(i));
    s.emplace_back(buf);
  }
  for (Eigen::Index j = 0; j < Q; ++j) {
    std::snprintf(buf, sizeof buf, "q%04ld", static_cast<long>(j));
    q.emplace_back(buf);
  }
  d.students = varfa::IdIndex(s);
  d.questions = varfa::IdIndex(q);
  return d;
}

inline std::filesystem::path temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "varfa_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace testing
