#include "varfa/synth.hpp"

#include "varfa/error.hpp"
#include "varfa/rng.hpp"

#include <cstdio>
#include <numeric>

namespace varfa {

SynthInstance generate(const SynthSpec& spec) {
  if (spec.N < 1 || spec.Q < 1 || spec.K < 1) throw ConfigError("synthetic sizes must be positive");
  if (!(spec.pi > 0.0 && spec.pi <= 1.0)) throw ConfigError("pi must lie in (0,1]");

  SynthInstance inst;
  FactorSetd& f = inst.truth;
  f = FactorSetd(spec.K, spec.N, spec.Q);

  CounterRng means(spec.seed, {0x3ea5});
  const double c_mean = 2.0 * means.uniform() - 1.0;
  const double mu_mean = 2.0 * means.uniform() - 1.0;

  CounterRng ability(spec.seed, {0xc});
  for (Eigen::Index k = 0; k < f.C.size(); ++k) {
    const double m = spec.per_coordinate_means ? 2.0 * ability.uniform() - 1.0 : c_mean;
    f.C.data()[k] = m + ability.normal();
  }
  CounterRng difficulty(spec.seed, {0x3});
  for (Eigen::Index j = 0; j < spec.Q; ++j) {
    const double m = spec.per_coordinate_means ? 2.0 * difficulty.uniform() - 1.0 : mu_mean;
    f.mu[j] = m + difficulty.normal();
  }
  CounterRng loading(spec.seed, {0x4});
  for (Eigen::Index j = 0; j < spec.Q; ++j)
    for (Eigen::Index k = 0; k < spec.K; ++k) {
      const bool active = loading.bernoulli(spec.pi);
      const double magnitude = loading.exponential();
      f.M(k, j) = active ? magnitude : 0.0;
    }

  inst.full_probs.resize(spec.N, spec.Q);
  inst.full_values.resize(spec.N, spec.Q);
  CounterRng answers(spec.seed, {0xa});
  for (Eigen::Index i = 0; i < spec.N; ++i)
    for (Eigen::Index j = 0; j < spec.Q; ++j) {
      const double p = predict_prob(f, i, j);
      inst.full_probs(i, j) = p;
      inst.full_values(i, j) = answers.uniform() < p ? 1.0 : 0.0;
    }
  return inst;
}

namespace {
std::vector<std::string> make_ids(char prefix, Eigen::Index n) {
  std::vector<std::string> ids;
  ids.reserve(static_cast<std::size_t>(n));
  char buf[32];
  for (Eigen::Index k = 0; k < n; ++k) {
    std::snprintf(buf, sizeof buf, "%c%04lld", prefix, static_cast<long long>(k));
    ids.emplace_back(buf);
  }
  return ids;
}
}  // namespace

ResponseDataset to_dataset(const SynthInstance& inst) {
  ResponseDataset d;
  d.values = inst.full_values;
  d.mask = Mask::Constant(d.values.rows(), d.values.cols(), true);
  d.students = IdIndex(make_ids('s', d.values.rows()));
  d.questions = IdIndex(make_ids('q', d.values.cols()));
  return d;
}

ResponseDataset to_dataset_with_counts(const SynthInstance& inst, Eigen::Index min_count, Eigen::Index max_count,
                                       std::uint64_t seed) {
  const Eigen::Index Q = inst.full_values.cols();
  if (min_count < 1 || max_count > Q || min_count > max_count) throw ConfigError("invalid observation count range");
  ResponseDataset d = to_dataset(inst);
  d.mask.setConstant(false);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(Q));
  for (Eigen::Index i = 0; i < d.num_students(); ++i) {
    CounterRng rng(seed, {0x0b5, static_cast<std::uint64_t>(i)});
    const Eigen::Index n = min_count + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(max_count - min_count + 1)));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    for (Eigen::Index k = 0; k < n; ++k)
      std::swap(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k) + rng.below(static_cast<std::uint64_t>(Q - k))]);
    for (Eigen::Index k = 0; k < n; ++k) d.mask(i, order[static_cast<std::size_t>(k)]) = true;
  }
  d.values = d.mask.select(d.values, 0.0);
  return d;
}

}  // namespace varfa
