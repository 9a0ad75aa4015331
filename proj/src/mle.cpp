#include "varfa/mle.hpp"

#include "varfa/error.hpp"
#include "varfa/optim.hpp"

#include <cmath>

namespace varfa {

double mle_objective(const FactorSetd& f, const ResponseDataset& d, const Mask& mask, const ModelHyper& hyper) {
  return -masked_loglik(f, d, mask).value + regularizer(f, hyper, true);
}

FactorSetd mle_smooth_gradient(const FactorSetd& f, const ObservedEntries& observed, const ModelHyper& hyper) {
  FactorSetd g = masked_loglik_gradient(f, observed);
  g.C = -g.C + 2.0 * hyper.lambda_l2_C * f.C;
  g.M = -g.M;
  g.mu = -g.mu + 2.0 * hyper.lambda_l2_mu * f.mu;
  return g;
}

FactorSetd init_factors(Eigen::Index K, Eigen::Index N, Eigen::Index Q, std::uint64_t seed) {
  FactorSetd f(K, N, Q);
  CounterRng rng(seed, {0x1417});
  // theta first so VarFA (which has no C) starts from the same {M, mu}.
  for (Eigen::Index k = 0; k < f.M.size(); ++k) f.M.data()[k] = std::abs(0.1 * rng.normal());
  for (Eigen::Index k = 0; k < f.mu.size(); ++k) f.mu[k] = 0.1 * rng.normal();
  for (Eigen::Index k = 0; k < f.C.size(); ++k) f.C.data()[k] = 0.1 * rng.normal();
  return f;
}

MleResult train_mle(const ResponseDataset& d, const SplitMask& split, const MleConfig& cfg) {
  if (d.num_students() == 0 || d.num_questions() == 0) throw DataError("empty dataset");
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(cfg.lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (cfg.hyper.K < 1) throw ConfigError("K must be >= 1");

  const ObservedEntries train(d.values, split.train);
  MleResult out;
  FactorSetd& f = out.factors;
  f = init_factors(cfg.hyper.K, d.num_students(), d.num_questions(), cfg.seed);

  AdamState<double> adam;
  ParamList<double> params{param("C", f.C), param("M", f.M), param("mu", f.mu)};
  GradientBundle<double> grads;
  MatrixX<double> gC(f.C.rows(), f.C.cols());
  MatrixX<double> gM(f.M.rows(), f.M.cols());
  VectorX<double> gmu(f.mu.size());

  const double threshold = cfg.lr * cfg.hyper.lambda_l1_M;

  Stopwatch clock;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    const auto batches = student_batches(d.num_students(), cfg.batch_students, cfg.seed, epoch);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      gC.setZero();
      gM.setZero();
      gmu = 2.0 * cfg.hyper.lambda_l2_mu * f.mu;
      double loss = cfg.hyper.lambda_l2_mu * f.mu.squaredNorm() + cfg.hyper.lambda_l1_M * f.M.sum();
      for (const Eigen::Index i : batches[b]) {
        const auto c = f.C.col(i);
        for (Eigen::Index e = train.row_start[i]; e < train.row_start[i + 1]; ++e) {
          const Eigen::Index j = train.column[e];
          const double z = c.dot(f.M.col(j)) + f.mu[j];
          const double y = train.value[e];
          loss -= bernoulli_loglik(y, z);
          const double r = sigmoid(z) - y;  // d(-loglik)/dz
          gC.col(i).noalias() += r * f.M.col(j);
          gM.col(j).noalias() += r * c;
          gmu[j] += r;
        }
        gC.col(i).noalias() += 2.0 * cfg.hyper.lambda_l2_C * c;
        loss += cfg.hyper.lambda_l2_C * c.squaredNorm();
      }
      if (!std::isfinite(loss))
        throw NumericError("non-finite MLE loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(b));
      epoch_loss += loss;
      grads.set("C", gC);
      grads.set("M", gM);
      grads.set("mu", gmu);
      adam_step(params, grads, adam, cfg.lr);
      apply_prox_nonneg_l1(f.M, threshold);
    }
    out.trace.epochs.push_back({epoch, epoch_loss, clock.seconds(), f.M.minCoeff()});
  }
  out.trace.wall_train_seconds = clock.seconds();
  return out;
}

std::vector<ScoredEntry> predict_entries(const FactorSetd& f, const ResponseDataset& d, const Mask& mask) {
  std::vector<ScoredEntry> out;
  out.reserve(static_cast<std::size_t>(mask.count()));
  for (Eigen::Index i = 0; i < mask.rows(); ++i)
    for (Eigen::Index j = 0; j < mask.cols(); ++j)
      if (mask(i, j)) out.push_back({i, j, predict_prob(f, i, j), d.values(i, j)});
  return out;
}

}  // namespace varfa
