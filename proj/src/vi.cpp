#include "varfa/vi.hpp"

#include "varfa/mle.hpp"
#include "varfa/optim.hpp"
#include "varfa/rng.hpp"

#include <cmath>

namespace varfa {

NoiseSet<double> draw_noise(const std::vector<Eigen::Index>& rows, Eigen::Index K, int samples, std::uint64_t seed,
                            int epoch, int batch) {
  if (samples < 1) throw ConfigError("mc_samples must be >= 1");
  NoiseSet<double> noise;
  noise.weight = Eigen::VectorXd::Constant(samples, 1.0 / samples);
  noise.eps.reserve(rows.size());
  for (const Eigen::Index i : rows) {
    CounterRng rng(seed, {0x401e, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(batch),
                          static_cast<std::uint64_t>(i)});
    Eigen::MatrixXd eps(K, samples);
    for (Eigen::Index k = 0; k < eps.size(); ++k) eps.data()[k] = rng.normal();
    noise.eps.push_back(std::move(eps));
  }
  return noise;
}

EncoderParamsd init_encoder(Eigen::Index Q, Eigen::Index H, Eigen::Index K, std::uint64_t seed) {
  EncoderParamsd enc(Q, H, K);
  CounterRng rng(seed, {0xe9c});
  auto fill = [&](auto& block, Eigen::Index fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index k = 0; k < block.size(); ++k) block.data()[k] = bound * (2.0 * rng.uniform() - 1.0);
  };
  fill(enc.W1, Q);
  fill(enc.b1, Q);
  fill(enc.W2, H);
  fill(enc.b2, H);
  fill(enc.W3, H);
  fill(enc.b3, H);
  return enc;
}

ViResult train_varfa(const ResponseDataset& d, const SplitMask& split, const ViConfig& cfg) {
  if (d.num_students() == 0 || d.num_questions() == 0) throw DataError("empty dataset");
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(cfg.lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (cfg.hyper.K < 1) throw ConfigError("K must be >= 1");
  if (cfg.hidden_width < 1) throw ConfigError("hidden width must be >= 1");
  if (cfg.mc_samples < 1) throw ConfigError("mc_samples must be >= 1");

  const ObservedEntries train(d.values, split.train);
  const Eigen::Index K = cfg.hyper.K;
  ViResult out;
  ViModel& model = out.model;
  model.encoding = cfg.encoding;
  {
    FactorSetd theta = init_factors(K, 0, d.num_questions(), cfg.seed);
    model.M = std::move(theta.M);
    model.mu = std::move(theta.mu);
  }
  model.encoder = init_encoder(d.num_questions(), cfg.hidden_width, K, cfg.seed);

  auto& enc = model.encoder;
  ParamList<double> params{param("W1", enc.W1), param("b1", enc.b1), param("W2", enc.W2), param("b2", enc.b2),
                           param("W3", enc.W3), param("b3", enc.b3), param("M", model.M),  param("mu", model.mu)};
  AdamState<double> adam;
  GradientBundle<double> grads;

  const double threshold = cfg.lr * cfg.hyper.lambda_l1_M;

  Stopwatch clock;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    const auto batches = student_batches(d.num_students(), cfg.batch_students, cfg.seed, epoch);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& rows = batches[b];
      const Eigen::MatrixXd x = train.impute(rows, cfg.encoding);
      const auto noise = draw_noise(rows, K, cfg.mc_samples, cfg.seed, epoch, static_cast<int>(b));
      auto eval = elbo_eval<double>(enc, model.M, model.mu, train, rows, x, noise, cfg.kl_weighting, true);
      const double loss = -eval.elbo + cfg.hyper.lambda_l2_mu * model.mu.squaredNorm() +
                          cfg.hyper.lambda_l1_M * model.M.sum();
      if (!std::isfinite(loss))
        throw NumericError("non-finite VarFA loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(b));
      epoch_loss += loss;
      auto& g = eval.loss_grad;
      g.mu += 2.0 * cfg.hyper.lambda_l2_mu * model.mu;
      grads.set("W1", g.enc.W1);
      grads.set("b1", g.enc.b1);
      grads.set("W2", g.enc.W2);
      grads.set("b2", g.enc.b2);
      grads.set("W3", g.enc.W3);
      grads.set("b3", g.enc.b3);
      grads.set("M", g.M);
      grads.set("mu", g.mu);
      adam_step(params, grads, adam, cfg.lr);
      apply_prox_nonneg_l1(model.M, threshold);
    }
    out.trace.epochs.push_back({epoch, epoch_loss, clock.seconds(), model.M.minCoeff()});
  }
  out.trace.wall_train_seconds = clock.seconds();
  return out;
}

GaussianPosteriord infer_posterior(const ViModel& model, const ResponseDataset& d, const SplitMask& split,
                                   Eigen::Index student) {
  return encode<double>(model.encoder, zero_impute(d, split, student, model.encoding));
}

std::vector<GaussianPosteriord> infer_all(const ViModel& model, const ResponseDataset& d, const SplitMask& split) {
  const ObservedEntries train(d.values, split.train);
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(d.num_students()));
  for (Eigen::Index i = 0; i < d.num_students(); ++i) rows[static_cast<std::size_t>(i)] = i;
  const auto pass = encode_batch<double>(model.encoder, train.impute(rows, model.encoding));
  const Eigen::Index K = model.encoder.K();
  std::vector<GaussianPosteriord> out;
  out.reserve(rows.size());
  for (Eigen::Index i = 0; i < d.num_students(); ++i)
    out.push_back({pass.out.col(i).head(K), pass.out.col(i).tail(K)});
  return out;
}

FactorSetd posterior_mean_factors(const ViModel& model, const ResponseDataset& d, const SplitMask& split) {
  FactorSetd f;
  f.M = model.M;
  f.mu = model.mu;
  const auto posteriors = infer_all(model, d, split);
  f.C.resize(model.M.rows(), d.num_students());
  for (Eigen::Index i = 0; i < d.num_students(); ++i) f.C.col(i) = posteriors[static_cast<std::size_t>(i)].u;
  return f;
}

PosteriorSamples sample_with_noise(const GaussianPosteriord& q, const Eigen::MatrixXd& eps) {
  PosteriorSamples out;
  const Eigen::VectorXd sd = q.stddev();
  out.samples = (eps.array().rowwise() * sd.transpose().array()).matrix();
  out.samples.rowwise() += q.u.transpose();
  out.mean = out.samples.colwise().mean().transpose();
  if (out.samples.rows() > 1) {
    const Eigen::MatrixXd centered = out.samples.rowwise() - out.mean.transpose();
    out.stddev = (centered.colwise().squaredNorm() / static_cast<double>(out.samples.rows() - 1)).cwiseSqrt().transpose();
  } else {
    out.stddev = Eigen::VectorXd::Zero(q.u.size());
  }
  return out;
}

PosteriorSamples sample_posterior(const ViModel& model, const ResponseDataset& d, const SplitMask& split,
                                  Eigen::Index student, int n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("sample count must be >= 1");
  const auto q = infer_posterior(model, d, split, student);
  CounterRng rng(seed, {0x5a3, static_cast<std::uint64_t>(student)});
  Eigen::MatrixXd eps(n, q.u.size());
  for (Eigen::Index r = 0; r < eps.rows(); ++r)
    for (Eigen::Index k = 0; k < eps.cols(); ++k) eps(r, k) = rng.normal();
  return sample_with_noise(q, eps);
}

}  // namespace varfa
