#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "varfa/mle.hpp"
#include "varfa/optim.hpp"
#include "varfa/synth.hpp"
#include "varfa/vi.hpp"

#include <cmath>

using namespace varfa;
using doctest::Approx;

namespace {

GaussianPosteriord posterior(std::initializer_list<double> u, std::initializer_list<double> logvar) {
  GaussianPosteriord q;
  q.u = Eigen::Map<const Eigen::VectorXd>(u.begin(), static_cast<Eigen::Index>(u.size()));
  q.logvar = Eigen::Map<const Eigen::VectorXd>(logvar.begin(), static_cast<Eigen::Index>(logvar.size()));
  return q;
}

std::vector<Eigen::Index> all_rows(Eigen::Index n) {
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = i;
  return rows;
}

}  // namespace

TEST_CASE("zero weights emit the output bias for any input") {
  EncoderParamsd enc(6, 4, 2);
  enc.b3 << 0.3, -1.0, 0.5, -2.0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto d = testing::random_dataset(1, 6, 0.8, seed);
    const auto q = encode<double>(enc, d.values.row(0).transpose());
    CHECK(q.u == Eigen::Vector2d(0.3, -1.0));
    CHECK(q.logvar == Eigen::Vector2d(0.5, -2.0));
  }
}

TEST_CASE("encoder rejects wrong input length and non-finite output") {
  EncoderParamsd enc(3, 2, 1);
  CHECK_THROWS_AS(encode<double>(enc, Eigen::VectorXd::Zero(4)), DataError);
  enc.b3[0] = std::nan("");
  CHECK_THROWS_AS(encode<double>(enc, Eigen::VectorXd::Zero(3)), NumericError);
}

TEST_CASE("KL closed form examples") {
  CHECK(kl_std_normal(posterior({0.0, 0.0}, {0.0, 0.0})) == 0.0);
  CHECK(kl_std_normal(posterior({1.0}, {0.0})) == Approx(0.5));
  CHECK(kl_std_normal(posterior({0.0}, {1.0})) == Approx(0.359141).epsilon(1e-6));
}

TEST_CASE("KL agrees with a Monte Carlo estimate") {
  const auto q = posterior({0.0}, {1.0});
  CounterRng rng(5);
  const double sd = std::exp(0.5);
  double total = 0.0;
  const int n = 1000000;
  for (int s = 0; s < n; ++s) {
    const double x = sd * rng.normal();
    // log q(x) - log p(x)
    total += -std::log(sd) - 0.5 * (x / sd) * (x / sd) + 0.5 * x * x;
  }
  CHECK(std::abs(total / n - 0.5 * (std::exp(1.0) - 2.0)) < 1e-2);
}

TEST_CASE("KL is nonnegative and vanishes only at the prior") {
  CounterRng rng(6);
  for (int t = 0; t < 200; ++t) {
    const auto q = posterior({rng.normal(), rng.normal()}, {rng.normal(), rng.normal()});
    CHECK(kl_std_normal(q) > 0.0);
  }
}

TEST_CASE("reparameterization examples") {
  const auto q = posterior({0.4, -1.0}, {0.3, -0.7});
  CHECK(reparameterize<double>(q, Eigen::VectorXd::Zero(2)) == q.u);
  const Eigen::Vector2d e(1.3, -0.2);
  CHECK(reparameterize<double>(posterior({0.0, 0.0}, {0.0, 0.0}), e) == e);
  const Eigen::VectorXd nu = reparameterize<double>(q, e);
  CHECK(nu[0] == Approx(0.4 + std::exp(0.15) * 1.3));
}

TEST_CASE("ELBO of a prior-emitting encoder with a flat decoder") {
  ResponseDataset d = testing::random_dataset(1, 3, 0.0, 0);
  d.mask(0, 1) = true;
  d.values(0, 1) = 1.0;
  const ObservedEntries obs(d.values, d.mask);
  const EncoderParamsd enc(3, 4, 2);
  const Eigen::MatrixXd M = Eigen::MatrixXd::Zero(2, 3);
  const Eigen::VectorXd mu = Eigen::VectorXd::Zero(3);
  const auto noise = draw_noise({0}, 2, 1, 0, 0, 0);
  for (auto w : {KlWeighting::per_entry, KlWeighting::per_student}) {
    const auto e = elbo_eval<double>(enc, M, mu, obs, {0}, obs.impute({0}, InputEncoding::zero_one), noise, w, false);
    CHECK(e.elbo == Approx(-0.693147).epsilon(1e-6));
  }
}

TEST_CASE("per-entry weighting counts the KL once per observed entry") {
  const auto d = testing::random_dataset(3, 8, 0.6, 2);
  const ObservedEntries obs(d.values, d.mask);
  EncoderParamsd enc = init_encoder(8, 5, 2, 1);
  enc.b3.tail(2).setConstant(0.4);
  const Eigen::MatrixXd M = Eigen::MatrixXd::Constant(2, 8, 0.3);
  const Eigen::VectorXd mu = Eigen::VectorXd::Zero(8);
  const auto rows = all_rows(3);
  const Eigen::MatrixXd x = obs.impute(rows, InputEncoding::zero_one);
  const auto noise = draw_noise(rows, 2, 2, 1, 0, 0);
  const double entry = elbo_eval<double>(enc, M, mu, obs, rows, x, noise, KlWeighting::per_entry, false).elbo;
  const double student = elbo_eval<double>(enc, M, mu, obs, rows, x, noise, KlWeighting::per_student, false).elbo;
  const auto pass = encode_batch<double>(enc, x);
  double extra = 0.0;
  for (Eigen::Index i = 0; i < 3; ++i) {
    const GaussianPosteriord q{pass.out.col(i).head(2), pass.out.col(i).tail(2)};
    extra += static_cast<double>(obs.count(i) - 1) * kl_std_normal(q);
  }
  CHECK(student - entry == Approx(extra).epsilon(1e-12));
}

TEST_CASE("ELBO gradient matches central differences under frozen noise") {
  const auto d = testing::random_dataset(20, 10, 0.6, 3);
  const SplitMask s{d.mask, Mask::Constant(20, 10, false)};
  const ObservedEntries obs(d.values, s.train);
  const auto rows = all_rows(20);
  for (auto w : {KlWeighting::per_entry, KlWeighting::per_student})
    for (auto encoding : {InputEncoding::zero_one, InputEncoding::signed_pm1}) {
      EncoderParamsd enc = init_encoder(10, 8, 3, 4);
      Eigen::MatrixXd M = init_factors(3, 0, 10, 4).M.array() + 0.2;
      Eigen::VectorXd mu = init_factors(3, 0, 10, 5).mu;
      const Eigen::MatrixXd x = obs.impute(rows, encoding);
      const auto noise = draw_noise(rows, 3, 2, 9, 0, 0);
      auto g = elbo_eval<double>(enc, M, mu, obs, rows, x, noise, w, true).loss_grad;
      GradientBundle<double> analytic;
      analytic.set("W1", g.enc.W1);
      analytic.set("b1", g.enc.b1);
      analytic.set("W2", g.enc.W2);
      analytic.set("b2", g.enc.b2);
      analytic.set("W3", g.enc.W3);
      analytic.set("b3", g.enc.b3);
      analytic.set("M", g.M);
      analytic.set("mu", g.mu);
      ParamList<double> params{param("W1", enc.W1), param("b1", enc.b1), param("W2", enc.W2), param("b2", enc.b2),
                               param("W3", enc.W3), param("b3", enc.b3), param("M", M),         param("mu", mu)};
      auto objective = [&] { return -elbo_eval<double>(enc, M, mu, obs, rows, x, noise, w, false).elbo; };
      const auto report = finite_diff_check<double>(objective, params, analytic, 1e-5, 400, 7);
      CHECK(report.checked == 80 + 8 + 64 + 8 + 48 + 6 + 30 + 10);
      CHECK(report.max_rel_error < 1e-4);
    }
}

TEST_CASE("noise streams are keyed by student, not batch position") {
  const auto a = draw_noise({4, 9}, 3, 2, 1, 5, 2);
  const auto b = draw_noise({9, 4}, 3, 2, 1, 5, 2);
  CHECK(a.eps[0] == b.eps[1]);
  CHECK(a.eps[1] == b.eps[0]);
  CHECK(a.weight.sum() == Approx(1.0));
  CHECK(draw_noise({4}, 3, 2, 1, 6, 2).eps[0] != a.eps[0]);
  CHECK_THROWS_AS(draw_noise({4}, 3, 0, 1, 6, 2), ConfigError);
}

TEST_CASE("training lowers the loss, keeps M nonnegative and is deterministic") {
  SynthSpec spec;
  spec.N = 100;
  spec.seed = 1;
  const auto d = to_dataset(generate(spec));
  const auto s = split(d, 0.5, 1);
  ViConfig cfg;
  cfg.epochs = 40;
  const auto a = train_varfa(d, s, cfg);
  const auto b = train_varfa(d, s, cfg);
  CHECK(a.trace.epochs.back().train_loss < a.trace.epochs.front().train_loss);
  for (const auto& e : a.trace.epochs) CHECK(e.min_M >= 0.0);
  CHECK(a.model.M == b.model.M);
  CHECK(a.model.mu == b.model.mu);
  CHECK(a.model.encoder.W1 == b.model.encoder.W1);
  CHECK(a.model.encoder.b3 == b.model.encoder.b3);

  cfg.hyper.lambda_l1_M = 10.0;
  CHECK(train_varfa(d, s, cfg).model.M.maxCoeff() == 0.0);
}

TEST_CASE("inference is a pure forward pass") {
  SynthSpec spec;
  spec.N = 40;
  const auto d = to_dataset(generate(spec));
  const auto s = split(d, 0.5, 0);
  ViConfig cfg;
  cfg.epochs = 5;
  const auto model = train_varfa(d, s, cfg).model;
  const auto q1 = infer_posterior(model, d, s, 3);
  const auto q2 = infer_posterior(model, d, s, 3);
  CHECK(q1.u == q2.u);
  CHECK(q1.logvar == q2.logvar);
  const auto all = infer_all(model, d, s);
  CHECK(all[3].u.isApprox(q1.u, 1e-12));

  // an unseen student: a fresh response row the encoder never trained on
  const auto other = to_dataset(generate(SynthSpec{5, 50, 5, 0.3, 99, false}));
  const auto q = infer_posterior(model, other, split(other, 0.5, 0), 2);
  CHECK(q.u.allFinite());
  CHECK(q.logvar.allFinite());

  const auto f = posterior_mean_factors(model, d, s);
  CHECK(f.C.cols() == d.num_students());
  CHECK(f.C.col(3).isApprox(q1.u, 1e-12));
}

TEST_CASE("posterior sampling oracles") {
  const auto q = posterior({0.5, -1.0, 2.0}, {0.0, -1.5, 1.0});
  const auto one = sample_with_noise(q, Eigen::MatrixXd::Zero(1, 3));
  CHECK(one.samples.row(0).transpose() == q.u);

  CounterRng rng(12);
  const int n = 100000;
  Eigen::MatrixXd eps(n, 3);
  for (Eigen::Index k = 0; k < eps.size(); ++k) eps.data()[k] = rng.normal();
  const auto many = sample_with_noise(q, eps);
  const Eigen::VectorXd sd = q.stddev();
  for (Eigen::Index k = 0; k < 3; ++k) {
    CHECK(std::abs(many.stddev[k] - sd[k]) < 3.0 * sd[k] / std::sqrt(2.0 * n));
    CHECK(std::abs(many.mean[k] - q.u[k]) < 3.0 * sd[k] / std::sqrt(static_cast<double>(n)));
  }
}

TEST_CASE("sample_posterior is seeded per student") {
  SynthSpec spec;
  spec.N = 20;
  const auto d = to_dataset(generate(spec));
  const auto s = split(d, 0.5, 0);
  ViConfig cfg;
  cfg.epochs = 2;
  const auto model = train_varfa(d, s, cfg).model;
  const auto a = sample_posterior(model, d, s, 1, 50, 3);
  const auto b = sample_posterior(model, d, s, 1, 50, 3);
  CHECK(a.samples == b.samples);
  CHECK(a.samples.rows() == 50);
  CHECK(sample_posterior(model, d, s, 1, 50, 4).samples != a.samples);
  CHECK_THROWS_AS(sample_posterior(model, d, s, 1, 0, 3), ConfigError);
}
