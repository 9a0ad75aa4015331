#pragma once

#include "varfa/data.hpp"
#include "varfa/error.hpp"
#include "varfa/model.hpp"
#include "varfa/training.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace varfa {

/// Three affine layers with tanh after the first two: Q -> H -> H -> 2K.
template <typename Scalar>
struct EncoderParams {
  MatrixX<Scalar> W1;  // H x Q
  VectorX<Scalar> b1;
  MatrixX<Scalar> W2;  // H x H
  VectorX<Scalar> b2;
  MatrixX<Scalar> W3;  // 2K x H
  VectorX<Scalar> b3;

  EncoderParams() = default;
  EncoderParams(Eigen::Index Q, Eigen::Index H, Eigen::Index K)
      : W1(MatrixX<Scalar>::Zero(H, Q)), b1(VectorX<Scalar>::Zero(H)), W2(MatrixX<Scalar>::Zero(H, H)),
        b2(VectorX<Scalar>::Zero(H)), W3(MatrixX<Scalar>::Zero(2 * K, H)), b3(VectorX<Scalar>::Zero(2 * K)) {}

  Eigen::Index Q() const { return W1.cols(); }
  Eigen::Index H() const { return W1.rows(); }
  Eigen::Index K() const { return W3.rows() / 2; }

  bool all_finite() const {
    return W1.allFinite() && b1.allFinite() && W2.allFinite() && b2.allFinite() && W3.allFinite() && b3.allFinite();
  }
};

using EncoderParamsd = EncoderParams<double>;

/// Diagonal Gaussian q(nu) = N(u, diag(exp(logvar))).
template <typename Scalar>
struct GaussianPosterior {
  VectorX<Scalar> u;
  VectorX<Scalar> logvar;

  VectorX<Scalar> stddev() const { return (Scalar(0.5) * logvar.array()).exp().matrix(); }
};

using GaussianPosteriord = GaussianPosterior<double>;

/// Activations of a batched forward pass (one column per student).
template <typename Scalar>
struct EncoderPass {
  MatrixX<Scalar> h1;
  MatrixX<Scalar> h2;
  MatrixX<Scalar> out;  // 2K x B: means on top, log-variances below
};

/// tanh through the vectorized exp: 1 - 2 / (exp(2a) + 1).
template <typename Derived>
void tanh_in_place(Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  a.array() = Scalar(1) - Scalar(2) / ((Scalar(2) * a.array()).exp() + Scalar(1));
}

namespace detail {

// Zero-imputed rows are mostly zeros, so the first layer goes through a sparse view.
template <typename Scalar>
EncoderPass<Scalar> encode_sparse(const EncoderParams<Scalar>& enc, const Eigen::SparseMatrix<Scalar>& x) {
  if (x.rows() != enc.Q()) throw DataError("encoder input has wrong length");
  EncoderPass<Scalar> pass;
  pass.h1.noalias() = enc.W1 * x;
  pass.h1.colwise() += enc.b1;
  tanh_in_place(pass.h1);
  pass.h2.noalias() = enc.W2 * pass.h1;
  pass.h2.colwise() += enc.b2;
  tanh_in_place(pass.h2);
  pass.out.noalias() = enc.W3 * pass.h2;
  pass.out.colwise() += enc.b3;
  if (!pass.out.allFinite()) throw NumericError("non-finite encoder activation");
  return pass;
}

}  // namespace detail

template <typename Scalar>
EncoderPass<Scalar> encode_batch(const EncoderParams<Scalar>& enc, const MatrixX<Scalar>& x) {
  return detail::encode_sparse<Scalar>(enc, x.sparseView());
}

template <typename Scalar>
GaussianPosterior<Scalar> encode(const EncoderParams<Scalar>& enc, const VectorX<Scalar>& x) {
  const auto pass = encode_batch<Scalar>(enc, x);
  const Eigen::Index K = enc.K();
  return {pass.out.col(0).head(K), pass.out.col(0).tail(K)};
}

/// KL(q || N(0, I)) = 0.5 * sum(exp(logvar) + u^2 - 1 - logvar).
template <typename Scalar>
Scalar kl_std_normal(const GaussianPosterior<Scalar>& q) {
  return Scalar(0.5) * (q.logvar.array().exp() + q.u.array().square() - Scalar(1) - q.logvar.array()).sum();
}

/// nu = u + exp(0.5 * logvar) * eps.
template <typename Scalar>
VectorX<Scalar> reparameterize(const GaussianPosterior<Scalar>& q, const VectorX<Scalar>& eps) {
  return q.u + (q.stddev().array() * eps.array()).matrix();
}

enum class KlWeighting { per_entry, per_student };

/// Standard-normal draws for the expectation in the ELBO: for batch student b,
/// eps[b] is K x S and the expectation is sum_s weight[s] * f(nu_s).
template <typename Scalar>
struct NoiseSet {
  std::vector<MatrixX<Scalar>> eps;
  VectorX<Scalar> weight;
};

/// Draws S samples per student from streams keyed by (seed, epoch, batch, student).
NoiseSet<double> draw_noise(const std::vector<Eigen::Index>& rows, Eigen::Index K, int samples, std::uint64_t seed,
                            int epoch, int batch);

template <typename Scalar>
struct ViGradient {
  EncoderParams<Scalar> enc;
  MatrixX<Scalar> M;
  VectorX<Scalar> mu;
};

template <typename Scalar>
struct ElboEval {
  Scalar elbo = Scalar(0);
  ViGradient<Scalar> loss_grad;  // gradient of -elbo; filled only when requested
};

/// ELBO over the observed entries of the batch rows:
///   sum_i [ -w_i * KL(q_i || p) + sum_s weight_s * sum_{j observed} log p(y_ij | nu_i^s) ]
/// with w_i = n_i (per_entry, one KL per observed entry) or 1 (per_student).
/// `x` holds the encoder inputs for `rows`, one column each.
template <typename Scalar>
ElboEval<Scalar> elbo_eval(const EncoderParams<Scalar>& enc, const MatrixX<Scalar>& M, const VectorX<Scalar>& mu,
                           const ObservedEntries& obs, const std::vector<Eigen::Index>& rows,
                           const MatrixX<Scalar>& x, const NoiseSet<Scalar>& noise, KlWeighting weighting,
                           bool with_gradient) {
  using std::exp;
  const Eigen::Index K = enc.K();
  const auto B = static_cast<Eigen::Index>(rows.size());
  if (B == 0) throw DataError("ELBO batch is empty");
  if (static_cast<Eigen::Index>(noise.eps.size()) != B) throw DataError("noise set does not match batch");
  if (M.rows() != K || M.cols() != obs.num_questions) throw DataError("loading matrix shape mismatch");

  const Eigen::SparseMatrix<Scalar> xs = x.sparseView();
  const EncoderPass<Scalar> pass = detail::encode_sparse<Scalar>(enc, xs);
  ElboEval<Scalar> result;
  MatrixX<Scalar> d_out;
  if (with_gradient) {
    result.loss_grad.M = MatrixX<Scalar>::Zero(M.rows(), M.cols());
    result.loss_grad.mu = VectorX<Scalar>::Zero(mu.size());
    d_out = MatrixX<Scalar>::Zero(2 * K, B);
  }

  VectorX<Scalar> nu(K), std_dev(K), g_nu(K);
  for (Eigen::Index b = 0; b < B; ++b) {
    const Eigen::Index i = rows[static_cast<std::size_t>(b)];
    const auto u = pass.out.col(b).head(K);
    const auto logvar = pass.out.col(b).tail(K);
    std_dev = (Scalar(0.5) * logvar.array()).exp().matrix();
    const Eigen::Index n_i = obs.count(i);
    const Scalar w = weighting == KlWeighting::per_entry ? Scalar(n_i) : Scalar(1);
    const Scalar kl = Scalar(0.5) * (logvar.array().exp() + u.array().square() - Scalar(1) - logvar.array()).sum();
    result.elbo -= w * kl;

    const auto& eps = noise.eps[static_cast<std::size_t>(b)];
    for (Eigen::Index s = 0; s < eps.cols(); ++s) {
      const Scalar weight = noise.weight[s];
      nu = u + (std_dev.array() * eps.col(s).array()).matrix();
      if (with_gradient) g_nu.setZero();
      for (Eigen::Index e = obs.row_start[i]; e < obs.row_start[i + 1]; ++e) {
        const Eigen::Index j = obs.column[e];
        const Scalar y = Scalar(obs.value[e]);
        const Scalar z = nu.dot(M.col(j)) + mu[j];
        const Scalar ll = bernoulli_loglik(y, z);
        using std::isfinite;
        if (!isfinite(ll))
          throw NumericError("non-finite ELBO term at (" + std::to_string(i) + "," + std::to_string(j) + ")");
        result.elbo += weight * ll;
        if (with_gradient) {
          const Scalar r = weight * (sigmoid(z) - y);  // d(-ll)/dz, weighted
          result.loss_grad.M.col(j) += r * nu;
          result.loss_grad.mu[j] += r;
          g_nu += r * M.col(j);
        }
      }
      if (with_gradient) {
        d_out.col(b).head(K) += g_nu;
        d_out.col(b).tail(K) += (g_nu.array() * eps.col(s).array() * Scalar(0.5) * std_dev.array()).matrix();
      }
    }
    if (with_gradient) {
      d_out.col(b).head(K) += w * u;
      d_out.col(b).tail(K) += (w * Scalar(0.5) * (logvar.array().exp() - Scalar(1))).matrix();
    }
  }

  if (with_gradient) {
    auto& g = result.loss_grad.enc;
    g.W3.noalias() = d_out * pass.h2.transpose();
    g.b3 = d_out.rowwise().sum();
    MatrixX<Scalar> d2 = (enc.W3.transpose() * d_out).cwiseProduct(
        (Scalar(1) - pass.h2.array().square()).matrix());
    g.W2.noalias() = d2 * pass.h1.transpose();
    g.b2 = d2.rowwise().sum();
    MatrixX<Scalar> d1 = (enc.W2.transpose() * d2).cwiseProduct((Scalar(1) - pass.h1.array().square()).matrix());
    g.W1.noalias() = d1 * xs.transpose();
    g.b1 = d1.rowwise().sum();
  }
  return result;
}

struct ViConfig {
  ModelHyper hyper;
  double lr = 0.05;
  int epochs = 100;
  int batch_students = 32;
  int mc_samples = 1;
  int hidden_width = 64;
  std::uint64_t seed = 0;
  KlWeighting kl_weighting = KlWeighting::per_entry;
  InputEncoding encoding = InputEncoding::zero_one;
};

/// Trained VarFA state: the amortized encoder plus theta = {M, mu}.
struct ViModel {
  EncoderParamsd encoder;
  Eigen::MatrixXd M;
  Eigen::VectorXd mu;
  InputEncoding encoding = InputEncoding::zero_one;
};

struct ViResult {
  ViModel model;
  TrainTrace trace;
};

/// Fan-in scaled uniform weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)), keyed by seed.
EncoderParamsd init_encoder(Eigen::Index Q, Eigen::Index H, Eigen::Index K, std::uint64_t seed);

/// Minimizes -ELBO + lambda*R(theta) by mini-batch Adam over (encoder, M, mu) with a
/// proximal step on M after every update.
ViResult train_varfa(const ResponseDataset& dataset, const SplitMask& split, const ViConfig& config);

/// Posterior for one student: a single forward pass on the zero-imputed train row.
GaussianPosteriord infer_posterior(const ViModel& model, const ResponseDataset& dataset, const SplitMask& split,
                                   Eigen::Index student);

/// Posteriors for every student.
std::vector<GaussianPosteriord> infer_all(const ViModel& model, const ResponseDataset& dataset,
                                          const SplitMask& split);

/// Factor set with C holding posterior means, for point prediction.
FactorSetd posterior_mean_factors(const ViModel& model, const ResponseDataset& dataset, const SplitMask& split);

struct PosteriorSamples {
  Eigen::MatrixXd samples;  // n x K
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;
};

/// Reparameterized draws from q using the given n x K noise.
PosteriorSamples sample_with_noise(const GaussianPosteriord& posterior, const Eigen::MatrixXd& eps);

PosteriorSamples sample_posterior(const ViModel& model, const ResponseDataset& dataset, const SplitMask& split,
                                  Eigen::Index student, int n, std::uint64_t seed);

}  // namespace varfa
