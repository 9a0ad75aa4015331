#pragma once

#include "varfa/data.hpp"
#include "varfa/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>

namespace varfa {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// SPARFA factors. Column i of C is student i's ability, column j of M is
/// question j's nonnegative concept loading, mu[j] its intrinsic difficulty.
template <typename Scalar>
struct FactorSet {
  MatrixX<Scalar> C;   // K x N
  MatrixX<Scalar> M;   // K x Q, entrywise >= 0
  VectorX<Scalar> mu;  // Q

  FactorSet() = default;
  FactorSet(Eigen::Index K, Eigen::Index N, Eigen::Index Q)
      : C(MatrixX<Scalar>::Zero(K, N)), M(MatrixX<Scalar>::Zero(K, Q)), mu(VectorX<Scalar>::Zero(Q)) {}

  Eigen::Index K() const { return M.rows(); }
  Eigen::Index N() const { return C.cols(); }
  Eigen::Index Q() const { return M.cols(); }

  bool all_finite() const { return C.allFinite() && M.allFinite() && mu.allFinite(); }
};

using FactorSetd = FactorSet<double>;

struct ModelHyper {
  int K = 5;
  double lambda_l1_M = 1e-3;
  double lambda_l2_mu = 1e-3;
  double lambda_l2_C = 1e-4;
};

template <typename Scalar>
Scalar softplus(Scalar x) {
  using std::exp;
  using std::log1p;
  return (x > Scalar(0) ? x : Scalar(0)) + log1p(exp(-(x > Scalar(0) ? x : -x)));
}

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  using std::exp;
  if (z >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-z));
  const Scalar e = exp(z);
  return e / (Scalar(1) + e);
}

/// log sigma(z) = -softplus(-z).
template <typename Scalar>
Scalar log_sigmoid(Scalar z) {
  return -softplus(-z);
}

/// Bernoulli log-likelihood of a binary y under logit z: y*z - softplus(z).
template <typename Scalar>
Scalar bernoulli_loglik(Scalar y, Scalar z) {
  return y > Scalar(0.5) ? log_sigmoid(z) : log_sigmoid(-z);
}

template <typename Scalar>
Scalar logit(const FactorSet<Scalar>& f, Eigen::Index i, Eigen::Index j) {
  return f.C.col(i).dot(f.M.col(j)) + f.mu[j];
}

template <typename Scalar>
Scalar predict_prob(const FactorSet<Scalar>& f, Eigen::Index i, Eigen::Index j) {
  return sigmoid(logit(f, i, j));
}

template <typename Scalar>
struct LogLik {
  Scalar value = Scalar(0);
  bool empty_mask = false;
};

/// Sum of Bernoulli log-likelihoods over the entries of `mask`.
template <typename Scalar>
LogLik<Scalar> masked_loglik(const FactorSet<Scalar>& f, const Eigen::MatrixXd& values, const Mask& mask) {
  LogLik<Scalar> out;
  out.empty_mask = !mask.any();
  for (Eigen::Index j = 0; j < mask.cols(); ++j)
    for (Eigen::Index i = 0; i < mask.rows(); ++i)
      if (mask(i, j)) out.value += bernoulli_loglik(Scalar(values(i, j)), logit(f, i, j));
  return out;
}

template <typename Scalar>
LogLik<Scalar> masked_loglik(const FactorSet<Scalar>& f, const ResponseDataset& d, const Mask& mask) {
  return masked_loglik(f, d.values, mask);
}

/// Gradient of masked_loglik; the result is shaped like `f`.
template <typename Scalar>
FactorSet<Scalar> masked_loglik_gradient(const FactorSet<Scalar>& f, const ObservedEntries& obs) {
  FactorSet<Scalar> g(f.K(), f.N(), f.Q());
  for (Eigen::Index i = 0; i < obs.num_students(); ++i)
    for (Eigen::Index e = obs.row_start[i]; e < obs.row_start[i + 1]; ++e) {
      const Eigen::Index j = obs.column[e];
      const Scalar r = Scalar(obs.value[e]) - sigmoid(logit(f, i, j));  // d loglik / d z
      g.C.col(i) += r * f.M.col(j);
      g.M.col(j) += r * f.C.col(i);
      g.mu[j] += r;
    }
  return g;
}

/// lambda_l1_M*sum|M| + lambda_l2_mu*||mu||^2 (+ lambda_l2_C*||C||^2 when include_C).
template <typename Scalar>
Scalar regularizer(const FactorSet<Scalar>& f, const ModelHyper& h, bool include_C = true) {
  Scalar r = Scalar(h.lambda_l1_M) * f.M.cwiseAbs().sum() + Scalar(h.lambda_l2_mu) * f.mu.squaredNorm();
  if (include_C) r += Scalar(h.lambda_l2_C) * f.C.squaredNorm();
  return r;
}

}  // namespace varfa
