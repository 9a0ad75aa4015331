#pragma once

#include "varfa/error.hpp"
#include "varfa/model.hpp"
#include "varfa/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

namespace varfa {

/// A trainable parameter block viewed as a matrix (vectors are K x 1).
template <typename Scalar>
struct NamedParam {
  std::string name;
  Eigen::Map<MatrixX<Scalar>> value;
};

template <typename Scalar>
using ParamList = std::vector<NamedParam<Scalar>>;

template <typename Derived>
NamedParam<typename Derived::Scalar> param(std::string name, Eigen::PlainObjectBase<Derived>& block) {
  using Scalar = typename Derived::Scalar;
  return {std::move(name), Eigen::Map<MatrixX<Scalar>>(block.data(), block.rows(), block.cols())};
}

/// Gradient blocks keyed by parameter name.
template <typename Scalar>
class GradientBundle {
 public:
  template <typename Derived>
  void set(const std::string& name, const Eigen::MatrixBase<Derived>& g) {
    blocks_[name] = MatrixX<Scalar>(g);
  }
  const MatrixX<Scalar>& at(const std::string& name) const {
    const auto it = blocks_.find(name);
    if (it == blocks_.end()) throw NumericError("no gradient for parameter '" + name + "'");
    return it->second;
  }
  bool contains(const std::string& name) const { return blocks_.count(name) != 0; }
  std::size_t size() const { return blocks_.size(); }
  const std::map<std::string, MatrixX<Scalar>>& blocks() const { return blocks_; }

 private:
  std::map<std::string, MatrixX<Scalar>> blocks_;
};

template <typename Scalar>
struct AdamState {
  long step = 0;
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps = Scalar(1e-8);
  std::map<std::string, MatrixX<Scalar>> m;
  std::map<std::string, MatrixX<Scalar>> v;
};

/// One bias-corrected Adam update of every block in `params`.
template <typename Scalar>
void adam_step(ParamList<Scalar>& params, const GradientBundle<Scalar>& grads, AdamState<Scalar>& state, Scalar lr) {
  if (!(lr > Scalar(0))) throw ConfigError("learning rate must be positive");
  if (grads.size() != params.size()) throw NumericError("gradient bundle does not match the parameter list");
  for (const auto& p : params) {
    const auto& g = grads.at(p.name);
    if (g.rows() != p.value.rows() || g.cols() != p.value.cols())
      throw NumericError("gradient shape mismatch for parameter '" + p.name + "'");
    if (!g.allFinite()) throw NumericError("non-finite gradient for parameter '" + p.name + "'");
  }
  ++state.step;
  using std::pow;
  const Scalar correction1 = Scalar(1) - pow(state.beta1, Scalar(state.step));
  const Scalar correction2 = Scalar(1) - pow(state.beta2, Scalar(state.step));
  for (auto& p : params) {
    const auto& g = grads.at(p.name);
    auto& m = state.m[p.name];
    auto& v = state.v[p.name];
    if (m.size() == 0) {
      m = MatrixX<Scalar>::Zero(g.rows(), g.cols());
      v = MatrixX<Scalar>::Zero(g.rows(), g.cols());
    }
    m = state.beta1 * m + (Scalar(1) - state.beta1) * g;
    v = state.beta2 * v + (Scalar(1) - state.beta2) * g.cwiseAbs2();
    p.value.array() -= lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + state.eps);
  }
}

/// Proximal map of t*||x||_1 + indicator{x >= 0}: max(0, x - t).
template <typename Derived>
auto prox_nonneg_l1(const Eigen::MatrixBase<Derived>& x, typename Derived::Scalar threshold) {
  using Scalar = typename Derived::Scalar;
  return (x.array() - threshold).cwiseMax(Scalar(0)).matrix().eval();
}

/// In-place form; keeps the storage so Maps onto `x` stay valid.
template <typename Derived>
void apply_prox_nonneg_l1(Eigen::MatrixBase<Derived>& x, typename Derived::Scalar threshold) {
  using Scalar = typename Derived::Scalar;
  x.array() = (x.array() - threshold).cwiseMax(Scalar(0));
}

template <typename Scalar>
Scalar prox_nonneg_l1(Scalar x, Scalar threshold) {
  return std::max(Scalar(0), x - threshold);
}

struct FiniteDiffReport {
  double max_rel_error = 0.0;
  double mean_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst_param;
  Eigen::Index worst_index = -1;
};

/// Compares `analytic` against central differences of `objective`, which must read
/// the current values of `params`. Checks every coordinate when there are at most
/// `max_coords`, otherwise a seeded random subsample of that many. Relative error
/// is |a - n| / max(|a|, |n|, 1e-6).
template <typename Scalar>
FiniteDiffReport finite_diff_check(const std::function<Scalar()>& objective, ParamList<Scalar>& params,
                                   const GradientBundle<Scalar>& analytic, Scalar h, std::size_t max_coords = 200,
                                   std::uint64_t seed = 0) {
  if (!(h > Scalar(0))) throw ConfigError("finite-difference step must be positive");
  std::vector<std::pair<std::size_t, Eigen::Index>> coords;
  for (std::size_t b = 0; b < params.size(); ++b)
    for (Eigen::Index k = 0; k < params[b].value.size(); ++k) coords.emplace_back(b, k);
  if (coords.size() > max_coords) {
    CounterRng rng(seed, {0xfdc});
    for (std::size_t k = 0; k < max_coords; ++k) std::swap(coords[k], coords[k + rng.below(coords.size() - k)]);
    coords.resize(max_coords);
  }

  FiniteDiffReport report;
  double total = 0.0;
  for (const auto& [b, k] : coords) {
    auto& p = params[b];
    Scalar& x = p.value.data()[k];
    const Scalar saved = x;
    x = saved + h;
    const Scalar up = objective();
    x = saved - h;
    const Scalar down = objective();
    x = saved;
    using std::isfinite;
    if (!isfinite(up) || !isfinite(down))
      throw NumericError("objective non-finite near '" + p.name + "'[" + std::to_string(k) + "]");
    const double numeric = static_cast<double>((up - down) / (Scalar(2) * h));
    const double exact = static_cast<double>(analytic.at(p.name).data()[k]);
    const double rel = std::abs(exact - numeric) / std::max({std::abs(exact), std::abs(numeric), 1e-6});
    total += rel;
    if (rel > report.max_rel_error || report.worst_index < 0) {
      report.max_rel_error = std::max(report.max_rel_error, rel);
      report.worst_param = p.name;
      report.worst_index = k;
    }
  }
  report.checked = coords.size();
  report.mean_rel_error = coords.empty() ? 0.0 : total / static_cast<double>(coords.size());
  return report;
}

}  // namespace varfa
