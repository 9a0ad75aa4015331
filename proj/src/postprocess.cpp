#include "varfa/postprocess.hpp"

#include "varfa/error.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <iomanip>
#include <set>

namespace varfa {

TagMatrix build_tag_matrix(const ResponseDataset& d) {
  if (!d.has_tags()) throw DataError("dataset has no tag information");
  TagMatrix out;
  out.T = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d.tags.size()), d.num_questions());
  for (Eigen::Index j = 0; j < d.num_questions(); ++j)
    for (int t : d.tag_map[static_cast<std::size_t>(j)]) out.T(t, j) = 1.0;
  for (Eigen::Index t = 0; t < out.T.rows(); ++t)
    if (out.T.row(t).sum() == 0.0) throw DataError("tag '" + d.tags.id(static_cast<std::size_t>(t)) + "' has no questions");
  out.names = d.tags.ids();
  return out;
}

Association associate_tags(const Eigen::MatrixXd& M, const TagMatrix& tags, double rel_tol, int max_iter) {
  const Eigen::MatrixXd& T = tags.T;
  if (M.cols() != T.cols()) throw DataError("loadings and tag matrix disagree on the question count");
  if (T.rows() == 0) throw DataError("tag matrix is empty");

  // Gradient 2(AT - M)T^T is Lipschitz with constant 2*lambda_max(T T^T).
  const Eigen::MatrixXd gram = T * T.transpose();
  const Eigen::MatrixXd cross = M * T.transpose();
  const double lipschitz = 2.0 * Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  const double step = 1.0 / lipschitz;

  auto objective = [&](const Eigen::MatrixXd& A) { return (M - A * T).squaredNorm(); };

  Association out;
  out.A = Eigen::MatrixXd::Zero(M.rows(), T.rows());
  double prev = objective(out.A);
  out.objective.push_back(prev);
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::MatrixXd grad = 2.0 * (out.A * gram - cross);
    out.A = (out.A - step * grad).cwiseMax(0.0);
    const double cur = objective(out.A);
    out.objective.push_back(cur);
    out.iterations = it + 1;
    if (std::abs(prev - cur) <= rel_tol * std::max(prev, 1e-300)) break;
    prev = cur;
  }

  out.degenerate_row.assign(static_cast<std::size_t>(M.rows()), false);
  for (Eigen::Index k = 0; k < out.A.rows(); ++k) {
    const double total = out.A.row(k).sum();
    if (M.row(k).cwiseAbs().sum() == 0.0 || total <= 0.0) {
      out.A.row(k).setConstant(1.0 / static_cast<double>(out.A.cols()));
      out.degenerate_row[static_cast<std::size_t>(k)] = true;
    } else {
      out.A.row(k) /= total;
    }
  }
  return out;
}

std::vector<int> answered_tags(const ResponseDataset& d, const SplitMask& split, Eigen::Index i) {
  std::set<int> tags;
  if (d.has_tags())
    for (Eigen::Index j = 0; j < d.num_questions(); ++j)
      if (split.train(i, j))
        for (int t : d.tag_map[static_cast<std::size_t>(j)]) tags.insert(t);
  return {tags.begin(), tags.end()};
}

TagMastery tag_mastery(const Association& assoc, const Eigen::VectorXd& ability, const std::vector<int>& tags) {
  if (ability.size() != assoc.A.rows()) throw DataError("ability length does not match the association");
  TagMastery out;
  out.tags = tags;
  Eigen::VectorXd raw(static_cast<Eigen::Index>(tags.size()));
  for (std::size_t k = 0; k < tags.size(); ++k) raw[static_cast<Eigen::Index>(k)] = assoc.A.col(tags[k]).dot(ability);
  if (raw.size() == 0) return out;
  const double lo = raw.minCoeff();
  const double hi = raw.maxCoeff();
  if (hi - lo <= 0.0) {
    out.score = Eigen::VectorXd::Constant(raw.size(), 0.5);
    out.degenerate = true;
  } else {
    out.score = (raw.array() - lo) / (hi - lo);
  }
  return out;
}

std::map<int, double> empirical_mastery(const ResponseDataset& d, const SplitMask& split, Eigen::Index i) {
  std::map<int, std::pair<int, int>> counts;  // tag -> (correct, answered)
  if (d.has_tags())
    for (Eigen::Index j = 0; j < d.num_questions(); ++j)
      if (split.train(i, j))
        for (int t : d.tag_map[static_cast<std::size_t>(j)]) {
          counts[t].first += d.values(i, j) > 0.5;
          counts[t].second += 1;
        }
  std::map<int, double> out;
  for (const auto& [t, c] : counts) out[t] = static_cast<double>(c.first) / static_cast<double>(c.second);
  return out;
}

void write_association_csv(std::ostream& out, const Association& assoc, const TagMatrix& tags) {
  out << "latent_skill,tag,weight\n" << std::setprecision(10);
  for (Eigen::Index k = 0; k < assoc.A.rows(); ++k)
    for (Eigen::Index t = 0; t < assoc.A.cols(); ++t)
      out << k << ',' << csv_field(tags.names[static_cast<std::size_t>(t)]) << ',' << assoc.A(k, t) << '\n';
}

}  // namespace varfa
