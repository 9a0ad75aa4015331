#pragma once

#include "varfa/data.hpp"

#include <Eigen/Dense>

#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace varfa {

/// Binary tag-by-question matrix (the Q-matrix) with tag names.
struct TagMatrix {
  Eigen::MatrixXd T;  // num_tags x Q
  std::vector<std::string> names;
};

/// Builds the tag matrix from the dataset tag map; row t is tag index t.
TagMatrix build_tag_matrix(const ResponseDataset& dataset);

struct Association {
  Eigen::MatrixXd A;                 // K x num_tags, rows sum to 1
  std::vector<bool> degenerate_row;  // latent skill with an all-zero loading row
  std::vector<double> objective;     // ||M - A T||_F^2 per projected-gradient iteration
  int iterations = 0;
};

/// Nonnegative least squares min_{A >= 0} ||M - A T||_F^2 by projected gradient with
/// step 1/L, then each row of A normalized to sum 1.
Association associate_tags(const Eigen::MatrixXd& M, const TagMatrix& tags, double rel_tol = 1e-8,
                           int max_iter = 10000);

/// Tags attached to the student's train-observed questions.
std::vector<int> answered_tags(const ResponseDataset& dataset, const SplitMask& split, Eigen::Index student);

struct TagMastery {
  std::vector<int> tags;
  Eigen::VectorXd score;  // in [0,1]
  bool degenerate = false;  // fewer than two distinct raw scores; all scores 0.5
};

/// Raw score A(:,t)^T c per answered tag, min-max normalized per student.
TagMastery tag_mastery(const Association& assoc, const Eigen::VectorXd& ability, const std::vector<int>& tags);

/// Fraction of train-observed answers marked correct, per answered tag.
std::map<int, double> empirical_mastery(const ResponseDataset& dataset, const SplitMask& split, Eigen::Index student);

void write_association_csv(std::ostream& out, const Association& assoc, const TagMatrix& tags);

}  // namespace varfa
