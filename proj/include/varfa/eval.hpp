#pragma once

#include "varfa/data.hpp"
#include "varfa/mle.hpp"
#include "varfa/training.hpp"
#include "varfa/vi.hpp"

#include <json.hpp>

#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace varfa {

/// Fraction of entries where (prob >= threshold) matches the label.
double accuracy(std::span<const double> probs, std::span<const double> labels, double threshold = 0.5);

/// Rank-statistic (Mann-Whitney) AUC with average ranks for ties.
/// Throws DataError when only one class is present.
double auc(std::span<const double> scores, std::span<const double> labels);

/// F1 of class 1; 0 when precision + recall is 0.
double f1(std::span<const double> probs, std::span<const double> labels, double threshold = 0.5);

struct MetricReport {
  double acc = 0.0;
  double auc = 0.0;
  double f1 = 0.0;
  std::size_t n_test = 0;
  double wall_train_seconds = 0.0;
};

MetricReport evaluate(const std::vector<ScoredEntry>& predictions, double wall_train_seconds = 0.0,
                      double threshold = 0.5);

/// Average ranks (1-based) with ties sharing the mean of their positions.
std::vector<double> average_ranks(std::span<const double> x);

enum class CorrelationFlag { none, constant_x, constant_y };

struct Correlation {
  double value = 0.0;
  CorrelationFlag flag = CorrelationFlag::none;
};

/// Spearman rank correlation. Constant y gives 0 (flagged); constant x gives NaN (flagged).
Correlation spearman(std::span<const double> x, std::span<const double> y);

struct UncertaintyRow {
  Eigen::Index student = 0;
  Eigen::Index n_answered = 0;  // train-observed entries
  double mean_std = 0.0;        // posterior std averaged over the K dimensions
};

struct UncertaintyReport {
  std::vector<UncertaintyRow> rows;  // sorted by n_answered
  Correlation spearman;
};

UncertaintyReport uncertainty_report(const std::vector<GaussianPosteriord>& posteriors, const Mask& train);

/// Wall time of `run`, measured on a monotone clock.
double benchmark(const std::function<void()>& run);

/// Linear-interpolation sample quantile (p in [0,1]).
double quantile(std::vector<double> values, double p);

struct ViolinRow {
  std::string student_id;
  Eigen::Index n_answered = 0;
  Eigen::Index dim = 0;
  double mean = 0.0;
  double std = 0.0;
  double q05 = 0.0, q25 = 0.0, q50 = 0.0, q75 = 0.0, q95 = 0.0;
};

std::vector<ViolinRow> violin_rows(const std::string& student_id, Eigen::Index n_answered,
                                   const PosteriorSamples& samples);

// CSV/JSON emission.
void write_metrics_csv(std::ostream& out, const std::vector<std::pair<std::string, MetricReport>>& rows);
nlohmann::json to_json(const MetricReport& report);
void write_uncertainty_csv(std::ostream& out, const UncertaintyReport& report, const ResponseDataset& dataset);
void write_violin_csv(std::ostream& out, const std::vector<ViolinRow>& rows);
void write_trace_csv(std::ostream& out, const TrainTrace& trace);

}  // namespace varfa
