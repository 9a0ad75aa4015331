#include "varfa/eval.hpp"

#include "varfa/error.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>

namespace varfa {

namespace {
void check_lengths(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("prediction and label lengths differ");
}
}  // namespace

double accuracy(std::span<const double> probs, std::span<const double> labels, double threshold) {
  check_lengths(probs, labels);
  if (probs.empty()) throw DataError("accuracy of an empty prediction set is undefined");
  std::size_t hits = 0;
  for (std::size_t k = 0; k < probs.size(); ++k) hits += (probs[k] >= threshold) == (labels[k] > 0.5);
  return static_cast<double>(hits) / static_cast<double>(probs.size());
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> rank(x.size());
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start + 1;
    while (end < order.size() && x[order[end]] == x[order[start]]) ++end;
    const double r = 0.5 * static_cast<double>(start + 1 + end);  // mean of positions start+1 .. end
    for (std::size_t k = start; k < end; ++k) rank[order[k]] = r;
    start = end;
  }
  return rank;
}

double auc(std::span<const double> scores, std::span<const double> labels) {
  check_lengths(scores, labels);
  std::uint64_t n_pos = 0;
  for (double y : labels) n_pos += y > 0.5;
  const std::uint64_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("AUC is undefined when only one class is present");

  // Doubled ranks are integers, so U is computed exactly.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::uint64_t pos_rank2 = 0;
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start + 1;
    while (end < order.size() && scores[order[end]] == scores[order[start]]) ++end;
    std::uint64_t pos_in_group = 0;
    for (std::size_t k = start; k < end; ++k) pos_in_group += labels[order[k]] > 0.5;
    pos_rank2 += pos_in_group * (start + 1 + end);
    start = end;
  }
  const std::uint64_t u2 = pos_rank2 - n_pos * (n_pos + 1);
  return static_cast<double>(u2) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double f1(std::span<const double> probs, std::span<const double> labels, double threshold) {
  check_lengths(probs, labels);
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    const bool pred = probs[k] >= threshold;
    const bool truth = labels[k] > 0.5;
    tp += pred && truth;
    fp += pred && !truth;
    fn += !pred && truth;
  }
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

MetricReport evaluate(const std::vector<ScoredEntry>& predictions, double wall_train_seconds, double threshold) {
  std::vector<double> probs, labels;
  probs.reserve(predictions.size());
  labels.reserve(predictions.size());
  for (const auto& p : predictions) {
    probs.push_back(p.prob);
    labels.push_back(p.label);
  }
  MetricReport r;
  r.acc = accuracy(probs, labels, threshold);
  r.auc = auc(probs, labels);
  r.f1 = f1(probs, labels, threshold);
  r.n_test = predictions.size();
  r.wall_train_seconds = wall_train_seconds;
  return r;
}

Correlation spearman(std::span<const double> x, std::span<const double> y) {
  check_lengths(x, y);
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < rx.size(); ++k) {
    sxy += (rx[k] - mx) * (ry[k] - my);
    sxx += (rx[k] - mx) * (rx[k] - mx);
    syy += (ry[k] - my) * (ry[k] - my);
  }
  if (sxx == 0.0) return {std::numeric_limits<double>::quiet_NaN(), CorrelationFlag::constant_x};
  if (syy == 0.0) return {0.0, CorrelationFlag::constant_y};
  return {sxy / std::sqrt(sxx * syy), CorrelationFlag::none};
}

UncertaintyReport uncertainty_report(const std::vector<GaussianPosteriord>& posteriors, const Mask& train) {
  if (static_cast<Eigen::Index>(posteriors.size()) != train.rows())
    throw DataError("one posterior per student is required");
  if (posteriors.size() < 3) throw DataError("uncertainty report needs at least 3 students");
  UncertaintyReport report;
  for (std::size_t i = 0; i < posteriors.size(); ++i)
    report.rows.push_back({static_cast<Eigen::Index>(i), train.row(static_cast<Eigen::Index>(i)).count(),
                           posteriors[i].stddev().mean()});
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const auto& a, const auto& b) { return a.n_answered < b.n_answered; });
  std::vector<double> counts, stds;
  for (const auto& r : report.rows) {
    counts.push_back(static_cast<double>(r.n_answered));
    stds.push_back(r.mean_std);
  }
  report.spearman = spearman(counts, stds);
  return report;
}

double benchmark(const std::function<void()>& run) {
  Stopwatch clock;
  run();
  return clock.seconds();
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw DataError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<ViolinRow> violin_rows(const std::string& student_id, Eigen::Index n_answered,
                                   const PosteriorSamples& samples) {
  std::vector<ViolinRow> rows;
  for (Eigen::Index k = 0; k < samples.samples.cols(); ++k) {
    std::vector<double> col(samples.samples.col(k).data(), samples.samples.col(k).data() + samples.samples.rows());
    rows.push_back({student_id, n_answered, k, samples.mean[k], samples.stddev[k], quantile(col, 0.05),
                    quantile(col, 0.25), quantile(col, 0.5), quantile(col, 0.75), quantile(col, 0.95)});
  }
  return rows;
}

void write_metrics_csv(std::ostream& out, const std::vector<std::pair<std::string, MetricReport>>& rows) {
  out << "method,acc,auc,f1,n_test,wall_train_seconds\n" << std::setprecision(10);
  for (const auto& [name, r] : rows)
    out << name << ',' << r.acc << ',' << r.auc << ',' << r.f1 << ',' << r.n_test << ',' << r.wall_train_seconds
        << '\n';
}

nlohmann::json to_json(const MetricReport& r) {
  return {{"acc", r.acc}, {"auc", r.auc}, {"f1", r.f1}, {"n_test", r.n_test},
          {"wall_train_seconds", r.wall_train_seconds}};
}

void write_uncertainty_csv(std::ostream& out, const UncertaintyReport& report, const ResponseDataset& d) {
  out << "student_id,n_answered,mean_std\n" << std::setprecision(10);
  for (const auto& r : report.rows) out << csv_field(d.students.id(static_cast<std::size_t>(r.student))) << ',' << r.n_answered << ',' << r.mean_std << '\n';
}

void write_violin_csv(std::ostream& out, const std::vector<ViolinRow>& rows) {
  out << "student_id,n_answered,dim,mean,std,q05,q25,q50,q75,q95\n" << std::setprecision(10);
  for (const auto& r : rows)
    out << csv_field(r.student_id) << ',' << r.n_answered << ',' << r.dim << ',' << r.mean << ',' << r.std << ',' << r.q05
        << ',' << r.q25 << ',' << r.q50 << ',' << r.q75 << ',' << r.q95 << '\n';
}

void write_trace_csv(std::ostream& out, const TrainTrace& trace) {
  out << "epoch,train_loss,wall_seconds\n" << std::setprecision(12);
  for (const auto& e : trace.epochs) out << e.epoch << ',' << e.train_loss << ',' << e.wall_seconds << '\n';
}

}  // namespace varfa
