#pragma once

#include "varfa/checkpoint.hpp"
#include "varfa/config.hpp"
#include "varfa/eval.hpp"
#include "varfa/postprocess.hpp"

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace varfa {

struct RunOutcome {
  MetricReport test;
  TrainTrace trace;
  Checkpoint checkpoint;
};

/// Trains `config.mode` on split.train and scores split.test.
RunOutcome train_and_evaluate(const ResponseDataset& dataset, const SplitMask& split, const ExperimentConfig& config);

struct SuiteCell {
  std::string group;  // e.g. "300x50" or a dataset name
  Mode mode = Mode::mle;
  int run = 0;
  bool ok = false;
  std::string error;
  MetricReport report;
};

struct SummaryRow {
  std::string group;
  Mode mode = Mode::mle;
  std::string metric;  // acc, auc, f1, wall_train_seconds
  double mean = 0.0;
  double sd = 0.0;     // sample standard deviation over successful runs
  int n_ok = 0;
};

std::vector<SummaryRow> summarize(const std::vector<SuiteCell>& cells);

struct GridSpec {
  std::vector<double> l1_M{1e-4, 1e-3, 1e-2, 1e-1, 1, 10};
  std::vector<double> l2_mu{1e-4, 1e-3, 1e-2, 1e-1, 1, 10};
  std::vector<double> l2_C{1e-4, 1e-3, 1e-2, 1e-1, 1, 10};  // searched in mle mode only
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
};

struct SynthSuiteOptions {
  std::vector<Eigen::Index> sizes{100, 300, 500, 700, 900};
  Eigen::Index Q = 50;
  int runs = 5;
  bool grid = false;  // per size, select lambdas on the first run's split
  GridSpec grid_spec;
};

struct RuntimeRatio {
  std::string group;
  double mle_seconds = 0.0;
  double varfa_seconds = 0.0;
  double ratio = 0.0;  // varfa / mle
};

struct SynthSuiteResult {
  std::vector<SuiteCell> cells;
  std::vector<SummaryRow> summary;
  std::vector<RuntimeRatio> runtime;
};

/// For each size: one synthetic instance (pi, K and seed from the config's synth source
/// when present), `runs` random splits, both trainers on every split.
SynthSuiteResult run_synth_suite(const ExperimentConfig& base, const SynthSuiteOptions& options);

struct GridRow {
  ModelHyper hyper;
  double val_auc = 0.0;
  bool ok = false;
};

struct GridResult {
  std::vector<GridRow> rows;
  ModelHyper best;
  double best_auc = 0.0;
};

/// Exhaustive search over the lambda grid, scored by AUC on a validation split carved
/// out of split.train. Ties go to the smaller total regularization weight.
GridResult grid_search(const ResponseDataset& dataset, const SplitMask& split, const ExperimentConfig& config,
                       const GridSpec& grid);

struct RealSuiteOptions {
  int runs = 5;
  bool grid = false;
  GridSpec grid_spec;
  int violin_students = 10;
  int violin_samples = 1000;
  std::uint64_t sample_seed = 0;
};

struct MasteryRow {
  std::string student_id;
  std::string tag;
  double predicted = 0.0;
  double empirical = 0.0;
};

struct RealSuiteResult {
  std::vector<SuiteCell> cells;
  std::vector<SummaryRow> summary;
  ModelHyper mle_hyper;
  ModelHyper varfa_hyper;
  std::optional<UncertaintyReport> uncertainty;
  std::vector<ViolinRow> violins;
  std::optional<TagMatrix> tags;
  std::optional<Association> association;
  std::vector<MasteryRow> mastery;
  std::vector<std::string> notices;
};

/// Preprocess, split, train both methods per run; the first VarFA run also yields the
/// uncertainty, violin, association and mastery reports.
RealSuiteResult run_real_suite(const ExperimentConfig& config, const RealSuiteOptions& options);
RealSuiteResult run_real_suite(const ResponseDataset& dataset, const ExperimentConfig& config,
                               const RealSuiteOptions& options);

/// Per-student mastery rows for every student and answered tag.
std::vector<MasteryRow> mastery_rows(const ResponseDataset& dataset, const SplitMask& split,
                                     const Association& assoc, const Eigen::MatrixXd& abilities);

void write_cells_csv(std::ostream& out, const std::vector<SuiteCell>& cells);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
void write_runtime_csv(std::ostream& out, const std::vector<RuntimeRatio>& rows);
void write_grid_csv(std::ostream& out, const GridResult& result);
void write_mastery_csv(std::ostream& out, const std::vector<MasteryRow>& rows);

}  // namespace varfa
