#include "varfa/experiments.hpp"

#include "varfa/error.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>

namespace varfa {

RunOutcome train_and_evaluate(const ResponseDataset& d, const SplitMask& split, const ExperimentConfig& cfg) {
  RunOutcome out;
  Checkpoint& ck = out.checkpoint;
  ck.mode = cfg.mode;
  ck.hyper = cfg.hyper;
  ck.encoding = cfg.encoding;
  ck.kl_weighting = cfg.kl_weighting;
  ck.dataset_fingerprint = fingerprint(d);
  ck.meta = {cfg.seed, cfg.epochs, 0.0, cfg.train_fraction, cfg.split_seed};

  FactorSetd factors;
  if (cfg.mode == Mode::mle) {
    auto result = train_mle(d, split, cfg.mle_config());
    out.trace = std::move(result.trace);
    ck.factors = std::move(result.factors);
    factors = ck.factors;
  } else {
    auto result = train_varfa(d, split, cfg.vi_config());
    out.trace = std::move(result.trace);
    ck.encoder = result.model.encoder;
    ck.factors.M = result.model.M;
    ck.factors.mu = result.model.mu;
    factors = posterior_mean_factors(result.model, d, split);
  }
  ck.meta.wall_seconds = out.trace.wall_train_seconds;
  out.test = evaluate(predict_missing(factors, d, split.test), out.trace.wall_train_seconds);
  return out;
}

std::vector<SummaryRow> summarize(const std::vector<SuiteCell>& cells) {
  std::vector<std::pair<std::string, Mode>> groups;
  for (const auto& c : cells)
    if (std::find(groups.begin(), groups.end(), std::pair{c.group, c.mode}) == groups.end())
      groups.emplace_back(c.group, c.mode);

  std::vector<SummaryRow> rows;
  const std::vector<std::pair<std::string, double MetricReport::*>> metrics{
      {"acc", &MetricReport::acc},
      {"auc", &MetricReport::auc},
      {"f1", &MetricReport::f1},
      {"wall_train_seconds", &MetricReport::wall_train_seconds}};
  for (const auto& [group, mode] : groups)
    for (const auto& [name, member] : metrics) {
      std::vector<double> values;
      for (const auto& c : cells)
        if (c.ok && c.group == group && c.mode == mode) values.push_back(c.report.*member);
      SummaryRow row{group, mode, name, 0.0, 0.0, static_cast<int>(values.size())};
      if (!values.empty()) {
        row.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
        if (values.size() > 1) {
          double ss = 0.0;
          for (double v : values) ss += (v - row.mean) * (v - row.mean);
          row.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
        }
      }
      rows.push_back(row);
    }
  return rows;
}

namespace {

SuiteCell run_cell(const std::string& group, int run, const ResponseDataset& d, const SplitMask& split,
                   const ExperimentConfig& cfg) {
  SuiteCell cell{group, cfg.mode, run, false, {}, {}};
  try {
    cell.report = train_and_evaluate(d, split, cfg).test;
    cell.ok = true;
  } catch (const Error& e) {
    cell.error = e.what();
  }
  return cell;
}

double mean_seconds(const std::vector<SuiteCell>& cells, const std::string& group, Mode mode) {
  double total = 0.0;
  int n = 0;
  for (const auto& c : cells)
    if (c.ok && c.group == group && c.mode == mode) {
      total += c.report.wall_train_seconds;
      ++n;
    }
  return n > 0 ? total / n : std::nan("");
}

}  // namespace

SynthSuiteResult run_synth_suite(const ExperimentConfig& base, const SynthSuiteOptions& options) {
  if (options.runs < 1) throw ConfigError("suite needs at least one run per size");
  SynthSpec spec;
  if (const auto* s = std::get_if<SynthSpec>(&base.source)) spec = *s;
  spec.Q = options.Q;

  SynthSuiteResult result;
  for (const Eigen::Index n : options.sizes) {
    spec.N = n;
    const ResponseDataset d = to_dataset(generate(spec));
    const std::string group = std::to_string(n) + "x" + std::to_string(options.Q);
    std::map<Mode, ModelHyper> hyper{{Mode::mle, base.hyper}, {Mode::varfa, base.hyper}};
    if (options.grid) {
      const SplitMask first = varfa::split(d, base.train_fraction, base.split_seed);
      for (auto& [mode, h] : hyper) {
        ExperimentConfig probe = base;
        probe.mode = mode;
        h = grid_search(d, first, probe, options.grid_spec).best;
      }
    }
    for (int run = 0; run < options.runs; ++run) {
      const SplitMask split = varfa::split(d, base.train_fraction, base.split_seed + static_cast<std::uint64_t>(run));
      for (const Mode mode : {Mode::mle, Mode::varfa}) {
        ExperimentConfig cfg = base;
        cfg.mode = mode;
        cfg.hyper = hyper.at(mode);
        cfg.split_seed = base.split_seed + static_cast<std::uint64_t>(run);
        result.cells.push_back(run_cell(group, run, d, split, cfg));
      }
    }
    const double mle = mean_seconds(result.cells, group, Mode::mle);
    const double vi = mean_seconds(result.cells, group, Mode::varfa);
    result.runtime.push_back({group, mle, vi, vi / mle});
  }
  result.summary = summarize(result.cells);
  return result;
}

GridResult grid_search(const ResponseDataset& d, const SplitMask& split, const ExperimentConfig& cfg,
                       const GridSpec& grid) {
  if (grid.l1_M.empty() || grid.l2_mu.empty() || (cfg.mode == Mode::mle && grid.l2_C.empty()))
    throw ConfigError("grid-search grids must be nonempty");
  const SplitMask inner = split_subset(split.train, 1.0 - grid.validation_fraction, grid.seed);
  const std::vector<double> c_grid = cfg.mode == Mode::mle ? grid.l2_C : std::vector<double>{cfg.hyper.lambda_l2_C};

  GridResult result;
  for (const double l1 : grid.l1_M)
    for (const double mu : grid.l2_mu)
      for (const double c : c_grid) {
        ExperimentConfig trial = cfg;
        trial.hyper.lambda_l1_M = l1;
        trial.hyper.lambda_l2_mu = mu;
        trial.hyper.lambda_l2_C = c;
        GridRow row{trial.hyper, 0.0, false};
        try {
          row.val_auc = train_and_evaluate(d, inner, trial).test.auc;
          row.ok = true;
        } catch (const Error&) {
        }
        result.rows.push_back(row);
      }

  auto total = [&](const ModelHyper& h) {
    return h.lambda_l1_M + h.lambda_l2_mu + (cfg.mode == Mode::mle ? h.lambda_l2_C : 0.0);
  };
  const GridRow* best = nullptr;
  for (const auto& row : result.rows) {
    if (!row.ok) continue;
    if (!best || row.val_auc > best->val_auc || (row.val_auc == best->val_auc && total(row.hyper) < total(best->hyper)))
      best = &row;
  }
  if (!best) throw NumericError("every grid point failed to train");
  result.best = best->hyper;
  result.best_auc = best->val_auc;
  return result;
}

std::vector<MasteryRow> mastery_rows(const ResponseDataset& d, const SplitMask& split, const Association& assoc,
                                     const Eigen::MatrixXd& abilities) {
  std::vector<MasteryRow> rows;
  for (Eigen::Index i = 0; i < d.num_students(); ++i) {
    const auto tags = answered_tags(d, split, i);
    if (tags.empty()) continue;
    const auto predicted = tag_mastery(assoc, abilities.col(i), tags);
    const auto empirical = empirical_mastery(d, split, i);
    for (std::size_t k = 0; k < tags.size(); ++k)
      rows.push_back({d.students.id(static_cast<std::size_t>(i)), d.tags.id(static_cast<std::size_t>(tags[k])),
                      predicted.score[static_cast<Eigen::Index>(k)], empirical.at(tags[k])});
  }
  return rows;
}

RealSuiteResult run_real_suite(const ExperimentConfig& cfg, const RealSuiteOptions& options) {
  return run_real_suite(load_source(cfg.source), cfg, options);
}

RealSuiteResult run_real_suite(const ResponseDataset& d, const ExperimentConfig& cfg, const RealSuiteOptions& options) {
  if (options.runs < 1) throw ConfigError("suite needs at least one run");
  RealSuiteResult result;
  result.mle_hyper = cfg.hyper;
  result.varfa_hyper = cfg.hyper;
  const std::string group = "real";

  if (options.grid) {
    const SplitMask first = split(d, cfg.train_fraction, cfg.split_seed);
    ExperimentConfig probe = cfg;
    probe.mode = Mode::mle;
    result.mle_hyper = grid_search(d, first, probe, options.grid_spec).best;
    probe.mode = Mode::varfa;
    result.varfa_hyper = grid_search(d, first, probe, options.grid_spec).best;
  }

  for (int run = 0; run < options.runs; ++run) {
    const std::uint64_t split_seed = cfg.split_seed + static_cast<std::uint64_t>(run);
    const SplitMask s = split(d, cfg.train_fraction, split_seed);
    for (const Mode mode : {Mode::mle, Mode::varfa}) {
      ExperimentConfig trial = cfg;
      trial.mode = mode;
      trial.split_seed = split_seed;
      trial.hyper = mode == Mode::mle ? result.mle_hyper : result.varfa_hyper;
      if (mode == Mode::mle || run > 0) {
        result.cells.push_back(run_cell(group, run, d, s, trial));
        continue;
      }

      // First VarFA run: keep the model for the posterior reports.
      SuiteCell cell{group, mode, run, false, {}, {}};
      try {
        const RunOutcome outcome = train_and_evaluate(d, s, trial);
        cell.report = outcome.test;
        cell.ok = true;
        const ViModel model = outcome.checkpoint.vi_model();
        const auto posteriors = infer_all(model, d, s);
        result.uncertainty = uncertainty_report(posteriors, s.train);

        const auto& rows = result.uncertainty->rows;
        const int picks = std::min<int>(options.violin_students, static_cast<int>(rows.size()));
        for (int p = 0; p < picks; ++p) {
          const std::size_t r = picks > 1 ? static_cast<std::size_t>(p) * (rows.size() - 1) / static_cast<std::size_t>(picks - 1) : 0;
          const auto samples = sample_posterior(model, d, s, rows[r].student, options.violin_samples, options.sample_seed);
          const auto v = violin_rows(d.students.id(static_cast<std::size_t>(rows[r].student)), rows[r].n_answered, samples);
          result.violins.insert(result.violins.end(), v.begin(), v.end());
        }

        if (d.has_tags()) {
          result.tags = build_tag_matrix(d);
          result.association = associate_tags(model.M, *result.tags);
          Eigen::MatrixXd abilities(model.M.rows(), d.num_students());
          for (Eigen::Index i = 0; i < d.num_students(); ++i) abilities.col(i) = posteriors[static_cast<std::size_t>(i)].u;
          result.mastery = mastery_rows(d, s, *result.association, abilities);
        } else {
          result.notices.push_back("dataset has no tag column; association and mastery reports skipped");
        }
      } catch (const Error& e) {
        cell.error = e.what();
      }
      result.cells.push_back(cell);
    }
  }
  result.summary = summarize(result.cells);
  return result;
}

void write_cells_csv(std::ostream& out, const std::vector<SuiteCell>& cells) {
  out << "group,method,run,ok,acc,auc,f1,n_test,wall_train_seconds,error\n" << std::setprecision(10);
  for (const auto& c : cells)
    out << csv_field(c.group) << ',' << to_string(c.mode) << ',' << c.run << ',' << (c.ok ? 1 : 0) << ',' << c.report.acc << ','
        << c.report.auc << ',' << c.report.f1 << ',' << c.report.n_test << ',' << c.report.wall_train_seconds << ','
        << csv_field(c.error) << '\n';
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "group,method,metric,mean,sd,n_ok\n" << std::setprecision(10);
  for (const auto& r : rows)
    out << csv_field(r.group) << ',' << to_string(r.mode) << ',' << r.metric << ',' << r.mean << ',' << r.sd << ',' << r.n_ok
        << '\n';
}

void write_runtime_csv(std::ostream& out, const std::vector<RuntimeRatio>& rows) {
  out << "group,mle_seconds,varfa_seconds,ratio\n" << std::setprecision(10);
  for (const auto& r : rows) out << csv_field(r.group) << ',' << r.mle_seconds << ',' << r.varfa_seconds << ',' << r.ratio << '\n';
}

void write_grid_csv(std::ostream& out, const GridResult& result) {
  out << "lambda_l1_m,lambda_l2_mu,lambda_l2_c,val_auc,ok\n" << std::setprecision(10);
  for (const auto& r : result.rows)
    out << r.hyper.lambda_l1_M << ',' << r.hyper.lambda_l2_mu << ',' << r.hyper.lambda_l2_C << ',' << r.val_auc << ','
        << (r.ok ? 1 : 0) << '\n';
}

void write_mastery_csv(std::ostream& out, const std::vector<MasteryRow>& rows) {
  out << "student_id,tag,predicted,empirical\n" << std::setprecision(10);
  for (const auto& r : rows) out << csv_field(r.student_id) << ',' << csv_field(r.tag) << ',' << r.predicted << ',' << r.empirical << '\n';
}

}  // namespace varfa
