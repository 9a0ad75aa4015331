// Command-line runner for training, evaluation, posterior reports and the experiment suites.

#include "varfa/checkpoint.hpp"
#include "varfa/config.hpp"
#include "varfa/error.hpp"
#include "varfa/eval.hpp"
#include "varfa/experiments.hpp"
#include "varfa/postprocess.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace varfa;

namespace {

/// Flag overrides layered on top of the JSON config file.
struct Overrides {
  std::string config_path;
  std::optional<std::string> mode, csv, cache, tag_column, output_dir, kl_weighting, encoding;
  std::optional<long long> synth_n, synth_q, synth_k;
  std::optional<double> synth_pi, train_fraction, l1, l2_mu, l2_c, lr;
  std::optional<std::uint64_t> synth_seed, split_seed, seed;
  std::optional<int> k, epochs, batch, mc_samples, hidden, min_student, min_question;
  bool synth = false;

  void attach(CLI::App& app) {
    app.add_option("-c,--config", config_path, "JSON experiment config");
    app.add_option("--mode", mode, "mle or varfa");
    app.add_option("--csv", csv, "CSV response file");
    app.add_option("--tag-column", tag_column, "CSV column holding skill tags");
    app.add_option("--min-student-answers", min_student);
    app.add_option("--min-question-answers", min_question);
    app.add_option("--cache", cache, "dataset cache file");
    app.add_flag("--synth", synth, "use a synthetic dataset");
    app.add_option("--synth-n", synth_n);
    app.add_option("--synth-q", synth_q);
    app.add_option("--synth-k", synth_k);
    app.add_option("--synth-pi", synth_pi);
    app.add_option("--synth-seed", synth_seed);
    app.add_option("--train-fraction", train_fraction);
    app.add_option("--split-seed", split_seed);
    app.add_option("-k,--k", k, "latent skill count");
    app.add_option("--lambda-l1-m", l1);
    app.add_option("--lambda-l2-mu", l2_mu);
    app.add_option("--lambda-l2-c", l2_c);
    app.add_option("--lr", lr);
    app.add_option("--epochs", epochs);
    app.add_option("--batch", batch, "students per mini-batch");
    app.add_option("--seed", seed, "training seed");
    app.add_option("--mc-samples", mc_samples);
    app.add_option("--hidden", hidden, "encoder hidden width");
    app.add_option("--kl-weighting", kl_weighting, "per_entry or per_student");
    app.add_option("--encoding", encoding, "zero_one or signed");
    app.add_option("-o,--out", output_dir, "output directory");
  }

  ExperimentConfig resolve() const {
    json j = json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot open config '" + config_path + "'");
      try {
        j = json::parse(in);
      } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
      }
    }
    auto& data = j["data"];
    if (!data.is_object()) data = json::object();
    if (csv || cache || synth || synth_n || synth_q) data = json::object();
    if (csv) data["csv"]["path"] = *csv;
    if (cache) data["cache"]["path"] = *cache;
    if (synth || synth_n || synth_q || synth_k || synth_pi || synth_seed) {
      auto& s = data["synth"];
      if (!s.is_object()) s = json::object();
      if (synth_n) s["n"] = *synth_n;
      if (synth_q) s["q"] = *synth_q;
      if (synth_k) s["k"] = *synth_k;
      if (synth_pi) s["pi"] = *synth_pi;
      if (synth_seed) s["seed"] = *synth_seed;
    }
    if (data.contains("csv")) {
      if (tag_column) data["csv"]["tag_column"] = *tag_column;
      if (min_student) data["csv"]["min_student_answers"] = *min_student;
      if (min_question) data["csv"]["min_question_answers"] = *min_question;
    }
    if (mode) j["mode"] = *mode;
    if (train_fraction) j["split"]["train_fraction"] = *train_fraction;
    if (split_seed) j["split"]["seed"] = *split_seed;
    if (k) j["model"]["k"] = *k;
    if (l1) j["model"]["lambda_l1_m"] = *l1;
    if (l2_mu) j["model"]["lambda_l2_mu"] = *l2_mu;
    if (l2_c) j["model"]["lambda_l2_c"] = *l2_c;
    if (lr) j["train"]["lr"] = *lr;
    if (epochs) j["train"]["epochs"] = *epochs;
    if (batch) j["train"]["batch_students"] = *batch;
    if (seed) j["train"]["seed"] = *seed;
    if (mc_samples) j["train"]["mc_samples"] = *mc_samples;
    if (hidden) j["train"]["hidden_width"] = *hidden;
    if (kl_weighting) j["train"]["kl_weighting"] = *kl_weighting;
    if (encoding) j["train"]["input_encoding"] = *encoding;
    if (output_dir) j["output_dir"] = *output_dir;
    return parse_config(j);
  }
};

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

fs::path prepare_dir(const ExperimentConfig& cfg) {
  fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  open_out(dir / "config.json") << std::setw(2) << to_json(cfg) << '\n';
  return dir;
}

void write_metrics(const fs::path& dir, Mode mode, const MetricReport& report) {
  write_metrics_csv(open_out(dir / "metrics.csv").seekp(0), {{to_string(mode), report}});
  open_out(dir / "metrics.json") << std::setw(2) << json{{"method", to_string(mode)}, {"test", to_json(report)}} << '\n';
}

// Rebuilds the split a checkpoint was trained on.
SplitMask checkpoint_split(const Checkpoint& ck, const ResponseDataset& d) {
  return split(d, ck.meta.train_fraction, ck.meta.split_seed);
}

Checkpoint load_for(const std::string& path, const ResponseDataset& d) {
  Checkpoint ck = load_checkpoint(path);
  if (!fingerprint_matches(ck, d))
    std::cerr << "warning: dataset fingerprint differs from the checkpoint's; student/question ids may not align\n";
  return ck;
}

int cmd_synth_gen(const Overrides& o, const std::string& cache_out) {
  ExperimentConfig cfg = o.resolve();
  const auto* spec = std::get_if<SynthSpec>(&cfg.source);
  if (!spec) throw ConfigError("synth-gen needs a synthetic data source (--synth / data.synth)");
  const auto instance = generate(*spec);
  save_dataset(to_dataset(instance), cache_out);
  std::cout << "wrote " << spec->N << "x" << spec->Q << " synthetic dataset to " << cache_out << '\n';
  return 0;
}

int cmd_train(const Overrides& o) {
  const ExperimentConfig cfg = o.resolve();
  const ResponseDataset d = load_source(cfg.source);
  const SplitMask s = split(d, cfg.train_fraction, cfg.split_seed);
  const fs::path dir = prepare_dir(cfg);
  const RunOutcome outcome = train_and_evaluate(d, s, cfg);
  save_checkpoint(outcome.checkpoint, (dir / "checkpoint.bin").string());
  write_trace_csv(open_out(dir / "trace.csv").seekp(0), outcome.trace);
  write_metrics(dir, cfg.mode, outcome.test);
  std::cout << to_string(cfg.mode) << ": acc=" << outcome.test.acc << " auc=" << outcome.test.auc
            << " f1=" << outcome.test.f1 << " train_seconds=" << outcome.test.wall_train_seconds << '\n';
  return 0;
}

int cmd_eval(const Overrides& o, const std::string& ck_path) {
  const ExperimentConfig cfg = o.resolve();
  const ResponseDataset d = load_source(cfg.source);
  const Checkpoint ck = load_for(ck_path, d);
  const SplitMask s = checkpoint_split(ck, d);
  const auto report = evaluate(predict_missing(prediction_factors(ck, d, s), d, s.test), ck.meta.wall_seconds);
  const fs::path dir = prepare_dir(cfg);
  write_metrics(dir, ck.mode, report);
  std::cout << to_string(ck.mode) << ": acc=" << report.acc << " auc=" << report.auc << " f1=" << report.f1 << '\n';
  return 0;
}

int cmd_infer(const Overrides& o, const std::string& ck_path) {
  const ExperimentConfig cfg = o.resolve();
  const ResponseDataset d = load_source(cfg.source);
  const Checkpoint ck = load_for(ck_path, d);
  const SplitMask s = checkpoint_split(ck, d);
  const auto posteriors = infer_all(ck.vi_model(), d, s);
  const fs::path dir = prepare_dir(cfg);

  auto out = open_out(dir / "posteriors.csv");
  out << "student_id,n_answered,dim,mean,std\n" << std::setprecision(10);
  for (Eigen::Index i = 0; i < d.num_students(); ++i) {
    const auto& q = posteriors[static_cast<std::size_t>(i)];
    const Eigen::VectorXd sd = q.stddev();
    for (Eigen::Index k = 0; k < q.u.size(); ++k)
      out << csv_field(d.students.id(static_cast<std::size_t>(i))) << ',' << s.train.row(i).count() << ',' << k << ',' << q.u[k]
          << ',' << sd[k] << '\n';
  }
  const auto report = uncertainty_report(posteriors, s.train);
  write_uncertainty_csv(open_out(dir / "uncertainty.csv").seekp(0), report, d);
  json summary{{"spearman_n_answered_vs_std", report.spearman.value},
               {"flag", report.spearman.flag == CorrelationFlag::none        ? "none"
                        : report.spearman.flag == CorrelationFlag::constant_x ? "constant_n_answered"
                                                                              : "constant_std"}};
  open_out(dir / "uncertainty.json") << std::setw(2) << summary << '\n';
  std::cout << "spearman(n_answered, mean_std) = " << report.spearman.value << '\n';
  return 0;
}

int cmd_sample(const Overrides& o, const std::string& ck_path, const std::vector<std::string>& students, int n,
               std::uint64_t sample_seed) {
  const ExperimentConfig cfg = o.resolve();
  const ResponseDataset d = load_source(cfg.source);
  const Checkpoint ck = load_for(ck_path, d);
  const SplitMask s = checkpoint_split(ck, d);
  const ViModel model = ck.vi_model();
  std::vector<ViolinRow> rows;
  for (const auto& id : students) {
    const auto row = d.students.find(id);
    if (!row) throw DataError("unknown student id '" + id + "'");
    const auto i = static_cast<Eigen::Index>(*row);
    const auto samples = sample_posterior(model, d, s, i, n, sample_seed);
    const auto v = violin_rows(id, s.train.row(i).count(), samples);
    rows.insert(rows.end(), v.begin(), v.end());
  }
  const fs::path dir = prepare_dir(cfg);
  write_violin_csv(open_out(dir / "violin.csv").seekp(0), rows);
  std::cout << "wrote " << rows.size() << " violin rows\n";
  return 0;
}

int cmd_associate(const Overrides& o, const std::string& ck_path) {
  const ExperimentConfig cfg = o.resolve();
  const ResponseDataset d = load_source(cfg.source);
  if (!d.has_tags()) {
    std::cerr << "notice: dataset has no tag column; nothing to associate\n";
    return 0;
  }
  const Checkpoint ck = load_for(ck_path, d);
  const SplitMask s = checkpoint_split(ck, d);
  const TagMatrix tags = build_tag_matrix(d);
  const Association assoc = associate_tags(ck.factors.M, tags);
  const FactorSetd f = prediction_factors(ck, d, s);
  const fs::path dir = prepare_dir(cfg);
  write_association_csv(open_out(dir / "association.csv").seekp(0), assoc, tags);
  write_mastery_csv(open_out(dir / "mastery.csv").seekp(0), mastery_rows(d, s, assoc, f.C));
  std::cout << "associated " << assoc.A.rows() << " latent skills with " << assoc.A.cols() << " tags\n";
  return 0;
}

int cmd_suite_synth(const Overrides& o, const SynthSuiteOptions& options) {
  ExperimentConfig cfg = o.resolve();
  const fs::path dir = prepare_dir(cfg);
  const auto result = run_synth_suite(cfg, options);
  write_cells_csv(open_out(dir / "suite_cells.csv").seekp(0), result.cells);
  write_summary_csv(open_out(dir / "suite_summary.csv").seekp(0), result.summary);
  write_runtime_csv(open_out(dir / "runtime.csv").seekp(0), result.runtime);
  write_summary_csv(std::cout, result.summary);
  return 0;
}

int cmd_suite_real(const Overrides& o, const RealSuiteOptions& options) {
  const ExperimentConfig cfg = o.resolve();
  if (const auto* csv = std::get_if<CsvSource>(&cfg.source); csv && !fs::exists(csv->path)) {
    std::cerr << "notice: data file '" << csv->path << "' not found; real-data suite skipped\n";
    return 0;
  }
  const ResponseDataset d = load_source(cfg.source);
  const fs::path dir = prepare_dir(cfg);
  const auto result = run_real_suite(d, cfg, options);
  write_cells_csv(open_out(dir / "suite_cells.csv").seekp(0), result.cells);
  write_summary_csv(open_out(dir / "suite_summary.csv").seekp(0), result.summary);
  if (result.uncertainty) write_uncertainty_csv(open_out(dir / "uncertainty.csv").seekp(0), *result.uncertainty, d);
  if (!result.violins.empty()) write_violin_csv(open_out(dir / "violin.csv").seekp(0), result.violins);
  if (result.association) write_association_csv(open_out(dir / "association.csv").seekp(0), *result.association, *result.tags);
  if (!result.mastery.empty()) write_mastery_csv(open_out(dir / "mastery.csv").seekp(0), result.mastery);
  for (const auto& notice : result.notices) std::cerr << "notice: " << notice << '\n';
  write_summary_csv(std::cout, result.summary);
  return 0;
}

int cmd_grid(const Overrides& o, const GridSpec& grid) {
  const ExperimentConfig cfg = o.resolve();
  const ResponseDataset d = load_source(cfg.source);
  const SplitMask s = split(d, cfg.train_fraction, cfg.split_seed);
  const auto result = grid_search(d, s, cfg, grid);
  const fs::path dir = prepare_dir(cfg);
  write_grid_csv(open_out(dir / "grid.csv").seekp(0), result);
  json best{{"lambda_l1_m", result.best.lambda_l1_M},
            {"lambda_l2_mu", result.best.lambda_l2_mu},
            {"lambda_l2_c", result.best.lambda_l2_C},
            {"val_auc", result.best_auc}};
  open_out(dir / "grid_best.json") << std::setw(2) << best << '\n';
  std::cout << "best: " << best.dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse factor analysis of student responses: SPARFA-M (mle) and VarFA (varfa) trainers"};
  app.require_subcommand(1);

  Overrides o_synth, o_train, o_eval, o_infer, o_sample, o_assoc, o_suite_synth, o_suite_real, o_grid;
  std::string cache_out, checkpoint;
  std::vector<std::string> students;
  int n_samples = 1000;
  std::uint64_t sample_seed = 0;
  SynthSuiteOptions synth_options;
  RealSuiteOptions real_options;
  GridSpec grid;

  auto* synth_gen = app.add_subcommand("synth-gen", "generate a synthetic dataset cache");
  o_synth.attach(*synth_gen);
  synth_gen->add_option("--cache-out", cache_out, "output dataset cache")->required();

  auto* train = app.add_subcommand("train", "train one model and score the test split");
  o_train.attach(*train);

  auto* eval = app.add_subcommand("eval", "score a checkpoint on its test split");
  o_eval.attach(*eval);
  eval->add_option("--checkpoint", checkpoint)->required();

  auto* infer = app.add_subcommand("infer", "posterior means and standard deviations (varfa)");
  o_infer.attach(*infer);
  infer->add_option("--checkpoint", checkpoint)->required();

  auto* sample = app.add_subcommand("sample", "posterior samples summarized for violin plots (varfa)");
  o_sample.attach(*sample);
  sample->add_option("--checkpoint", checkpoint)->required();
  sample->add_option("--student", students, "student id (repeatable)")->required();
  sample->add_option("-n,--samples", n_samples);
  sample->add_option("--sample-seed", sample_seed);

  auto* associate = app.add_subcommand("associate", "associate latent skills with tags; per-tag mastery");
  o_assoc.attach(*associate);
  associate->add_option("--checkpoint", checkpoint)->required();

  auto* suite_synth = app.add_subcommand("suite-synth", "synthetic suite: sizes x runs x {mle, varfa}");
  o_suite_synth.attach(*suite_synth);
  suite_synth->add_option("--sizes", synth_options.sizes, "student counts");
  suite_synth->add_option("--questions", synth_options.Q);
  suite_synth->add_option("--runs", synth_options.runs);
  suite_synth->add_flag("--grid", synth_options.grid, "grid-search the regularization weights per size");

  auto* suite_real = app.add_subcommand("suite-real", "real-data suite with posterior and tag reports");
  o_suite_real.attach(*suite_real);
  suite_real->add_option("--runs", real_options.runs);
  suite_real->add_flag("--grid", real_options.grid, "grid-search the regularization weights first");
  suite_real->add_option("--violin-students", real_options.violin_students);
  suite_real->add_option("--violin-samples", real_options.violin_samples);

  auto* grid_cmd = app.add_subcommand("grid-search", "grid search over regularization weights");
  o_grid.attach(*grid_cmd);
  grid_cmd->add_option("--grid-l1-m", grid.l1_M);
  grid_cmd->add_option("--grid-l2-mu", grid.l2_mu);
  grid_cmd->add_option("--grid-l2-c", grid.l2_C);
  grid_cmd->add_option("--validation-fraction", grid.validation_fraction);
  grid_cmd->add_option("--grid-seed", grid.seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth_gen) return cmd_synth_gen(o_synth, cache_out);
    if (*train) return cmd_train(o_train);
    if (*eval) return cmd_eval(o_eval, checkpoint);
    if (*infer) return cmd_infer(o_infer, checkpoint);
    if (*sample) return cmd_sample(o_sample, checkpoint, students, n_samples, sample_seed);
    if (*associate) return cmd_associate(o_assoc, checkpoint);
    if (*suite_synth) return cmd_suite_synth(o_suite_synth, synth_options);
    if (*suite_real) return cmd_suite_real(o_suite_real, real_options);
    if (*grid_cmd) return cmd_grid(o_grid, grid);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
