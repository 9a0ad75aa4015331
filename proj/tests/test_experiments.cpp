#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "varfa/error.hpp"
#include "varfa/experiments.hpp"

#include <sstream>

using namespace varfa;
using doctest::Approx;
using nlohmann::json;

namespace {

json minimal() { return json{{"data", {{"synth", {{"n", 30}, {"q", 10}}}}}}; }

}  // namespace

TEST_CASE("config defaults and round trip") {
  const auto c = parse_config(minimal());
  CHECK(c.mode == Mode::varfa);
  CHECK(c.hyper.K == 5);
  CHECK(c.train_fraction == 0.5);
  CHECK(std::get<SynthSpec>(c.source).N == 30);
  const auto again = parse_config(to_json(c));
  CHECK(to_json(again) == to_json(c));

  json csv{{"data", {{"csv", {{"path", "x.csv"}}}}}};
  const auto r = parse_config(csv);
  CHECK(r.hyper.K == 8);
  CHECK(r.train_fraction == 0.8);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse_config(json::array()), ConfigError);
  CHECK_THROWS_AS(parse_config(json::object()), ConfigError);
  json two = minimal();
  two["data"]["cache"] = {{"path", "a.bin"}};
  CHECK_THROWS_AS(parse_config(two), ConfigError);
  for (const auto& [section, key, value] : std::vector<std::tuple<std::string, std::string, json>>{
           {"train", "epochs", 0},
           {"train", "lr", -1.0},
           {"train", "kl_weighting", "sometimes"},
           {"train", "input_encoding", "ternary"},
           {"model", "k", 0},
           {"model", "lambda_l1_m", -0.1},
           {"split", "train_fraction", 1.0},
           {"train", "epochs", "many"}}) {
    json j = minimal();
    j[section][key] = value;
    CHECK_THROWS_AS(parse_config(j), ConfigError);
  }
  json m = minimal();
  m["mode"] = "bayes";
  CHECK_THROWS_AS(parse_config(m), ConfigError);
  CHECK_THROWS_AS(load_config(testing::temp_path("absent.json").string()), ConfigError);
}

TEST_CASE("summary mean and sample standard deviation") {
  std::vector<SuiteCell> cells;
  for (double v : {0.6, 0.7, 0.8}) {
    SuiteCell c;
    c.group = "g";
    c.ok = true;
    c.report.auc = v;
    cells.push_back(c);
  }
  SuiteCell failed;
  failed.group = "g";
  failed.report.auc = 100.0;
  cells.push_back(failed);
  const auto rows = summarize(cells);
  REQUIRE(rows.size() == 4);
  const auto& auc = rows[1];
  CHECK(auc.metric == "auc");
  CHECK(auc.mean == Approx(0.7));
  CHECK(auc.sd == Approx(0.1));
  CHECK(auc.n_ok == 3);
}

TEST_CASE("a one-point grid returns that point") {
  ExperimentConfig cfg = parse_config(minimal());
  cfg.epochs = 3;
  const auto d = load_source(cfg.source);
  const auto s = split(d, 0.5, 0);
  GridSpec g;
  g.l1_M = {0.01};
  g.l2_mu = {0.1};
  g.l2_C = {1.0};
  for (Mode mode : {Mode::mle, Mode::varfa}) {
    cfg.mode = mode;
    const auto r = grid_search(d, s, cfg, g);
    REQUIRE(r.rows.size() == 1);
    CHECK(r.best.lambda_l1_M == 0.01);
    CHECK(r.best.lambda_l2_mu == 0.1);
    CHECK(r.rows[0].ok);
  }
  cfg.mode = Mode::mle;
  g.l2_C.clear();
  CHECK_THROWS_AS(grid_search(d, s, cfg, g), ConfigError);
}

TEST_CASE("synthetic suite shape") {
  ExperimentConfig cfg = parse_config(minimal());
  cfg.epochs = 2;
  SynthSuiteOptions o;
  o.sizes = {20, 40};
  o.Q = 10;
  o.runs = 2;
  const auto r = run_synth_suite(cfg, o);
  CHECK(r.cells.size() == 2 * 2 * 2);
  CHECK(r.summary.size() == 2 * 2 * 4);
  CHECK(r.runtime.size() == 2);
  for (const auto& c : r.cells) CHECK(c.ok);
  std::ostringstream out;
  write_summary_csv(out, r.summary);
  CHECK(out.str().find("20x10") != std::string::npos);
}

TEST_CASE("real suite on a small tagged dataset") {
  auto d = testing::random_dataset(40, 12, 0.9, 5);
  d.tags = IdIndex({"a", "b", "c"});
  d.tag_map.assign(12, {});
  for (std::size_t j = 0; j < 12; ++j) d.tag_map[j] = {static_cast<int>(j % 3)};
  ExperimentConfig cfg = parse_config(minimal());
  cfg.epochs = 3;
  cfg.hyper.K = 2;
  RealSuiteOptions o;
  o.runs = 1;
  o.violin_students = 3;
  o.violin_samples = 50;
  const auto r = run_real_suite(d, cfg, o);
  CHECK(r.cells.size() == 2);
  REQUIRE(r.uncertainty.has_value());
  CHECK(r.uncertainty->rows.size() == 40);
  CHECK(r.violins.size() == 3 * 2);
  REQUIRE(r.association.has_value());
  CHECK(r.association->A.rows() == 2);
  CHECK(!r.mastery.empty());
  for (const auto& m : r.mastery) {
    CHECK(m.predicted >= 0.0);
    CHECK(m.predicted <= 1.0);
  }
}
