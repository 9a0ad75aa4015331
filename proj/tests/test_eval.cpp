#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "varfa/eval.hpp"
#include "varfa/rng.hpp"

#include <cmath>
#include <sstream>

using namespace varfa;
using doctest::Approx;

namespace {

double brute_auc(const std::vector<double>& s, const std::vector<double>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t a = 0; a < s.size(); ++a)
    for (std::size_t b = 0; b < s.size(); ++b)
      if (y[a] > 0.5 && y[b] < 0.5) {
        pairs += 1.0;
        wins += s[a] > s[b] ? 1.0 : (s[a] == s[b] ? 0.5 : 0.0);
      }
  return wins / pairs;
}

}  // namespace

TEST_CASE("accuracy, AUC and F1 examples") {
  const std::vector<double> p{0.9, 0.4, 0.6, 0.2}, y{1, 1, 0, 0};
  CHECK(accuracy(p, y) == 0.5);
  CHECK(auc(p, y) == 0.75);
  // tp=1 fp=1 fn=1
  CHECK(f1(p, y) == Approx(0.5));
  CHECK(accuracy(std::vector<double>{0.5}, std::vector<double>{1.0}) == 1.0);
  CHECK(f1(std::vector<double>{0.1, 0.2}, std::vector<double>{1.0, 0.0}) == 0.0);
  CHECK(auc(std::vector<double>{0.3, 0.3}, std::vector<double>{1.0, 0.0}) == 0.5);
  CHECK(auc(std::vector<double>{0.1, 0.9}, std::vector<double>{1.0, 0.0}) == 0.0);
}

TEST_CASE("metric errors") {
  CHECK_THROWS_AS(auc(std::vector<double>{0.1, 0.2}, std::vector<double>{1.0, 1.0}), DataError);
  CHECK_THROWS_AS(accuracy(std::vector<double>{0.1}, std::vector<double>{1.0, 1.0}), DataError);
  CHECK_THROWS_AS(accuracy(std::vector<double>{}, std::vector<double>{}), DataError);
}

TEST_CASE("AUC equals the pairwise count, ties included") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    CounterRng rng(seed);
    std::vector<double> s, y;
    for (int k = 0; k < 60; ++k) {
      s.push_back(std::round(rng.uniform() * 10.0) / 10.0);
      y.push_back(rng.bernoulli(0.4) ? 1.0 : 0.0);
    }
    y[0] = 1.0;
    y[1] = 0.0;
    CHECK(auc(s, y) == brute_auc(s, y));
  }
}

TEST_CASE("AUC is invariant to monotone transforms") {
  CounterRng rng(3);
  std::vector<double> s, t, y;
  for (int k = 0; k < 100; ++k) {
    s.push_back(rng.normal());
    t.push_back(std::exp(3.0 * s.back()) + 1.0);
    y.push_back(k % 3 == 0 ? 1.0 : 0.0);
  }
  CHECK(auc(s, y) == auc(t, y));
}

TEST_CASE("average ranks") {
  const std::vector<double> x{3.0, 1.0, 3.0, 2.0};
  CHECK(average_ranks(x) == std::vector<double>{3.5, 1.0, 3.5, 2.0});
}

TEST_CASE("Spearman examples and flags") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  CHECK(spearman(x, std::vector<double>{5, 4, 3, 2, 1}).value == Approx(-1.0));
  CHECK(spearman(x, std::vector<double>{1, 4, 9, 16, 25}).value == Approx(1.0));
  const auto flat_y = spearman(x, std::vector<double>{2, 2, 2, 2, 2});
  CHECK(flat_y.value == 0.0);
  CHECK(flat_y.flag == CorrelationFlag::constant_y);
  const auto flat_x = spearman(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3});
  CHECK(std::isnan(flat_x.value));
  CHECK(flat_x.flag == CorrelationFlag::constant_x);
  // d = (0,0,1,-1,0): 1 - 6*2/(5*24)
  CHECK(spearman(x, std::vector<double>{1, 2, 4, 3, 5}).value == Approx(0.9));
}

TEST_CASE("uncertainty report sorts by answer count") {
  std::vector<GaussianPosteriord> q(4);
  const double logvars[] = {0.0, -2.0, -1.0, -3.0};
  for (int i = 0; i < 4; ++i) {
    q[static_cast<std::size_t>(i)].u = Eigen::VectorXd::Zero(2);
    q[static_cast<std::size_t>(i)].logvar = Eigen::VectorXd::Constant(2, logvars[i]);
  }
  Mask train = Mask::Constant(4, 5, false);
  train.row(1).head(3).setConstant(true);
  train.row(2).head(2).setConstant(true);
  train.row(3).setConstant(true);
  const auto r = uncertainty_report(q, train);
  CHECK(r.rows[0].student == 0);
  CHECK(r.rows[3].student == 3);
  CHECK(r.rows[3].n_answered == 5);
  CHECK(r.rows[0].mean_std == Approx(1.0));
  CHECK(r.spearman.value == Approx(-1.0));
  CHECK_THROWS_AS(uncertainty_report(std::vector<GaussianPosteriord>(q.begin(), q.begin() + 2), train), DataError);
}

TEST_CASE("quantile interpolation") {
  CHECK(quantile({3.0, 1.0, 2.0}, 0.5) == 2.0);
  CHECK(quantile({1.0, 2.0}, 0.25) == Approx(1.25));
  CHECK(quantile({4.0}, 0.95) == 4.0);
  CHECK(quantile({0.0, 10.0, 5.0}, 0.0) == 0.0);
  CHECK(quantile({0.0, 10.0, 5.0}, 1.0) == 10.0);
  CHECK_THROWS_AS(quantile({}, 0.5), DataError);
}

TEST_CASE("violin rows and writers") {
  PosteriorSamples s;
  s.samples.resize(5, 2);
  s.samples << 1, 10, 2, 20, 3, 30, 4, 40, 5, 50;
  s.mean = s.samples.colwise().mean().transpose();
  s.stddev = Eigen::Vector2d(1.5811388300841898, 15.811388300841896);
  const auto rows = violin_rows("s7", 4, s);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].dim == 1);
  CHECK(rows[1].q50 == 30.0);
  CHECK(rows[0].q25 == 2.0);
  CHECK(rows[0].q95 == Approx(4.8));

  std::ostringstream out;
  write_violin_csv(out, rows);
  CHECK(out.str().rfind("student_id,n_answered,dim,mean,std,q05,q25,q50,q75,q95\ns7,4,0,3,", 0) == 0);

  std::ostringstream m;
  MetricReport r{0.75, 0.5, 0.25, 8, 1.5};
  write_metrics_csv(m, {{"mle", r}});
  CHECK(m.str() == "method,acc,auc,f1,n_test,wall_train_seconds\nmle,0.75,0.5,0.25,8,1.5\n");
  CHECK(to_json(r)["n_test"] == 8);

  TrainTrace t;
  t.epochs.push_back({});
  std::ostringstream tr;
  write_trace_csv(tr, t);
  CHECK(tr.str().rfind("epoch,train_loss,wall_seconds\n", 0) == 0);
}

TEST_CASE("benchmark measures elapsed time") {
  volatile double sink = 0.0;
  const double s = benchmark([&] {
    for (int k = 0; k < 1000000; ++k) sink = sink + std::sqrt(static_cast<double>(k));
  });
  CHECK(s > 0.0);
}
